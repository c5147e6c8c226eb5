import configparser
import json

import pytest

from dampedwave.cli import DEFAULTS, build_parser, config_hash, load_config, main


def run_cli(args):
    return main(args)


def test_print_defaults_parses_as_ini(capsys):
    assert run_cli(["print-defaults"]) == 0
    out = capsys.readouterr().out
    parser = configparser.ConfigParser()
    parser.read_string(out)
    assert set(parser.sections()) >= {"common", "scatter", "nlkg", "growth"}


def test_unknown_experiment_exits_2():
    with pytest.raises(SystemExit) as exc:
        run_cli(["not-an-experiment"])
    assert exc.value.code == 2


def test_missing_experiment_exits_2():
    assert run_cli([]) == 2


def test_bessel_check_outputs(tmp_path):
    out = tmp_path / "b"
    rc = run_cli(["bessel-check", "--output-dir", str(out), "--tau-count", "10"])
    assert rc == 0
    lines = (out / "bessel_check.csv").read_text().splitlines()
    assert lines[0] == "nu_re,nu_im,tau,J_re,J_im,Y_re,Y_im,wronskian_defect"
    defects = [float(row.split(",")[-1]) for row in lines[1:]]
    assert max(defects) < 1e-9
    manifest = json.loads((out / "manifest.json").read_text())
    assert manifest["experiment"] == "bessel-check"
    assert len(manifest["config_hash"]) == 16


def test_kernel_check_oracle_column(tmp_path):
    out = tmp_path / "k"
    rc = run_cli(["kernel-check", "--output-dir", str(out),
                  "--mu-values", "0, 0.1875", "--xi-values", "1",
                  "--t-values", "1, 10", "--t0-values", "0"])
    assert rc == 0
    lines = (out / "kernel_check.csv").read_text().splitlines()
    head = lines[0].split(",")
    idx = head.index("oracle_diff")
    diffs = [float(row.split(",")[idx]) for row in lines[1:]]
    assert max(diffs) < 1e-7


def test_scatter_mu_zero_sentinel(tmp_path):
    out = tmp_path / "s"
    rc = run_cli(["scatter", "--output-dir", str(out), "--mu1", "2", "--mu2", "0",
                  "--grid-n", "1024", "--half-width", "1024",
                  "--t-max", "600", "--window-lo", "40", "--window-hi", "600", "--samples", "12"])
    assert rc == 0
    text = (out / "scatter.csv").read_text()
    assert "exact" in text


def test_scatter_byte_reproducible(tmp_path):
    args = ["scatter", "--grid-n", "1024", "--half-width", "1024",
            "--t-max", "600", "--window-lo", "40", "--window-hi", "600", "--samples", "10"]
    out1, out2 = tmp_path / "r1", tmp_path / "r2"
    assert run_cli(args + ["--output-dir", str(out1)]) == 0
    assert run_cli(args + ["--output-dir", str(out2)]) == 0
    assert (out1 / "scatter.csv").read_bytes() == (out2 / "scatter.csv").read_bytes()


def test_horizon_violation_exit_3(tmp_path):
    rc = run_cli(["scatter", "--output-dir", str(tmp_path / "h"),
                  "--grid-n", "1024", "--half-width", "64", "--t-max", "600",
                  "--window-hi", "600"])
    assert rc == 3


def test_divergence_exit_4(tmp_path):
    rc = run_cli(["nlkg", "--output-dir", str(tmp_path / "d"), "--grid-n", "16",
                  "--half-width", "8", "--epsilon", "30", "--lambda-sign", "1",
                  "--mu1", "0.1", "--mu2", "0.2", "--t-max", "8"])
    assert rc == 4


def test_config_file_and_override_precedence(tmp_path):
    cfg = tmp_path / "run.ini"
    cfg.write_text("[scatter]\nsamples = 7\nt_max = 300\n[common]\nseed = 5\n")
    merged = load_config("scatter", str(cfg), {"t_max": "400"})
    assert merged["samples"] == "7"      # config file beats defaults
    assert merged["t_max"] == "400"      # flag beats config file
    assert merged["seed"] == "5"
    assert merged["preset"] == DEFAULTS["scatter"]["preset"]


def test_config_hash_stable_and_sensitive():
    cfg = dict(DEFAULTS["scatter"])
    h1 = config_hash("scatter", cfg)
    assert h1 == config_hash("scatter", dict(cfg))
    cfg["t_max"] = "801"
    assert config_hash("scatter", cfg) != h1


def test_growth_cli(tmp_path):
    out = tmp_path / "g"
    rc = run_cli(["growth", "--output-dir", str(out), "--grid-n", "256",
                  "--samples", "8"])
    assert rc == 0
    lines = (out / "growth.csv").read_text().splitlines()
    assert lines[0].startswith("t,l2,hdot1,energy_pair")
    assert lines[-1].startswith("fit,")


def test_nlkg_cli_outputs(tmp_path):
    out = tmp_path / "n"
    rc = run_cli(["nlkg", "--output-dir", str(out), "--grid-n", "16",
                  "--half-width", "8", "--t-max", "30", "--dt", "0.5",
                  "--picard-iters", "2"])
    assert rc == 0
    assert (out / "nlkg_picard.csv").exists()
    assert (out / "nlkg_norms.csv").exists()
    assert (out / "nlkg_scatter.csv").exists()
    pic = (out / "nlkg_picard.csv").read_text().splitlines()
    assert pic[0] == "iteration,increment,ratio"
    assert pic[-1].startswith("residual,")


def test_parser_covers_all_default_keys():
    parser = build_parser()
    args = parser.parse_args(["scatter", "--preset", "bump", "--width", "3"])
    assert args.preset == "bump" and args.width == "3"
