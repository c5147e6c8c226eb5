"""Command-line entry point: wires configs to experiments, persists CSV outputs.

Subcommands: bessel-check, kernel-check, scatter, dw-scatter, nlkg, growth,
print-defaults.  Every run writes UTF-8 CSVs with a header row (curve files
carry a fit footer row) plus a manifest recording the config hash, package
version, and wall time.  Exit codes: 0 ok, 2 invalid config, 3 horizon
violation, 4 numerical divergence.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import json
import math
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .bessel import bessel_eval, wronskian_defect
from .errors import ConfigError, DivergenceError, HorizonError
from .fields import FieldState, GridSpec, check_horizon, linear_evolve, liouville, norms, save_field
from .kernels import kernel_bound_report, mode_kernel
from .nlkg import nlkg_evolve, nonlinear_scatter, picard_iterate
from .params import derive_coefficients
from .presets import make_preset
from .scattering import growth_experiment, linear_scatter_experiment

DEFAULTS: dict[str, dict[str, str]] = {
    "common": {
        "output_dir": "out",
        "seed": "0",
        "workers": "0",  # 0 = library default threading; kept for reproducibility notes
    },
    "bessel-check": {
        "orders": "0, 0.25, 0.5, 0.5j, 0.4330127018922193j",
        "tau_min": "1e-2",
        "tau_max": "100",
        "tau_count": "60",
    },
    "kernel-check": {
        "mu_values": "0, 0.1, 0.1875, 0.25, 0.5",
        "xi_values": "0.1, 1, 10",
        "t_values": "1, 10, 100",
        "t0_values": "0, 1",
    },
    "scatter": {
        "mu1": "0",
        "mu2": "0.1875",
        "grid_d": "1",
        "grid_n": "16384",
        "half_width": "1024",
        "preset": "gaussian",
        "width": "2",
        "velocity_factor": "0",
        "t_max": "800",
        "samples": "25",
        "window_lo": "50",
        "window_hi": "800",
        "strategy": "bessel",
        "require_horizon": "true",
        "snapshot": "false",
    },
    "dw-scatter": {
        "mu1": "1",
        "mu2": "0",
        "grid_d": "1",
        "grid_n": "4096",
        "half_width": "4096",
        "preset": "gaussian",
        "width": "800",
        "velocity_factor": "-1",  # u1 = factor * u0
        "t_max": "800",
        "samples": "25",
        "window_lo": "50",
        "window_hi": "800",
        "strategy": "bessel",
        "require_horizon": "true",
        "snapshot": "false",
    },
    "growth": {
        "mu1": "0",
        "mu2": "0.1875",
        "grid_d": "1",
        "grid_n": "512",
        "half_width": "65536",
        "preset": "gaussian",
        "width": "15000",
        "branch_matched": "true",
        "t_min": "100",
        "t_max": "1000",
        "samples": "15",
        "strategy": "bessel",
    },
    "nlkg": {
        "mu1": "1",
        "mu2": "0",
        "lambda_sign": "-1",
        "grid_n": "32",
        "half_width": "16",
        "width": "2",
        "epsilon": "1e-3",
        "t_max": "8",
        "dt": "0.25",
        "padding": "none",
        "picard_iters": "4",
        "output_prefix": "nlkg",
        "fit_window_lo": "0",
        "fit_window_hi": "0",  # 0 = automatic
    },
}

_EXIT_OK = 0
_EXIT_CONFIG = 2
_EXIT_HORIZON = 3
_EXIT_DIVERGED = 4


def _parse_bool(text: str) -> bool:
    return text.strip().lower() in ("1", "true", "yes", "on")


def _parse_list(text: str) -> list[float]:
    return [float(x) for x in text.replace(";", ",").split(",") if x.strip()]


def _parse_complex_list(text: str) -> list[complex]:
    return [complex(x.strip()) for x in text.split(",") if x.strip()]


def load_config(experiment: str, config_path: str | None,
                overrides: dict[str, str]) -> dict[str, str]:
    """Defaults, then config-file section, then command-line overrides."""
    if experiment not in DEFAULTS:
        raise ConfigError(f"unknown experiment {experiment!r}")
    merged = dict(DEFAULTS["common"])
    merged.update(DEFAULTS[experiment])
    if config_path:
        parser = configparser.ConfigParser()
        read = parser.read(config_path)
        if not read:
            raise ConfigError(f"config file {config_path} not found or unreadable")
        for section in ("common", experiment):
            if parser.has_section(section):
                merged.update({k: v for k, v in parser.items(section)})
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return merged


def config_hash(experiment: str, cfg: dict[str, str]) -> str:
    canon = json.dumps({"experiment": experiment, **dict(sorted(cfg.items()))},
                       sort_keys=True)
    return hashlib.sha256(canon.encode()).hexdigest()[:16]


def _fmt(x) -> str:
    if isinstance(x, float):
        if math.isnan(x):
            return "nan"
        return format(x, ".17g")
    return str(x)


def write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def write_manifest(out_dir: Path, experiment: str, cfg: dict[str, str],
                   wall: float, notes: dict | None = None) -> None:
    manifest = {
        "experiment": experiment,
        "config": dict(sorted(cfg.items())),
        "config_hash": config_hash(experiment, cfg),
        "package_version": __version__,
        "wall_time_s": round(wall, 3),
    }
    if notes:
        manifest.update(notes)
    with open(out_dir / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=float)
        fh.write("\n")


# ---------------------------------------------------------------------------
# experiment runners
# ---------------------------------------------------------------------------

def _run_bessel_check(cfg: dict[str, str], out_dir: Path) -> dict:
    orders = _parse_complex_list(cfg["orders"])
    taus = np.geomspace(float(cfg["tau_min"]), float(cfg["tau_max"]), int(cfg["tau_count"]))
    rows = []
    worst = 0.0
    for nu in orders:
        for tau in taus:
            ev = bessel_eval(nu, float(tau))
            defect = wronskian_defect(nu, float(tau))
            worst = max(worst, defect)
            rows.append([nu.real, nu.imag, float(tau), ev.J.real, ev.J.imag,
                         ev.Y.real, ev.Y.imag, defect])
    write_csv(out_dir / "bessel_check.csv",
              ["nu_re", "nu_im", "tau", "J_re", "J_im", "Y_re", "Y_im", "wronskian_defect"],
              rows)
    return {"max_wronskian_defect": worst}


def _run_kernel_check(cfg: dict[str, str], out_dir: Path) -> dict:
    mus = _parse_list(cfg["mu_values"])
    xis = _parse_list(cfg["xi_values"])
    ts = _parse_list(cfg["t_values"])
    t0s = _parse_list(cfg["t0_values"])
    rows = []
    worst = 0.0
    for mu in mus:
        c = derive_coefficients(0.0, mu, 3)
        grid = [(t, t0, xi) for t in ts for t0 in t0s if t >= t0 for xi in xis]
        report = kernel_bound_report(c, grid)
        for (t, t0, xi) in grid:
            kb = mode_kernel(c, t, t0, xi)
            ko = mode_kernel(c, t, t0, xi, strategy="ode_oracle")
            scale = max(1.0, abs(ko.E0), abs(ko.E1), abs(ko.E0_dot), abs(ko.E1_dot))
            diff = max(abs(kb.E0 - ko.E0), abs(kb.E1 - ko.E1),
                       abs(kb.E0_dot - ko.E0_dot), abs(kb.E1_dot - ko.E1_dot)) / scale
            worst = max(worst, diff)
            rows.append([mu, t, t0, xi, kb.E0, kb.E1, kb.E0_dot, kb.E1_dot,
                         diff, report.worst()])
    write_csv(out_dir / "kernel_check.csv",
              ["mu", "t", "t0", "xi", "E0", "E1", "E0dot", "E1dot",
               "oracle_diff", "bound_ratio_max"],
              rows)
    return {"max_oracle_diff": worst}


def _scatter_data(cfg: dict[str, str], grid: GridSpec, to_kg: bool, mu1: float) -> FieldState:
    data = make_preset(cfg["preset"], grid, width=float(cfg["width"]))
    vf = float(cfg["velocity_factor"])
    if vf != 0.0:
        data = FieldState(grid=grid, v=data.v, vt=vf * data.v, t=0.0)
    if to_kg:
        data = liouville(data, mu1, "to_kg")
    return data


def _run_scatter(cfg: dict[str, str], out_dir: Path, dw: bool) -> dict:
    mu1, mu2 = float(cfg["mu1"]), float(cfg["mu2"])
    c = derive_coefficients(mu1, mu2, int(cfg["grid_d"]))
    grid = GridSpec(d=int(cfg["grid_d"]), n=int(cfg["grid_n"]),
                    half_width=float(cfg["half_width"]))
    data = _scatter_data(cfg, grid, to_kg=dw, mu1=mu1)
    t_max = float(cfg["t_max"])
    notes: dict = {}
    if _parse_bool(cfg["require_horizon"]):
        check_horizon(data, t_max)
    else:
        try:
            check_horizon(data, t_max)
        except HorizonError as exc:
            notes["support_condition_violation"] = str(exc)
            print(f"warning: {exc}", file=sys.stderr)
    res = linear_scatter_experiment(
        c, grid, data, t_max=t_max, n_samples=int(cfg["samples"]),
        window=(float(cfg["window_lo"]), float(cfg["window_hi"])),
        strategy=cfg["strategy"], dw=dw)
    rows = [[t, ep, eh, ev, "", ""]
            for t, ep, eh, ev in zip(res.curve.times, res.curve.err_pair,
                                     res.curve.err_pos, res.curve.err_vel)]
    fitted = "exact" if res.fit.exact else _fmt(res.fit.exponent)
    rows.append(["fit", "", "", "", _fmt(res.fit.prediction), fitted])
    if res.fit.log_model or (not math.isnan(res.fit.log_residual)):
        rows.append(["fit_log", "", "", "", _fmt(res.fit.log_residual),
                     _fmt(res.fit.residual)])
    name = "dw_scatter.csv" if dw else "scatter.csv"
    write_csv(out_dir / name,
              ["t", "err_pair", "err_pos", "err_vel", "predicted_rate", "fitted_rate"],
              rows)
    if _parse_bool(cfg.get("snapshot", "false")):
        save_field(out_dir / "final_state.bin",
                   linear_evolve(c, data, t_max, strategy=cfg["strategy"]))
    notes["fitted_rate"] = None if res.fit.exact else res.fit.exponent
    notes["predicted_rate"] = res.fit.prediction
    return notes


def _run_growth(cfg: dict[str, str], out_dir: Path) -> dict:
    mu1, mu2 = float(cfg["mu1"]), float(cfg["mu2"])
    c = derive_coefficients(mu1, mu2, int(cfg["grid_d"]))
    grid = GridSpec(d=int(cfg["grid_d"]), n=int(cfg["grid_n"]),
                    half_width=float(cfg["half_width"]))
    data = make_preset(cfg["preset"], grid, width=float(cfg["width"]))
    if _parse_bool(cfg["branch_matched"]) and c.nu.imag == 0.0:
        data = FieldState(grid=grid, v=data.v, vt=(0.5 + c.re_nu) * data.v, t=0.0)
    res = growth_experiment(c, grid, data, t_min=float(cfg["t_min"]),
                            t_max=float(cfg["t_max"]), n_samples=int(cfg["samples"]),
                            strategy=cfg["strategy"])
    rows = [[t, l2, h, p, "", ""]
            for t, l2, h, p in zip(res.times, res.l2, res.hdot1, res.energy_pair)]
    rows.append(["fit", "", "", "", _fmt(res.prediction), _fmt(res.slope)])
    write_csv(out_dir / "growth.csv",
              ["t", "l2", "hdot1", "energy_pair", "predicted_rate", "fitted_rate"],
              rows)
    return {"fitted_rate": res.slope, "predicted_rate": res.prediction}


def _run_nlkg(cfg: dict[str, str], out_dir: Path) -> dict:
    mu1, mu2 = float(cfg["mu1"]), float(cfg["mu2"])
    lam = int(cfg["lambda_sign"])
    c = derive_coefficients(mu1, mu2, 3, lambda_sign=lam)
    grid = GridSpec(d=3, n=int(cfg["grid_n"]), half_width=float(cfg["half_width"]))
    base = make_preset("gaussian", grid, width=float(cfg["width"]))
    eps = float(cfg["epsilon"])
    data = FieldState(grid=grid, v=eps * base.v, vt=0.0 * base.vt, t=0.0)
    t_max = float(cfg["t_max"])
    prefix = cfg["output_prefix"]

    pic = picard_iterate(c, data, min(t_max, 8.0), n_iter=int(cfg["picard_iters"]),
                         dt_sample=float(cfg["dt"]))
    rows = []
    for i, d in enumerate(pic.increments):
        ratio = "" if i == 0 else _fmt(pic.increments[i] / pic.increments[i - 1]
                                       if pic.increments[i - 1] > 0 else 0.0)
        rows.append([i + 1, d, ratio])
    rows.append(["residual", pic.residual, ""])
    write_csv(out_dir / f"{prefix}_picard.csv", ["iteration", "increment", "ratio"], rows)

    run = nlkg_evolve(c, data, t_max, dt=float(cfg["dt"]), padding=cfg["padding"])
    rows = []
    for t, s in zip(run.times, run.states):
        rep = norms(s)
        rows.append([t, rep.l2, rep.hdot1, rep.energy_pair])
    write_csv(out_dir / f"{prefix}_norms.csv", ["t", "l2", "hdot1", "energy_pair"], rows)

    notes: dict = {"picard_increments": pic.increments, "picard_residual": pic.residual}
    if c.mu1 > 0:
        lo, hi = float(cfg["fit_window_lo"]), float(cfg["fit_window_hi"])
        window = (lo, hi) if hi > lo > 0 else None
        try:
            sc = nonlinear_scatter(run, window=window)
        except ValueError as exc:
            notes["scatter_skipped"] = str(exc)
            return notes
        rows = [[t, ep, eh, ev, o, "", ""]
                for t, ep, eh, ev, o in zip(sc.curve.times, sc.curve.err_pair,
                                            sc.curve.err_pos, sc.curve.err_vel,
                                            sc.o_t_proxy)]
        rows.append(["fit", "", "", "", "", _fmt(sc.fit.prediction),
                     "exact" if sc.fit.exact else _fmt(sc.fit.exponent)])
        write_csv(out_dir / f"{prefix}_scatter.csv",
                  ["t", "err_pair", "err_pos", "err_vel", "o_t", "predicted_rate",
                   "fitted_rate"], rows)
        notes["fitted_rate"] = sc.fit.exponent
        notes["normalized_exponent"] = sc.normalized_exponent
    return notes


def print_defaults() -> None:
    parser = configparser.ConfigParser()
    for section, values in DEFAULTS.items():
        parser.add_section(section)
        for k, v in values.items():
            parser.set(section, k, v)
    parser.write(sys.stdout)


# ---------------------------------------------------------------------------
# argument parsing and dispatch
# ---------------------------------------------------------------------------

_RUNNERS = {
    "bessel-check": _run_bessel_check,
    "kernel-check": _run_kernel_check,
    "scatter": lambda cfg, out: _run_scatter(cfg, out, dw=False),
    "dw-scatter": lambda cfg, out: _run_scatter(cfg, out, dw=True),
    "growth": _run_growth,
    "nlkg": _run_nlkg,
}


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="dampedwave",
        description="Numerical experiments for the scale-invariant damped wave equation")
    sub = parser.add_subparsers(dest="experiment")
    option_keys = sorted({k for d in DEFAULTS.values() for k in d})
    for name in list(_RUNNERS) + ["print-defaults"]:
        p = sub.add_parser(name)
        if name == "print-defaults":
            continue
        p.add_argument("--config", default=None, help="INI config file")
        for key in option_keys:
            p.add_argument(f"--{key.replace('_', '-')}", dest=key, default=None)
    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args, unknown = parser.parse_known_args(argv)
    if unknown:
        print(f"error=config reason=unknown arguments {unknown}", file=sys.stderr)
        return _EXIT_CONFIG
    if args.experiment is None:
        parser.print_usage(sys.stderr)
        print("error=config reason=missing experiment name", file=sys.stderr)
        return _EXIT_CONFIG
    if args.experiment == "print-defaults":
        print_defaults()
        return _EXIT_OK
    overrides = {k: v for k, v in vars(args).items()
                 if k not in ("experiment", "config") and v is not None}
    started = time.perf_counter()
    try:
        cfg = load_config(args.experiment, args.config, overrides)
        out_dir = Path(cfg["output_dir"])
        out_dir.mkdir(parents=True, exist_ok=True)
        notes = _RUNNERS[args.experiment](cfg, out_dir)
        write_manifest(out_dir, args.experiment, cfg, time.perf_counter() - started, notes)
    except ConfigError as exc:
        print(f"error=config reason={exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except (ValueError, KeyError) as exc:
        print(f"error=config reason={exc}", file=sys.stderr)
        return _EXIT_CONFIG
    except HorizonError as exc:
        print(f"error=horizon reason={exc}", file=sys.stderr)
        return _EXIT_HORIZON
    except DivergenceError as exc:
        print(f"error=divergence reason={exc}", file=sys.stderr)
        return _EXIT_DIVERGED
    return _EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
