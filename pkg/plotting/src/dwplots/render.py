"""Render decay, growth, Picard, and kernel-bound figures from experiment CSVs.

The CSV layout is the dampedwave CLI's: a header row, numeric data rows, and
optional footer rows whose first column is a tag ("fit", "fit_log",
"residual").  Reference exponents come from the "fit" footer; the figures
never recompute theory.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("decay", "growth", "picard", "kernel-bounds")

_FOOTER_TAGS = {"fit", "fit_log", "residual"}


@dataclass(frozen=True)
class PlotSpec:
    input_path: str
    kind: str
    output_path: str

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}, got {self.kind!r}")


@dataclass
class CsvTable:
    header: list[str]
    rows: np.ndarray            # numeric data rows
    footers: dict[str, list[str]]

    def column(self, name: str) -> np.ndarray:
        if name not in self.header:
            raise ValueError(f"column {name!r} missing; file has {self.header}")
        return self.rows[:, self.header.index(name)]


def read_table(path: str) -> CsvTable:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ValueError(f"{path}: empty file") from None
        data: list[list[float]] = []
        footers: dict[str, list[str]] = {}
        for row in reader:
            if not row:
                continue
            if row[0] in _FOOTER_TAGS:
                footers[row[0]] = row[1:]
                continue
            data.append([float(x) if x else math.nan for x in row])
    if len(data) < 2:
        raise ValueError(f"{path}: need at least 2 data rows, got {len(data)}")
    return CsvTable(header=header, rows=np.array(data), footers=footers)


def _fit_footer(table: CsvTable) -> tuple[float | None, float | None]:
    """(predicted_rate, fitted_rate) from the fit footer; None when absent/exact."""
    row = table.footers.get("fit")
    if row is None:
        return None, None
    try:
        predicted = float(row[-2]) if row[-2] else None
    except ValueError:
        predicted = None
    try:
        fitted = float(row[-1]) if row[-1] else None
    except ValueError:
        fitted = None  # the "exact" sentinel
    return predicted, fitted


def _anchor(t: np.ndarray, y: np.ndarray, slope: float) -> np.ndarray:
    """Power-law reference through the first sample."""
    return y[0] * ((1.0 + t) / (1.0 + t[0])) ** slope


def _render_decay(table: CsvTable, ax) -> None:
    t = table.column("t")
    err = table.column("err_pair")
    ax.loglog(1.0 + t, err, "o-", ms=3.5, lw=1.0, label="measured error")
    for extra in ("err_pos", "err_vel"):
        if extra in table.header:
            ax.loglog(1.0 + t, table.column(extra), lw=0.7, alpha=0.5, label=extra)
    predicted, fitted = _fit_footer(table)
    if predicted is not None:
        ax.loglog(1.0 + t, _anchor(t, err, predicted), "k--", lw=1.2,
                  label=f"predicted slope {predicted:g}")
    if fitted is not None:
        ax.loglog(1.0 + t, _anchor(t, err, fitted), "r:", lw=1.2,
                  label=f"fitted slope {fitted:.3g}")
    if "fit_log" in table.footers:
        shape = (1.0 + t) ** -0.5 * (1.0 + np.log(1.0 + t))
        ax.loglog(1.0 + t, err[0] * shape / shape[0], "g-.", lw=1.2,
                  label="log-corrected model")
    ax.set_xlabel("1 + t")
    ax.set_ylabel("scattering error")
    ax.legend(fontsize=7)


def _render_growth(table: CsvTable, ax) -> None:
    t = table.column("t")
    l2 = table.column("l2")
    ax.loglog(1.0 + t, l2, "o-", ms=3.5, lw=1.0, label="L2 norm")
    predicted, fitted = _fit_footer(table)
    if predicted is not None:
        ax.loglog(1.0 + t, _anchor(t, l2, predicted), "k--", lw=1.2,
                  label=f"predicted slope {predicted:g}")
    if fitted is not None:
        ax.loglog(1.0 + t, _anchor(t, l2, fitted), "r:", lw=1.2,
                  label=f"fitted slope {fitted:.3g}")
    ax.set_xlabel("1 + t")
    ax.set_ylabel("norm")
    ax.legend(fontsize=7)


def _render_picard(table: CsvTable, ax) -> None:
    it = table.column("iteration")
    inc = table.column("increment")
    positive = inc > 0
    ax.semilogy(it[positive], inc[positive], "o-", label="iterate distance")
    guide = inc[0] * 0.5 ** (it - it[0])
    ax.semilogy(it, guide, "k--", lw=1.0, label="ratio 1/2 guide")
    ax.set_xlabel("iteration")
    ax.set_ylabel("X-norm increment")
    ax.legend(fontsize=7)


def _render_kernel_bounds(table: CsvTable, ax) -> None:
    xi = table.column("xi")
    diff = table.column("oracle_diff")
    ratio = table.column("bound_ratio_max")
    mu = table.column("mu")
    for m in np.unique(mu):
        sel = mu == m
        ax.loglog(xi[sel], np.maximum(diff[sel], 1e-18), "o", ms=4,
                  label=f"oracle diff, mu={m:g}")
    ax.axhline(1e-7, color="k", ls="--", lw=1.0, label="oracle tolerance")
    ax.loglog(xi, ratio, "x", ms=4, color="gray", label="max bound ratio")
    ax.axhline(10.0, color="gray", ls=":", lw=1.0, label="ratio guide 10")
    ax.set_xlabel("|xi|")
    ax.set_ylabel("diagnostic")
    ax.legend(fontsize=6)


_RENDERERS = {
    "decay": _render_decay,
    "growth": _render_growth,
    "picard": _render_picard,
    "kernel-bounds": _render_kernel_bounds,
}


def render(spec: PlotSpec) -> str:
    """Render the figure and return the output path.

    Output is deterministic for identical inputs: fixed figure geometry and
    stripped PNG metadata.
    """
    table = read_table(spec.input_path)
    fig, ax = plt.subplots(figsize=(6.0, 4.0), dpi=120)
    try:
        _RENDERERS[spec.kind](table, ax)
        ax.set_title(Path(spec.input_path).name)
        fig.tight_layout()
        fig.savefig(spec.output_path, metadata={"Software": None})
    finally:
        plt.close(fig)
    return spec.output_path


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="dampedwave-plot",
                                     description="Render figures from dampedwave CSVs")
    parser.add_argument("--input", required=True)
    parser.add_argument("--kind", required=True, choices=KINDS)
    parser.add_argument("--out", required=True)
    args = parser.parse_args(argv)
    try:
        render(PlotSpec(input_path=args.input, kind=args.kind, output_path=args.out))
    except (ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
