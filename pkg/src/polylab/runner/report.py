"""Human-readable report and plot-data files from a finished run directory."""
from __future__ import annotations

import csv
import json
import math
from pathlib import Path
from typing import Optional

import numpy as np

from .experiment import write_rows


class MissingArtifactError(FileNotFoundError):
    pass


def _read(path: Path) -> list[dict]:
    if not path.exists():
        raise MissingArtifactError(f"missing artifact {path.name} in {path.parent}")
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def _col(rows, key) -> np.ndarray:
    return np.array([float(r[key]) if r[key] != "" else math.nan for r in rows])


def _summary_map(rows) -> dict:
    return {r["estimator"]: r for r in rows}


def _fmt_est(row) -> str:
    val = float(row["estimate"])
    lo, hi = row["ci_lo"], row["ci_hi"]
    ci = "" if lo in ("", "nan") or math.isnan(float(lo)) else f" [{float(lo):.4f}, {float(hi):.4f}]"
    return f"{val:.4f}{ci}"


def _loglog_plot(out: Path, name: str, xcol: str, ycol: str, x, y, row) -> Path:
    """Write points plus the fitted line evaluated at each x."""
    start = int(row["window_start"]) if row["window_start"] else 0
    stop = int(row["window_stop"]) if row["window_stop"] else len(x)
    slope_scale = 2.0 if name == "chi" else 1.0
    fitted = float(row["intercept"]) + slope_scale * float(row["estimate"]) * x
    in_fit = np.zeros(len(x), dtype=bool)
    in_fit[start:stop] = True
    return write_rows(out / f"plot_{name}.csv", [xcol, ycol, "fitted", "in_fit"],
                      zip(x, y, fitted, in_fit))


def _svg(out: Path, name: str, x, y, fitted, xlabel, ylabel) -> Optional[Path]:
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    fig, ax = plt.subplots(figsize=(4.5, 3.5))
    ax.plot(x, y, "o", ms=4)
    if fitted is not None:
        ax.plot(x, fitted, "-", lw=1)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    fig.tight_layout()
    path = out / f"plot_{name}.svg"
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def emit_report(run_dir: str | Path, svg: bool = False) -> Path:
    """Write ``report.md`` and ``plot_*.csv`` (and optionally SVGs) into ``run_dir``."""
    out = Path(run_dir)
    mpath = out / "manifest.json"
    if not mpath.exists():
        raise MissingArtifactError(f"no manifest.json in {out}")
    manifest = json.loads(mpath.read_text())
    for fname in manifest["files"]:
        if not (out / fname).exists():
            raise MissingArtifactError(f"manifest lists {fname} but it is missing")
    summary = _summary_map(_read(out / "summary.csv"))
    cfg = manifest["config"]
    lines = ["# Experiment report", "",
             f"- model: {cfg['model']}, dimension {cfg['dimension']}, beta {cfg['beta']}",
             f"- distribution: {json.dumps(cfg['distribution'], sort_keys=True)}",
             f"- sizes: {cfg['sizes']}, replicates: {cfg['replicates']}, "
             f"master seed: {cfg['master_seed']}",
             f"- config sha256: {manifest['config_sha256']}",
             f"- code version: {manifest['code_version']}",
             ""]
    if manifest.get("incomplete"):
        lines += ["**Run incomplete: resource cap reached; skipped estimators listed below.**", ""]
    lines += ["| estimator | estimate [95% CI] | fit window | R^2 | method | status |",
              "|---|---|---|---|---|---|"]
    for name, row in summary.items():
        win = f"{row['window_start']}..{row['window_stop']}" if row["window_start"] else ""
        r2 = "" if row["r2"] in ("", "nan") else f"{float(row['r2']):.3f}"
        lines.append(f"| {name} | {_fmt_est(row)} | {win} | {r2} | {row['method']} | {row['status']} |")
    lines.append("")
    svgs = []

    if "chi" in summary and summary["chi"]["status"] == "ok":
        rows = _read(out / "chi_sizes.csv")
        x, y = np.log(_col(rows, "size")), np.log(_col(rows, "variance"))
        p = _loglog_plot(out, "chi", "log_n", "log_var", x, y, summary["chi"])
        if svg:
            fit = _col(_read(p), "fitted")
            svgs.append(_svg(out, "chi", x, y, fit, "log n", "log Var F(0, n e)"))
    if "xi" in summary and summary["xi"]["status"] == "ok":
        rows = _read(out / "xi_sizes.csv")
        x, y = np.log(_col(rows, "size")), np.log(_col(rows, "r_star"))
        p = _loglog_plot(out, "xi", "log_n", "log_r_star", x, y, summary["xi"])
        lines.append("xi uses a fixed quantile level as its finite-n operationalization "
                     f"({summary['xi']['method']}).")
        if svg:
            svgs.append(_svg(out, "xi", x, y, _col(_read(p), "fitted"), "log n", "log r*"))
    if "kappa" in summary and summary["kappa"]["status"] == "ok":
        rows = [r for r in _read(out / "kappa_points.csv") if r["used"] == "1"]
        x, y = np.log(_col(rows, "z_norm")), np.log(np.abs(_col(rows, "diff")))
        row = dict(summary["kappa"], window_start="", window_stop="")
        p = _loglog_plot(out, "kappa", "log_z", "log_abs_diff", x, y, row)
        if svg:
            svgs.append(_svg(out, "kappa", x, y, _col(_read(p), "fitted"), "log |z|",
                             "log |f(e+z) - f(e)|"))
    if (out / "shape.csv").exists():
        rows = _read(out / "shape.csv")
        angle = np.arctan2(_col(rows, "x1"), _col(rows, "x0")) if "x1" in rows[0] else \
            np.zeros(len(rows))
        fh, se = _col(rows, "f_hat"), _col(rows, "se")
        write_rows(out / "plot_shape_fan.csv", ["angle", "f_hat", "se"], zip(angle, fh, se))
        if svg:
            svgs.append(_svg(out, "shape_fan", angle, fh, None, "angle", "f_hat"))
    if (out / "mean_excess.csv").exists() and "mean_excess_log_slope" in summary:
        rows = _read(out / "mean_excess.csv")
        ln = np.log(_col(rows, "size"))
        ex = _col(rows, "excess")
        row = summary["mean_excess_log_slope"]
        fit = float(row["intercept"]) + float(row["estimate"]) * ln
        write_rows(out / "plot_mean_excess.csv", ["log_n", "excess", "fitted"], zip(ln, ex, fit))
        fe = summary.get("mean_excess_f_e")
        if fe is not None:
            lines.append(f"f(e) used for the excess: {float(fe['estimate']):.6f} "
                         f"({fe['method']}; bias bound {float(fe['se']):.2e}).")
        if svg:
            svgs.append(_svg(out, "mean_excess", ln, ex, fit, "log n", "h(n) - n f(e)"))
    if "relation_rhs" in summary:
        rhs = summary["relation_rhs"]
        chi = summary["chi"]
        lines.append("")
        lines.append(f"χ̂ vs κ̂ξ̂−(κ̂−1): {rhs['status']} "
                     f"(χ̂ = {_fmt_est(chi)}, κ̂ξ̂−(κ̂−1) = {_fmt_est(rhs)})")
    lines.append("")
    report = out / "report.md"
    report.write_text("\n".join(lines) + "\n")
    return report
