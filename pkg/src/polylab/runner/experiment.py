"""Run a configured experiment: estimators, per-replicate CSVs, summary and manifest."""
from __future__ import annotations

import csv
import datetime as dt
import hashlib
import json
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .. import __version__
from ..errors import DegenerateEnsembleError, EstimationError
from ..estimators import diagnostics, exponents, shape as shape_mod
from ..estimators.ensemble import EnsembleSpec, default_workers
from ..estimators.exponents import ExponentEstimate
from .config import ESTIMATORS, ExperimentConfig, load_config

log = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DEGENERATE = 3
EXIT_RESOURCE = 4

SUMMARY_COLUMNS = ["estimator", "estimate", "se", "ci_lo", "ci_hi", "window_start", "window_stop",
                   "r2", "intercept", "method", "status"]
DEFAULT_KAPPA_OFFSETS = (0.05, 0.1, 0.15, 0.2, 0.25, 0.3)


def fmt(x) -> str:
    """17 significant digits for floats, plain text otherwise."""
    if isinstance(x, (bool, np.bool_)):
        return str(int(x))
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % float(x)
    return "" if x is None else str(x)


def write_rows(path: Path, header: list[str], rows) -> Path:
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for row in rows:
            wr.writerow([fmt(v) for v in row])
    return path


def sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


@dataclass
class RunResult:
    manifest: dict
    exit_code: int
    output_dir: Path
    estimates: dict = field(default_factory=dict)

    @property
    def manifest_path(self) -> Path:
        return self.output_dir / "manifest.json"


def _summary_row(name: str, est: ExponentEstimate, status: str = "ok") -> list:
    fit = est.fit
    se = float(np.std(est.boot[np.isfinite(est.boot)], ddof=1)) if (
        est.boot is not None and np.isfinite(est.boot).sum() > 1) else math.nan
    intercept = fit.intercept if fit is not None else math.nan
    if status == "ok" and est.degenerate:
        status = "degenerate"
    return [name, est.value, se, est.ci[0], est.ci[1],
            fit.window[0] if fit else "", fit.window[1] if fit else "",
            fit.r2 if fit else math.nan, intercept, est.method, status]


def _failed_row(name: str, status: str, method: str = "") -> list:
    return [name, math.nan, math.nan, math.nan, math.nan, "", "", math.nan, math.nan, method, status]


class _Run:
    def __init__(self, cfg: ExperimentConfig, workers: int):
        self.cfg = cfg
        self.spec: EnsembleSpec = cfg.ensemble()
        self.out = cfg.output_dir
        self.workers = workers
        self.n_boot = int(cfg.raw["bootstrap"])
        self.rows: list[list] = []
        self.estimates: dict = {}
        self.files: list[Path] = []

    def write(self, name: str, header, rows) -> None:
        self.files.append(write_rows(self.out / name, header, rows))

    # cost in lattice cells, used for the resource cap
    def cost(self, name: str) -> int:
        spec, d = self.spec, self.spec.d
        est = self.cfg.estimators[name]
        per_size = sum((n + 1) ** d for n in spec.sizes) * spec.replicates
        n_big = est.get("n", spec.sizes[-1]) if isinstance(est, dict) else spec.sizes[-1]
        if name in ("chi", "mean_excess"):
            return per_size
        if name == "xi":
            mult = int(est.get("radius_grid", [0, 0, 25])[2]) if spec.model == "polymer" else 2
            return per_size * mult
        if name in ("shape", "kappa"):
            return 4 * (n_big + 1) ** d * spec.replicates
        if name == "concentration":
            return int(np.prod([c + 1 for c in est["z"]])) * spec.replicates
        if name == "delta_f":
            return 2 * (3 * n_big + 1) ** d * spec.replicates
        return 0

    # -- estimators --------------------------------------------------------

    def chi(self, opts):
        est = exponents.estimate_chi(self.spec, _window(opts), self.workers, self.n_boot)
        self._replicate_table("chi_replicates.csv", est.data["values"])
        self.write("chi_sizes.csv", ["size", "variance"], zip(self.spec.sizes, est.y))
        return est

    def xi(self, opts):
        grid = tuple(opts.get("radius_grid", exponents.RADIUS_EXPONENTS))
        est = exponents.estimate_xi(self.spec, opts.get("q", 0.5), opts.get("direction"),
                                    _window(opts), grid, self.workers, self.n_boot)
        if self.spec.model == "polymer":
            curves, radii = est.data["curves"], est.data["radii"]
            rows = ((n, r, radii[i][j], curves[i, r, j])
                    for i, n in enumerate(self.spec.sizes) for r in range(curves.shape[1])
                    for j in range(curves.shape[2]))
            self.write("xi_replicates.csv", ["size", "replicate", "radius", "value"], rows)
        else:
            self._replicate_table("xi_replicates.csv", est.data["deviations"])
        self.write("xi_sizes.csv", ["size", "r_star"], zip(self.spec.sizes, est.y))
        return est

    def _shape_rows(self, prefix: str, sh: shape_mod.ShapeEstimate):
        d = self.spec.d
        rows = ([i] + list(v) + [sh.f_hat[i], sh.se[i], bool(sh.boundary[i])]
                for i, v in enumerate(sh.directions))
        self.write(f"{prefix}.csv", ["direction"] + [f"x{k}" for k in range(d)]
                   + ["f_hat", "se", "boundary"], rows)
        self.write(f"{prefix}_replicates.csv", ["direction", "replicate", "value"],
                   ((i, r, sh.samples[r, i]) for i in range(len(sh.directions))
                    for r in range(sh.samples.shape[0])))

    def shape(self, opts):
        d = self.spec.d
        if "directions" in opts:
            dirs = np.asarray(opts["directions"], dtype=float)
        elif d == 2:
            dirs = shape_mod.angular_fan(9)
        else:
            dirs = np.vstack([np.ones(d) / math.sqrt(d), np.eye(d)])
        fracs = tuple(opts.get("containment", (0.25, 0.5, 0.75)))
        sh = shape_mod.estimate_limit_shape(self.spec, dirs, opts.get("n"), fracs, self.workers)
        self._shape_rows("shape", sh)
        self.write("shape_containment.csv", ["t", "direction", "inner", "outer", "resolved"],
                   ((rep.t, i, rep.inner[i], rep.outer[i], bool(rep.resolved[i]))
                    for rep in sh.containment for i in range(len(dirs))))
        center = int(np.argmax(np.min(dirs, axis=1) / np.linalg.norm(dirs, axis=1)))
        return ("shape", sh, center)

    def kappa(self, opts):
        offsets = np.asarray(opts.get("offsets", DEFAULT_KAPPA_OFFSETS), dtype=float)
        dirs = np.vstack([np.ones((1, 2)), shape_mod.antidiagonal_fan(offsets)])
        sh = shape_mod.estimate_limit_shape(self.spec, dirs, opts.get("n"), (), self.workers)
        self._shape_rows("kappa_shape", sh)
        est = exponents.estimate_kappa(sh, nsigma=opts.get("nsigma", 3.0),
                                       seed=self.spec.master_seed, n_boot=self.n_boot)
        data = est.data
        self.write("kappa_points.csv", ["offset", "z_norm", "diff", "se", "used"],
                   zip(offsets, data["z"], data["diff"], data["se"], data["used"]))
        return est

    def relation(self, opts):
        parts = [self.estimates.get(k) for k in ("chi", "xi", "kappa")]
        if not all(isinstance(p, ExponentEstimate) for p in parts):
            raise EstimationError("relation needs successful chi, xi and kappa estimates")
        rep = exponents.check_relation(*parts, seed=self.spec.master_seed)
        verdict = "consistent" if rep.consistent else "inconsistent"
        self.rows.append(["relation_rhs", rep.rhs, math.nan, rep.rhs_ci[0], rep.rhs_ci[1], "", "",
                          math.nan, math.nan, "kappa*xi-(kappa-1)", verdict])
        self.rows.append(["relation_residual", float(rep.residual), math.nan, math.nan, math.nan,
                          "", "", math.nan, math.nan, "chi-rhs", verdict])
        return rep

    def mean_excess(self, opts):
        cur = diagnostics.mean_excess_curve(self.spec, opts.get("f_e"), _window(opts), self.workers)
        self._replicate_table("mean_excess_replicates.csv", cur.values)
        self.write("mean_excess.csv", ["size", "mean", "se", "excess"],
                   zip(self.spec.sizes, cur.mean, cur.se, cur.excess))
        f = cur.log_fit
        self.rows.append(["mean_excess_log_slope", f.slope, f.slope_se, math.nan, math.nan,
                          f.window[0], f.window[1], f.r2, f.intercept, "excess~log n", "ok"])
        if cur.power_fit is not None:
            p = cur.power_fit
            self.rows.append(["mean_excess_power", p.slope, p.slope_se, math.nan, math.nan,
                              p.window[0], p.window[1], p.r2, p.intercept, "log excess~log n", "ok"])
        self.rows.append(["mean_excess_f_e", cur.f_e, cur.f_e_bias, math.nan, math.nan, "", "",
                          math.nan, math.nan, cur.f_e_source, "ok"])
        return cur

    def concentration(self, opts):
        rep = diagnostics.concentration_tail(self.spec, opts["z"], opts.get("t", [1, 2, 3]),
                                             self.workers)
        self.write("concentration_replicates.csv", ["replicate", "value"], enumerate(rep.values))
        self.write("concentration.csv",
                   ["t", "exceed", "wilson_lo", "wilson_hi", "sigma_mc", "bound", "pass"],
                   zip(rep.t, rep.exceed, rep.wilson_lo, rep.wilson_hi, rep.sigma_mc, rep.bound,
                       rep.passes))
        self.rows.append(["concentration_pass", float(rep.passes.all()), math.nan, math.nan,
                          math.nan, "", "", math.nan, math.nan, "azuma", "ok"])
        return rep

    def delta_f(self, opts):
        n = int(opts.get("n", self.spec.sizes[-1]))
        rep = diagnostics.delta_f_variance(self.spec, n, opts["xi_prime"], workers=self.workers)
        v = rep.values
        self.write("delta_f_replicates.csv", ["replicate", "f_origin", "f_offset", "delta"],
                   ((r, v[r, 0], v[r, 1], v[r, 0] - v[r, 1]) for r in range(v.shape[0])))
        self.rows.append(["delta_f_var", rep.var_delta, rep.se_delta, math.nan, math.nan, "", "",
                          math.nan, math.nan, f"offset={list(rep.offset.offset)}", "ok"])
        self.rows.append(["delta_f_var_f", rep.var_f, rep.se_f, math.nan, math.nan, "", "",
                          math.nan, math.nan, "Var F(0,ne)", "ok"])
        return rep

    def _replicate_table(self, name: str, values: np.ndarray) -> None:
        self.write(name, ["size", "replicate", "value"],
                   ((n, r, values[i, r]) for i, n in enumerate(self.spec.sizes)
                    for r in range(values.shape[1])))


def _window(opts):
    w = opts.get("window")
    return tuple(w) if w is not None else None


def seed_ledger(spec: EnsembleSpec) -> list[dict]:
    return [{"size_index": i, "size": n, "replicate": r, "seed": spec.seed(i, r)}
            for i, n in enumerate(spec.sizes) for r in range(spec.replicates)]


def run_experiment(config, workers: Optional[int] = None,
                   overrides: Optional[dict] = None) -> RunResult:
    """Execute every selected estimator and write artifacts into the output directory.

    Exit codes: 0 success, 3 an estimator hit a degenerate ensemble (or could
    not produce a number), 4 the cell cap stopped the run early.
    """
    cfg = config if isinstance(config, ExperimentConfig) else load_config(config, overrides)
    if workers is None:
        workers = cfg.raw["workers"] or default_workers()
    run = _Run(cfg, int(workers))
    run.out.mkdir(parents=True, exist_ok=True)
    started = dt.datetime.now(dt.timezone.utc).isoformat()
    incomplete = failed = False
    cap = cfg.raw["max_cells"]
    spent = 0
    statuses = {}
    for name in ESTIMATORS:
        if name not in cfg.estimators:
            continue
        opts = cfg.estimators[name]
        cost = run.cost(name)
        if cap is not None and spent + cost > cap:
            incomplete = True
            statuses[name] = "skipped: resource cap"
            run.rows.append(_failed_row(name, "skipped-resource-cap"))
            log.warning("estimator %s skipped: %d cells would exceed cap %d", name, spent + cost, cap)
            continue
        spent += cost
        try:
            result = getattr(run, name)(opts)
        except DegenerateEnsembleError as exc:
            statuses[name] = f"degenerate: {exc}"
            run.rows.append(_failed_row(name, "degenerate-ensemble"))
            failed = True
            continue
        except EstimationError as exc:
            statuses[name] = f"failed: {exc}"
            run.rows.append(_failed_row(name, type(exc).__name__))
            failed = True
            continue
        run.estimates[name] = result
        statuses[name] = "ok"
        if isinstance(result, ExponentEstimate):
            run.rows.append(_summary_row(name, result))
        elif isinstance(result, tuple) and result[0] == "shape":
            _, sh, center = result
            run.rows.append(["shape", sh.f_hat[center], sh.se[center], math.nan,
                             math.nan, "", "", math.nan, math.nan, sh.method, "ok"])
    exit_code = EXIT_RESOURCE if incomplete else EXIT_DEGENERATE if failed else EXIT_OK
    summary = run.out / "summary.csv"
    write_rows(summary, SUMMARY_COLUMNS, run.rows)
    run.files.append(summary)
    spec = run.spec
    manifest = {
        "config_sha256": cfg.hash(),
        "config": cfg.raw,
        "parameter_sources": cfg.provenance,
        "code_version": __version__,
        "started": started,
        "finished": dt.datetime.now(dt.timezone.utc).isoformat(),
        "workers": run.workers,
        "incomplete": incomplete,
        "exit_code": exit_code,
        "estimators": statuses,
        "cells": spent,
        "seeds": {
            "master_seed": spec.master_seed,
            "replicates": seed_ledger(spec),
            "bootstrap": "SeedSequence([master_seed, 0xB007, tag]); tags chi=1, xi=2, kappa=3",
        },
        "files": {p.name: sha256_file(p) for p in sorted(set(run.files))},
    }
    (run.out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True))
    return RunResult(manifest, exit_code, run.out, run.estimates)
