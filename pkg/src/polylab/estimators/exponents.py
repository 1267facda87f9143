"""Estimators of the fluctuation (chi), transversal (xi) and curvature (kappa)
exponents, and the check of chi = kappa * xi - (kappa - 1)."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from numbers import Real
from typing import Optional, Sequence

import numpy as np

from ..errors import DegenerateEnsembleError, EstimationError, FlatWithinNoiseError
from ..lattice import round_to_lattice
from ..lpp import geodesic, last_passage
from ..polymer import confinement_curve
from .ensemble import (EnsembleSpec, bootstrap_rng, diagonal_target, endpoint_values,
                       fit_window, require_spread, run_tasks)
from .regression import RegressionFit, ols, percentile_interval, slopes
from .shape import ShapeEstimate

log = logging.getLogger(__name__)

N_BOOT = 1000
RADIUS_EXPONENTS = (0.35, 0.95, 25)


@dataclass(frozen=True, eq=False)
class ExponentEstimate:
    which: str
    value: float
    ci: tuple[float, float]
    fit: Optional[RegressionFit]
    method: str
    sizes: np.ndarray = field(default_factory=lambda: np.zeros(0))
    y: np.ndarray = field(default_factory=lambda: np.zeros(0))  # per-size fitted quantity (linear scale)
    boot: Optional[np.ndarray] = None
    degenerate: bool = False
    data: dict = field(default_factory=dict)
    notes: tuple[str, ...] = ()

    @property
    def halfwidth(self) -> float:
        return (self.ci[1] - self.ci[0]) / 2


def _interval(value: float, boot: np.ndarray) -> tuple[float, float]:
    lo, hi = percentile_interval(boot)
    if not math.isfinite(lo):
        return (value, value)
    return (min(lo, value), max(hi, value))


# -- chi ---------------------------------------------------------------------

def chi_from_values(sizes: Sequence[int], values: np.ndarray, master_seed: int = 0,
                    window: Optional[tuple[int, int]] = None, n_boot: int = N_BOOT,
                    method: str = "") -> ExponentEstimate:
    """chi_hat = slope(log Var F(0, n e) vs log n) / 2 from a ``(k, m)`` value table."""
    sizes = np.asarray(sizes, dtype=float)
    values = np.asarray(values, dtype=float)
    k, m = values.shape
    if m < 2:
        raise ValueError("variance needs at least 2 replicates per size")
    var = values.var(axis=1, ddof=1)
    scale = np.maximum(1.0, np.abs(values).max(axis=1))
    zero = var <= (1e-13 * scale) ** 2
    if zero.all():
        raise DegenerateEnsembleError("degenerate ensemble: zero variance at every size")
    start, stop = fit_window(k, window)
    if zero[start:stop].any():
        raise DegenerateEnsembleError(
            f"degenerate ensemble: zero variance at sizes {sizes[start:stop][zero[start:stop]].tolist()}")
    if m < 30:
        log.warning("only %d replicates per size; variance estimates are rough", m)
    lx = np.log(sizes)
    fit = ols(lx, np.log(var), (start, stop))
    rng = bootstrap_rng(master_seed, 1)
    bvar = np.empty((n_boot, stop - start))
    for col, i in enumerate(range(start, stop)):
        idx = rng.integers(0, m, size=(n_boot, m))
        bvar[:, col] = values[i][idx].var(axis=1, ddof=1)
    with np.errstate(divide="ignore"):
        boot = slopes(lx[start:stop], np.log(bvar)) / 2
    value = fit.slope / 2
    return ExponentEstimate("chi", value, _interval(value, boot), fit, method or "variance",
                            sizes, var, boot, data={"values": values})


def estimate_chi(spec: EnsembleSpec, window: Optional[tuple[int, int]] = None,
                 workers: Optional[int] = None, n_boot: int = N_BOOT) -> ExponentEstimate:
    """Fluctuation exponent from the growth of Var F(0, n e)."""
    targets = [diagonal_target(spec, n) for n in spec.sizes]
    values = endpoint_values(spec, targets, workers)
    return chi_from_values(spec.sizes, values, spec.master_seed, window, n_boot,
                           f"variance/{spec.model}")


# -- xi ----------------------------------------------------------------------

def radius_grid(n: int, exponents=RADIUS_EXPONENTS) -> np.ndarray:
    """Geometric grid ``n^a`` for ``a`` evenly spaced in ``[lo, hi]``."""
    lo, hi, count = exponents
    return float(n) ** np.linspace(lo, hi, int(count))


def crossing_radius(radii: np.ndarray, curve: np.ndarray, q: float) -> float:
    """Radius where the nondecreasing confinement curve first reaches ``q``.

    Linear interpolation in ``log r`` between the bracketing grid radii.
    Returns NaN when the curve is already at ``q`` at the first radius
    (unresolved below the grid); raises when the grid never reaches ``q``.
    """
    hit = np.flatnonzero(curve >= q)
    if hit.size == 0:
        raise EstimationError(f"radius grid exhausted before confinement reached q={q}")
    k = int(hit[0])
    if k == 0:
        return math.nan
    c0, c1 = curve[k - 1], curve[k]
    l0, l1 = math.log(radii[k - 1]), math.log(radii[k])
    frac = 0.0 if c1 == c0 else (q - c0) / (c1 - c0)
    return math.exp(l0 + frac * (l1 - l0))


def _crossing_or_nan(radii, curve, q):
    try:
        return crossing_radius(radii, curve, q)
    except EstimationError:
        return math.nan


def _xi_polymer_task(args):
    spec, i, rep, target, radii = args
    env = spec.environment(i, rep, (0,) * spec.d, target)
    return confinement_curve(env, spec.params, target, radii)


def _xi_lpp_task(args):
    spec, i, rep, target = args
    env = spec.environment(i, rep, (0,) * spec.d, target)
    fld = last_passage(env)
    return geodesic(fld, env, target).max_deviation()


def _degenerate_xi(spec, sizes, rstar, method, data) -> ExponentEstimate:
    return ExponentEstimate("xi", 0.0, (0.0, 0.0), None, method, sizes, rstar, None, True, data,
                            ("transversal scale unresolved at every size (unique or near-unique path)",))


def estimate_xi(spec: EnsembleSpec, q: float = 0.5, direction: Optional[Sequence[float]] = None,
                window: Optional[tuple[int, int]] = None, radius_exponents=RADIUS_EXPONENTS,
                workers: Optional[int] = None, n_boot: int = N_BOOT) -> ExponentEstimate:
    """Transversal exponent: slope of log r*(n) against log n.

    polymer: r*(n) is where the replicate-mean confinement probability of the
    cylinder ``C_{n x}[r]`` first reaches ``q`` on the radius grid.
    lpp: r*(n) is the ``q``-quantile of the geodesic's maximal deviation.
    """
    if not 0 < q < 1:
        raise ValueError("q must lie in (0, 1)")
    direction = np.ones(spec.d) if direction is None else np.asarray(direction, dtype=float)
    targets = [round_to_lattice(n * direction) for n in spec.sizes]
    k, m = len(spec.sizes), spec.replicates
    sizes = np.asarray(spec.sizes, dtype=float)
    start, stop = fit_window(k, window)
    rng = bootstrap_rng(spec.master_seed, 2)

    if spec.model == "polymer":
        grids = [radius_grid(n, radius_exponents) for n in spec.sizes]
        tasks = [(spec, i, r, targets[i], grids[i]) for i in range(k) for r in range(m)]
        curves = np.asarray(run_tasks(_xi_polymer_task, tasks, workers)).reshape(k, m, -1)
        mean_curves = curves.mean(axis=1)
        rstar = np.array([crossing_radius(grids[i], mean_curves[i], q) for i in range(k)])
        data = {"radii": np.asarray(grids), "curves": curves, "mean_curves": mean_curves}
        method = f"confinement-q{q:g}/polymer"

        def boot_rstar():
            out = np.empty((n_boot, stop - start))
            for col, i in enumerate(range(start, stop)):
                idx = rng.integers(0, m, size=(n_boot, m))
                bc = curves[i][idx].mean(axis=1)
                out[:, col] = [_crossing_or_nan(grids[i], c, q) for c in bc]
            return out
    else:
        tasks = [(spec, i, r, targets[i]) for i in range(k) for r in range(m)]
        devs = np.asarray(run_tasks(_xi_lpp_task, tasks, workers)).reshape(k, m)
        rstar = np.quantile(devs, q, axis=1)
        rstar = np.where(rstar > 0, rstar, np.nan)
        data = {"deviations": devs}
        method = f"geodesic-quantile-q{q:g}/lpp"

        def boot_rstar():
            out = np.empty((n_boot, stop - start))
            for col, i in enumerate(range(start, stop)):
                idx = rng.integers(0, m, size=(n_boot, m))
                out[:, col] = np.quantile(devs[i][idx], q, axis=1)
            with np.errstate(divide="ignore"):
                return np.where(out > 0, out, np.nan)

    unresolved = np.isnan(rstar[start:stop])
    if unresolved.all():
        return _degenerate_xi(spec, sizes, rstar, method, data)
    if unresolved.any():
        raise EstimationError(
            f"r* unresolved at sizes {sizes[start:stop][unresolved].tolist()}; widen the radius grid")
    lx = np.log(sizes)
    fit = ols(lx, np.log(rstar), (start, stop))
    boot = slopes(lx[start:stop], np.log(boot_rstar()))
    return ExponentEstimate("xi", fit.slope, _interval(fit.slope, boot), fit, method, sizes, rstar,
                            boot, data=data,
                            notes=(f"finite-n operationalization: quantile level q={q:g}",))


# -- kappa -------------------------------------------------------------------

def estimate_kappa(shape: ShapeEstimate, center: Optional[Sequence[float]] = None,
                   nsigma: float = 3.0, seed: int = 0, n_boot: int = N_BOOT) -> ExponentEstimate:
    """Curvature exponent: slope of log|f(e + z) - f(e)| against log|z| for z . e = 0.

    Only offsets whose difference exceeds ``nsigma`` standard errors enter the
    fit.  With per-replicate samples the differences are paired replicate by
    replicate.
    """
    dirs = shape.directions
    d = dirs.shape[1]
    center = np.ones(d) if center is None else np.asarray(center, dtype=float)
    ci = None
    for i, v in enumerate(dirs):
        if np.allclose(v, center, rtol=0, atol=1e-12):
            ci = i
    if ci is None:
        raise EstimationError("shape fan does not contain the center direction")
    e = np.ones(d) / math.sqrt(d)
    rows, znorm = [], []
    for i, v in enumerate(dirs):
        z = v - center
        nz = float(np.linalg.norm(z))
        if i == ci or nz == 0:
            continue
        if abs(float(z @ e)) > 1e-9 * max(1.0, nz):
            continue
        rows.append(i)
        znorm.append(nz)
    if not rows:
        raise EstimationError("no offsets orthogonal to the center direction")
    rows = np.asarray(rows)
    znorm = np.asarray(znorm)
    if shape.samples is not None:
        paired = shape.samples[:, rows] - shape.samples[:, [ci]]
        m = paired.shape[0]
        diff = paired.mean(axis=0)
        se = paired.std(axis=0, ddof=1) / math.sqrt(m)
    else:
        paired = None
        diff = shape.f_hat[rows] - shape.f_hat[ci]
        se = np.sqrt(shape.se[rows] ** 2 + shape.se[ci] ** 2)
    keep = (np.abs(diff) > nsigma * se) & (diff != 0)
    if keep.sum() < 2:
        raise FlatWithinNoiseError("flat within noise: fewer than two significant shape differences")
    order = np.argsort(znorm[keep])
    lz = np.log(znorm[keep][order])
    ly = np.log(np.abs(diff[keep][order]))
    fit = ols(lz, ly)
    if paired is not None:
        rng = bootstrap_rng(seed, 3)
        idx = rng.integers(0, paired.shape[0], size=(n_boot, paired.shape[0]))
        bdiff = paired[:, keep][idx].mean(axis=1)[:, order]
        with np.errstate(divide="ignore"):
            boot = slopes(lz, np.log(np.abs(bdiff)))
    else:
        boot = np.full(1, fit.slope)
    return ExponentEstimate("kappa", fit.slope, _interval(fit.slope, boot), fit,
                            f"curvature/{shape.method}", np.exp(lz), np.abs(diff[keep][order]), boot,
                            data={"z": znorm, "diff": diff, "se": se, "used": keep})


# -- relation ----------------------------------------------------------------

@dataclass(frozen=True)
class RelationReport:
    chi: float
    rhs: float
    residual: Real
    chi_ci: tuple[float, float]
    rhs_ci: tuple[float, float]
    consistent: bool

    def line(self) -> str:
        verdict = "consistent" if self.consistent else "inconsistent"
        return (f"chi_hat={self.chi:.4f} [{self.chi_ci[0]:.4f}, {self.chi_ci[1]:.4f}] vs "
                f"kappa_hat*xi_hat-(kappa_hat-1)={self.rhs:.4f} "
                f"[{self.rhs_ci[0]:.4f}, {self.rhs_ci[1]:.4f}]: {verdict}")


def _draws(est, rng: np.random.Generator, size: int) -> np.ndarray:
    if isinstance(est, ExponentEstimate):
        if est.boot is not None and est.boot.size > 1 and np.isfinite(est.boot).all():
            return rng.choice(est.boot, size=size, replace=True)
        hw = est.halfwidth
        return est.value + rng.normal(0.0, hw / 1.959963984540054, size) if hw > 0 else \
            np.full(size, float(est.value))
    return np.full(size, float(est))


def _point(est):
    return est.value if isinstance(est, ExponentEstimate) else est


def relation_residual(chi, xi, kappa):
    """``chi - (kappa xi - (kappa - 1))``; exact for int/Fraction inputs."""
    return chi - (kappa * xi - (kappa - 1))


def check_relation(chi, xi, kappa, seed: int = 0, n_draws: int = 20000) -> RelationReport:
    """Compare chi_hat with kappa_hat xi_hat - (kappa_hat - 1).

    Estimates carry bootstrap draws (or a 95% interval, read as Gaussian);
    plain numbers are exact.  The verdict is 'consistent' when the chi
    interval meets the propagated right-hand-side interval.
    """
    c, x, k = _point(chi), _point(xi), _point(kappa)
    residual = relation_residual(c, x, k)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x4E1]))
    cd, xd, kd = (_draws(est, rng, n_draws) for est in (chi, xi, kappa))
    rhs_d = kd * xd - (kd - 1)
    rhs = float(k * x - (k - 1))
    chi_ci = chi.ci if isinstance(chi, ExponentEstimate) else percentile_interval(cd)
    rhs_ci = percentile_interval(rhs_d)
    rhs_ci = (min(rhs_ci[0], rhs), max(rhs_ci[1], rhs))
    consistent = chi_ci[0] <= rhs_ci[1] and rhs_ci[0] <= chi_ci[1]
    return RelationReport(float(c), rhs, residual, tuple(map(float, chi_ci)), rhs_ci, bool(consistent))
