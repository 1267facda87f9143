"""Finite-size diagnostics: offset free-energy differences, bridge excess,
mean-excess curves and concentration tails."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy import stats

from ..errors import EstimationError, UnboundedDistributionError
from ..lattice import Vertex, as_vertex, diagonal, l1, leq
from .ensemble import (EnsembleSpec, diagonal_target, endpoint_values, fit_window,
                       require_spread, run_tasks)
from .regression import RegressionFit, ols
from .shape import ShapeEstimate


def variance_se(x: np.ndarray) -> tuple[float, float]:
    """Sample variance (ddof=1) and its moment-based standard error."""
    x = np.asarray(x, dtype=float)
    m = x.size
    s2 = float(x.var(ddof=1))
    mu4 = float(np.mean((x - x.mean()) ** 4))
    se2 = (mu4 - (m - 3) / (m - 1) * s2 * s2) / m
    return s2, math.sqrt(max(se2, 0.0))


# -- offset difference -------------------------------------------------------

@dataclass(frozen=True)
class OffsetSpec:
    """Offset ``v_n = k (e_1 - e_2)`` with ``|v_n|`` near ``2.5 n^xi'``."""

    xi_prime: float
    n: int
    d: int = 2

    def __post_init__(self):
        if not 0 < self.xi_prime < 1:
            raise ValueError("xi' must lie in (0, 1)")
        if self.d < 2:
            raise ValueError("an offset orthogonal to e needs d >= 2")
        if self.n < 1:
            raise ValueError("n must be positive")

    @property
    def k(self) -> int:
        return max(1, math.ceil(2.5 * self.n ** self.xi_prime / math.sqrt(2)))

    @property
    def offset(self) -> Vertex:
        v = [0] * self.d
        v[0], v[1] = self.k, -self.k
        return tuple(v)

    @property
    def norm(self) -> float:
        return self.k * math.sqrt(2)

    @property
    def window(self) -> tuple[float, float]:
        s = self.n ** self.xi_prime
        return 2 * s, 3 * s


@dataclass(frozen=True, eq=False)
class DeltaFReport:
    n: int
    offset: OffsetSpec
    var_delta: float
    se_delta: float
    var_f: float
    se_f: float
    values: np.ndarray  # (m, 2): F(0, ne), F(v, v + ne)

    @property
    def ratio(self) -> float:
        return self.var_delta / self.var_f if self.var_f > 0 else math.nan


def _delta_task(args):
    spec, si, rep, lo, hi, v, n = args
    env = spec.environment(si, rep, lo, hi)
    d = spec.d
    a = spec.passage_values(env, (0,) * d, diagonal(d, n))[(n,) * d]
    end = tuple(c + n for c in v)
    b = spec.passage_values(env, v, end)[(n,) * d]
    return float(a), float(b)


def delta_f_variance(spec: EnsembleSpec, n: int, xi_prime: float,
                     lattice: Optional[tuple[Sequence[int], Sequence[int]]] = None,
                     size_index: Optional[int] = None,
                     workers: Optional[int] = None) -> DeltaFReport:
    """Variance of ``F(0, n e) - F(v_n, v_n + n e)`` over replicates, same environment.

    ``lattice`` optionally bounds the available box as ``(lo, hi)``.
    """
    require_spread(spec, "delta_f_variance")
    off = OffsetSpec(xi_prime, int(n), spec.d)
    v = off.offset
    d = spec.d
    lo = tuple(min(0, c) for c in v)
    hi = tuple(max(n, c + n) for c in v)
    if lattice is not None:
        llo, lhi = as_vertex(lattice[0]), as_vertex(lattice[1])
        if not (leq(llo, lo) and leq(hi, lhi)):
            raise EstimationError(
                f"lattice {llo}..{lhi} too small to host 0, {v} and {v} + {n}e")
    if size_index is None:
        size_index = spec.sizes.index(n) if n in spec.sizes else 0
    tasks = [(spec, size_index, r, lo, hi, v, int(n)) for r in range(spec.replicates)]
    vals = np.asarray(run_tasks(_delta_task, tasks, workers), dtype=float)
    var_d, se_d = variance_se(vals[:, 0] - vals[:, 1])
    var_f, se_f = variance_se(vals[:, 0])
    return DeltaFReport(int(n), off, var_d, se_d, var_f, se_f, vals)


# -- bridge excess -----------------------------------------------------------

def bridge_excess(shape, v: Sequence[float], n: float) -> tuple[float, float]:
    """``f(v) + f(n e - v) - f(n e)`` and its standard error.

    ``shape`` is a ShapeEstimate (whose fan must contain the three directions)
    or a closed-form shape function.  For last-passage shapes the sign is
    reversed (superadditive limit); compare magnitudes.
    """
    v = np.asarray(v, dtype=float)
    ne = np.full(v.size, float(n))
    w = ne - v
    if np.any(v < 0) or np.any(w < 0):
        raise ValueError("need 0 <= v <= n e")
    if callable(shape) and not isinstance(shape, ShapeEstimate):
        fv = np.asarray(shape(np.stack([v, w, ne])), dtype=float)
        return float(fv[0] + fv[1] - fv[2]), 0.0
    reps = [shape.replicate_values_at(x) for x in (v, w, ne)]
    if all(r is not None for r in reps):
        diff = reps[0] + reps[1] - reps[2]
        return float(diff.mean()), float(diff.std(ddof=1) / math.sqrt(diff.size))
    parts = [shape.value_at(x) for x in (v, w, ne)]
    value = parts[0][0] + parts[1][0] - parts[2][0]
    return float(value), float(math.sqrt(sum(p[1] ** 2 for p in parts)))


# -- mean excess -------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class MeanFreeEnergyCurve:
    sizes: np.ndarray
    mean: np.ndarray
    se: np.ndarray
    excess: np.ndarray
    f_e: float
    f_e_source: str
    f_e_bias: float
    log_fit: RegressionFit
    power_fit: Optional[RegressionFit]
    values: np.ndarray

    @property
    def excess_se(self) -> np.ndarray:
        return self.se


def mean_excess_curve(spec: EnsembleSpec, f_e: Optional[float] = None,
                      window: Optional[tuple[int, int]] = None,
                      workers: Optional[int] = None) -> MeanFreeEnergyCurve:
    """``h(n) - n f(e)`` with ``h(n)`` the replicate mean of F(0, n e).

    Without a supplied ``f(e)`` the slope between the two largest sizes is
    used and the gap to ``h(n_k) / n_k`` is recorded as its bias bound.
    The excess is fit both against ``log n`` and as a power of ``n``.
    """
    sizes = np.asarray(spec.sizes, dtype=float)
    k = sizes.size
    values = endpoint_values(spec, [diagonal_target(spec, n) for n in spec.sizes], workers)
    m = values.shape[1]
    mean = values.mean(axis=1)
    se = values.std(axis=1, ddof=1) / math.sqrt(m) if m > 1 else np.full(k, np.nan)
    if f_e is not None:
        fe, source, bias = float(f_e), "supplied", 0.0
    else:
        if k < 2:
            raise EstimationError("need two sizes to extrapolate f(e)")
        fe = float((mean[-1] - mean[-2]) / (sizes[-1] - sizes[-2]))
        source = "increment of the two largest sizes"
        bias = abs(fe - float(mean[-1] / sizes[-1]))
    excess = mean - sizes * fe
    start, stop = fit_window(k, window)
    log_fit = ols(np.log(sizes), excess, (start, stop))
    power_fit = None
    ex = excess[start:stop]
    if np.all(ex > 0):
        power_fit = ols(np.log(sizes), np.log(np.where(excess > 0, excess, np.nan)), (start, stop))
    return MeanFreeEnergyCurve(sizes, mean, se, excess, fe, source, bias, log_fit, power_fit, values)


# -- concentration -----------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConcentrationReport:
    z: Vertex
    bound_l: float
    t: np.ndarray
    exceed: np.ndarray  # empirical P(|F - mean F| > t sqrt|z|_1)
    wilson_lo: np.ndarray
    wilson_hi: np.ndarray
    sigma_mc: np.ndarray
    bound: np.ndarray
    values: np.ndarray

    @property
    def passes(self) -> np.ndarray:
        return self.exceed <= self.bound + 3 * self.sigma_mc


def wilson_interval(k: np.ndarray, m: int, level: float = 0.95) -> tuple[np.ndarray, np.ndarray]:
    zq = stats.norm.ppf(0.5 + level / 2)
    p = np.asarray(k, dtype=float) / m
    denom = 1 + zq * zq / m
    center = (p + zq * zq / (2 * m)) / denom
    half = zq * np.sqrt(p * (1 - p) / m + zq * zq / (4 * m * m)) / denom
    lo = np.where(p == 0, 0.0, np.maximum(center - half, 0.0))
    hi = np.where(p == 1, 1.0, np.minimum(center + half, 1.0))
    return lo, hi


def _tail_task(args):
    spec, rep, z = args
    env = spec.environment(0, rep, (0,) * spec.d, z)
    return float(spec.passage_values(env)[tuple(z)])


def concentration_tail(spec: EnsembleSpec, z: Sequence[int], t_grid: Sequence[float],
                       workers: Optional[int] = None) -> ConcentrationReport:
    """Empirical ``P(|F(0,z) - mean| > t sqrt|z|_1)`` against ``2 exp(-t^2 / 2L^2)``.

    ``L`` is the almost-sure bound on the weights; unbounded distributions
    are refused.
    """
    require_spread(spec, "concentration_tail")
    bound_l = spec.weight_bound
    if bound_l is None:
        raise UnboundedDistributionError(
            f"concentration bound needs bounded weights; {spec.dist.kind} is unbounded")
    bound_l = abs(float(bound_l))
    z = as_vertex(z)
    if any(c < 0 for c in z) or not any(z):
        raise ValueError("z must be a nonzero vertex of the nonnegative orthant")
    t = np.asarray(t_grid, dtype=float)
    tasks = [(spec, r, z) for r in range(spec.replicates)]
    vals = np.asarray(run_tasks(_tail_task, tasks, workers), dtype=float)
    m = vals.size
    dev = np.abs(vals - vals.mean())
    counts = np.array([(dev > ti * math.sqrt(l1(z))).sum() for ti in t])
    p = counts / m
    lo, hi = wilson_interval(counts, m)
    with np.errstate(divide="ignore"):
        bound = 2 * np.exp(-t * t / (2 * bound_l * bound_l)) if bound_l > 0 else \
            np.where(t > 0, 0.0, 2.0)
    return ConcentrationReport(z, bound_l, t, p, lo, hi, np.sqrt(p * (1 - p) / m), bound, vals)
