"""Limit-shape estimation, closed-form shapes, and shape-theorem containment checks."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

from ..lattice import round_to_lattice
from .ensemble import EnsembleSpec, run_tasks

log = logging.getLogger(__name__)

ShapeFunction = Callable[[np.ndarray], np.ndarray]


def constant_shape(c: float = 1.0, beta: float = 1.0, d: int = 2) -> ShapeFunction:
    """Limiting free energy of the constant-``c`` environment.

    ``f(x) = c|x|_1 + (|x|_1 / beta) (log d - H(x / |x|_1))``, the exponential
    growth rate of the multinomial path count along ``x``.
    """

    def f(x):
        x = np.asarray(x, dtype=float)
        s = np.sum(x, axis=-1)
        with np.errstate(divide="ignore", invalid="ignore"):
            p = x / s[..., None]
            ent = -np.sum(np.where(p > 0, p * np.log(np.where(p > 0, p, 1.0)), 0.0), axis=-1)
        out = c * s + s / beta * (math.log(d) - ent)
        return np.where(s > 0, out, 0.0)

    return f


def constant_lpp_shape(c: float = 1.0) -> ShapeFunction:
    def f(x):
        return c * np.sum(np.asarray(x, dtype=float), axis=-1)
    return f


def corner_growth_shape(rate: float = 1.0) -> ShapeFunction:
    """``(sqrt x + sqrt y)^2 / rate``: the d = 2 time constant of exponential
    last passage with weights on vertices (corner growth).

    The edge-weight model simulated here has a different (larger) time
    constant with no known closed form; this function serves as a reference
    curve with the same tangency order at the diagonal.
    """

    def f(x):
        x = np.asarray(x, dtype=float)
        return (np.sqrt(x[..., 0]) + np.sqrt(x[..., 1])) ** 2 / rate

    return f


def antidiagonal_fan(offsets: Sequence[float], d: int = 2) -> np.ndarray:
    """Directions ``e + s (e_1 - e_2)``; ``s = 0`` is the diagonal itself."""
    out = np.ones((len(offsets), d))
    out[:, 0] += np.asarray(offsets, dtype=float)
    out[:, 1] -= np.asarray(offsets, dtype=float)
    return out


def angular_fan(count: int, radius: float = 1.0) -> np.ndarray:
    """``count`` unit-radius directions in the closed quarter plane."""
    th = np.linspace(0.0, math.pi / 2, count)
    return radius * np.stack([np.cos(th), np.sin(th)], axis=1)


@dataclass(frozen=True)
class ContainmentReport:
    """Exit radii of ``B_t`` along rays, relative to the reference ``t B``.

    ``inner[i]`` is (first radius where the ray leaves B_t) / (t / f(u_i));
    ``outer[i]`` is (last radius where the ray is in B_t) / (t / f(u_i)).
    ``(1 - eps) B <= B_t / t <= (1 + eps) B`` along the fan iff
    ``inner >= 1 - eps`` and ``outer <= 1 + eps``.
    """

    t: float
    inner: np.ndarray
    outer: np.ndarray
    resolved: np.ndarray

    @property
    def eps(self) -> float:
        ok = self.resolved
        if not ok.any():
            return float("nan")
        return float(max(1.0 - self.inner[ok].min(), self.outer[ok].max() - 1.0, 0.0))

    def contained(self, eps: float) -> bool:
        return bool(self.resolved.all() and self.eps <= eps)


def shape_containment(values: np.ndarray, directions: np.ndarray, t: float,
                      f_ref, step: float = 0.25) -> ContainmentReport:
    """Compare ``B_t = {x : F(0, [x]) <= t}`` with ``t B`` along each direction.

    ``values`` holds F(0, v) on a box anchored at the origin; ``f_ref`` is a
    shape function or an array of reference values ``f(u_i)`` at the unit
    directions.
    """
    directions = np.asarray(directions, dtype=float)
    units = directions / np.linalg.norm(directions, axis=1, keepdims=True)
    if callable(f_ref):
        fu = np.asarray(f_ref(units), dtype=float)
    else:
        fu = np.asarray(f_ref, dtype=float)
    corner = np.asarray(values.shape) - 1
    k = len(units)
    inner = np.full(k, np.nan)
    outer = np.full(k, np.nan)
    resolved = np.zeros(k, dtype=bool)
    for i, u in enumerate(units):
        rho_b = t / fu[i]
        with np.errstate(divide="ignore"):
            lim = np.where(u > 0, (corner + 0.5) / np.where(u > 0, u, 1.0), np.inf)
        rho_max = float(lim.min())
        rho = np.arange(0.0, rho_max, step)
        pts = np.floor(np.outer(rho, u) + 0.5).astype(np.int64)
        pts = np.minimum(pts, corner)
        inside = values[tuple(pts.T)] <= t
        out_idx = np.flatnonzero(~inside)
        if out_idx.size == 0:
            continue
        resolved[i] = True
        inner[i] = rho[out_idx[0]] / rho_b
        outer[i] = rho[np.flatnonzero(inside)[-1]] / rho_b
    return ContainmentReport(float(t), inner, outer, resolved)


@dataclass(frozen=True, eq=False)
class ShapeEstimate:
    directions: np.ndarray  # (k, d)
    f_hat: np.ndarray
    se: np.ndarray
    n: int
    samples: Optional[np.ndarray] = None  # (m, k) per-replicate F / n
    boundary: Optional[np.ndarray] = None
    containment: tuple = ()
    method: str = "monte-carlo"

    def index_of(self, x, tol: float = 1e-9) -> tuple[int, float]:
        """Fan index parallel to ``x`` and the scale ``lambda`` with x = lambda * dir."""
        x = np.asarray(x, dtype=float)
        nx = np.linalg.norm(x)
        for i, v in enumerate(self.directions):
            nv = np.linalg.norm(v)
            if nv > 0 and nx > 0 and abs(float(x @ v) / (nx * nv) - 1.0) < tol:
                return i, nx / nv
        raise KeyError(f"direction {x.tolist()} not in the estimated fan")

    def value_at(self, x) -> tuple[float, float]:
        """``f_hat(x)`` and its standard error, using positive homogeneity."""
        x = np.asarray(x, dtype=float)
        if not x.any():
            return 0.0, 0.0
        i, lam = self.index_of(x)
        return lam * float(self.f_hat[i]), lam * float(self.se[i])

    def replicate_values_at(self, x) -> Optional[np.ndarray]:
        if self.samples is None:
            return None
        x = np.asarray(x, dtype=float)
        if not x.any():
            return np.zeros(self.samples.shape[0])
        i, lam = self.index_of(x)
        return lam * self.samples[:, i]


def analytic_shape(f: ShapeFunction, directions, n: int = 0) -> ShapeEstimate:
    """Wrap a closed-form shape as a zero-noise estimate."""
    directions = np.asarray(directions, dtype=float)
    vals = np.asarray(f(directions), dtype=float)
    return ShapeEstimate(directions, vals, np.zeros_like(vals), n, None,
                         np.any(directions == 0, axis=1), (), "closed-form")


def _shape_task(args):
    spec, si, rep, targets, hi = args
    env = spec.environment(si, rep, (0,) * spec.d, hi)
    vals = spec.passage_values(env)
    return np.array([vals[tuple(t)] for t in targets], dtype=float)


def estimate_limit_shape(spec: EnsembleSpec, directions, n: Optional[int] = None,
                         containment_fractions: Sequence[float] = (0.25, 0.5, 0.75),
                         workers: Optional[int] = None) -> ShapeEstimate:
    """``f_hat(x) = mean over replicates of F(0, [n x]) / n`` for each direction.

    Directions are vectors in the nonnegative orthant (not normalized: ``f`` is
    1-homogeneous).  Containment of ``B_t / t`` in ``(1 +- eps) f_hat``-balls
    is checked on the first replicate at ``t = fraction * min_i n f_hat_i``.
    """
    directions = np.atleast_2d(np.asarray(directions, dtype=float))
    if directions.shape[1] != spec.d:
        raise ValueError("direction dimension does not match ensemble")
    if np.any(directions < -1e-12) or np.any(~directions.any(axis=1)):
        raise ValueError("directions must be nonzero vectors in the nonnegative orthant")
    boundary = np.any(directions <= 0, axis=1)
    if boundary.any():
        log.warning("boundary directions in fan: %s", directions[boundary].tolist())
    n = spec.sizes[-1] if n is None else int(n)
    si = spec.sizes.index(n) if n in spec.sizes else len(spec.sizes)
    targets = [round_to_lattice(n * x) for x in directions]
    if any(min(t) < 0 for t in targets):
        raise ValueError("rounded target outside the orthant")
    hi = tuple(int(max(t[k] for t in targets)) for k in range(spec.d))
    tasks = [(spec, si, r, targets, hi) for r in range(spec.replicates)]
    samples = np.vstack(run_tasks(_shape_task, tasks, workers)) / n
    m = samples.shape[0]
    f_hat = samples.mean(axis=0)
    se = samples.std(axis=0, ddof=1) / math.sqrt(m) if m > 1 else np.full(f_hat.shape, np.nan)

    reports = []
    if containment_fractions:
        env = spec.environment(si, 0, (0,) * spec.d, hi)
        vals = spec.passage_values(env)
        units_f = f_hat / np.linalg.norm(directions, axis=1)
        tmax = float(np.min(n * f_hat))
        for frac in containment_fractions:
            if tmax > 0:
                reports.append(shape_containment(vals, directions, frac * tmax, units_f))
    return ShapeEstimate(directions, f_hat, se, n, samples, boundary, tuple(reports))
