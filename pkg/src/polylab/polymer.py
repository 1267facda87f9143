"""Exact log-partition functions and free energies of directed polymers.

``log Z(v)`` satisfies the recurrence

    log Z(v) = logsumexp_j [ log Z(v - e_j) - beta * tau(v - e_j, v) ]

over admissible predecessors, evaluated in the log domain by the compiled
wavefront sweep.  The free energy is normalized by ``d^{|x|_1}`` so that it is
nonnegative for nonnegative weights.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .environment import Environment
from .lattice import Box, Cylinder, Slab, Vertex, as_vertex, box_distances, l1, leq, vsub


@dataclass(frozen=True)
class PolymerParams:
    beta: float = 1.0

    def __post_init__(self):
        if not (math.isfinite(self.beta) and self.beta > 0):
            raise ValueError(f"beta must be finite and > 0, got {self.beta}")


class ConstraintMask:
    """Admissible-vertex rule for a field computed from ``source``."""

    kind = "abstract"

    def allowed(self, source: Vertex, shape: tuple[int, ...]) -> np.ndarray:
        raise NotImplementedError


class FullMask(ConstraintMask):
    kind = "full"

    def allowed(self, source, shape):
        return np.ones(shape, dtype=bool)

    def __repr__(self):
        return "FullMask()"


FULL = FullMask()


@dataclass(frozen=True)
class CylinderMask(ConstraintMask):
    """Vertices within the cylinder, taken relative to the source."""

    cylinder: Cylinder
    kind = "cylinder"

    def allowed(self, source, shape):
        return box_distances(shape, self.cylinder.endpoint) < self.cylinder.radius


@dataclass(frozen=True)
class SlabPassMask(ConstraintMask):
    """Paths must cross both slab planes at admissible plane points.

    Planes are absolute: ``{v . e = a}`` and ``{v . e = b}`` in lattice
    coordinates, so fields from different sources see the same planes.
    A directed path crosses each plane at most once, so forbidding the
    inadmissible plane points is the same as summing
    ``Z(s, y) Z(y, y') Z(y', t)`` over admissible ``y`` and ``y'``.
    """

    slab: Slab
    kind = "slab"

    def allowed(self, source, shape):
        d = len(shape)
        pts = np.indices(shape).reshape(d, -1).T + np.asarray(source)
        level = pts.sum(axis=1)
        ok = np.ones(pts.shape[0], dtype=bool)
        for plane in (self.slab.a, self.slab.b):
            on = level == plane
            if np.any(on):
                ok[on] = self.slab.admissible(pts[on])
        return ok.reshape(shape)


@dataclass(frozen=True)
class ThroughPointsMask(ConstraintMask):
    """Paths forced through each waypoint (global coordinates)."""

    points: tuple[Vertex, ...]
    kind = "through"

    def __post_init__(self):
        pts = tuple(as_vertex(p) for p in self.points)
        for a, b in zip(pts, pts[1:]):
            if not leq(a, b):
                raise ValueError(f"waypoints not nondecreasing: {a} then {b}")
        object.__setattr__(self, "points", pts)

    def allowed(self, source, shape):
        d = len(shape)
        rel_levels = np.indices(shape).sum(axis=0)
        ok = np.ones(shape, dtype=bool)
        for z in self.points:
            rz = vsub(z, source)
            ok[rel_levels == sum(rz)] = False
            if all(0 <= c < s for c, s in zip(rz, shape)):
                ok[rz] = True
        return ok


@dataclass(frozen=True, eq=False)
class FreeEnergyField:
    """log Z from ``source`` to every vertex of ``source + box``."""

    source: Vertex
    box: Box
    beta: float
    logz: np.ndarray
    mask: ConstraintMask = FULL

    def __post_init__(self):
        self.logz.setflags(write=False)

    def _index(self, v) -> tuple[int, ...]:
        rel = vsub(as_vertex(v), self.source)
        if not self.box.contains(rel):
            if leq(self.source, v):
                raise ValueError(f"vertex {v} outside field box")
            raise ValueError(f"target {v} is not >= source {self.source}")
        return rel

    def log_z(self, v) -> float:
        return float(self.logz[self._index(v)])

    def free_energy(self, target) -> float:
        return free_energy(self, target)

    def free_energies(self) -> np.ndarray:
        """Free energy at every vertex of the box (array)."""
        d = self.box.d
        length = np.indices(self.box.shape).sum(axis=0)
        with np.errstate(invalid="ignore"):
            out = -(self.logz - length * math.log(d)) / self.beta
        return np.where(np.isneginf(self.logz), np.inf, out)


def _kernel_inputs(env: Environment, source: Vertex, hi: Vertex):
    sub = env.window(source, hi)
    shape = np.asarray(sub.box.shape, dtype=np.int64)
    return sub, shape, _kernels.wavefront_order(sub.box.shape)


def log_partition(env: Environment, params: PolymerParams | float = 1.0,
                  source: Optional[Sequence[int]] = None, mask: ConstraintMask = FULL,
                  target: Optional[Sequence[int]] = None) -> FreeEnergyField:
    """Field of log partition functions from ``source``.

    The field covers ``source <= v <= target`` (default: the environment's
    upper corner).
    """
    params = params if isinstance(params, PolymerParams) else PolymerParams(float(params))
    source = env.lower if source is None else as_vertex(source)
    if not env.contains(source):
        raise ValueError(f"source {source} outside environment box")
    hi = env.upper if target is None else as_vertex(target)
    if not leq(source, hi):
        raise ValueError(f"target {hi} is not >= source {source}")
    sub, shape, order = _kernel_inputs(env, source, hi)
    allowed = np.ascontiguousarray(mask.allowed(source, sub.box.shape), dtype=np.bool_).reshape(-1)
    out = _kernels.log_partition_sweep(sub.flat_weights(), params.beta, allowed, shape, order)
    return FreeEnergyField(source, sub.box, params.beta, out.reshape(sub.box.shape), mask)


def free_energy(field: FreeEnergyField, target) -> float:
    """``-(1/beta) (log Z(target) - |target - source|_1 log d)``; +inf if unreachable."""
    rel = field._index(target)
    lz = float(field.logz[rel])
    if lz == -math.inf:
        return math.inf
    return -(lz - sum(rel) * math.log(field.box.d)) / field.beta


def point_to_point_free_energy(env: Environment, params: PolymerParams | float, u, v,
                               mask: ConstraintMask = FULL) -> float:
    """``F(u, v)`` with the source translated to the origin of its own box."""
    u, v = as_vertex(u), as_vertex(v)
    if not leq(u, v):
        raise ValueError(f"target {v} is not >= source {u}")
    return free_energy(log_partition(env, params, u, mask, target=v), v)


def through_points_free_energy(env: Environment, params: PolymerParams | float, source,
                               waypoints: Sequence[Sequence[int]], target) -> float:
    """Free energy of the paths forced through every waypoint, by chaining segments.

    The segment normalizations ``d^{|z_{i+1} - z_i|_1}`` multiply to the
    normalization over the total length, so segment free energies add.
    """
    pts = [as_vertex(source)] + [as_vertex(z) for z in waypoints] + [as_vertex(target)]
    for a, b in zip(pts, pts[1:]):
        if not leq(a, b):
            raise ValueError(f"waypoints not nondecreasing: {a} then {b}")
    total = 0.0
    for a, b in zip(pts, pts[1:]):
        total += point_to_point_free_energy(env, params, a, b)
    return total


def confinement_curve(env: Environment, params: PolymerParams | float, endpoint,
                      radii: Sequence[float], source=None) -> np.ndarray:
    """``mu(gamma in C_endpoint[r])`` for each radius, one restricted sweep per radius."""
    params = params if isinstance(params, PolymerParams) else PolymerParams(float(params))
    source = env.lower if source is None else as_vertex(source)
    endpoint = as_vertex(endpoint)
    sub, shape, order = _kernel_inputs(env, source, endpoint)
    rel = vsub(endpoint, source)
    w = sub.flat_weights()
    full = _kernels.log_partition_sweep(w, params.beta, np.ones(order.size, dtype=np.bool_),
                                        shape, order)
    lz_full = full[-1]
    if lz_full == -math.inf:
        raise ValueError(f"endpoint {endpoint} unreachable")
    if sum(rel) == 0:
        return np.ones(len(radii))
    dist = box_distances(sub.box.shape, rel).reshape(-1)
    out = np.empty(len(radii))
    for k, r in enumerate(radii):
        if not r > 0:
            raise ValueError("radius must be positive")
        allowed = dist < r
        if allowed.all():
            out[k] = 1.0
            continue
        lz = _kernels.log_partition_sweep(w, params.beta, allowed, shape, order)[-1]
        out[k] = 0.0 if lz == -math.inf else min(1.0, math.exp(lz - lz_full))
    return out


def confinement_probability(env: Environment, params: PolymerParams | float, endpoint,
                            r: float, source=None) -> float:
    return float(confinement_curve(env, params, endpoint, [r], source)[0])


def write_field_csv(field: FreeEnergyField, path: str | Path) -> Path:
    path = Path(path)
    d = field.box.d
    idx = np.indices(field.box.shape).reshape(d, -1).T + np.asarray(field.source)
    flat = field.logz.reshape(-1)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow([f"x{k}" for k in range(d)] + ["logZ"])
        for row, val in zip(idx, flat):
            wr.writerow([int(c) for c in row] + ["%.17g" % val])
    return path
