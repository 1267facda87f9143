"""Brute-force ground truth over explicitly enumerated directed paths.

Test-only reference.  Paths are listed as step-direction sequences in
lexicographic order; quantities are computed by direct summation or
maximization over the list.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from .environment import Environment
from .lattice import Vertex, as_vertex, leq, point_segment_distance, vsub

DEFAULT_CAP = 12


class CapExceeded(ValueError):
    pass


@lru_cache(maxsize=4096)
def _steps(x: Vertex) -> np.ndarray:
    d = len(x)
    out: list[tuple[int, ...]] = []
    remaining = list(x)
    seq: list[int] = []

    def rec():
        if not any(remaining):
            out.append(tuple(seq))
            return
        for j in range(d):
            if remaining[j]:
                remaining[j] -= 1
                seq.append(j)
                rec()
                seq.pop()
                remaining[j] += 1

    rec()
    arr = np.asarray(out, dtype=np.int64).reshape(len(out), sum(x))
    arr.setflags(write=False)
    return arr


@lru_cache(maxsize=4096)
def _vertices(x: Vertex) -> np.ndarray:
    steps = _steps(x)
    n, length = steps.shape
    moves = np.zeros((n, length + 1, len(x)), dtype=np.int64)
    if length:
        rows = np.repeat(np.arange(n), length)
        cols = np.tile(np.arange(1, length + 1), n)
        moves[rows, cols, steps.reshape(-1)] = 1
    out = np.cumsum(moves, axis=1)
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class PathEnumeration:
    endpoint: Vertex
    steps: np.ndarray  # (N, |x|_1) direction indices

    @property
    def vertices(self) -> np.ndarray:
        """``(N, |x|_1 + 1, d)`` vertex sequences starting at 0."""
        return _vertices(self.endpoint)

    @property
    def paths(self) -> list[tuple[Vertex, ...]]:
        return [tuple(tuple(int(c) for c in v) for v in p) for p in self.vertices]

    def __len__(self):
        return self.steps.shape[0]


def enumerate_paths(x: Sequence[int], cap: int = DEFAULT_CAP) -> PathEnumeration:
    x = as_vertex(x)
    if any(c < 0 for c in x):
        raise ValueError("endpoint must be in the nonnegative orthant")
    if sum(x) > cap:
        raise CapExceeded(f"|x|_1 = {sum(x)} exceeds enumeration cap {cap}")
    return PathEnumeration(x, _steps(x))


def _edge_weights(env: Environment, source: Vertex, enum: PathEnumeration) -> np.ndarray:
    """``(N, L)`` weights of each path's edges, in path order."""
    verts = enum.vertices[:, :-1, :] + np.asarray(source) - np.asarray(env.origin)
    idx = (enum.steps,) + tuple(verts[..., k] for k in range(verts.shape[-1]))
    w = env.weights[idx]
    if np.isnan(w).any():
        raise ValueError("path leaves the environment box")
    return w


def _logsumexp_sorted(a: np.ndarray) -> float:
    if a.size == 0:
        return -math.inf
    m = float(np.max(a))
    if m == -math.inf:
        return -math.inf
    terms = np.sort(np.exp(a - m))
    return m + math.log(math.fsum(terms))


def _setup(env, x, source, cap):
    source = env.lower if source is None else as_vertex(source)
    x = as_vertex(x)
    if not leq(source, x):
        raise ValueError(f"target {x} is not >= source {source}")
    enum = enumerate_paths(vsub(x, source), cap)
    return source, enum, _edge_weights(env, source, enum)


def _path_energy(w: np.ndarray) -> np.ndarray:
    # ascending-magnitude order per path
    return np.sort(np.abs(w), axis=1).sum(axis=1) if (w >= 0).all() else np.array(
        [math.fsum(row) for row in w])


def _through_mask(enum: PathEnumeration, source: Vertex, waypoints) -> np.ndarray:
    keep = np.ones(len(enum), dtype=bool)
    verts = enum.vertices
    for z in waypoints:
        rz = np.asarray(vsub(as_vertex(z), source))
        step = int(rz.sum())
        if step < 0 or step >= verts.shape[1]:
            keep[:] = False
            continue
        keep &= np.all(verts[:, step, :] == rz, axis=1)
    return keep


def oracle_log_partition(env: Environment, beta: float, x, source=None,
                         waypoints: Sequence[Sequence[int]] = (), cap: int = DEFAULT_CAP) -> float:
    """log of the sum of ``exp(-beta tau(gamma))`` over paths (through the waypoints)."""
    source, enum, w = _setup(env, x, source, cap)
    a = -beta * _path_energy(w)
    if waypoints:
        a = a[_through_mask(enum, source, waypoints)]
    return _logsumexp_sorted(a)


def oracle_free_energy(env: Environment, beta: float, x, source=None,
                       waypoints: Sequence[Sequence[int]] = (), cap: int = DEFAULT_CAP) -> float:
    source = env.lower if source is None else as_vertex(source)
    length = sum(vsub(as_vertex(x), source))
    lz = oracle_log_partition(env, beta, x, source, waypoints, cap)
    return -(lz - length * math.log(env.d)) / beta


def oracle_confinement(env: Environment, beta: float, x, r: float, source=None,
                       cap: int = DEFAULT_CAP) -> float:
    """Gibbs mass of the paths whose vertices all lie in the cylinder of radius ``r``."""
    source, enum, w = _setup(env, x, source, cap)
    a = -beta * _path_energy(w)
    rel = np.asarray(vsub(as_vertex(x), source))
    if not rel.any():
        return 1.0
    verts = enum.vertices
    dist = point_segment_distance(verts.reshape(-1, len(rel)), rel).reshape(verts.shape[:2])
    inside = np.all(dist < r, axis=1)
    if not inside.any():
        return 0.0
    m = float(np.max(a))
    num = math.fsum(np.sort(np.exp(a[inside] - m)))
    den = math.fsum(np.sort(np.exp(a - m)))
    return num / den


def oracle_last_passage(env: Environment, x, source=None, cap: int = DEFAULT_CAP) -> float:
    """Max path weight; each path summed forward so rounding matches the DP."""
    _, _, w = _setup(env, x, source, cap)
    if w.shape[1] == 0:
        return 0.0
    return float(np.max(np.cumsum(w, axis=1)[:, -1]))


def oracle_first_passage(env: Environment, x, source=None, cap: int = DEFAULT_CAP) -> float:
    _, _, w = _setup(env, x, source, cap)
    if w.shape[1] == 0:
        return 0.0
    return float(np.min(np.cumsum(w, axis=1)[:, -1]))


def oracle_path_law(env: Environment, beta: float, x, source=None,
                    cap: int = DEFAULT_CAP) -> dict[tuple[int, ...], float]:
    """Exact Gibbs probability of each path, keyed by its step sequence."""
    _, enum, w = _setup(env, x, source, cap)
    a = -beta * _path_energy(w)
    lz = _logsumexp_sorted(a)
    probs = np.exp(a - lz)
    return {tuple(int(j) for j in row): float(p) for row, p in zip(enum.steps, probs)}
