"""Zero-temperature directed percolation: last passage (max-plus) and first
passage (min-plus) values, with geodesic recovery."""
from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _kernels
from .environment import Environment
from .lattice import Box, Vertex, as_vertex, leq, point_segment_distance, vsub

MAX_PLUS = "max-plus"
MIN_PLUS = "min-plus"


@dataclass(frozen=True, eq=False)
class PassageField:
    source: Vertex
    box: Box
    value: np.ndarray
    mode: str

    def __post_init__(self):
        self.value.setflags(write=False)

    def at(self, v) -> float:
        rel = vsub(as_vertex(v), self.source)
        if not self.box.contains(rel):
            raise ValueError(f"vertex {v} outside passage field")
        return float(self.value[rel])


@dataclass(frozen=True, eq=False)
class Geodesic:
    vertices: np.ndarray  # (L + 1, d), global coordinates
    weight: float

    @property
    def steps(self) -> np.ndarray:
        return np.argmax(np.diff(self.vertices, axis=0), axis=1)

    def max_deviation(self) -> float:
        rel = self.vertices - self.vertices[0]
        end = rel[-1]
        if not end.any():
            return 0.0
        return float(np.max(point_segment_distance(rel, end)))


def _passage(env: Environment, source, target, maximize: bool) -> PassageField:
    source = env.lower if source is None else as_vertex(source)
    hi = env.upper if target is None else as_vertex(target)
    if not env.contains(source):
        raise ValueError(f"source {source} outside environment box")
    if not leq(source, hi):
        raise ValueError(f"target {hi} is not >= source {source}")
    sub = env.window(source, hi)
    shape = np.asarray(sub.box.shape, dtype=np.int64)
    order = _kernels.wavefront_order(sub.box.shape)
    vals = _kernels.passage_sweep(sub.flat_weights(), shape, order, maximize)
    return PassageField(source, sub.box, vals.reshape(sub.box.shape),
                        MAX_PLUS if maximize else MIN_PLUS)


def last_passage(env: Environment, source: Optional[Sequence[int]] = None,
                 target: Optional[Sequence[int]] = None) -> PassageField:
    """``T(source, v) = max over directed paths of the total weight``."""
    return _passage(env, source, target, True)


def first_passage(env: Environment, source: Optional[Sequence[int]] = None,
                  target: Optional[Sequence[int]] = None) -> PassageField:
    """Minimal directed path weight from ``source`` to every vertex."""
    return _passage(env, source, target, False)


def path_weight(env: Environment, vertices: np.ndarray) -> float:
    """Total weight of a directed path, summed forward from the source."""
    total = 0.0
    for a, b in zip(vertices[:-1], vertices[1:]):
        j = int(np.argmax(b - a))
        total = total + env.weight(a, j)
    return total


def steps_to_vertices(source: Sequence[int], steps: np.ndarray) -> np.ndarray:
    source = np.asarray(source, dtype=np.int64)
    d = source.size
    moves = np.zeros((len(steps) + 1, d), dtype=np.int64)
    if len(steps):
        moves[np.arange(1, len(steps) + 1), np.asarray(steps, dtype=np.int64)] = 1
    return source + np.cumsum(moves, axis=0)


def geodesic(field: PassageField, env: Environment, target) -> Geodesic:
    """An optimal path into ``target``, replayed so its weight equals the field value.

    Ties go to the predecessor with the largest direction index; the forward
    path then takes direction 0 until it is forced off it.
    """
    target = as_vertex(target)
    rel = vsub(target, field.source)
    if not field.box.contains(rel):
        raise ValueError(f"target {target} outside passage field")
    if not np.isfinite(field.value[rel]):
        raise ValueError(f"target {target} unreachable")
    sub = env.window(field.source, tuple(s + c for s, c in zip(field.source, field.box.corner)))
    shape = np.asarray(field.box.shape, dtype=np.int64)
    flat_target = int(np.ravel_multi_index(rel, field.box.shape))
    steps = _kernels.backtrack(field.value.reshape(-1), sub.flat_weights(), shape, flat_target)
    if len(steps) != sum(rel):
        raise ValueError(f"target {target} unreachable")
    verts = steps_to_vertices(field.source, steps)
    return Geodesic(verts, path_weight(env, verts))


def write_geodesic_csv(path_obj: Geodesic, path: str | Path) -> Path:
    path = Path(path)
    d = path_obj.vertices.shape[1]
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(["step"] + [f"x{k}" for k in range(d)])
        for i, v in enumerate(path_obj.vertices):
            wr.writerow([i] + [int(c) for c in v])
    return path
