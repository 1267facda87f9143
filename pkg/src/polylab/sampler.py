"""Exact sampling from the polymer measure by backward decomposition.

From the endpoint, the predecessor ``u = v - e_j`` is drawn with probability
``exp(log Z(u) - beta tau(u, v) - log Z(v))``.  Multiplying these along the
path telescopes to ``exp(-beta tau(gamma)) / Z``, so every path is drawn with
its Gibbs weight.  Sample ``i`` consumes its own counter-based uniform stream,
so results do not depend on batching or worker count.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from . import _kernels
from .environment import Environment
from .lattice import as_vertex, point_segment_distance, vsub
from .lpp import steps_to_vertices
from .polymer import FreeEnergyField

_SAMPLER_TAG = 0x5A3


@dataclass(frozen=True, eq=False)
class PathSample:
    vertices: np.ndarray  # (L + 1, d)
    max_deviation: float

    @property
    def steps(self) -> np.ndarray:
        return np.argmax(np.diff(self.vertices, axis=0), axis=1)


def transversal_deviation(path) -> float:
    """Max distance of the path's vertices to the segment joining its ends."""
    verts = np.asarray(path.vertices if isinstance(path, PathSample) else path)
    if verts.size == 0:
        raise ValueError("empty path")
    rel = verts - verts[0]
    if not rel[-1].any():
        return 0.0
    return float(np.max(point_segment_distance(rel, rel[-1])))


def _prepare(field: FreeEnergyField, env: Environment, endpoint):
    endpoint = as_vertex(endpoint)
    rel = vsub(endpoint, field.source)
    if not field.box.contains(rel):
        raise ValueError(f"endpoint {endpoint} outside field box")
    if field.mask.kind != "full":
        raise ValueError("sampling requires a field computed with the full mask")
    if field.logz[rel] == -math.inf:
        raise ValueError(f"endpoint {endpoint} unreachable")
    hi = tuple(s + c for s, c in zip(field.source, field.box.corner))
    sub = env.window(field.source, hi)
    return rel, sub


def sample_steps(field: FreeEnergyField, env: Environment, endpoint, n_samples: int,
                 seed: int, first_index: int = 0) -> np.ndarray:
    """Direction sequences ``(n_samples, |endpoint - source|_1)`` of sampled paths."""
    rel, sub = _prepare(field, env, endpoint)
    length = sum(rel)
    u = _kernels.stream_uniforms(np.uint64(int(seed) % 2**64), _SAMPLER_TAG, int(first_index),
                                 int(n_samples), length)
    shape = np.asarray(field.box.shape, dtype=np.int64)
    flat_target = int(np.ravel_multi_index(rel, field.box.shape))
    return _kernels.sample_backward(field.logz.reshape(-1), sub.flat_weights(), field.beta, shape,
                                    flat_target, u)


def sample_path(field: FreeEnergyField, env: Environment, endpoint, seed: int,
                index: int = 0) -> PathSample:
    steps = sample_steps(field, env, endpoint, 1, seed, first_index=index)[0]
    verts = steps_to_vertices(field.source, steps)
    return PathSample(verts, transversal_deviation(verts))


def sample_paths(field: FreeEnergyField, env: Environment, endpoint, n_samples: int,
                 seed: int) -> list[PathSample]:
    steps = sample_steps(field, env, endpoint, n_samples, seed)
    out = []
    for row in steps:
        verts = steps_to_vertices(field.source, row)
        out.append(PathSample(verts, transversal_deviation(verts)))
    return out


def backward_probabilities(field: FreeEnergyField, env: Environment, v) -> np.ndarray:
    """One-step backward law at ``v``: probability of arriving from ``v - e_j``."""
    v = as_vertex(v)
    rel = vsub(v, field.source)
    lv = field.logz[rel]
    out = np.zeros(field.box.d)
    for j in range(field.box.d):
        if rel[j] == 0:
            continue
        u = list(v)
        u[j] -= 1
        lu = field.logz[vsub(u, field.source)]
        if lu > -math.inf:
            out[j] = math.exp(lu - field.beta * env.weight(u, j) - lv)
    return out


def write_samples_csv(samples: Sequence[PathSample], path: str | Path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        d = samples[0].vertices.shape[1] if samples else 0
        wr.writerow(["sample", "step"] + [f"x{k}" for k in range(d)])
        for i, s in enumerate(samples):
            for t, v in enumerate(s.vertices):
                wr.writerow([i, t] + [int(c) for c in v])
    return path
