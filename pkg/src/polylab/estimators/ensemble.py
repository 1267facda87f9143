"""Replicate ensembles: specs, seed derivation and order-preserving parallel maps."""
from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable, Optional, Sequence

import numpy as np

from ..environment import Environment, WeightDistribution, generate, shift, truncate
from ..lattice import Box, Vertex, as_vertex, vsub
from ..lpp import last_passage
from ..polymer import PolymerParams, log_partition

log = logging.getLogger(__name__)

WORKERS_ENV = "POLYLAB_WORKERS"
MODELS = ("polymer", "lpp")


def default_workers() -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class EnsembleSpec:
    dist: WeightDistribution
    sizes: tuple[int, ...]
    replicates: int
    master_seed: int = 0
    beta: float = 1.0
    model: str = "polymer"
    d: int = 2
    shift: float = 0.0
    truncate: Optional[float] = None

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sizes)
        object.__setattr__(self, "sizes", sizes)
        if not sizes or any(n < 1 for n in sizes):
            raise ValueError("sizes must be positive integers")
        if any(a >= b for a, b in zip(sizes, sizes[1:])):
            raise ValueError("sizes must be strictly increasing")
        if self.replicates < 1:
            raise ValueError("need at least one replicate")
        if self.model not in MODELS:
            raise ValueError(f"model must be one of {MODELS}")
        if self.d < 1:
            raise ValueError("dimension must be >= 1")
        PolymerParams(self.beta)

    @property
    def params(self) -> PolymerParams:
        return PolymerParams(self.beta)

    @property
    def weight_bound(self) -> Optional[float]:
        """Almost-sure upper bound of the (transformed) weights, if any."""
        ub = self.dist.upper_bound
        if self.truncate is not None:
            ub = self.truncate if ub is None else min(ub, self.truncate)
        if ub is None:
            return None
        return ub + self.shift

    def seed(self, size_index: int, rep: int) -> int:
        return replicate_seed(self.master_seed, size_index, rep)

    def environment(self, size_index: int, rep: int, lo: Sequence[int],
                    hi: Sequence[int]) -> Environment:
        """The replicate's environment on ``lo <= v <= hi`` (global coordinates)."""
        lo, hi = as_vertex(lo), as_vertex(hi)
        env = generate(self.dist, Box(vsub(hi, lo)), self.seed(size_index, rep), origin=lo)
        if self.truncate is not None:
            env = truncate(env, self.truncate)
        if self.shift:
            env = shift(env, self.shift)
        return env

    def passage_values(self, env: Environment, source=None, target=None) -> np.ndarray:
        """Free energies (polymer) or last-passage times (lpp) over the box from ``source``."""
        if self.model == "lpp":
            return np.asarray(last_passage(env, source, target).value)
        return log_partition(env, self.params, source, target=target).free_energies()


def replicate_seed(master_seed: int, size_index: int, rep: int) -> int:
    """64-bit seed for one replicate; a pure function of its indices."""
    state = np.random.SeedSequence([int(master_seed) % 2**63, int(size_index), int(rep)])
    lo, hi = state.generate_state(2, np.uint32)
    return int(hi) << 32 | int(lo)


def bootstrap_rng(master_seed: int, tag: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(master_seed) % 2**63, 0xB007, tag]))


def run_tasks(fn: Callable, tasks: Sequence, workers: Optional[int] = None) -> list:
    """``[fn(t) for t in tasks]``, optionally on a process pool; order preserved."""
    workers = default_workers() if workers is None else int(workers)
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    chunk = max(1, len(tasks) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunk))


def require_spread(spec: EnsembleSpec, what: str) -> None:
    if spec.replicates < 2:
        raise ValueError(f"{what} needs at least 2 replicates per size")


def diagonal_target(spec: EnsembleSpec, n: int) -> Vertex:
    return (int(n),) * spec.d


def _endpoint_task(args):
    spec, i, rep, target = args
    env = spec.environment(i, rep, (0,) * spec.d, target)
    vals = spec.passage_values(env)
    return float(vals[tuple(target)])


def endpoint_values(spec: EnsembleSpec, targets: Sequence[Vertex],
                    workers: Optional[int] = None) -> np.ndarray:
    """``(k, m)`` array of F(0, target_i) (or T) over replicates, one target per size."""
    tasks = [(spec, i, r, tuple(targets[i]))
             for i in range(len(spec.sizes)) for r in range(spec.replicates)]
    vals = run_tasks(_endpoint_task, tasks, workers)
    return np.asarray(vals, dtype=float).reshape(len(spec.sizes), spec.replicates)


def fit_window(k: int, window: Optional[tuple[int, int]] = None) -> tuple[int, int]:
    """Index range ``[start, stop)`` of sizes used in a fit.

    Default drops the smallest ``ceil(k/3)`` sizes, keeping at least two.
    """
    if window is not None:
        start, stop = int(window[0]), int(window[1])
        if not (0 <= start < stop <= k) or stop - start < 2:
            raise ValueError(f"fit window {window} invalid for {k} sizes")
        return start, stop
    if k < 2:
        raise ValueError("need at least two sizes for a fit")
    return min(math.ceil(k / 3), k - 2), k
