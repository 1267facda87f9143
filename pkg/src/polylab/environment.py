"""I.i.d. nonnegative edge-weight environments with counter-based seeding.

Each edge weight is a deterministic function of ``(seed, tail vertex, direction)``:
the uniform driving an edge is a hash of those numbers, pushed through the
inverse CDF of the weight distribution.  Any sub-box therefore regenerates
bit-identically, and coupled variants (truncated, shifted) reuse the same
uniforms edge by edge.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import special

from . import _kernels
from .lattice import Box, Vertex, as_vertex

_KINDS = {
    "constant": ("c",),
    "bernoulli": ("p", "a", "b"),
    "uniform": ("lo", "hi"),
    "exponential": ("rate",),
    "gamma": ("shape", "scale"),
    "log_gamma": ("shape",),
}


class DistributionError(ValueError):
    pass


@dataclass(frozen=True)
class WeightDistribution:
    """Law of a single edge weight.

    ``bernoulli(p, a, b)`` puts mass ``p`` on ``b`` and ``1 - p`` on ``a``.
    ``log_gamma(shape)`` is ``log G`` with ``G ~ Gamma(shape, 1)``; its weights
    can be negative.
    """

    kind: str
    params: tuple[float, ...]

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DistributionError(f"unknown distribution kind {self.kind!r}")
        names = _KINDS[self.kind]
        params = tuple(float(v) for v in self.params)
        if len(params) != len(names):
            raise DistributionError(f"{self.kind} takes parameters {names}, got {params}")
        object.__setattr__(self, "params", params)
        if not all(math.isfinite(v) for v in params):
            raise DistributionError("distribution parameters must be finite")
        kw = dict(zip(names, params))
        k = self.kind
        if k == "constant" and kw["c"] < 0:
            raise DistributionError("constant weight must be >= 0")
        if k == "bernoulli" and not (0 <= kw["p"] <= 1 and 0 <= kw["a"] < kw["b"]):
            raise DistributionError("bernoulli needs p in [0, 1] and 0 <= a < b")
        if k == "uniform" and not (0 <= kw["lo"] <= kw["hi"]):
            raise DistributionError("uniform needs 0 <= lo <= hi")
        if k == "exponential" and not kw["rate"] > 0:
            raise DistributionError("exponential rate must be > 0")
        if k == "gamma" and not (kw["shape"] > 0 and kw["scale"] > 0):
            raise DistributionError("gamma needs shape > 0 and scale > 0")
        if k == "log_gamma" and not kw["shape"] > 0:
            raise DistributionError("log_gamma shape must be > 0")

    @classmethod
    def constant(cls, c: float) -> "WeightDistribution":
        return cls("constant", (c,))

    @classmethod
    def bernoulli(cls, p: float, a: float = 0.0, b: float = 1.0) -> "WeightDistribution":
        return cls("bernoulli", (p, a, b))

    @classmethod
    def uniform(cls, lo: float = 0.0, hi: float = 1.0) -> "WeightDistribution":
        return cls("uniform", (lo, hi))

    @classmethod
    def exponential(cls, rate: float = 1.0) -> "WeightDistribution":
        return cls("exponential", (rate,))

    @classmethod
    def gamma(cls, shape: float, scale: float = 1.0) -> "WeightDistribution":
        return cls("gamma", (shape, scale))

    @classmethod
    def log_gamma(cls, shape: float) -> "WeightDistribution":
        return cls("log_gamma", (shape,))

    @property
    def named_params(self) -> dict[str, float]:
        return dict(zip(_KINDS[self.kind], self.params))

    @property
    def upper_bound(self) -> Optional[float]:
        """Essential supremum when finite, else None."""
        kw = self.named_params
        if self.kind == "constant":
            return kw["c"]
        if self.kind == "bernoulli":
            return kw["b"] if kw["p"] > 0 else kw["a"]
        if self.kind == "uniform":
            return kw["hi"]
        return None

    @property
    def nonnegative(self) -> bool:
        return self.kind != "log_gamma"

    def from_uniform(self, u: np.ndarray) -> np.ndarray:
        """Inverse-CDF transform of uniforms in (0, 1)."""
        kw = self.named_params
        k = self.kind
        if k == "constant":
            return np.full_like(u, kw["c"])
        if k == "bernoulli":
            return np.where(u < kw["p"], kw["b"], kw["a"])
        if k == "uniform":
            return kw["lo"] + (kw["hi"] - kw["lo"]) * u
        if k == "exponential":
            return -np.log1p(-u) / kw["rate"]
        if k == "gamma":
            return special.gammaincinv(kw["shape"], u) * kw["scale"]
        return np.log(special.gammaincinv(kw["shape"], u))

    def to_dict(self) -> dict:
        return {"kind": self.kind, **self.named_params}

    @classmethod
    def from_dict(cls, data: dict) -> "WeightDistribution":
        data = dict(data)
        kind = data.pop("kind", None)
        if kind not in _KINDS:
            raise DistributionError(f"unknown distribution kind {kind!r}")
        names = _KINDS[kind]
        if set(data) != set(names):
            raise DistributionError(f"{kind} takes parameters {names}, got {sorted(data)}")
        return cls(kind, tuple(data[n] for n in names))


@dataclass(frozen=True)
class TruncationSpec:
    level: float

    def __post_init__(self):
        if not (math.isfinite(self.level) and self.level >= 0):
            raise ValueError("truncation level must be finite and >= 0")


@dataclass(frozen=True, eq=False)
class Environment:
    """Edge weights on a box anchored at ``origin``.

    ``weights[j][i]`` is the weight of the edge from lattice point
    ``origin + i`` in direction ``j``.  Edges leaving the box are NaN.
    """

    box: Box
    dist: WeightDistribution
    seed: int
    weights: np.ndarray
    origin: Vertex = ()
    transforms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        if not self.origin:
            object.__setattr__(self, "origin", (0,) * self.box.d)
        self.weights.setflags(write=False)

    @property
    def d(self) -> int:
        return self.box.d

    @property
    def lower(self) -> Vertex:
        return self.origin

    @property
    def upper(self) -> Vertex:
        return tuple(o + c for o, c in zip(self.origin, self.box.corner))

    def contains(self, v: Sequence[int]) -> bool:
        return all(lo <= int(c) <= hi for c, lo, hi in zip(v, self.lower, self.upper))

    def weight(self, v: Sequence[int], j: int) -> float:
        """Weight of the edge ``v -> v + e_j`` (global coordinates)."""
        idx = tuple(int(c) - o for c, o in zip(v, self.origin))
        return float(self.weights[(j,) + idx])

    def window(self, lo: Sequence[int], hi: Sequence[int]) -> "Environment":
        """Sub-environment on the box ``lo <= v <= hi`` (global coordinates)."""
        lo, hi = as_vertex(lo), as_vertex(hi)
        if not (self.contains(lo) and self.contains(hi)) or any(a > b for a, b in zip(lo, hi)):
            raise ValueError(f"window {lo}..{hi} not inside environment {self.lower}..{self.upper}")
        sl = tuple(slice(a - o, b - o + 1) for a, b, o in zip(lo, hi, self.origin))
        w = np.array(self.weights[(slice(None),) + sl], dtype=np.float64, order="C")
        _mask_outgoing(w)
        return Environment(Box(tuple(b - a for a, b in zip(lo, hi))), self.dist, self.seed, w, lo,
                           self.transforms)

    def flat_weights(self) -> np.ndarray:
        """``(d, N)`` C-contiguous view used by the kernels."""
        return np.ascontiguousarray(self.weights).reshape(self.d, -1)

    def permuted(self, perm: Sequence[int]) -> "Environment":
        """Relabel coordinates: new axis ``k`` is old axis ``perm[k]``.

        Requires an environment anchored at the origin.
        """
        perm = tuple(int(p) for p in perm)
        if sorted(perm) != list(range(self.d)):
            raise ValueError("not a permutation")
        w = np.transpose(self.weights, (0,) + tuple(p + 1 for p in perm))[list(perm)]
        corner = tuple(self.box.corner[p] for p in perm)
        origin = tuple(self.origin[p] for p in perm)
        return Environment(Box(corner), self.dist, self.seed, np.ascontiguousarray(w), origin,
                           self.transforms + (("permute", perm),))


def _mask_outgoing(w: np.ndarray) -> None:
    d = w.shape[0]
    for j in range(d):
        idx = [j] + [slice(None)] * d
        idx[j + 1] = -1
        w[tuple(idx)] = np.nan


def generate(dist: WeightDistribution, box: Box, seed: int,
             origin: Optional[Sequence[int]] = None) -> Environment:
    """Draw the environment on ``box`` (anchored at ``origin``) for ``seed``."""
    if not isinstance(dist, WeightDistribution):
        raise DistributionError("dist must be a WeightDistribution")
    origin = (0,) * box.d if origin is None else as_vertex(origin)
    if len(origin) != box.d:
        raise ValueError("origin dimension does not match box")
    u = _kernels.edge_uniforms(np.uint64(int(seed) % 2**64), np.asarray(origin, dtype=np.int64),
                               np.asarray(box.shape, dtype=np.int64))
    w = dist.from_uniform(u).astype(np.float64).reshape((box.d,) + box.shape)
    _mask_outgoing(w)
    return Environment(box, dist, int(seed), w, origin)


def truncate(env: Environment, spec: TruncationSpec | float) -> Environment:
    """Coupled environment with every weight replaced by ``min(w, L)``."""
    level = spec.level if isinstance(spec, TruncationSpec) else TruncationSpec(float(spec)).level
    w = np.minimum(env.weights, level)
    return replace(env, weights=w, transforms=env.transforms + (("truncate", level),))


def shift(env: Environment, c: float) -> Environment:
    """Coupled environment with every weight replaced by ``w + c``."""
    c = float(c)
    if not math.isfinite(c):
        raise ValueError("shift must be finite")
    low = float(np.nanmin(env.weights)) if np.any(~np.isnan(env.weights)) else 0.0
    if env.dist.nonnegative and low + c < 0:
        raise ValueError(f"shift {c} would make weights negative (min weight {low})")
    return replace(env, weights=env.weights + c, transforms=env.transforms + (("shift", c),))


def _fmt(x: float) -> str:
    return "%.17g" % x


def write_csv(env: Environment, path: str | Path) -> Path:
    """Snapshot: ``#``-prefixed header then one row per in-box edge."""
    path = Path(path)
    d = env.d
    with path.open("w", newline="") as fh:
        fh.write(f"# d={d}\n")
        fh.write(f"# corner={','.join(map(str, env.box.corner))}\n")
        fh.write(f"# origin={','.join(map(str, env.origin))}\n")
        fh.write(f"# dist={json.dumps(env.dist.to_dict(), sort_keys=True)}\n")
        fh.write(f"# seed={env.seed}\n")
        fh.write(f"# transforms={json.dumps([list(t) for t in env.transforms])}\n")
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow([f"x{k}" for k in range(d)] + ["direction", "weight"])
        idx = np.indices(env.box.shape).reshape(d, -1).T
        for j in range(d):
            flat = env.weights[j].reshape(-1)
            keep = ~np.isnan(flat)
            for i in np.flatnonzero(keep):
                coords = [int(c) + o for c, o in zip(idx[i], env.origin)]
                wr.writerow(coords + [j, _fmt(flat[i])])
    return path


def read_csv(path: str | Path) -> Environment:
    header = {}
    rows = []
    with Path(path).open() as fh:
        for line in fh:
            if line.startswith("#"):
                key, _, val = line[1:].strip().partition("=")
                header[key.strip()] = val
                continue
            rows.append(line)
    d = int(header["d"])
    corner = as_vertex(map(int, header["corner"].split(",")))
    origin = as_vertex(map(int, header["origin"].split(",")))
    dist = WeightDistribution.from_dict(json.loads(header["dist"]))
    transforms = tuple(tuple(t) if t[0] != "permute" else (t[0], tuple(t[1]))
                       for t in json.loads(header.get("transforms", "[]")))
    box = Box(corner)
    w = np.full((d,) + box.shape, np.nan)
    reader = csv.reader(rows[1:])
    for row in reader:
        coords = tuple(int(c) - o for c, o in zip(row[:d], origin))
        w[(int(row[d]),) + coords] = float(row[d + 1])
    return Environment(box, dist, int(header["seed"]), w, origin, transforms)
