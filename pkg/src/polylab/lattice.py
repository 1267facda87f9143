"""Lattice primitives: vertices, boxes, cylinders, slabs and path counting.

Vertices are plain integer tuples.  Arrays of vertices are ``(N, d)`` integer
ndarrays.  Boxes are axis aligned with their lower corner at the origin;
anything anchored elsewhere is translated before it reaches a box.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

Vertex = tuple[int, ...]


def as_vertex(v: Iterable) -> Vertex:
    """Coerce an iterable of integral numbers to a vertex tuple."""
    out = []
    for c in v:
        ci = int(c)
        if ci != c:
            raise ValueError(f"non-integer lattice coordinate {c!r}")
        out.append(ci)
    if not out:
        raise ValueError("vertex must have dimension >= 1")
    return tuple(out)


def l1(v: Sequence[int]) -> int:
    return int(sum(abs(int(c)) for c in v))


def vsub(a: Sequence[int], b: Sequence[int]) -> Vertex:
    return tuple(int(x) - int(y) for x, y in zip(a, b))


def vadd(a: Sequence[int], b: Sequence[int]) -> Vertex:
    return tuple(int(x) + int(y) for x, y in zip(a, b))


def leq(a: Sequence[int], b: Sequence[int]) -> bool:
    """Componentwise order ``a <= b``."""
    return all(int(x) <= int(y) for x, y in zip(a, b))


def diagonal(d: int, n: int = 1) -> Vertex:
    """The vertex ``n * (1, ..., 1)``."""
    return (int(n),) * d


def round_to_lattice(u: Sequence[float]) -> Vertex:
    """Return the lattice point ``[u]`` with ``u - [u]`` in ``[-1/2, 1/2)^d``."""
    arr = np.asarray(u, dtype=float)
    if not np.all(np.isfinite(arr)):
        raise ValueError("cannot round non-finite coordinates")
    return tuple(int(c) for c in np.floor(arr + 0.5))


def point_segment_distance(p, x) -> np.ndarray | float:
    """Euclidean distance from ``p`` to the closed segment from 0 to ``x``.

    ``p`` may be a single point ``(d,)`` or a stack of points ``(N, d)``.
    """
    x = np.asarray(x, dtype=float)
    xx = float(x @ x)
    if xx == 0.0:
        raise ValueError("segment endpoint must be nonzero")
    p = np.asarray(p, dtype=float)
    t = np.clip((p @ x) / xx, 0.0, 1.0)
    diff = p - np.multiply.outer(t, x)
    dist = np.sqrt(np.sum(diff * diff, axis=-1))
    return float(dist) if np.ndim(dist) == 0 else dist


def box_distances(shape: Sequence[int], x: Sequence[float]) -> np.ndarray:
    """Distances of every vertex of a box (array ``shape``) to segment [0, x]."""
    idx = np.indices(tuple(shape)).reshape(len(shape), -1).T
    return point_segment_distance(idx, x).reshape(tuple(shape))


@dataclass(frozen=True)
class Box:
    """All lattice points ``0 <= p <= corner``."""

    corner: Vertex

    def __post_init__(self):
        corner = as_vertex(self.corner)
        if any(c < 0 for c in corner):
            raise ValueError(f"box corner must be nonnegative, got {corner}")
        object.__setattr__(self, "corner", corner)

    @property
    def d(self) -> int:
        return len(self.corner)

    @property
    def shape(self) -> tuple[int, ...]:
        return tuple(c + 1 for c in self.corner)

    @property
    def size(self) -> int:
        return math.prod(self.shape)

    def contains(self, v: Sequence[int]) -> bool:
        return len(v) == self.d and all(0 <= int(c) <= k for c, k in zip(v, self.corner))


@dataclass(frozen=True)
class Cylinder:
    """Lattice points at distance strictly less than ``radius`` from [0, endpoint]."""

    endpoint: tuple[float, ...]
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "endpoint", tuple(float(c) for c in self.endpoint))
        if not self.radius > 0:
            raise ValueError("cylinder radius must be positive")

    def contains(self, v: Sequence[float]) -> bool:
        return point_segment_distance(v, self.endpoint) < self.radius

    def mask(self, shape: Sequence[int]) -> np.ndarray:
        return box_distances(shape, self.endpoint) < self.radius


def cylinder_contains(c: Cylinder, v: Sequence[float]) -> bool:
    return c.contains(v)


@dataclass(frozen=True)
class Slab:
    """Two diagonal planes ``{v . e = a}`` and ``{v . e = b}``.

    With ``radius`` set, only plane points whose component transverse to the
    diagonal lies within ``radius`` of the transverse segment [0, offset] count
    as plane points (a section of the convex hull of a cylinder and its
    translate by ``offset``).  Without it the planes are unbounded.
    """

    a: int
    b: int
    radius: Optional[float] = None
    offset: Optional[tuple[int, ...]] = None

    def __post_init__(self):
        if not 0 <= self.a <= self.b:
            raise ValueError(f"need 0 <= a <= b, got a={self.a}, b={self.b}")
        if self.radius is not None and not self.radius > 0:
            raise ValueError("slab radius must be positive")

    def admissible(self, pts: np.ndarray) -> np.ndarray:
        """Which of the points ``(N, d)`` (already on a plane) are plane points."""
        pts = np.asarray(pts, dtype=float)
        if self.radius is None:
            return np.ones(pts.shape[0], dtype=bool)
        d = pts.shape[1]
        e = np.ones(d) / math.sqrt(d)
        perp = pts - np.outer(pts @ e, e)
        off = np.zeros(d) if self.offset is None else np.asarray(self.offset, dtype=float)
        off = off - (off @ e) * e
        if float(off @ off) == 0.0:
            dist = np.sqrt(np.sum(perp * perp, axis=1))
        else:
            dist = point_segment_distance(perp, off)
        return dist < self.radius


def count_paths(x: Sequence[int]) -> int:
    """Number of directed paths from 0 to ``x``: ``|x|_1! / prod x_i!``."""
    x = as_vertex(x)
    if any(c < 0 for c in x):
        return 0
    total, out = 0, 1
    for c in x:
        total += c
        out *= math.comb(total, c)
    return out


def log_count_paths(x: Sequence[int]) -> float:
    """``log count_paths(x)`` via lgamma; finite for very long paths."""
    x = as_vertex(x)
    if any(c < 0 for c in x):
        return -math.inf
    return math.lgamma(sum(x) + 1) - sum(math.lgamma(c + 1) for c in x)


def entropy(p: Sequence[float]) -> float:
    """Shannon entropy (natural log) of a probability vector; 0 log 0 = 0."""
    return -sum(q * math.log(q) for q in p if q > 0)
