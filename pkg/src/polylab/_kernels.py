"""Compiled lattice kernels.

Every kernel works on a box whose source sits at flat index 0, with arrays
flattened in C order.  Edge weights are stored per tail vertex:
``weights[j, u]`` is the weight of the edge ``u -> u + e_j``.

Sweeps visit vertices in wavefront order (by coordinate sum).  Each vertex
reduces over its predecessors with a fixed rule, so the value at a vertex
does not depend on how a level is scheduled.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np
from numba import njit

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_S30 = np.uint64(30)
_S27 = np.uint64(27)
_S31 = np.uint64(31)
_S11 = np.uint64(11)
_INV53 = 1.0 / 9007199254740992.0


@njit(cache=True)
def _mix(z):
    z = (z ^ (z >> _S30)) * _M1
    z = (z ^ (z >> _S27)) * _M2
    return z ^ (z >> _S31)


@njit(cache=True)
def _absorb(h, value, slot):
    return _mix(h ^ _mix(np.uint64(value) + _GOLDEN * np.uint64(slot + 1)))


@njit(cache=True)
def _to_unit(h):
    # midpoint of a 53-bit cell: strictly inside (0, 1)
    return (np.float64(h >> _S11) + 0.5) * _INV53


@njit(cache=True)
def edge_uniforms(seed, origin, shape):
    """Uniforms in (0, 1) keyed by (seed, global vertex coordinates, direction)."""
    d = shape.size
    n = 1
    for k in range(d):
        n *= shape[k]
    out = np.empty((d, n), dtype=np.float64)
    base = _mix(np.uint64(seed) ^ _GOLDEN)
    coords = np.empty(d, dtype=np.int64)
    for idx in range(n):
        rem = idx
        for k in range(d - 1, -1, -1):
            coords[k] = rem % shape[k] + origin[k]
            rem //= shape[k]
        h = base
        for k in range(d):
            h = _absorb(h, coords[k], k)
        for j in range(d):
            out[j, idx] = _to_unit(_absorb(h, j, d))
    return out


@njit(cache=True)
def stream_uniforms(seed, tag, first, count, length):
    """Uniforms keyed by (seed, tag, stream index, step): one row per stream."""
    out = np.empty((count, length), dtype=np.float64)
    base = _absorb(_mix(np.uint64(seed) ^ _GOLDEN), tag, 0)
    for s in range(count):
        h = _absorb(base, first + s, 1)
        for t in range(length):
            out[s, t] = _to_unit(_absorb(h, t, 2))
    return out


@njit(cache=True)
def _wavefront(shape):
    d = shape.size
    n = 1
    top = 0
    for k in range(d):
        n *= shape[k]
        top += shape[k] - 1
    level = np.empty(n, dtype=np.int64)
    counts = np.zeros(top + 2, dtype=np.int64)
    for idx in range(n):
        rem = idx
        s = 0
        for k in range(d - 1, -1, -1):
            s += rem % shape[k]
            rem //= shape[k]
        level[idx] = s
        counts[s + 1] += 1
    for k in range(1, top + 2):
        counts[k] += counts[k - 1]
    order = np.empty(n, dtype=np.int64)
    for idx in range(n):
        s = level[idx]
        order[counts[s]] = idx
        counts[s] += 1
    return order


@lru_cache(maxsize=16)
def _wavefront_cached(shape: tuple) -> np.ndarray:
    order = _wavefront(np.asarray(shape, dtype=np.int64))
    order.setflags(write=False)
    return order


def wavefront_order(shape) -> np.ndarray:
    """Flat indices of a box sorted by anti-diagonal level (stable within level)."""
    return _wavefront_cached(tuple(int(s) for s in shape))


@njit(cache=True)
def _strides(shape):
    d = shape.size
    st = np.empty(d, dtype=np.int64)
    acc = 1
    for k in range(d - 1, -1, -1):
        st[k] = acc
        acc *= shape[k]
    return st


@njit(cache=True)
def log_partition_sweep(weights, beta, allowed, shape, order):
    """log Z from flat index 0 to every vertex, restricted to ``allowed`` vertices."""
    d = shape.size
    n = order.size
    st = _strides(shape)
    out = np.full(n, -np.inf)
    if allowed[0]:
        out[0] = 0.0
    vals = np.empty(d)
    for t in range(1, n):
        v = order[t]
        if not allowed[v]:
            continue
        m = -np.inf
        for j in range(d):
            a = -np.inf
            if (v // st[j]) % shape[j] > 0:
                u = v - st[j]
                lu = out[u]
                if lu > -np.inf:
                    a = lu - beta * weights[j, u]
            vals[j] = a
            if a > m:
                m = a
        if m == -np.inf:
            continue
        # ascending insertion sort: the sum is independent of direction labels
        for i in range(1, d):
            key = vals[i]
            k = i - 1
            while k >= 0 and vals[k] > key:
                vals[k + 1] = vals[k]
                k -= 1
            vals[k + 1] = key
        s = 0.0
        for j in range(d):
            s += np.exp(vals[j] - m)
        out[v] = m + np.log(s)
    return out


@njit(cache=True)
def passage_sweep(weights, shape, order, maximize):
    """Max-plus (last passage) or min-plus (first passage) values from index 0."""
    d = shape.size
    n = order.size
    st = _strides(shape)
    empty = -np.inf if maximize else np.inf
    out = np.full(n, empty)
    out[0] = 0.0
    for t in range(1, n):
        v = order[t]
        best = empty
        for j in range(d):
            if (v // st[j]) % shape[j] > 0:
                u = v - st[j]
                a = out[u] + weights[j, u]
                if maximize:
                    if a > best:
                        best = a
                elif a < best:
                    best = a
        out[v] = best
    return out


@njit(cache=True)
def backtrack(values, weights, shape, target):
    """Directions of an optimal path into ``target`` (forward order).

    Among optimal predecessors the largest direction index wins, which makes
    the forward path use low directions as early as possible.
    """
    d = shape.size
    st = _strides(shape)
    length = 0
    rem = target
    for k in range(d - 1, -1, -1):
        length += rem % shape[k]
        rem //= shape[k]
    steps = np.empty(length, dtype=np.int64)
    v = target
    for t in range(length - 1, -1, -1):
        chosen = -1
        for j in range(d - 1, -1, -1):
            if (v // st[j]) % shape[j] > 0:
                u = v - st[j]
                if values[u] + weights[j, u] == values[v]:
                    chosen = j
                    break
        if chosen < 0:
            return steps[:0]
        steps[t] = chosen
        v = v - st[chosen]
    return steps


@njit(cache=True)
def sample_backward(logz, weights, beta, shape, target, uniforms):
    """Backward Gibbs sampling; row ``s`` of ``uniforms`` drives sample ``s``."""
    d = shape.size
    st = _strides(shape)
    count, length = uniforms.shape
    steps = np.empty((count, length), dtype=np.int8)
    probs = np.empty(d)
    for s in range(count):
        v = target
        for t in range(length - 1, -1, -1):
            lv = logz[v]
            last = -1
            for j in range(d):
                p = 0.0
                if (v // st[j]) % shape[j] > 0:
                    u = v - st[j]
                    lu = logz[u]
                    if lu > -np.inf:
                        p = np.exp(lu - beta * weights[j, u] - lv)
                        last = j
                probs[j] = p
            x = uniforms[s, t]
            chosen = last
            acc = 0.0
            for j in range(d):
                if probs[j] > 0.0:
                    acc += probs[j]
                    if x < acc:
                        chosen = j
                        break
            steps[s, t] = chosen
            v = v - st[chosen]
    return steps
