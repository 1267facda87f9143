import math

import numpy as np
import pytest

from polylab.environment import WeightDistribution as W, generate
from polylab.lattice import Box, count_paths
from polylab.oracle import (CapExceeded, enumerate_paths, oracle_confinement, oracle_log_partition,
                            oracle_path_law)


@pytest.mark.parametrize("x, n", [((1, 1), 2), ((2, 2), 6), ((2, 1, 1), 12), ((3, 3), 20),
                                  ((4, 4), 70)])
def test_enumeration_counts(x, n):
    e = enumerate_paths(x)
    assert len(e) == n == count_paths(x)
    assert len(set(map(tuple, e.steps.tolist()))) == n
    v = e.vertices
    assert np.all(v[:, 0] == 0) and np.all(v[:, -1] == np.asarray(x))


def test_lexicographic_order():
    e = enumerate_paths((1, 1))
    assert e.steps.tolist() == [[0, 1], [1, 0]]
    assert e.paths[0] == ((0, 0), (1, 0), (1, 1))


def test_cap():
    with pytest.raises(CapExceeded):
        enumerate_paths((7, 6))
    assert len(enumerate_paths((7, 6), cap=13)) == count_paths((7, 6))


def test_examples():
    env0 = generate(W.constant(0.0), Box((2, 2)), 0)
    assert oracle_log_partition(env0, 1.0, (1, 1)) == pytest.approx(math.log(2), abs=1e-15)
    envc = generate(W.constant(1.0), Box((2, 2)), 0)
    law = oracle_path_law(envc, 1.0, (2, 2))
    assert len(law) == 6 and all(p == pytest.approx(1 / 6) for p in law.values())
    env = generate(W.exponential(), Box((3, 3)), 5)
    assert oracle_confinement(env, 1.0, (3, 3), math.hypot(3, 3)) == pytest.approx(1.0)
    assert sum(oracle_path_law(env, 1.0, (3, 3)).values()) == pytest.approx(1.0, abs=1e-14)
