import math
from collections import Counter

import numpy as np
import pytest

from polylab.environment import WeightDistribution as W, generate
from polylab.lattice import Box
from polylab.oracle import oracle_path_law
from polylab.polymer import confinement_probability, log_partition
from polylab.sampler import (PathSample, backward_probabilities, sample_path, sample_paths,
                             sample_steps, transversal_deviation, write_samples_csv)


def test_constant_env_symmetry():
    env = generate(W.constant(1.0), Box((1, 1)), 0)
    field = log_partition(env, 1.0)
    steps = sample_steps(field, env, (1, 1), 20000, seed=3)
    frac = np.mean(steps[:, 0] == 0)
    assert abs(frac - 0.5) < 4 * math.sqrt(0.25 / 20000)
    np.testing.assert_allclose(backward_probabilities(field, env, (1, 1)), [0.5, 0.5])


def test_axis_endpoint_unique_path():
    env = generate(W.exponential(), Box((5, 3)), 2)
    field = log_partition(env, 1.0)
    for s in sample_paths(field, env, (5, 0), 5, seed=1):
        assert s.max_deviation == 0.0
        assert [tuple(v) for v in s.vertices] == [(k, 0) for k in range(6)]


def test_exact_law_small_tv():
    env = generate(W.exponential(), Box((3, 3)), 17)
    field = log_partition(env, 1.0)
    law = oracle_path_law(env, 1.0, (3, 3))
    steps = sample_steps(field, env, (3, 3), 50000, seed=5)
    counts = Counter(map(tuple, steps.tolist()))
    tv = 0.5 * sum(abs(counts.get(k, 0) / 50000 - p) for k, p in law.items())
    assert tv < 0.02


def test_backward_probabilities_sum_to_one():
    env = generate(W.uniform(), Box((6, 6)), 4)
    field = log_partition(env, 2.0)
    for v in [(1, 0), (3, 2), (6, 6), (0, 5)]:
        assert backward_probabilities(field, env, v).sum() == pytest.approx(1.0, abs=1e-12)


def test_determinism_and_index_streams():
    env = generate(W.exponential(), Box((8, 8)), 9)
    field = log_partition(env, 1.0)
    a = sample_steps(field, env, (8, 8), 10, seed=7)
    b = sample_steps(field, env, (8, 8), 10, seed=7)
    np.testing.assert_array_equal(a, b)
    single = sample_path(field, env, (8, 8), seed=7, index=4)
    np.testing.assert_array_equal(single.steps, a[4])


def test_confinement_agrees_with_sampling():
    env = generate(W.exponential(), Box((10, 10)), 21)
    field = log_partition(env, 1.0)
    r = 1.6
    p = confinement_probability(env, 1.0, (10, 10), r)
    samples = sample_paths(field, env, (10, 10), 20000, seed=2)
    hits = np.mean([s.max_deviation < r for s in samples])
    assert abs(hits - p) <= 3 * math.sqrt(p * (1 - p) / 20000) + 1e-3


def test_transversal_deviation_examples():
    assert transversal_deviation([(0, 0), (1, 0), (2, 0)]) == 0.0
    assert transversal_deviation([(0, 0), (1, 0), (1, 1)]) == pytest.approx(math.sqrt(2) / 2)
    stair = [(0, 0)]
    for k in range(8):
        x, y = stair[-1]
        stair.append((x + 1, y) if k % 2 == 0 else (x, y + 1))
    assert transversal_deviation(stair) == pytest.approx(math.sqrt(2) / 2)


def test_requires_full_mask_and_reachable():
    from polylab.lattice import Cylinder
    from polylab.polymer import CylinderMask
    env = generate(W.exponential(), Box((3, 3)), 1)
    field = log_partition(env, 1.0, mask=CylinderMask(Cylinder((3, 3), 1.0)))
    with pytest.raises(ValueError):
        sample_path(field, env, (3, 3), seed=0)


def test_samples_csv(tmp_path):
    env = generate(W.exponential(), Box((2, 2)), 1)
    field = log_partition(env, 1.0)
    path = write_samples_csv(sample_paths(field, env, (2, 2), 2, seed=0), tmp_path / "s.csv")
    lines = path.read_text().splitlines()
    assert lines[0] == "sample,step,x0,x1" and len(lines) == 1 + 2 * 5
