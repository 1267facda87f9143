import math

import numpy as np
import pytest

from polylab.environment import WeightDistribution as W
from polylab.errors import EstimationError, UnboundedDistributionError
from polylab.estimators import (EnsembleSpec, OffsetSpec, analytic_shape, bridge_excess,
                                concentration_tail, constant_shape, corner_growth_shape,
                                delta_f_variance, estimate_limit_shape, mean_excess_curve)
from polylab.estimators.diagnostics import variance_se, wilson_interval
from polylab.lattice import entropy, log_count_paths


def test_offset_spec_geometry():
    for n, xp in [(64, 0.7), (100, 0.5), (1000, 0.66), (16, 0.3)]:
        off = OffsetSpec(xp, n)
        v = np.asarray(off.offset)
        assert v.sum() == 0
        lo, hi = off.window
        assert lo - 1 <= off.norm <= hi + 1
        assert np.linalg.norm(v) == pytest.approx(off.norm)
    with pytest.raises(ValueError):
        OffsetSpec(1.0, 10)
    with pytest.raises(ValueError):
        OffsetSpec(0.5, 10, d=1)


def test_delta_f_constant_zero():
    rep = delta_f_variance(EnsembleSpec(W.constant(1.0), (32,), 3), 32, 0.6)
    assert rep.var_delta == 0.0


def test_delta_f_disjoint_doubles_variance():
    spec = EnsembleSpec(W.bernoulli(0.5), (10,), 2000, master_seed=3)
    rep = delta_f_variance(spec, 10, 0.95)
    # the two paths live in disjoint regions: Var(F1 - F2) = 2 Var F
    assert rep.offset.k > 10
    assert abs(rep.var_delta - 2 * rep.var_f) < 3 * math.hypot(rep.se_delta, 2 * rep.se_f)


def test_delta_f_lattice_too_small():
    spec = EnsembleSpec(W.bernoulli(0.5), (16,), 2)
    with pytest.raises(EstimationError, match="too small"):
        delta_f_variance(spec, 16, 0.7, lattice=((0, 0), (16, 16)))


@pytest.mark.slow
def test_delta_f_self_oracle():
    a = delta_f_variance(EnsembleSpec(W.bernoulli(0.5), (64,), 500, master_seed=1), 64, 0.7)
    b = delta_f_variance(EnsembleSpec(W.bernoulli(0.5), (64,), 500, master_seed=2), 64, 0.7)
    assert abs(a.var_delta - b.var_delta) <= 3 * math.hypot(a.se_delta, b.se_delta)


def test_variance_se_normal():
    x = np.random.default_rng(0).standard_normal(20000)
    s2, se = variance_se(x)
    assert s2 == pytest.approx(1.0, abs=0.05)
    assert se == pytest.approx(math.sqrt(2 / 20000), rel=0.1)


def test_bridge_excess_closed_form():
    f = constant_shape(1.0)
    n = 40
    assert bridge_excess(f, (n / 2, n / 2), n)[0] == pytest.approx(0.0, abs=1e-12)
    val, se = bridge_excess(f, (3 * n / 4, n / 4), n)
    assert val == pytest.approx(n * 2 * (math.log(2) - entropy((0.75, 0.25))), rel=1e-12)
    assert se == 0.0
    with pytest.raises(ValueError):
        bridge_excess(f, (n + 1, 0), n)


def test_bridge_excess_with_shape_estimate():
    spec = EnsembleSpec(W.constant(1.0), (60,), 2)
    sh = estimate_limit_shape(spec, [[1, 1], [3, 1], [1, 3]], containment_fractions=())
    val, se = bridge_excess(sh, (30, 10), 40)
    assert se == 0.0
    assert val > 0
    half = bridge_excess(analytic_shape(constant_shape(1.0), [[1, 1]]), (20, 20), 40)
    assert half[0] == pytest.approx(0.0, abs=1e-12)


def test_bridge_excess_growth_reference_curve():
    f = corner_growth_shape()
    ns = np.array([2 ** k for k in range(8, 14)], dtype=float)
    ex = []
    for n in ns:
        w = n ** 0.8 / math.sqrt(2)
        ex.append(-bridge_excess(f, (n / 2 + w, n / 2 - w), n)[0])
    slope = np.polyfit(np.log(ns), np.log(ex), 1)[0]
    assert abs(slope - 0.6) <= 0.2


def test_mean_excess_constant_log_law():
    spec = EnsembleSpec(W.constant(1.0), (16, 32, 64, 128, 256, 512), 2)
    cur = mean_excess_curve(spec, f_e=2.0)
    expected = [2 * n * math.log(2) - log_count_paths((n, n)) for n in spec.sizes]
    np.testing.assert_allclose(cur.excess, expected, rtol=1e-10)
    assert abs(cur.log_fit.slope - 0.5) <= 0.05
    assert np.isfinite(cur.excess[0]) and np.isfinite(cur.se[0])


def test_mean_excess_extrapolated_f_e_has_bias_bound():
    spec = EnsembleSpec(W.constant(1.0), (16, 32, 64), 2)
    cur = mean_excess_curve(spec)
    assert cur.f_e_bias > 0 and cur.f_e == pytest.approx(2.0, abs=0.05)


@pytest.mark.slow
def test_mean_excess_lpp_bounded_relative_to_cube_root():
    spec = EnsembleSpec(W.exponential(), (64, 128, 256, 512, 1024), 50, model="lpp")
    cur = mean_excess_curve(spec)
    ratio = np.abs(cur.excess) / np.asarray(spec.sizes) ** (1 / 3)
    assert ratio.max() < 10 * max(ratio.min(), 1.0)


def test_concentration_constant_and_t0():
    rep = concentration_tail(EnsembleSpec(W.constant(1.0), (1,), 50), (5, 5), [0.0, 0.5, 1.0])
    assert rep.exceed.tolist() == [0.0, 0.0, 0.0]
    assert rep.bound[0] == 2.0
    assert rep.passes.all()


def test_concentration_bound_value():
    rep = concentration_tail(EnsembleSpec(W.bernoulli(0.5), (1,), 500), (10, 10), [3.0])
    assert rep.bound[0] == pytest.approx(2 * math.exp(-4.5))
    assert rep.bound[0] == pytest.approx(0.02222, abs=1e-5)
    assert rep.passes.all()


def test_concentration_refuses_unbounded():
    with pytest.raises(UnboundedDistributionError, match="unbounded"):
        concentration_tail(EnsembleSpec(W.exponential(), (1,), 10), (5, 5), [1.0])


def test_wilson_interval():
    lo, hi = wilson_interval(np.array([0, 50, 100]), 100)
    assert lo[0] == 0.0 and hi[2] == 1.0
    assert lo[1] < 0.5 < hi[1]
