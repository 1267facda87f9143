"""Exit criteria, each at its stated tolerance.

Every test prints one ``PASS``/``FAIL`` line (visible even under output
capture) before asserting.
"""
import itertools
import math
import time
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest

from polylab import oracle
from polylab.environment import WeightDistribution as W, generate, shift, truncate
from polylab.errors import DegenerateEnsembleError
from polylab.estimators import (EnsembleSpec, analytic_shape, angular_fan, antidiagonal_fan,
                                check_relation, concentration_tail, constant_shape, estimate_chi,
                                estimate_kappa, estimate_xi, mean_excess_curve, shape_containment)
from polylab.lattice import Box
from polylab.lpp import first_passage, last_passage
from polylab.polymer import (confinement_probability, log_partition,
                             point_to_point_free_energy, through_points_free_energy)
from polylab.runner import run_experiment
from polylab.sampler import sample_steps

pytestmark = pytest.mark.acceptance


@pytest.fixture
def verdict(capsys):
    def emit(number, ok, detail):
        with capsys.disabled():
            print(f"\n{'PASS' if ok else 'FAIL'} criterion {number}: {detail}")
        return ok
    return emit


def close(a, b, rel=1e-10):
    return abs(a - b) <= rel * max(1.0, abs(b))


# -- 1. oracle equivalence -----------------------------------------------------

def _targets(d, length=10):
    return [x for x in itertools.product(range(length + 1), repeat=d) if sum(x) <= length]


def _oracle_mismatches(env, beta, r):
    d = env.d
    logz = log_partition(env, beta).logz
    lpp = last_passage(env).value
    bad = []
    for x in _targets(d):
        u = tuple(c // 3 for c in x)
        z = tuple(c // 2 for c in x)
        pairs = [
            ("logZ", float(logz[x]), oracle.oracle_log_partition(env, beta, x)),
            ("F(u,x)", point_to_point_free_energy(env, beta, u, x),
             oracle.oracle_free_energy(env, beta, x, source=u)),
            ("F through z", through_points_free_energy(env, beta, (0,) * d, [z], x),
             oracle.oracle_free_energy(env, beta, x, waypoints=[z])),
            ("confinement", confinement_probability(env, beta, x, r),
             oracle.oracle_confinement(env, beta, x, r)),
        ]
        bad += [(name, x) for name, a, b in pairs if not close(a, b)]
        if float(lpp[x]) != oracle.oracle_last_passage(env, x):
            bad.append(("LPP", x))
    return bad


def test_1_oracle_equivalence(verdict):
    t0 = time.perf_counter()
    dists = {"bernoulli": W.bernoulli(0.5), "uniform": W.uniform(), "exponential": W.exponential()}
    bad, checked = [], 0
    for d in (2, 3):
        for name, dist in dists.items():
            for seed in range(100):
                env = generate(dist, Box((10,) * d), seed)
                beta = (0.5, 1.0, 2.0)[seed % 3]
                r = (0.75, 1.5, 3.0)[seed % 3]
                bad += [(d, name, seed) + b for b in _oracle_mismatches(env, beta, r)]
                checked += 1
    elapsed = time.perf_counter() - t0
    ok = not bad and elapsed < 120
    verdict(1, ok, f"{checked} environments, {len(bad)} mismatches, {elapsed:.1f} s (limit 120 s)")
    assert not bad, bad[:5]
    assert elapsed < 120


# -- 2. sampler exactness ------------------------------------------------------

def test_2_sampler_exactness(verdict):
    t0 = time.perf_counter()
    n = 200_000
    worst = 0.0
    for seed in range(20):
        env = generate(W.exponential(), Box((3, 3)), 1000 + seed)
        field = log_partition(env, 1.0)
        law = oracle.oracle_path_law(env, 1.0, (3, 3))
        counts = Counter(map(tuple, sample_steps(field, env, (3, 3), n, seed=seed).tolist()))
        assert set(counts) <= set(law)
        tv = 0.5 * sum(abs(counts.get(k, 0) / n - p) for k, p in law.items())
        worst = max(worst, tv)
    elapsed = time.perf_counter() - t0
    ok = worst <= 0.02 and elapsed < 300
    verdict(2, ok, f"max TV over 20 seeds = {worst:.5f} (limit 0.02), {elapsed:.1f} s")
    assert worst <= 0.02
    assert elapsed < 300


# -- 3. invariant suite --------------------------------------------------------

def _invariant_failures(seed):
    fails = []
    rng = np.random.default_rng(seed)
    env = generate(W.exponential(), Box((12, 12)), seed)
    f = log_partition(env, 1.0).free_energies()
    length = np.indices(f.shape).sum(axis=0)
    if not np.all(f >= 0):
        fails.append("nonnegativity")
    for _ in range(10):
        x = tuple(int(c) for c in rng.integers(0, 7, 2))
        y = tuple(int(c) for c in rng.integers(0, 6, 2))
        xy = (x[0] + y[0], x[1] + y[1])
        if f[xy] > f[x] + point_to_point_free_energy(env, 1.0, x, xy) + 1e-9:
            fails.append(f"subadditivity {x} {y}")
    c = float(rng.uniform(0, 5))
    g = log_partition(shift(env, c), 1.0).free_energies()
    if np.max(np.abs(g - (f + c * length))) > 1e-9 * max(1.0, c * length.max()):
        fails.append("shift covariance")
    level = float(rng.uniform(0, 3))
    if not np.all(log_partition(truncate(env, level), 1.0).free_energies() <= f + 1e-12):
        fails.append("truncation monotonicity")
    t = first_passage(env).value
    for beta in (1.0, 10.0, 100.0):
        fb = log_partition(env, beta).free_energies()
        if not (np.all(t <= fb + 1e-9) and np.all(fb <= t + length * math.log(2) / beta + 1e-9)):
            fails.append(f"bracket beta={beta}")
    env3 = generate(W.uniform(), Box((4, 5, 3)), seed)
    base = log_partition(env3, 1.0).logz
    for perm in itertools.permutations(range(3)):
        if not np.array_equal(log_partition(env3.permuted(perm), 1.0).logz,
                              np.transpose(base, perm)):
            fails.append(f"permutation {perm}")
    return fails


def test_3_invariant_suite(verdict):
    fails = [(seed, f) for seed in range(50) for f in _invariant_failures(seed)]
    verdict(3, not fails, f"50 seeds, {len(fails)} invariant violations")
    assert not fails, fails[:5]


# -- 4. solvable exponents -----------------------------------------------------

def test_4_solvable_exponents(verdict):
    t0 = time.perf_counter()
    spec = EnsembleSpec(W.exponential(), (64, 128, 256, 512, 1024), 200, master_seed=1,
                        model="lpp")
    chi = estimate_chi(spec)
    xi = estimate_xi(spec)
    elapsed = time.perf_counter() - t0
    ok_chi = 0.23 <= chi.value <= 0.43
    ok_xi = 0.56 <= xi.value <= 0.76
    verdict(4, ok_chi and ok_xi and elapsed < 1800,
            f"chi = {chi.value:.4f} in [0.23, 0.43], xi = {xi.value:.4f} in [0.56, 0.76], "
            f"{elapsed:.1f} s")
    assert ok_chi and ok_xi


# -- 5. diffusive baseline -----------------------------------------------------

def test_5_diffusive_baseline(verdict):
    spec = EnsembleSpec(W.constant(1.0), (32, 64, 128, 256, 512), 2)
    xi = estimate_xi(spec)
    raised = False
    try:
        estimate_chi(spec)
    except DegenerateEnsembleError:
        raised = True
    ok = 0.43 <= xi.value <= 0.57 and raised
    verdict(5, ok, f"xi = {xi.value:.4f} in [0.43, 0.57], degenerate chi raised: {raised}")
    assert ok


# -- 6. curvature closed form --------------------------------------------------

def test_6_curvature_closed_form(verdict):
    f = constant_shape(1.0, beta=1.0)
    spot = float(f(np.array([1.1, 0.9])) - f(np.array([1.0, 1.0])))
    offsets = np.geomspace(1e-3, 2e-2, 8)
    sh = analytic_shape(f, np.vstack([[1.0, 1.0], antidiagonal_fan(offsets)]))
    kappa = estimate_kappa(sh).value
    ok = abs(kappa - 2.0) <= 1e-3 and abs(spot - 0.010016) <= 1e-6
    verdict(6, ok, f"kappa = {kappa:.6f} (2 +- 0.001), spot = {spot:.7f} (0.010016 +- 1e-6)")
    assert ok


# -- 7. relation identities ----------------------------------------------------

def test_7_relation_identities(verdict):
    r1 = check_relation(Fraction(1, 3), Fraction(2, 3), 2).residual
    r2 = check_relation(0, Fraction(1, 2), 2).residual
    ok = r1 == 0 and r2 == 0
    verdict(7, ok, f"residuals {r1} and {r2} (exactly 0)")
    assert ok


# -- 8. concentration ----------------------------------------------------------

def test_8_concentration(verdict):
    t0 = time.perf_counter()
    spec = EnsembleSpec(W.bernoulli(0.5, 0.0, 1.0), (1,), 10_000, master_seed=8)
    rep = concentration_tail(spec, (20, 20), [1.0, 2.0, 3.0])
    elapsed = time.perf_counter() - t0
    ok = bool(rep.passes.all()) and elapsed < 600
    detail = ", ".join(f"t={t:g}: {p:.4f} <= {b:.4f} + 3*{s:.4f}"
                       for t, p, b, s in zip(rep.t, rep.exceed, rep.bound, rep.sigma_mc))
    verdict(8, ok, f"{detail}, {elapsed:.1f} s")
    assert ok


# -- 9. mean-excess log law ----------------------------------------------------

def test_9_mean_excess_log_law(verdict):
    spec = EnsembleSpec(W.constant(1.0), (16, 32, 64, 128, 256, 512), 2)
    slope = mean_excess_curve(spec, f_e=2.0, window=(0, 6)).log_fit.slope
    ok = abs(slope - 0.5) <= 0.05
    verdict(9, ok, f"log-n slope = {slope:.4f} (0.5 +- 10%)")
    assert ok


# -- 10. shape containment -----------------------------------------------------

def test_10_shape_containment(verdict):
    t = 200.0  # boundary at |x|_1 = 200 on the diagonal
    env = generate(W.constant(1.0), Box((260, 260)), 0)
    values = log_partition(env, 1.0).free_energies()
    rep = shape_containment(values, angular_fan(17), t, constant_shape(1.0))
    ok = bool(rep.resolved.all()) and rep.eps <= 0.02
    verdict(10, ok, f"eps = {rep.eps:.4f} over 17 directions (limit 0.02)")
    assert ok


# -- 11. determinism -----------------------------------------------------------

def _csv_bytes(run_dir):
    return {p.name: p.read_bytes() for p in sorted(run_dir.glob("*.csv"))}


def test_11_determinism(tmp_path, verdict):
    cfg = {
        "model": "lpp", "distribution": {"kind": "exponential", "rate": 1},
        "sizes": [8, 16, 32], "replicates": 16, "master_seed": 11, "bootstrap": 200,
        "estimators": {"chi": {}, "xi": {}, "shape": {"n": 32}, "kappa": {"n": 32},
                       "relation": {}, "mean_excess": {}, "delta_f": {"xi_prime": 0.5, "n": 16}},
    }
    runs = {}
    for workers in (1, 4, 8):
        for rep in ("a", "b"):
            out = tmp_path / f"w{workers}{rep}"
            res = run_experiment(dict(cfg, output_dir=str(out), workers=workers))
            runs[(workers, rep)] = _csv_bytes(res.output_dir)
    ref = runs[(1, "a")]
    diffs = [(k, name) for k, files in runs.items() for name in set(files) | set(ref)
             if files.get(name) != ref.get(name)]
    ok = not diffs and len(ref) > 5
    verdict(11, ok, f"{len(ref)} CSV files identical across workers 1/4/8 and reruns: {not diffs}")
    assert ok, diffs[:5]
