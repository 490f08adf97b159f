import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochstab import build_system
from stochstab.distortion import c1_bound, delta1_for, distortion_diagnostic, pull_back_window
from stochstab.errors import ContractionViolated, InvalidParams, NotHyperbolicTime, NotOneDimensional
from stochstab.hyperbolic import HypParams, hyperbolic_times_critical
from stochstab.noise import NoiseKernel
from stochstab.orbits import random_orbit
from stochstab.viana import (
    MAX_DEPTH,
    FoliationField,
    VianaParams,
    boundary_fixed_point,
    central_expansion_average,
    contraction_ratios,
    deep_return_fraction,
    depth,
    depth_statistics,
    expansion_deficit_fraction,
    find_misiurewicz_a0,
    foliation_apply,
    foliation_fixed_point,
    interior_fixed_point,
    lipschitz_estimate,
    quadratic_iterate,
    return_depths,
)


# -- distortion --------------------------------------------------------------

def test_c1_bound_formula():
    r = 0.5 ** (0.5 - 0.25)
    assert c1_bound(0.5, 0.25, 2.0, 1.0) == pytest.approx(math.exp(4 * r / (1 - r)))
    with pytest.raises(ValueError):
        c1_bound(0.5, 0.6, 2.0, 1.0)


def test_doubling_ratio_is_exactly_one():
    s = build_system("doubling")
    k = NoiseKernel.for_system(s, "additive", 0.01)
    tr = random_orbit(s, k, 0.123, 20, seed=1)
    hp = HypParams(0.6, 0.1, s.constants.b_exponent)
    d = distortion_diagnostic(s, k, hp, tr, 10, pair_count=50)
    assert d.observed_max_ratio == 1.0
    assert d.contraction_ok


def test_fig1_distortion_and_contraction():
    f1 = build_system("fig1")
    k = NoiseKernel.for_system(f1, "rotational", 0.01)
    hp = HypParams(0.8, 0.1, f1.constants.b_exponent)
    tr = random_orbit(f1, k, 0.3, 300, delta=hp.delta, seed=2)
    times = hyperbolic_times_critical(tr, hp).times
    assert times.size >= 5
    for n in times[:5]:
        d = distortion_diagnostic(f1, k, hp, tr, int(n), pair_count=40, seed=3, stream=int(n))
        assert d.distortion_ok and d.contraction_ok
        assert d.window[0] < 0 < d.window[1]


def test_distortion_errors():
    f1 = build_system("fig1")
    k = NoiseKernel.for_system(f1, "rotational", 0.01)
    hp = HypParams(0.8, 0.1, 0.25)
    tr = random_orbit(f1, k, 0.3, 50, delta=hp.delta, seed=2)
    missing = [n for n in range(1, 51) if n not in hyperbolic_times_critical(tr, hp)]
    with pytest.raises(NotHyperbolicTime):
        distortion_diagnostic(f1, k, hp, tr, missing[0])
    t = build_system("torus")
    kt = NoiseKernel.for_system(t, "additive", 0.01)
    trt = random_orbit(t, kt, [0.1, 0.2], 10, seed=1)
    with pytest.raises(NotOneDimensional):
        distortion_diagnostic(t, kt, hp, trt, 1)


def test_pull_back_window_maps_onto_target():
    s = build_system("doubling")
    k = NoiseKernel.for_system(s, "additive", 0.01)
    tr = random_orbit(s, k, 0.4, 8, seed=5)
    hp = HypParams(0.6, 0.1, 0.25)
    d1 = delta1_for(hp, s.constants.beta, s.constants.B)
    w = pull_back_window(s, tr, 8, d1)
    # the doubling branch scales by 2 each step, so the window halves each step back
    assert w[0][1] == pytest.approx(d1 / 2 ** 8, rel=1e-6)
    assert w[-1] == (-d1, d1)


def test_deep_window_below_float_range():
    s = build_system("doubling")
    k = NoiseKernel.for_system(s, "additive", 0.01)
    n = 1500  # 2^-1500 underflows a double
    tr = random_orbit(s, k, 0.123, n, seed=4)
    hp = HypParams(0.6, 0.1, s.constants.b_exponent)
    d = distortion_diagnostic(s, k, hp, tr, n, pair_count=20)
    assert d.log_window_width == pytest.approx(math.log(2 * d.delta1) - n * math.log(2), rel=1e-12)
    assert d.observed_max_ratio == 1.0 and d.contraction_ok


# -- quadratic parameter ---------------------------------------------------------

def test_misiurewicz_root():
    root = find_misiurewicz_a0()
    assert 1 < root < 2 and root.k == 3
    p = interior_fixed_point(root)
    assert abs(quadratic_iterate(root, root.k) - p) < 1e-12
    for m in range(1, 6):
        assert abs(quadratic_iterate(root, root.k + m) - p) < 1e-11
    # boundary case a = 2: 0 -> 2 -> -2, the other fixed point
    assert quadratic_iterate(2.0, 2) == boundary_fixed_point(2.0) == -2.0


# -- central expansion and depths -------------------------------------------------

def test_central_expansion_examples():
    states = np.zeros((11, 2))
    states[:, 1] = 0.5
    assert central_expansion_average(states) == 0.0
    states[:, 1] = -1.0
    assert central_expansion_average(states) == pytest.approx(-math.log(2))


def test_depth_examples():
    assert depth(math.exp(-3.5), 0.01) == 4
    assert depth(0.5, 0.01) == 0
    assert depth(0.0, 0.01) == MAX_DEPTH
    params = VianaParams()
    states = np.zeros((20, 2))
    states[:, 1] = 0.2
    r = return_depths(states, params)
    assert r.g_set.size == 0 and r.g_sum == 0


def brute_depth(x, alpha):
    """Smallest ``r`` in ``0..200`` with ``|x| < e^-(r-1)`` and the J(0) convention."""
    ax = abs(x)
    if ax >= math.sqrt(alpha):
        return 0
    for r in range(0, 201):
        if ax >= math.exp(-r):
            return r
    return MAX_DEPTH


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 2 ** 32))
def test_depth_matches_scan(seed):
    rng = np.random.default_rng(seed)
    x = np.sign(rng.random(500) - 0.5) * np.exp(-rng.random(500) * 60)
    got = depth(x, 0.01)
    assert got.tolist() == [brute_depth(v, 0.01) for v in x]


def test_depth_scan_ten_thousand_points():
    rng = np.random.default_rng(1)
    x = rng.uniform(-1.8, 1.8, 10 ** 4) * np.exp(-rng.random(10 ** 4) * 20)
    assert depth(x, 0.01).tolist() == [brute_depth(v, 0.01) for v in x]


@pytest.fixture(scope="module")
def viana():
    return build_system("viana")


def test_deep_return_fractions(viana):
    k = NoiseKernel.for_system(viana, "additive", 1e-3)
    f = [deep_return_fraction(viana, k, n, 400, seed=1) for n in (100, 400, 900)]
    assert f[0] >= f[1] >= f[2]
    with pytest.raises(InvalidParams):
        deep_return_fraction(viana, k, 2, 10, seed=1)


def test_deficit_fraction(viana):
    k = NoiseKernel.for_system(viana, "additive", 1e-3)
    huge = 10 * math.log(1 / viana.params["alpha_skew"])
    assert expansion_deficit_fraction(viana, k, 200, huge, 300, seed=2) == 0.0
    st_ = depth_statistics(viana, k, 200, 300, seed=2)
    assert st_.g_sum.shape == (300,) and np.all(st_.g_sum >= 0)


# -- central foliation -------------------------------------------------------------

def test_operator_vanishes_for_unperturbed_product():
    v = build_system("viana", {"alpha_skew": 1e-12})
    f = FoliationField.zeros(v, (32, 16))
    assert np.abs(foliation_apply(f, v).values).max() < 1e-9


def test_operator_bounded_and_contracting():
    v = build_system("viana", {"kappa": 0.01})
    f = FoliationField.zeros(v, (64, 32))
    rng = np.random.default_rng(0)
    for _ in range(10):
        a = FoliationField(f.s_nodes, f.x_nodes, rng.uniform(-1, 1, f.grid))
        b = FoliationField(f.s_nodes, f.x_nodes, rng.uniform(-1, 1, f.grid))
        assert np.abs(foliation_apply(a, v).values).max() < 1
        assert lipschitz_estimate(v, a, b) <= 0.5


def test_fixed_point_properties():
    v = build_system("viana", {"kappa": 0.01})
    tol = 1e-10
    fld = foliation_fixed_point(v, (64, 32), tol=tol)
    assert fld.iterations <= math.ceil(math.log(1 / tol) / math.log(2)) + 2
    assert fld.residual < 2 * tol
    assert np.all(np.abs(fld.values) <= 1)
    assert fld.sup() <= 10 * v.params["alpha_skew"]
    assert np.all(contraction_ratios(fld.changes) <= 0.55)


def test_random_fixed_point_horizon():
    v = build_system("viana", {"kappa": 0.01})
    k = NoiseKernel.for_system(v, "additive", 1e-3)
    fld = foliation_fixed_point(v, (32, 16), kernel=k, mc=4, horizon=12)
    assert fld.iterations == 12 and fld.horizon == 12
    assert fld.sup() <= 10 * v.params["alpha_skew"]


def test_contraction_violated_when_image_leaves_unit_ball():
    from stochstab.viana import _apply

    f = FoliationField.zeros(build_system("viana"), (8, 4))
    n = f.values.size
    zero_i = np.zeros(n, dtype=np.int64)
    stencil = (zero_i, zero_i, zero_i, np.zeros(n), np.zeros(n))
    # at xi = 0 the operator returns -dx_g / ds_g, here 5
    partials = (np.ones(n), np.full(n, -5.0), np.zeros(n), np.zeros(n))
    with pytest.raises(ContractionViolated):
        _apply(f, [stencil], partials)
