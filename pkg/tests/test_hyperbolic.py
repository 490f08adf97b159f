import math
from types import SimpleNamespace

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from stochstab import build_system
from stochstab.errors import DeltaMismatch, HypothesisViolated, InsufficientHorizon, InvalidParams
from stochstab.hyperbolic import (
    HypParams,
    PlissParams,
    TailProfile,
    expansion_average,
    first_hyperbolic_time,
    first_times_batch,
    fit_geometric_tail,
    hyperbolic_times_critical,
    hyperbolic_times_diffeo,
    pliss_select,
    recurrence_average,
    tail_profile,
    uniform_tail_statistic,
    visit_frequency,
)
from stochstab.noise import NoiseKernel, sample_points
from stochstab.orbits import deterministic_orbit, random_orbit


def brute_pliss(a, c1):
    """O(N^2) check of every window ``(n, i]``."""
    N = len(a)
    out = []
    for i in range(1, N + 1):
        if all(sum(a[n:i]) >= c1 * (i - n) for n in range(i)):
            out.append(i)
    return out


# dyadic values keep every partial sum exact in floating point
dyadic = st.integers(0, 16).map(lambda k: k / 8)


@settings(max_examples=300, deadline=None)
@given(st.lists(dyadic, min_size=1, max_size=50))
def test_pliss_matches_brute_force(a):
    p = PlissParams(0.5, 1.0, 2.0)
    assume(sum(a) >= p.c2 * len(a))
    got = pliss_select(a, p).tolist()
    assert got == brute_pliss(a, p.c1)
    assert len(got) > p.zeta * len(a)


def test_pliss_examples():
    p = PlissParams(0.5, 1.0, 2.0)
    assert p.zeta == pytest.approx(1 / 3)
    assert pliss_select([1, 1, 1, 1], p).tolist() == [1, 2, 3, 4]
    assert pliss_select([2, 0, 2, 0, 2, 0], p).tolist() == [1, 3, 5]
    with pytest.raises(HypothesisViolated):
        pliss_select([0, 0, 0], p)
    with pytest.raises(HypothesisViolated):
        pliss_select([3, 3], p)
    with pytest.raises(InvalidParams):
        PlissParams(1.0, 0.5, 2.0)


# -- hyperbolic times --------------------------------------------------------

def brute_times(L, logd, alpha, b):
    """Direct evaluation of both defining inequalities for every ``n`` and ``k``; also the
    smallest slack seen, so callers can skip cases decided by rounding."""
    n_max = len(L)
    la = math.log(alpha)
    times, slack = [], math.inf
    for n in range(1, n_max + 1):
        ok = True
        for k in range(1, n + 1):
            e = sum(L[n - k:n]) - k * la
            slack = min(slack, abs(e))
            ok &= e <= 0
            if logd is not None:
                r = logd[n - k] - b * k * la
                slack = min(slack, abs(r))
                ok &= r >= 0
        if ok:
            times.append(n)
    return times, slack


def _trace(L, logd=None, delta=None):
    return SimpleNamespace(log_inv_norms=np.asarray(L, dtype=float),
                           log_trunc_dists=None if logd is None else np.asarray(logd, dtype=float),
                           delta=delta, n=len(L))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-2, 1), min_size=1, max_size=40),
       st.lists(st.floats(-6, 0), min_size=40, max_size=40),
       st.floats(0.05, 0.95), st.floats(0.05, 0.45))
def test_hyperbolic_times_match_brute_force(L, logd, alpha, b):
    logd = logd[:len(L)]
    expect, slack = brute_times(L, logd, alpha, b)
    assume(slack > 1e-9)
    rec = hyperbolic_times_critical(_trace(L, logd, 0.1), HypParams(alpha, 0.1, b))
    assert rec.times.tolist() == expect
    assert rec.first == (expect[0] if expect else None)
    expect_d, slack_d = brute_times(L, None, alpha, b)
    assume(slack_d > 1e-9)
    assert hyperbolic_times_diffeo(_trace(L), alpha).times.tolist() == expect_d


def test_doubling_examples():
    s = build_system("doubling")
    tr = deterministic_orbit(s, 0.1234, 30)
    assert hyperbolic_times_diffeo(tr, 0.6).times.tolist() == list(range(1, 31))
    assert hyperbolic_times_diffeo(tr, 0.4).times.size == 0
    assert first_hyperbolic_time(tr, 0.6) == 1
    assert first_hyperbolic_time(tr, 0.4) is None
    assert expansion_average(tr) == pytest.approx(math.log(0.5))


def test_alternating_norms():
    L = np.log(np.tile([0.5, 2.0], 10))
    got = hyperbolic_times_diffeo(_trace(L), 0.95).times.tolist()
    assert got == brute_times(L, None, 0.95, 0.25)[0]
    assert got == [1]


def test_far_from_critical_reduces_to_diffeo():
    L = np.log(np.full(20, 0.5))
    rec = hyperbolic_times_critical(_trace(L, np.zeros(20), 0.1), HypParams(0.6, 0.1, 0.25))
    assert rec.times.tolist() == list(range(1, 21))


def test_recurrence_violation_excludes_time():
    alpha, b = 0.6, 0.25
    L = np.log(np.full(5, 0.5))
    logd = np.zeros(5)
    logd[2] = 2 * b * math.log(alpha)  # dist at step n-1 = 2 equals alpha^(2b) < alpha^b
    rec = hyperbolic_times_critical(_trace(L, logd, 0.1), HypParams(alpha, 0.1, b))
    assert 3 not in rec
    assert 2 in rec


def test_delta_mismatch():
    with pytest.raises(DeltaMismatch):
        hyperbolic_times_critical(_trace([0.0], [0.0], 0.2), HypParams(0.5, 0.1))
    with pytest.raises(DeltaMismatch):
        hyperbolic_times_critical(_trace([0.0]), HypParams(0.5, 0.1))


def test_viana_trace_against_brute_force():
    v = build_system("viana")
    k = NoiseKernel.for_system(v, "additive", 1e-3)
    hp = HypParams(0.9, 0.3, 0.25)
    tr = random_orbit(v, k, [0.3, 0.2], 10000, delta=hp.delta, seed=5)
    L, logd = tr.log_inv_norms, tr.log_trunc_dists
    la = math.log(hp.alpha_hyp)
    expect = []
    for n in range(1, tr.n + 1):
        ks = np.arange(1, n + 1)
        exp_ok = np.all(np.cumsum(L[n - 1::-1]) <= ks * la + 1e-12)
        rec_ok = np.all(logd[n - 1::-1] >= hp.b_exponent * ks * la - 1e-12)
        if exp_ok and rec_ok:
            expect.append(n)
    rec = hyperbolic_times_critical(tr, hp)
    assert rec.times.tolist() == expect
    assert first_hyperbolic_time(tr, hp) == (expect[0] if expect else None)


def test_batch_first_times_match_single_traces():
    f1 = build_system("fig1")
    k = NoiseKernel.for_system(f1, "rotational", 0.01)
    hp = HypParams(0.8, 0.1, 0.25)
    from stochstab.orbits import orbit_batch

    x0 = np.array([[0.31], [-1.7], [0.77]])
    S = orbit_batch(f1, k, x0, 80, seed=3)
    got = first_times_batch(f1, S, hp)
    for i in range(3):
        tr = random_orbit(f1, k, x0[i, 0], 80, delta=hp.delta, seed=3, stream=i)
        h = first_hyperbolic_time(tr, hp)
        assert got[i] == (h or 0)


# -- tails ------------------------------------------------------------------------

def test_tail_profile_doubling():
    s = build_system("doubling")
    k = NoiseKernel.for_system(s, "additive", 0.01)
    prof = tail_profile(s, k, HypParams(0.6, 1.0), 500, 10, seed=1)
    assert prof.counts[1] == 500 and prof.censored == 0
    assert uniform_tail_statistic([prof], 2) == 0.0
    none = tail_profile(s, k, HypParams(0.4, 1.0), 200, 10, seed=1)
    assert none.censored == 200


def test_tail_profile_invariants():
    t = build_system("torus")
    k = NoiseKernel.for_system(t, "additive", 0.01)
    prof = tail_profile(t, k, HypParams(0.5, 1.0), 3000, 40, seed=2, batch=700)
    assert prof.counts.sum() + prof.censored == prof.sample_size
    surv = prof.survival()
    assert np.all(np.diff(surv) <= 0)
    fit = fit_geometric_tail(prof)
    assert fit.decays and fit.tau < 1


def test_zero_noise_tail_is_deterministic_tail():
    f1 = build_system("fig1")
    k = NoiseKernel.for_system(f1, "rotational", 0.0)
    hp = HypParams(0.8, 0.1, 0.25)
    prof = tail_profile(f1, k, hp, 50, 30, seed=4)
    counts = np.zeros(31, dtype=int)
    censored = 0
    for i in range(50):
        x0 = sample_points(f1.domain, 1, 4, i)[0, 0]
        h = first_hyperbolic_time(deterministic_orbit(f1, x0, 30, delta=hp.delta), hp)
        if h is None:
            censored += 1
        else:
            counts[h] += 1
    assert np.array_equal(prof.counts, counts) and prof.censored == censored


def test_uniform_statistic_closed_form():
    size = 2 ** 20
    counts = np.zeros(21, dtype=np.int64)
    counts[1:] = [2 ** (20 - k) for k in range(1, 21)]
    prof = TailProfile(0.01, counts, size - int(counts.sum()), size, 20)
    expect = sum(k * 2.0 ** -k for k in range(3, 21)) + 20 * 2.0 ** -20
    assert uniform_tail_statistic([prof], 3) == pytest.approx(expect, rel=1e-14)
    with pytest.raises(InsufficientHorizon):
        uniform_tail_statistic([prof], 21)


def test_geometric_fit_recovers_ratio():
    size = 10 ** 6
    tau = 0.6
    surv = size * tau ** np.arange(41)
    counts = np.zeros(41, dtype=np.int64)
    counts[1:] = np.round(-np.diff(surv)).astype(np.int64)
    prof = TailProfile(0.0, counts, size - int(counts.sum()), size, 40)
    assert fit_geometric_tail(prof).tau == pytest.approx(tau, abs=0.01)


def test_averages_trivial_cases():
    f1 = build_system("fig1")
    tr = deterministic_orbit(f1, 0.5, 50, delta=0.1)  # fixed point, far from C
    assert recurrence_average(tr) == 0.0
    assert visit_frequency(tr, lambda X: np.ones(len(X), dtype=bool)) == 1.0


def test_alpha_for_rate_below_one():
    from stochstab.hyperbolic import alpha_for_rate

    assert alpha_for_rate(math.log(2)) == pytest.approx(2 ** -0.2)
    assert 0 < alpha_for_rate(10.0) < alpha_for_rate(0.1) < 1
    with pytest.raises(InvalidParams):
        alpha_for_rate(0.0)
