import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stochstab import build_system, kernels
from stochstab.errors import CriticalOrbitStuck, InvalidParams, NoiseExceedsMargin
from stochstab.noise import NoiseKernel, sample_noise, sample_points, uniforms
from stochstab.orbits import (
    deterministic_orbit,
    orbit_batch,
    orbit_chunks,
    perturbed_step,
    random_orbit,
)

seeds = st.integers(0, 2 ** 64 - 1)
streams = st.integers(0, 2 ** 40)


# -- random streams -------------------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(seeds, streams, st.integers(0, 1000), st.integers(1, 50))
def test_uniforms_are_offsets_of_one_philox_stream(seed, stream, start, count):
    # oracle: raw Philox words of the same key, converted the standard 53-bit way
    bg = np.random.Philox(key=(stream << 64) | seed)
    raw = bg.random_raw(start + count)[start:]
    expect = (raw >> np.uint64(11)) * (1.0 / 2 ** 53)
    assert np.array_equal(uniforms(seed, stream, start, count), expect)


@settings(max_examples=30, deadline=None)
@given(seeds, streams, st.integers(0, 200), st.integers(1, 100), st.integers(1, 100))
def test_uniforms_chunking_invariant(seed, stream, start, a, b):
    whole = uniforms(seed, stream, start, a + b)
    parts = np.concatenate([uniforms(seed, stream, start, a), uniforms(seed, stream, start + a, b)])
    assert np.array_equal(whole, parts)


@settings(max_examples=40, deadline=None)
@given(st.sampled_from(["doubling", "fig1", "viana", "torus"]), st.floats(0, 0.01), seeds)
def test_draws_stay_in_the_ball(name, eps, seed):
    s = build_system(name)
    mode = "rotational" if name == "fig1" else "additive"
    k = NoiseKernel.for_system(s, mode, eps)
    t = k.draw(seed, 3, 0, 500)
    assert t.shape == (500, k.dims)
    assert np.all(np.linalg.norm(t, axis=1) <= eps * (1 + 1e-12))


def test_nested_supports():
    # the same uniforms at a smaller epsilon give a shrunk copy, inside both balls
    s = build_system("torus")
    big = NoiseKernel.for_system(s, "additive", 0.1).draw(1, 0, 0, 1000)
    small = NoiseKernel.for_system(s, "additive", 0.01).draw(1, 0, 0, 1000)
    assert np.allclose(small, big / 10)


def test_zero_epsilon_is_exact_zero():
    s = build_system("viana")
    k = NoiseKernel.for_system(s, "additive", 0.0)
    assert not np.any(k.draw(5, 5, 0, 100))


def test_noise_mean_bound():
    s = build_system("doubling")
    t = NoiseKernel.for_system(s, "additive", 0.1).draw(11, 0, 0, 100000)
    assert abs(t.mean()) < 3 * 0.1 / math.sqrt(3 * 1e5)


def test_noise_sequence_reproducible():
    s = build_system("fig1")
    k = NoiseKernel.for_system(s, "rotational", 0.05)
    a = sample_noise(k, 100, seed=9, stream=2)
    b = sample_noise(k, 100, seed=9, stream=2)
    assert np.array_equal(a.entries, b.entries) and len(a) == 100
    assert not np.array_equal(a.entries, sample_noise(k, 100, seed=9, stream=3).entries)


def test_kernel_errors():
    f2 = build_system("fig2")
    with pytest.raises(NoiseExceedsMargin):
        NoiseKernel.for_system(f2, "additive", 1.0)
    with pytest.raises(InvalidParams):
        NoiseKernel.for_system(f2, "rotational", 0.01)
    with pytest.raises(InvalidParams):
        NoiseKernel.for_system(build_system("doubling"), "multiplicative", 0.01)


def test_sample_points_inside():
    for name in ("torus", "viana", "fig1"):
        s = build_system(name)
        P = sample_points(s.domain, 1000, 4, 0)
        assert np.all(s.domain.contains(P))


# -- perturbed step ------------------------------------------------------------

def test_perturbed_step_examples():
    f1 = build_system("fig1")
    k = NoiseKernel.for_system(f1, "rotational", 0.2)
    assert perturbed_step(f1, k, 0.0, 0.3) == f1.eval(0.3)
    assert perturbed_step(f1, k, 0.1, 0.0) == pytest.approx(-2.9)
    with pytest.raises(InvalidParams):
        perturbed_step(f1, k, 0.3, 0.0)


def test_fig2_perturbed_image_stays_in_domain():
    f2 = build_system("fig2")
    eps = 0.99 * f2.margin
    k = NoiseKernel.for_system(f2, "additive", eps)
    x = np.linspace(-7, 2, 5001)
    for t in (-eps, eps):
        y = perturbed_step(f2, k, t, x)
        assert np.all(f2.domain.contains(y[:, None] if y.ndim == 1 else y))


# -- orbits ------------------------------------------------------------------

def test_doubling_orbit_example():
    s = build_system("doubling")
    tr = deterministic_orbit(s, 0.3, 3)
    assert np.allclose(tr.states[:, 0], [0.3, 0.6, 0.2, 0.4])
    assert np.allclose(tr.log_inv_norms, math.log(0.5))


@pytest.mark.parametrize("name", ["doubling", "fig1", "viana"])
def test_empty_orbit(name):
    s = build_system(name)
    x0 = sample_points(s.domain, 1, 1, 0)[0] if s.domain.dim == 2 else 0.3
    tr = deterministic_orbit(s, x0, 0)
    assert tr.states.shape[0] == 1 and tr.n == 0


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 300), st.integers(1, 300), seeds, st.floats(-0.99, 0.99))
def test_concatenation(n1, n2, seed, x0):
    f1 = build_system("fig1")
    k = NoiseKernel.for_system(f1, "rotational", 0.05)
    whole = random_orbit(f1, k, x0 + 0.001, n1 + n2, seed=seed, stream=7)
    first = random_orbit(f1, k, x0 + 0.001, n1, seed=seed, stream=7)
    second = random_orbit(f1, k, first.states[-1], n2, seed=seed, stream=7, start=n1)
    if whole.redraws == 0:
        assert np.array_equal(whole.states, np.concatenate([first.states, second.states[1:]]))


@settings(max_examples=20, deadline=None)
@given(seeds, st.sampled_from(["doubling", "fig1", "fig2", "viana", "torus"]))
def test_trace_satisfies_step_relation(seed, name):
    s = build_system(name)
    mode = "rotational" if name == "fig1" else "additive"
    k = NoiseKernel.for_system(s, mode, 0.01)
    if name == "fig2":
        x0 = 0.3
    else:
        x0 = sample_points(s.domain, 1, seed, 1)[0]
        if s.domain.dim == 1:
            x0 = float(x0[0])
    tr = random_orbit(s, k, x0, 200, delta=0.1, seed=seed)
    assert tr.states.shape == (201, s.domain.dim)
    assert tr.log_inv_norms.shape == (200,) and tr.log_trunc_dists.shape == (200,)
    T = k.embed(tr.noise.entries)
    assert np.array_equal(s.step(tr.states[:-1], T), tr.states[1:])
    assert np.all(s.domain.contains(tr.states))


def test_start_on_critical_set():
    f1 = build_system("fig1")
    k = NoiseKernel.for_system(f1, "rotational", 0.01)
    with pytest.raises(CriticalOrbitStuck):
        random_orbit(f1, k, 0.0, 10)


class _ZeroFirstDraws(NoiseKernel):
    """Kernel whose regular draws are all zero; redraws come from the usual stream region."""

    def draw(self, seed, stream, step0, n):
        return np.zeros((n, self.dims))


def test_redraw_moves_orbit_off_critical_point():
    f1 = build_system("fig1")
    # f(sqrt(1/2)) is within the critical floor of 0, so the zero draw lands on C
    k = _ZeroFirstDraws("rotational", 0.05, 1, 1)
    tr = random_orbit(f1, k, 0.5 ** 0.5, 5, seed=1)
    assert tr.redraws >= 1 and tr.redraw_steps[0] == 0
    assert tr.noise.entries[0, 0] != 0.0
    assert f1.critical_distance(tr.states[1:2])[0] > 0
    T = k.embed(tr.noise.entries)
    assert np.array_equal(f1.step(tr.states[:-1], T), tr.states[1:])


def test_redraw_budget_exhausted():
    f1 = build_system("fig1")
    k = NoiseKernel.for_system(f1, "rotational", 0.0)
    with pytest.raises(CriticalOrbitStuck):
        random_orbit(f1, k, 0.5 ** 0.5, 5)


def test_viana_orbit_stays_in_region():
    v = build_system("viana")
    k = NoiseKernel.for_system(v, "additive", 1e-3)
    tr = random_orbit(v, k, [0.2, 0.3], 10000, seed=3)
    assert np.all(v.domain.contains(tr.states))


def test_batch_and_chunks_agree():
    s = build_system("torus")
    k = NoiseKernel.for_system(s, "additive", 0.01)
    x0 = sample_points(s.domain, 4, 1, 0)
    S = orbit_batch(s, k, x0, 1000, seed=2)
    parts = np.concatenate([c for _, c in orbit_chunks(s, k, x0, 1000, seed=2, chunk=137)], axis=1)
    assert np.array_equal(parts, S[:, :1000])


@pytest.mark.skipif(len(kernels.BACKENDS) < 2, reason="compiled backend not built")
@settings(max_examples=15, deadline=None)
@given(st.sampled_from(["doubling", "fig1", "fig2", "viana", "torus"]), seeds)
def test_backends_bitwise_identical(name, seed):
    s = build_system(name)
    k = NoiseKernel.for_system(s, "additive", 0.01)
    if name == "fig2":
        x0 = np.array([[0.1], [-5.3]])
    else:
        x0 = sample_points(s.domain, 2, seed, 0)
    T = np.stack([k.embed(k.draw(seed, i, 0, 300)) for i in range(2)])
    a = kernels.iterate(s, x0, T, backend="cython")
    b = kernels.iterate(s, x0, T, backend="python")
    assert np.array_equal(a, b)
    bins = np.array([16] * s.domain.dim, dtype=np.int64)
    ca = np.zeros(int(np.prod(bins)))
    cb = np.zeros_like(ca)
    xa = kernels.occupation(s, x0, T, bins, ca, skip=5, backend="cython")
    xb = kernels.occupation(s, x0, T, bins, cb, skip=5, backend="python")
    assert np.array_equal(ca, cb) and np.array_equal(xa, xb)
    assert ca.sum() == 2 * (300 - 5)
