"""Perturbed steps and random orbits.

A random orbit is ``x_{j+1} = f_{t_{j+1}}(x_j)`` where ``f_t`` is the map
followed by the noise displacement (wrapped on circle factors).  Orbit
traces also record ``log ||Df(x_j)^{-1}||`` and, when a ``delta`` is given,
``log dist_delta(x_j, C)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import CriticalOrbitStuck, InvalidParams
from .noise import MAX_REDRAWS, NoiseKernel, NoiseSequence

# slack for the |t| <= epsilon check (the 2-D ball sampler uses cos/sin)
_BALL_TOL = 1e-12


def perturbed_step(system, kernel: NoiseKernel, t, x):
    """``f_t(x)``; ``t`` is a noise parameter with ``|t| <= kernel.epsilon``."""
    t = np.asarray(t, dtype=float).reshape(-1, kernel.dims)
    if np.any(np.linalg.norm(t, axis=1) > kernel.epsilon * (1 + _BALL_TOL) + _BALL_TOL):
        raise InvalidParams("noise parameter outside the epsilon-ball")
    arr = np.asarray(x, dtype=float)
    X = system.domain.check(arr)
    Y = system.step(X, kernel.embed(t))
    if arr.ndim == 0:
        return float(Y[0, 0])
    return Y.reshape(arr.shape)


@dataclass
class OrbitTrace:
    states: np.ndarray
    log_inv_norms: np.ndarray
    noise: NoiseSequence
    log_trunc_dists: np.ndarray | None = None
    delta: float | None = None
    redraws: int = 0
    redraw_steps: list = field(default_factory=list)

    @property
    def n(self) -> int:
        return self.log_inv_norms.shape[0]


def _log_inv_norms(system, X):
    if X.shape[0] == 0:
        return np.empty(0)
    return np.log(system.inv_tangent_norm(X, check=False).reshape(-1))


def _log_trunc(system, X, delta):
    if X.shape[0] == 0:
        return np.empty(0)
    return np.log(np.asarray(system.truncated_distance(X, delta)).reshape(-1))


def random_orbit(system, kernel: NoiseKernel, x0, n: int, delta=None, seed: int = 0,
                 stream: int = 0, start: int = 0, backend=None) -> OrbitTrace:
    """One random orbit of length ``n`` using noise steps ``start .. start + n - 1`` of a stream.

    A state that lands within the critical floor has the noise draw that
    produced it replaced (up to ``MAX_REDRAWS`` times) since its derivative
    is not invertible there.
    """
    if n < 0:
        raise InvalidParams("n must be nonnegative")
    if delta is not None and not delta > 0:
        raise InvalidParams("delta must be positive")
    X0 = system.domain.check(x0)
    if X0.shape[0] != 1:
        raise InvalidParams("random_orbit takes a single start point")
    t = kernel.draw(seed, stream, start, n) if n else np.empty((0, kernel.dims))
    T = kernel.embed(t)
    states = kernels.iterate(system, X0, T[None], backend)[0]
    redraw_steps = []
    if system.has_critical_set:
        floor = system.critical_floor
        if system.critical_distance(states[:1])[0] < floor:
            raise CriticalOrbitStuck(f"{system.name}: start point lies on the critical set")
        j = 1
        while j <= n:
            dist = system.critical_distance(states[j:])
            bad = np.nonzero(dist < floor)[0]
            if bad.size == 0:
                break
            j += int(bad[0])
            for attempt in range(MAX_REDRAWS):
                t[j - 1] = kernel.redraw(seed, stream, start + j - 1, attempt)
                T[j - 1] = kernel.embed(t[j - 1])[0]
                y = system.step(states[j - 1:j], T[j - 1:j])
                redraw_steps.append(start + j - 1)
                if system.critical_distance(y)[0] >= floor:
                    break
            else:
                raise CriticalOrbitStuck(
                    f"{system.name}: {MAX_REDRAWS} redraws at step {start + j} stayed on the critical set"
                )
            states[j:] = kernels.iterate(system, y, T[None, j:], backend)[0]
            j += 1
    trace = OrbitTrace(
        states=states,
        log_inv_norms=_log_inv_norms(system, states[:-1]),
        noise=NoiseSequence(t, int(seed), int(stream), int(start)),
        redraws=len(redraw_steps),
        redraw_steps=redraw_steps,
    )
    if delta is not None:
        trace.delta = float(delta)
        trace.log_trunc_dists = _log_trunc(system, states[:-1], delta)
    return trace


def deterministic_orbit(system, x0, n, delta=None) -> OrbitTrace:
    kernel = NoiseKernel.for_system(system, "rotational" if any(system.domain.periodic) else "additive", 0.0)
    return random_orbit(system, kernel, x0, n, delta=delta)


def orbit_batch(system, kernel: NoiseKernel, x0s, n: int, seed: int, stream0: int = 0,
                start: int = 0, backend=None) -> np.ndarray:
    """States ``(m, n + 1, D)`` of ``m`` orbits; orbit ``i`` uses stream ``stream0 + i``.

    Unlike :func:`random_orbit` no redraws are made: batch statistics are
    unaffected by the measure-zero event of hitting the critical set.
    """
    X0 = system.domain.check(x0s)
    T = np.stack([kernel.embed(kernel.draw(seed, stream0 + i, start, n)) for i in range(X0.shape[0])])
    return kernels.iterate(system, X0, T, backend)


def orbit_chunks(system, kernel: NoiseKernel, x0s, n: int, seed: int, stream0: int = 0,
                 chunk: int = 65536, backend=None):
    """Yield ``(j0, states)`` chunks covering ``x_0 .. x_{n-1}`` of a batch of orbits.

    ``states`` has shape ``(m, len, D)`` and holds ``x_{j0} .. x_{j0+len-1}``.
    The concatenation equals ``orbit_batch(...)[:, :n]``.
    """
    X = system.domain.check(x0s)
    j0 = 0
    while j0 < n:
        size = min(chunk, n - j0)
        T = np.stack([kernel.embed(kernel.draw(seed, stream0 + i, j0, size)) for i in range(X.shape[0])])
        S = kernels.iterate(system, X, T, backend)
        yield j0, S[:, :-1]
        X = np.ascontiguousarray(S[:, -1])
        j0 += size


def occupation_counts(system, kernel: NoiseKernel, x0s, n: int, bins, seed: int, stream0: int = 0,
                      burn_in: int = 0, chunk: int = 262144, backend=None) -> np.ndarray:
    """Visit counts of ``x_burn .. x_{burn+n-1}`` per orbit (shape ``(m, cells)``)."""
    X = system.domain.check(x0s)
    bins = np.asarray(bins, dtype=np.int64)
    cells = int(np.prod(bins))
    counts = np.zeros((X.shape[0], cells))
    total = n + burn_in
    for i in range(X.shape[0]):
        x = X[i:i + 1]
        j0 = 0
        while j0 < total:
            size = min(chunk, total - j0)
            T = kernel.embed(kernel.draw(seed, stream0 + i, j0, size))[None]
            skip = max(0, burn_in - j0)
            x = kernels.occupation(system, x, T, bins, counts[i], skip=skip, backend=backend)
            j0 += size
    return counts
