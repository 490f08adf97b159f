"""Noise kernels and counter-based random streams.

Every random number is addressed by ``(seed, stream, offset)``: a Philox
generator keyed by ``(stream << 64) | seed`` is advanced to ``offset`` so
results never depend on how work is scheduled or chunked.

Offset layout inside one stream (in 64-bit words):

* ``[0, 2^61)``       perturbation for step ``j`` at ``j * dims``
* ``[2^61, 2^62)``    start-point sampling
* ``[2^62, ...)``     redraws after critical hits, ``(step * 128 + r) * dims``
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidParams, NoiseExceedsMargin

MODES = ("additive", "rotational")
MASK64 = (1 << 64) - 1
START_REGION = 1 << 61
REDRAW_REGION = 1 << 62
MAX_REDRAWS = 100


def _generator(seed: int, stream: int) -> np.random.Philox:
    seed = int(seed)
    stream = int(stream)
    if not (0 <= seed <= MASK64 and 0 <= stream <= MASK64):
        raise InvalidParams("seed and stream must be unsigned 64-bit integers")
    return np.random.Philox(key=(stream << 64) | seed)


def uniforms(seed: int, stream: int, start: int, count: int) -> np.ndarray:
    """``count`` doubles in ``[0, 1)`` at word offsets ``start .. start + count - 1``."""
    if count <= 0:
        return np.empty(0)
    bg = _generator(seed, stream)
    block, rem = divmod(int(start), 4)
    if block:
        bg.advance(block)
    raw = bg.random_raw(rem + int(count))[rem:]
    return (raw >> np.uint64(11)).astype(np.float64) * (1.0 / 9007199254740992.0)


def ball_from_uniforms(u: np.ndarray, epsilon: float, dims: int) -> np.ndarray:
    """Map ``(n, dims)`` uniforms to points uniformly distributed in the closed ``epsilon``-ball."""
    u = u.reshape(-1, dims)
    if epsilon == 0.0:
        return np.zeros_like(u)
    if dims == 1:
        return epsilon * (2.0 * u - 1.0)
    r = epsilon * np.sqrt(u[:, 0])
    theta = 2.0 * np.pi * u[:, 1]
    return np.stack([r * np.cos(theta), r * np.sin(theta)], axis=1)


@dataclass(frozen=True)
class NoiseKernel:
    """Uniform noise on the ``epsilon``-ball, applied additively or as a rotation.

    ``dims`` is the noise dimension: the domain dimension for additive
    noise, 1 for rotations of the circle factor.  Both modes post-compose
    the map with a translation, so ``Df_t = Df``.  Both are nondegenerate
    in one step: the support of ``f_t(x)`` contains a ball around ``f(x)``
    (along the circle for rotations) and its law is absolutely continuous
    there.
    """

    mode: str
    epsilon: float
    dims: int
    target_dim: int
    axis: int = 0

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidParams(f"unknown noise mode {self.mode!r}")
        if not self.epsilon >= 0:
            raise InvalidParams("epsilon must be nonnegative")
        if self.dims not in (1, 2) or self.dims > self.target_dim:
            raise InvalidParams("noise dimension must be 1 or 2 and fit the domain")

    @classmethod
    def for_system(cls, system, mode: str = "additive", epsilon: float = 0.0) -> "NoiseKernel":
        dom = system.domain
        epsilon = float(epsilon)
        if mode == "rotational":
            if not any(dom.periodic):
                raise InvalidParams(f"{system.name}: rotational noise needs a circle factor")
            return cls(mode, epsilon, 1, dom.dim, dom.periodic.index(True))
        if mode != "additive":
            raise InvalidParams(f"unknown noise mode {mode!r}")
        if not all(dom.periodic) and epsilon >= system.margin:
            raise NoiseExceedsMargin(
                f"{system.name}: epsilon={epsilon} must stay below the invariance margin {system.margin:.6g}"
            )
        return cls(mode, epsilon, dom.dim, dom.dim, 0)

    def embed(self, t: np.ndarray) -> np.ndarray:
        """Lift noise parameters ``(n, dims)`` to displacements ``(n, target_dim)``."""
        t = np.asarray(t, dtype=float).reshape(-1, self.dims)
        if self.dims == self.target_dim:
            return np.array(t, copy=True)
        out = np.zeros((t.shape[0], self.target_dim))
        out[:, self.axis] = t[:, 0]
        return out

    def draw(self, seed, stream, step0, n) -> np.ndarray:
        """Raw parameters for steps ``step0 .. step0 + n - 1`` (shape ``(n, dims)``)."""
        u = uniforms(seed, stream, step0 * self.dims, n * self.dims)
        return ball_from_uniforms(u, self.epsilon, self.dims)

    def redraw(self, seed, stream, step, attempt) -> np.ndarray:
        off = REDRAW_REGION + (int(step) * 128 + int(attempt)) * self.dims
        return ball_from_uniforms(uniforms(seed, stream, off, self.dims), self.epsilon, self.dims)[0]


@dataclass
class NoiseSequence:
    """Parameters ``t_1 .. t_n`` together with where they came from."""

    entries: np.ndarray
    seed: int
    stream: int
    start: int = 0

    def __len__(self):
        return self.entries.shape[0]


def sample_noise(kernel: NoiseKernel, n: int, seed: int, stream: int = 0, start: int = 0) -> NoiseSequence:
    if n < 1:
        raise InvalidParams("n must be at least 1")
    return NoiseSequence(kernel.draw(seed, stream, start, n), int(seed), int(stream), int(start))


def sample_points(domain, count: int, seed: int, stream: int = 0) -> np.ndarray:
    """``count`` points uniform on ``domain`` drawn from the start-point region of one stream."""
    u = uniforms(seed, stream, START_REGION, count * domain.dim).reshape(count, domain.dim)
    return domain.wrap(domain.from_unit(u))
