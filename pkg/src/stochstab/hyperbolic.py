"""Pliss selection, hyperbolic times and first-hyperbolic-time tails.

Both defining inequalities of an ``(alpha, delta)``-hyperbolic time ``n``
quantify over every backward window ``1 <= k <= n``.  With prefix sums they
collapse to running extrema, so a whole orbit is scanned in ``O(n)``:

* expansion:  ``P_n <= min_{m<n} P_m`` where ``P_n = sum_{j<n} (L_j - log alpha)``
  and ``L_j = log ||Df(x_j)^{-1}||``;
* recurrence: ``min_{m<n} (log d_m + c m) >= c n`` where ``c = b log alpha``
  and ``d_m = dist_delta(x_m, C)``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import DeltaMismatch, HypothesisViolated, InsufficientHorizon, InvalidParams
from .noise import sample_points


@dataclass(frozen=True)
class PlissParams:
    c1: float
    c2: float
    H: float

    def __post_init__(self):
        if not (self.H >= self.c2 > self.c1 > 0):
            raise InvalidParams("Pliss parameters need H >= c2 > c1 > 0")

    @property
    def zeta(self) -> float:
        return (self.c2 - self.c1) / (self.H - self.c1)


@dataclass(frozen=True)
class HypParams:
    alpha_hyp: float
    delta: float
    b_exponent: float = 0.25

    def __post_init__(self):
        if not 0 < self.alpha_hyp < 1:
            raise InvalidParams("alpha_hyp must lie in (0, 1)")
        if not self.delta > 0:
            raise InvalidParams("delta must be positive")
        if not self.b_exponent > 0:
            raise InvalidParams("b_exponent must be positive")


def alpha_for_rate(c: float) -> float:
    """Hyperbolic-time rate ``exp(-c/5)`` for orbits with expansion average ``>= c > 0``.

    The sign matters: ``exp(+c/5)`` would exceed 1 and make every time hyperbolic.
    """
    if not c > 0:
        raise InvalidParams("expansion rate c must be positive")
    return math.exp(-c / 5.0)


@dataclass
class HyperbolicRecord:
    times: np.ndarray
    first: int | None = None

    def __post_init__(self):
        self.times = np.asarray(self.times, dtype=np.int64)
        if self.first is None and self.times.size:
            self.first = int(self.times[0])

    def __contains__(self, n):
        return bool(np.any(self.times == n))


def pliss_select(a, p: PlissParams, unguaranteed: bool = False) -> np.ndarray:
    """The maximal Pliss set ``{i : sum_{j=n+1..i} a_j >= c1 (i - n) for all 0 <= n < i}``.

    Indices are 1-based.  With ``S_i`` the prefix sums of ``a_j - c1``, ``i``
    is selected exactly when ``S_i`` reaches a new running maximum (ties
    count).  Unless ``unguaranteed`` is set, the hypotheses
    ``sum a_j >= c2 N`` and ``a_j <= H`` are checked first; they guarantee
    more than ``zeta N`` selected indices.
    """
    a = np.asarray(a, dtype=float).ravel()
    N = a.size
    if not unguaranteed:
        if N == 0 or a.sum() < p.c2 * N:
            raise HypothesisViolated(f"sum of sequence below c2*N = {p.c2 * N}")
        if np.any(a > p.H):
            raise HypothesisViolated(f"sequence exceeds H = {p.H}")
    S = np.concatenate([[0.0], np.cumsum(a - p.c1)])
    best = np.maximum.accumulate(S[:-1])
    return np.nonzero(S[1:] >= best)[0] + 1


def _expansion_mask(L: np.ndarray, alpha: float) -> np.ndarray:
    """``mask[:, n-1]`` is True when ``n`` satisfies the expansion condition (``L`` is ``(m, n)``)."""
    P = np.concatenate([np.zeros((L.shape[0], 1)), np.cumsum(L - math.log(alpha), axis=1)], axis=1)
    return P[:, 1:] <= np.minimum.accumulate(P[:, :-1], axis=1)


def _recurrence_mask(logd: np.ndarray, alpha: float, b: float) -> np.ndarray:
    c = b * math.log(alpha)
    idx = np.arange(logd.shape[1])
    Q = logd + c * idx
    return np.minimum.accumulate(Q, axis=1) >= c * (idx + 1)


def hyperbolic_times_diffeo(trace, alpha_hyp: float) -> HyperbolicRecord:
    if not 0 < alpha_hyp < 1:
        raise InvalidParams("alpha_hyp must lie in (0, 1)")
    mask = _expansion_mask(trace.log_inv_norms[None, :], alpha_hyp)[0]
    return HyperbolicRecord(np.nonzero(mask)[0] + 1)


def hyperbolic_times_critical(trace, hp: HypParams) -> HyperbolicRecord:
    if trace.log_trunc_dists is None or trace.delta is None:
        raise DeltaMismatch("trace carries no truncated-distance record")
    if not math.isclose(trace.delta, hp.delta, rel_tol=1e-12, abs_tol=0.0):
        raise DeltaMismatch(f"trace delta {trace.delta} differs from {hp.delta}")
    mask = _expansion_mask(trace.log_inv_norms[None, :], hp.alpha_hyp)[0]
    mask &= _recurrence_mask(trace.log_trunc_dists[None, :], hp.alpha_hyp, hp.b_exponent)[0]
    return HyperbolicRecord(np.nonzero(mask)[0] + 1)


def first_hyperbolic_time(trace, hp) -> int | None:
    """First hyperbolic time, or ``None`` when censored by the trace length.

    ``hp`` may be a bare ``alpha_hyp`` for traces of maps without critical set.
    """
    if isinstance(hp, HypParams):
        if trace.log_trunc_dists is None:
            rec = hyperbolic_times_diffeo(trace, hp.alpha_hyp)
        else:
            rec = hyperbolic_times_critical(trace, hp)
    else:
        rec = hyperbolic_times_diffeo(trace, float(hp))
    return rec.first


def first_times_batch(system, states: np.ndarray, hp: HypParams) -> np.ndarray:
    """First hyperbolic times for a batch of orbits ``(m, n + 1, D)``; 0 marks censored."""
    m, n1, D = states.shape
    n = n1 - 1
    X = states[:, :-1].reshape(-1, D)
    with np.errstate(divide="ignore"):
        L = np.log(system.inv_tangent_norm(X, check=False)).reshape(m, n)
        mask = _expansion_mask(L, hp.alpha_hyp)
        if system.has_critical_set:
            logd = np.log(system.truncated_distance(X, hp.delta)).reshape(m, n)
            mask &= _recurrence_mask(logd, hp.alpha_hyp, hp.b_exponent)
    hit = mask.any(axis=1)
    return np.where(hit, mask.argmax(axis=1) + 1, 0)


@dataclass
class TailProfile:
    """Empirical law of the first hyperbolic time ``h``; ``counts[k]`` samples had ``h = k``."""

    epsilon: float
    counts: np.ndarray
    censored: int
    sample_size: int
    n_max: int
    seed: int = 0
    meta: dict = field(default_factory=dict)

    def pmf(self) -> np.ndarray:
        return self.counts / self.sample_size

    def survival(self) -> np.ndarray:
        """``P(h > k)`` for ``k = 0 .. n_max``."""
        done = np.cumsum(self.counts)
        return 1.0 - done / self.sample_size

    def survivors(self) -> np.ndarray:
        return self.sample_size - np.cumsum(self.counts)

    def mean_lower_bound(self) -> float:
        k = np.arange(self.n_max + 1)
        return float((k * self.counts).sum() + self.n_max * self.censored) / self.sample_size


def tail_profile(system, kernel, hp: HypParams, sample_size: int, n_max: int, seed: int,
                 stream0: int = 0, batch: int = 2048, backend=None) -> TailProfile:
    """Empirical tail of ``h_eps`` over ``sample_size`` pairs ``(noise, x0)``.

    Sample ``i`` uses stream ``stream0 + i`` for both its start point
    (uniform on the domain) and its noise.
    """
    if sample_size < 1 or n_max < 1:
        raise InvalidParams("sample_size and n_max must be positive")
    counts = np.zeros(n_max + 1, dtype=np.int64)
    dom = system.domain
    for b0 in range(0, sample_size, batch):
        ids = range(b0, min(sample_size, b0 + batch))
        x0 = np.concatenate([sample_points(dom, 1, seed, stream0 + i) for i in ids])
        T = np.stack([kernel.embed(kernel.draw(seed, stream0 + i, 0, n_max)) for i in ids])
        states = kernels.iterate(system, x0, T, backend)
        h = first_times_batch(system, states, hp)
        counts += np.bincount(h, minlength=n_max + 1)
    censored = int(counts[0])
    counts[0] = 0
    return TailProfile(kernel.epsilon, counts, censored, sample_size, n_max, seed)


@dataclass
class GeometricFit:
    tau: float
    slope: float
    intercept: float
    ks: np.ndarray

    @property
    def decays(self) -> bool:
        return self.slope < 0


def fit_geometric_tail(profile: TailProfile, min_survivors: int = 10) -> GeometricFit:
    """Least-squares fit of ``log P(h > k) ~ intercept + k log tau`` over well-populated ``k``."""
    surv = profile.survival()
    alive = profile.survivors()
    ks = np.nonzero(alive >= min_survivors)[0]
    ks = ks[ks >= 1]
    if ks.size < 2:
        raise InsufficientHorizon("fewer than two tail points with enough survivors")
    slope, intercept = np.polyfit(ks, np.log(surv[ks]), 1)
    return GeometricFit(float(math.exp(slope)), float(slope), float(intercept), ks)


def uniform_tail_statistic(profiles, N: int) -> float:
    """``max_eps [ sum_{k >= N} k P(h = k) + n_max P(censored) ]``."""
    if not profiles:
        raise InvalidParams("need at least one profile")
    best = 0.0
    for p in profiles:
        if N > p.n_max:
            raise InsufficientHorizon(f"cutoff N={N} exceeds n_max={p.n_max}")
        k = np.arange(p.n_max + 1)
        tail = float((k[N:] * p.counts[N:]).sum()) / p.sample_size
        tail += p.n_max * p.censored / p.sample_size
        best = max(best, tail)
    return best


def expansion_average(trace) -> float:
    if trace.n == 0:
        raise InvalidParams("empty trace")
    return float(np.mean(trace.log_inv_norms))


def recurrence_average(trace) -> float:
    if trace.log_trunc_dists is None:
        raise DeltaMismatch("trace carries no truncated-distance record")
    if trace.n == 0:
        raise InvalidParams("empty trace")
    return float(-np.mean(trace.log_trunc_dists))


def visit_frequency(trace, region) -> float:
    """Fraction of ``x_0 .. x_{n-1}`` inside ``region`` (a vectorized indicator)."""
    if trace.n == 0:
        raise InvalidParams("empty trace")
    inside = np.asarray(region(trace.states[:-1]), dtype=bool)
    return float(inside.mean())
