"""Bounded-distortion check at hyperbolic times for one-dimensional maps.

At a hyperbolic time ``n`` of a random orbit, the ball of radius
``delta1`` around ``x_n`` pulls back along the orbit's noise sequence to an
interval ``V_n`` around ``x_0``.  Inside ``V_n`` the Jacobian of ``f^n``
varies by at most the factor ``C1 = exp(2B r / (1 - r))`` with
``r = alpha^(1/2 - b beta)``, and backward iterates contract by
``alpha^(k/2)``.  This module builds ``V_n`` with safeguarded Newton steps on inverse branches
and samples pairs inside it.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BranchNotFound, NotHyperbolicTime, NotOneDimensional
from .hyperbolic import HypParams, hyperbolic_times_critical, hyperbolic_times_diffeo
from .noise import uniforms

MAX_BRANCH_RADIUS = 0.1
# below this displacement the image offset is taken from the midpoint derivative,
# which keeps full relative precision where x + y would round to x
SMALL_DISPLACEMENT = 1e-6
NEWTON_ITERS = 80
# offsets below exp(-345) ~ 1e-150 are pulled back linearly
LINEAR_LOG_SCALE = -345.0


@dataclass
class DistortionDiagnostic:
    C1_bound: float
    observed_max_ratio: float
    contraction_max_ratio: float
    delta1: float
    window: tuple
    n: int
    log_window_width: float = float("nan")  # natural log of |V_n|, finite even when window underflows

    @property
    def distortion_ok(self) -> bool:
        return self.observed_max_ratio <= self.C1_bound

    @property
    def contraction_ok(self) -> bool:
        return self.contraction_max_ratio <= 1.0


def c1_bound(alpha: float, b: float, B: float, beta: float) -> float:
    if not b * beta < 0.5:
        raise ValueError("C1 is finite only when b * beta < 1/2")
    r = alpha ** (0.5 - b * beta)
    return math.exp(2.0 * B * r / (1.0 - r))


def delta1_for(hp: HypParams, beta: float, B: float) -> float:
    """Radius with ``4 delta1 < min(delta, delta^beta |log alpha|)``, shrunk by ``B``."""
    return min(hp.delta, hp.delta ** beta * abs(math.log(hp.alpha_hyp))) / (4.0 * B)


def _deriv(system, x):
    X = system.domain.wrap(np.asarray(x, dtype=float).reshape(-1, 1))
    return np.asarray(system.tangent(X), dtype=float).reshape(-1)


def _offset(system, x, t, y):
    """Displacement of ``f_t(x + y)`` from ``f_t(x)``, for a vector of offsets ``y``."""
    y = np.asarray(y, dtype=float)
    out = y * _deriv(system, x + 0.5 * y)
    big = np.abs(y) >= SMALL_DISPLACEMENT
    if big.any():
        X = system.domain.wrap((x + y[big]).reshape(-1, 1))
        Y = system.step(X, np.full_like(X, t))
        Y0 = system.step(system.domain.wrap(np.array([[x]])), np.array([[t]]))
        out[big] = system.domain.coordinate_delta(Y0, Y)[:, 0]
    return out


def _solve_branch(system, x, t, targets, rho, increasing):
    """Safeguarded Newton for ``offset(y) = target`` on the monotone branch ``[-rho, rho]``."""
    lo = np.full(targets.shape, -rho)
    hi = np.full(targets.shape, rho)
    d0 = float(_deriv(system, x)[0])
    y = np.clip(targets / d0, -rho, rho)
    for _ in range(NEWTON_ITERS):
        r = _offset(system, x, t, y) - targets
        up = (r > 0) == increasing
        hi = np.where(up & (r != 0), y, hi)
        lo = np.where(~up & (r != 0), y, lo)
        with np.errstate(divide="ignore", invalid="ignore"):
            y_new = y - r / _deriv(system, x + y)
        bad = ~np.isfinite(y_new) | (y_new <= lo) | (y_new >= hi)
        y_new = np.where(bad & (r != 0), 0.5 * (lo + hi), y_new)
        y_new = np.where(r == 0, y, y_new)
        done = np.abs(y_new - y) <= 4e-16 * np.abs(y)
        y = y_new
        if done.all():
            break
    return y


def _pull_back(system, trace, n: int, targets):
    """Preimages of ``x_n + targets`` along the trace's noise, as offsets from ``x_k``.

    Returns ``(log_scale, E)`` with offsets ``exp(log_scale[k]) * E[k]`` for
    ``k = 0..n``.  Offsets far below float range arise at late hyperbolic times;
    there ``f'`` is constant across the window, so the branch is linear.
    """
    states = trace.states
    T = trace.noise.entries
    E = np.empty((n + 1, len(targets)))
    L = np.zeros(n + 1)
    E[n] = targets
    for k in range(n, 0, -1):
        x = float(states[k - 1, 0])
        d0 = float(_deriv(system, x)[0])
        if L[k] + math.log(max(np.abs(E[k]).max(), 1e-300)) < LINEAR_LOG_SCALE:
            L[k - 1] = L[k] - math.log(abs(d0))
            E[k - 1] = E[k] * math.copysign(1.0, d0)
            continue
        y = math.exp(L[k]) * E[k]
        t = float(T[k - 1, 0] if T.shape[1] == 1 else T[k - 1].sum())
        dist = system.critical_distance(states[k - 1:k])
        rho = MAX_BRANCH_RADIUS if dist is None else min(0.999 * float(dist[0]), MAX_BRANCH_RADIUS)
        increasing = d0 > 0
        edge = _offset(system, x, t, np.array([-rho, rho]))
        lo_val, hi_val = (edge[0], edge[1]) if increasing else (edge[1], edge[0])
        if not (lo_val <= y.min() and y.max() <= hi_val):
            raise BranchNotFound(f"window at step {k} exceeds the monotone branch")
        E[k - 1] = _solve_branch(system, x, t, y, rho, increasing)
    return L, E


def pull_back_window(system, trace, n: int, delta1: float):
    """Windows ``[a_k, b_k]`` (displacements from ``x_k``) for ``k = 0, 1, ..., n``."""
    L, E = _pull_back(system, trace, n, np.array([-delta1, delta1]))
    D = np.exp(L)[:, None] * E
    return [(float(min(a, b)), float(max(a, b))) for a, b in D]


def distortion_diagnostic(system, kernel, hp: HypParams, trace, n: int, pair_count: int = 100,
                          seed: int = 0, stream: int = 0) -> DistortionDiagnostic:
    if system.domain.dim != 1:
        raise NotOneDimensional("distortion diagnostic needs a one-dimensional map")
    if trace.log_trunc_dists is not None:
        rec = hyperbolic_times_critical(trace, hp)
    else:
        rec = hyperbolic_times_diffeo(trace, hp.alpha_hyp)
    if n < 1 or n not in rec:
        raise NotHyperbolicTime(f"n={n} is not a hyperbolic time of the trace")
    c = system.constants
    d1 = delta1_for(hp, c.beta, c.B)
    # pair points are drawn in the target ball and pulled back, which samples pairs
    # in V_n while staying accurate when V_n is far below float resolution
    u = uniforms(seed, stream, 0, 2 * pair_count)
    targets = np.concatenate([[-d1, d1], d1 * (2.0 * u - 1.0)])
    L, E = _pull_back(system, trace, n, targets)
    a0, b0 = sorted(math.exp(L[0]) * E[0, :2])
    P = np.exp(L)[:, None] * E[:, 2:]
    x = trace.states[: n + 1, 0][:, None]
    logd = np.log(np.abs(_deriv(system, (x[:n] + P[:n]).ravel()))).reshape(n, -1)
    S = logd.sum(axis=0).reshape(pair_count, 2)
    ratio = np.exp(np.abs(S[:, 0] - S[:, 1]))
    with np.errstate(divide="ignore"):
        log_sep = L[:, None] + np.log(np.abs(E[:, 2::2] - E[:, 3::2]))  # (n + 1, pairs)
    k = np.arange(n, -1, -1)[:, None]  # row j corresponds to k = n - j
    log_bound = 0.5 * k * math.log(hp.alpha_hyp) + log_sep[n][None, :]
    with np.errstate(invalid="ignore"):
        log_contr = np.where(np.isfinite(log_sep), log_sep - log_bound, 0.0)
    return DistortionDiagnostic(
        C1_bound=c1_bound(hp.alpha_hyp, c.b_exponent, c.B, c.beta),
        observed_max_ratio=float(ratio.max()),
        contraction_max_ratio=float(np.exp(log_contr[:n].max())) if n else 1.0,
        delta1=d1,
        window=(float(a0), float(b0)),
        n=int(n),
        log_window_width=float(L[0] + math.log(abs(E[0, 1] - E[0, 0]))),
    )
