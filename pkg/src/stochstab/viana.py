"""Skew-product specific diagnostics.

Parameter search for a pre-periodic quadratic, central-direction
statistics, return depths into the critical region, the two rare-event
fractions and the contraction operator whose fixed point is the central
direction field.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels
from .errors import ContractionViolated, InvalidParams, MaxItersExceeded, NoRootFound
from .noise import sample_points, uniforms


class MisiurewiczRoot(float):
    """A float carrying the pre-period ``k`` and the residual of the root search."""

    def __new__(cls, value, k, residual):
        obj = super().__new__(cls, value)
        obj.k = int(k)
        obj.residual = float(residual)
        return obj

    @property
    def a0(self) -> float:
        return float(self)


def quadratic_iterate(a: float, k: int, x: float = 0.0) -> float:
    for _ in range(k):
        x = a - x * x
    return x


def interior_fixed_point(a: float) -> float:
    """The orientation-reversing fixed point of ``a - x^2`` inside the core interval."""
    return (-1.0 + math.sqrt(1.0 + 4.0 * a)) / 2.0


def boundary_fixed_point(a: float) -> float:
    """The other fixed point, ``-(1 + sqrt(1 + 4a)) / 2``; the critical orbit lands on it only at ``a = 2``."""
    return (-1.0 - math.sqrt(1.0 + 4.0 * a)) / 2.0


def find_misiurewicz_a0(k_max: int = 8, tol: float = 1e-12, grid: int = 4001) -> MisiurewiczRoot:
    """Smallest-``k`` root of ``Q_a^k(0) = p(a)`` on ``(1, 2)``.

    ``p(a)`` is the interior fixed point, so at the root the critical
    orbit becomes eventually fixed after ``k`` steps.  Brackets are found
    on a uniform grid and refined by bisection until the bracket is shorter
    than ``tol`` and the residual is below ``tol``.
    """
    if k_max < 2:
        raise ValueError("k_max must be at least 2")
    lo_a, hi_a = 1.0 + 1e-6, 2.0 - 1e-6
    grid_a = np.linspace(lo_a, hi_a, grid)

    def g(a, k):
        return quadratic_iterate(a, k) - interior_fixed_point(a)

    for k in range(2, k_max + 1):
        vals = np.array([g(a, k) for a in grid_a])
        idx = np.nonzero(np.sign(vals[:-1]) * np.sign(vals[1:]) < 0)[0]
        if idx.size == 0:
            continue
        lo, hi = grid_a[idx[0]], grid_a[idx[0] + 1]
        glo = g(lo, k)
        for _ in range(200):
            mid = 0.5 * (lo + hi)
            gm = g(mid, k)
            if gm == 0.0 or hi - lo < tol * 1e-3:
                lo = hi = mid
                break
            if (gm < 0) == (glo < 0):
                lo, glo = mid, gm
            else:
                hi = mid
        root = 0.5 * (lo + hi)
        res = abs(g(root, k))
        if res >= tol:
            raise NoRootFound(f"bisection stalled at residual {res:.3e}")
        return MisiurewiczRoot(root, k, res)
    raise NoRootFound(f"no sign change for k <= {k_max}; supply a0 explicitly")


@dataclass(frozen=True)
class VianaParams:
    """Parameters of the skew product; ``interval_I = None`` asks for the automatic shrink."""

    d: int = 16
    a0: float | None = None
    alpha_skew: float = 0.01
    interval_I: tuple | None = None
    eta_exponent: float = 0.1
    kappa: float = 0.0

    def build(self):
        from .systems import VianaMap

        return VianaMap(d=self.d, a0=self.a0, alpha_skew=self.alpha_skew, kappa=self.kappa,
                        interval=self.interval_I, eta=self.eta_exponent)

    @classmethod
    def of(cls, system) -> "VianaParams":
        p = system.params
        return cls(p["d"], p["a0"], p["alpha_skew"], tuple(p["interval"]), p["eta"], p["kappa"])

    @property
    def depth_threshold(self) -> float:
        """Depths at least ``(1/2 - 2 eta) log(1/alpha)`` count towards the set ``G``."""
        return (0.5 - 2.0 * self.eta_exponent) * math.log(1.0 / self.alpha_skew)

    @property
    def default_delta(self) -> float:
        return self.alpha_skew ** (0.5 - 2.0 * self.eta_exponent)


def _x_coords(trace_or_states):
    states = getattr(trace_or_states, "states", trace_or_states)
    states = np.asarray(states, dtype=float)
    return states[..., :-1, 1]


def central_expansion_average(trace) -> float:
    """``(1/n) sum log ||Df^{-1}|| = -(1/n) sum log |2 x_j|`` over ``j < n`` (max-entry norm)."""
    x = _x_coords(trace)
    if x.size == 0:
        raise InvalidParams("empty trace")
    with np.errstate(divide="ignore"):
        return float(-np.mean(np.log(np.abs(2.0 * x))))


# depth assigned to x = 0 (beyond -log of the smallest subnormal)
MAX_DEPTH = 746


def depth(x, alpha_skew: float) -> np.ndarray:
    """``r = ceil(-log|x|)`` inside ``(-sqrt(alpha), sqrt(alpha))`` and 0 outside.

    ``r`` is the index of the shell ``e^-r <= |x| < e^-(r-1)`` holding ``x``.
    """
    ax = np.abs(np.asarray(x, dtype=float))
    with np.errstate(divide="ignore"):
        r = np.ceil(-np.log(ax))
    r = np.minimum(np.where(np.isfinite(r), r, MAX_DEPTH), MAX_DEPTH)
    return np.where(ax >= math.sqrt(alpha_skew), 0, np.maximum(r, 0)).astype(np.int64)


@dataclass
class ReturnDepthTrace:
    depths: np.ndarray
    g_set: np.ndarray
    g_sum: int


def return_depths(trace, params: VianaParams) -> ReturnDepthTrace:
    r = depth(_x_coords(trace), params.alpha_skew)
    g = np.nonzero(r >= params.depth_threshold)[0]
    return ReturnDepthTrace(r, g, int(r[g].sum()))


def _sample_orbits(system, kernel, n, sample_size, seed, stream0, batch):
    """Yield ``(ids, states)`` batches; sample ``i`` uses stream ``stream0 + i`` for start and noise."""
    for b0 in range(0, sample_size, batch):
        ids = np.arange(b0, min(sample_size, b0 + batch))
        x0 = np.concatenate([sample_points(system.domain, 1, seed, stream0 + i) for i in ids])
        T = np.stack([kernel.embed(kernel.draw(seed, stream0 + i, 0, n)) for i in ids])
        yield ids, kernels.iterate(system, x0, T)


@dataclass
class DepthStatistics:
    n: int
    g_sum: np.ndarray
    deep_return: np.ndarray

    def rows(self):
        for i, (g, flag) in enumerate(zip(self.g_sum, self.deep_return)):
            yield i, self.n, int(g), int(flag)


def depth_statistics(system, kernel, n: int, sample_size: int, seed: int, stream0: int = 0,
                     batch: int = 512) -> DepthStatistics:
    """Per-sample ``g_sum`` and whether some ``1 <= j < n`` has ``|x_j| < e^-floor(sqrt n)``."""
    params = VianaParams.of(system)
    gs = np.zeros(sample_size, dtype=np.int64)
    deep = np.zeros(sample_size, dtype=bool)
    radius = math.exp(-math.floor(math.sqrt(n)))
    for ids, S in _sample_orbits(system, kernel, n, sample_size, seed, stream0, batch):
        x = S[:, :-1, 1]
        r = depth(x, params.alpha_skew)
        gs[ids] = np.where(r >= params.depth_threshold, r, 0).sum(axis=1)
        deep[ids] = np.any(np.abs(x[:, 1:]) < radius, axis=1)
    return DepthStatistics(n, gs, deep)


def deep_return_fraction(system, kernel, n: int, sample_size: int, seed: int, stream0: int = 0) -> float:
    """Monte Carlo estimate of ``m(B_2(n))``, the deep-return event."""
    if n < 4:
        raise InvalidParams("n must be at least 4")
    return float(depth_statistics(system, kernel, n, sample_size, seed, stream0).deep_return.mean())


def expansion_deficit_fraction(system, kernel, n: int, gamma: float, sample_size: int, seed: int,
                               stream0: int = 0) -> float:
    """Monte Carlo estimate of ``m(B_1(n))``: no deep return, yet ``sum_G r_j >= gamma n``."""
    if not gamma > 0:
        raise InvalidParams("gamma must be positive")
    st = depth_statistics(system, kernel, n, sample_size, seed, stream0)
    return float(np.mean(~st.deep_return & (st.g_sum >= gamma * n)))


# -- central direction field -------------------------------------------------

CLAMP_TOL = 1e-9


@dataclass
class FoliationField:
    s_nodes: np.ndarray
    x_nodes: np.ndarray
    values: np.ndarray
    horizon: int = 0
    iterations: int = 0
    residual: float = float("nan")
    changes: list = field(default_factory=list)

    @classmethod
    def zeros(cls, system, grid=(256, 128)):
        ns, nx = grid
        lo, hi = system.domain.lows[1], system.domain.highs[1]
        return cls(np.arange(ns) / ns, np.linspace(lo, hi, nx), np.zeros((ns, nx)))

    @property
    def grid(self):
        return self.values.shape

    def nodes(self) -> np.ndarray:
        S, X = np.meshgrid(self.s_nodes, self.x_nodes, indexing="ij")
        return np.stack([S.ravel(), X.ravel()], axis=1)

    def stencil(self, P):
        """Bilinear weights at points ``P``: periodic in ``s``, clamped in ``x``."""
        ns, nx = self.grid
        u = P[:, 0] * ns
        i0 = np.floor(u)
        fs = u - i0
        i0 = i0.astype(np.int64) % ns
        i1 = (i0 + 1) % ns
        lo, hi = self.x_nodes[0], self.x_nodes[-1]
        v = (P[:, 1] - lo) / (hi - lo) * (nx - 1)
        j0 = np.clip(np.floor(v), 0, nx - 2).astype(np.int64)
        fx = np.clip(v - j0, 0.0, 1.0)
        return i0, i1, j0, fs, fx

    def interpolate(self, P, stencil=None) -> np.ndarray:
        i0, i1, j0, fs, fx = stencil if stencil is not None else self.stencil(P)
        V = self.values
        return ((1 - fs) * ((1 - fx) * V[i0, j0] + fx * V[i0, j0 + 1])
                + fs * ((1 - fx) * V[i1, j0] + fx * V[i1, j0 + 1]))

    def sup(self) -> float:
        return float(np.abs(self.values).max())

    def rows(self):
        ns, nx = self.grid
        for i in range(ns):
            for j in range(nx):
                yield i, j, float(self.values[i, j])


def _operator_terms(system, field_, noise_path):
    """Per-draw stencils and partial derivatives at the grid nodes."""
    Z = field_.nodes()
    ds_g, dx_g, ds_q, dx_q = system.partials(Z)
    paths = [np.zeros(2)] if noise_path is None or len(noise_path) == 0 else np.atleast_2d(noise_path)
    terms = []
    for t in paths:
        FZ = system.step(Z, np.broadcast_to(np.asarray(t, dtype=float), Z.shape))
        terms.append(field_.stencil(FZ))
    return terms, (ds_g, dx_g, ds_q, dx_q)


def _apply(field_, terms, partials):
    ds_g, dx_g, ds_q, dx_q = partials
    acc = np.zeros(field_.values.size)
    for st in terms:
        xi = field_.interpolate(None, st)
        acc += (dx_q * xi - dx_g) / (-ds_q * xi + ds_g)
    out = acc / len(terms)
    worst = np.abs(out).max()
    if worst > 1.0 + CLAMP_TOL:
        raise ContractionViolated(f"A(xi) reaches {worst:.6g}; alpha_skew or epsilon too large")
    return np.clip(out, -1.0, 1.0).reshape(field_.values.shape)


def foliation_apply(field_: FoliationField, system, noise_path=None) -> FoliationField:
    """One application of the graph-transform operator ``A``.

    ``noise_path`` holds displacements ``t_1`` (one per row) applied after
    the map; ``A`` is averaged over the rows.  ``None`` means the
    unperturbed map.  The derivatives are those of ``f`` since the noise is
    a translation.
    """
    terms, partials = _operator_terms(system, field_, noise_path)
    vals = _apply(field_, terms, partials)
    return FoliationField(field_.s_nodes, field_.x_nodes, vals, field_.horizon, field_.iterations + 1)


def foliation_fixed_point(system, grid=(256, 128), tol: float = 1e-10, max_iters: int = 200,
                          kernel=None, mc: int = 8, horizon: int = 20, seed: int = 0) -> FoliationField:
    """Iterate ``A`` from ``xi = 0`` until the sup-change drops below ``tol``.

    With a noise ``kernel`` of positive size each step averages ``A`` over
    ``mc`` fresh draws of ``t_1`` and the iteration stops after ``horizon``
    steps: the field is then known up to ``2^-horizon`` times its size.
    """
    if not tol > 0:
        raise InvalidParams("tol must be positive")
    fld = FoliationField.zeros(system, grid)
    random = kernel is not None and kernel.epsilon > 0
    if not random:
        terms, partials = _operator_terms(system, fld, None)
    changes = []
    for it in range(1, max_iters + 1):
        if random:
            draws = kernel.embed(kernel.draw(seed, it, 0, mc))
            terms, partials = _operator_terms(system, fld, draws)
        new = _apply(fld, terms, partials)
        change = float(np.abs(new - fld.values).max())
        changes.append(change)
        fld = FoliationField(fld.s_nodes, fld.x_nodes, new, horizon if random else 0, it)
        if change < tol or (random and it >= horizon):
            break
    else:
        raise MaxItersExceeded(f"no convergence after {max_iters} iterations (last change {changes[-1]:.3e})")
    if random:
        draws = kernel.embed(kernel.draw(seed, max_iters + 1, 0, mc))
        terms, partials = _operator_terms(system, fld, draws)
    fld.residual = float(np.abs(_apply(fld, terms, partials) - fld.values).max())
    fld.changes = changes
    return fld


def contraction_ratios(changes) -> np.ndarray:
    """Successive ratios of sup-changes, ignoring steps already at round-off level."""
    c = np.asarray(changes, dtype=float)
    keep = (c[:-1] > 1e-13) & (c[1:] > 1e-13)
    return (c[1:] / np.where(c[:-1] > 0, c[:-1], 1.0))[keep]


def lipschitz_estimate(system, field_a, field_b, noise_path=None) -> float:
    """``sup|A xi - A zeta| / sup|xi - zeta|`` for two fields on the same grid."""
    terms, partials = _operator_terms(system, field_a, noise_path)
    Aa = _apply(field_a, terms, partials)
    Ab = _apply(field_b, terms, partials)
    return float(np.abs(Aa - Ab).max() / np.abs(field_a.values - field_b.values).max())
