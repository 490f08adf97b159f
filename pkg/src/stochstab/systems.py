"""Catalog of the dynamical systems used throughout the package.

Five maps are available through :func:`build_system`:

``doubling``
    ``s -> factor * s (mod 1)`` on the unit circle.  Used as a calibration
    baseline: Lebesgue measure is its unique absolutely continuous invariant
    measure.
``fig1``
    The circle map on ``[-3, 1]/{-3 ~ 1}`` built from ``1 - 2x^2`` on
    ``[-1, 1]`` and ``2(x+2)^2 - 3`` on ``[-3, -1]``.  Two SRB measures with
    supports meeting at ``-1``.
``fig2``
    The interval map on ``[-7, 2]`` built from ``q_a(x) = a - x^2`` and the
    conjugated copy ``p_a(x) = (x+5)^2 - 5 - a`` glued by a C^2 quintic on
    ``[-3, -2]``.  Two trapping intervals, hence two physical measures.
``viana``
    The skew product ``(s, x) -> (d s + kappa x^2 mod 1, a0 + alpha sin(2 pi s) - x^2)``
    on ``S^1 x I``.  ``kappa = 0`` gives the canonical form; a non-zero
    ``kappa`` tilts the central foliation.
``torus``
    ``(x, y) -> (3x, 3y) mod 1`` deformed inside a disk ``W`` so that the
    expansion in ``W`` drops to near-neutral while the volume stays expanded.

All methods accept a scalar (1-D systems), a single state, or a batch of
states with coordinates on the last axis.
"""
from __future__ import annotations

import functools
from dataclasses import dataclass
from types import MappingProxyType

import numpy as np

from .domains import PhaseDomain
from .errors import CriticalPoint, InvalidParams, OutOfDomain, UnknownCatalogId

TWO_PI = 2.0 * np.pi
DEFAULT_CRITICAL_FLOOR = 1e-15


@dataclass(frozen=True)
class SmoothnessConstants:
    B: float
    beta: float
    b_exponent: float

    def __post_init__(self):
        if not self.B > 1:
            raise InvalidParams("smoothness constant B must exceed 1")
        if not self.beta > 0:
            raise InvalidParams("beta must be positive")
        bound = min(0.5, 1.0 / (2.0 * self.beta))
        if not 0 < self.b_exponent < bound:
            raise InvalidParams(f"b_exponent must lie in (0, {bound})")


class MapSystem:
    """A catalog map with evaluation, tangent data and critical-set geometry.

    Instances are immutable after construction and safe to share between
    threads.  Subclasses provide the vectorized formulas ``_image``,
    ``_jacobian`` and ``_critical_distance`` on ``(m, dim)`` arrays.
    """

    name = "abstract"
    code = -1

    def __init__(self, domain, params, constants, critical_floor=DEFAULT_CRITICAL_FLOOR):
        self.domain = domain
        self.params = MappingProxyType(dict(params))
        self.constants = constants
        self.critical_floor = float(critical_floor)

    def __repr__(self):
        shown = ", ".join(f"{k}={v!r}" for k, v in self.params.items())
        return f"{type(self).__name__}({shown})"

    def __setattr__(self, key, value):
        if getattr(self, "_frozen", False):
            raise AttributeError(f"{type(self).__name__} is immutable")
        object.__setattr__(self, key, value)

    def _freeze(self):
        object.__setattr__(self, "_frozen", True)

    # -- subclass hooks -------------------------------------------------
    def _image(self, X):
        raise NotImplementedError

    def _jacobian(self, X):
        raise NotImplementedError

    def _critical_distance(self, X):
        return None

    @property
    def kernel_params(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def has_critical_set(self) -> bool:
        return False

    @property
    def margin(self) -> float:
        """Distance from ``f(M)`` to the boundary of an interval factor (inf for closed manifolds)."""
        return np.inf

    # -- batch helpers --------------------------------------------------
    def _points(self, x):
        arr = np.asarray(x, dtype=float)
        return arr, self.domain.as_points(arr)

    def _scalar_out(self, arr, vals):
        if self.domain.dim == 1:
            shape = arr.shape if arr.ndim < 2 else arr.shape[:-1]
        else:
            shape = arr.shape[:-1]
        if shape == ():
            return float(vals.reshape(-1)[0])
        return vals.reshape(shape)

    def step(self, X: np.ndarray, T: np.ndarray) -> np.ndarray:
        """``f(X) + T`` followed by wrapping; ``X`` and ``T`` are ``(m, dim)``.

        This is the reference arithmetic that the compiled kernel reproduces.
        """
        return self.domain.wrap(self._image(X) + T)

    # -- public operations ---------------------------------------------
    def eval(self, x):
        arr, X = self._points(x)
        if not np.all(self.domain.contains(X, 1e-12)):
            raise OutOfDomain(f"{self.name}: state outside domain")
        X = self.domain.wrap(X)
        Y = self.domain.wrap(self._image(X))
        if arr.ndim == 0:
            return float(Y[0, 0])
        return Y.reshape(arr.shape)

    def tangent(self, x) -> np.ndarray:
        arr, X = self._points(x)
        J = self._jacobian(self.domain.wrap(X))
        if arr.ndim == 0 or (self.domain.dim > 1 and arr.ndim == 1):
            return J[0]
        return J

    def jac_det(self, x):
        arr, X = self._points(x)
        J = self._jacobian(self.domain.wrap(X))
        if self.domain.dim == 1:
            vals = np.abs(J[:, 0, 0])
        else:
            vals = np.abs(J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0])
        return self._scalar_out(arr, vals)

    def _inv_norm(self, X, J):
        raise NotImplementedError

    def inv_tangent_norm(self, x, check: bool = True):
        """``||Df(x)^{-1}||``; raises :class:`CriticalPoint` within the critical floor."""
        arr, X = self._points(x)
        X = self.domain.wrap(X)
        if check and self.has_critical_set:
            dist = self._critical_distance(X)
            if np.any(dist < self.critical_floor):
                raise CriticalPoint(f"{self.name}: point on the critical set")
        with np.errstate(divide="ignore"):
            vals = self._inv_norm(X, self._jacobian(X))
        return self._scalar_out(arr, vals)

    def critical_distance(self, x):
        """Distance to the critical set, or ``None`` when the set is empty."""
        if not self.has_critical_set:
            return None
        arr, X = self._points(x)
        return self._scalar_out(arr, self._critical_distance(self.domain.wrap(X)))

    def truncated_distance(self, x, delta: float):
        """``dist_delta(x, C)``: 1 when ``dist >= delta`` (or ``C`` empty), else ``dist``."""
        if not delta > 0:
            raise InvalidParams("delta must be positive")
        arr, X = self._points(x)
        if not self.has_critical_set:
            return self._scalar_out(arr, np.ones(X.shape[0]))
        dist = self._critical_distance(self.domain.wrap(X))
        return self._scalar_out(arr, np.where(dist >= delta, 1.0, dist))


def _inv_norm_1d(X, J):
    return 1.0 / np.abs(J[:, 0, 0])


class DoublingMap(MapSystem):
    name = "doubling"
    code = 0

    def __init__(self, factor=2):
        if int(factor) != factor or factor < 2:
            raise InvalidParams("doubling: factor must be an integer >= 2")
        super().__init__(
            PhaseDomain.circle(1.0),
            {"factor": int(factor)},
            SmoothnessConstants(B=2.0, beta=1.0, b_exponent=0.25),
        )
        self._factor = float(factor)
        self._freeze()

    @property
    def kernel_params(self):
        return np.array([self._factor])

    def _image(self, X):
        return self._factor * X

    def _jacobian(self, X):
        J = np.empty((X.shape[0], 1, 1))
        J[:, 0, 0] = self._factor
        return J

    _inv_norm = staticmethod(_inv_norm_1d)


class Fig1Map(MapSystem):
    """Two tent-conjugate quadratic laps glued into a degree-two circle map.

    The chart is ``[-3, 1)`` (circle of length 4).  Critical points sit at
    ``0`` and ``-2``, where the two quadratic pieces have zero derivative.
    """

    name = "fig1"
    code = 1
    critical_points = (-2.0, 0.0)
    p = 2  # number of SRB measures of the unperturbed map

    def __init__(self):
        super().__init__(
            PhaseDomain.circle(4.0, lo=-3.0),
            {},
            SmoothnessConstants(B=2.0, beta=1.0, b_exponent=0.25),
        )
        self._freeze()

    @property
    def kernel_params(self):
        return np.zeros(1)

    @property
    def has_critical_set(self):
        return True

    def _image(self, X):
        x = X[:, 0]
        right = 1.0 - 2.0 * x * x
        left = 2.0 * (x + 2.0) * (x + 2.0) - 3.0
        return np.where(x >= -1.0, right, left)[:, None]

    def _jacobian(self, X):
        x = X[:, 0]
        return np.where(x >= -1.0, -4.0 * x, 4.0 * (x + 2.0))[:, None, None]

    def _critical_distance(self, X):
        pts = np.asarray(self.critical_points)
        d = self.domain.coordinate_delta(X[:, :1], pts[None, :])
        return np.min(np.abs(d), axis=1)

    _inv_norm = staticmethod(_inv_norm_1d)


def _hermite_quintic(v0, d0, s0, v1, d1, s1):
    """Coefficients ``c0..c5`` of the quintic on ``[0, 1]`` matching value/slope/curvature."""
    A = np.array(
        [
            [1, 0, 0, 0, 0, 0],
            [0, 1, 0, 0, 0, 0],
            [0, 0, 2, 0, 0, 0],
            [1, 1, 1, 1, 1, 1],
            [0, 1, 2, 3, 4, 5],
            [0, 0, 2, 6, 12, 20],
        ],
        dtype=float,
    )
    return np.linalg.solve(A, np.array([v0, d0, s0, v1, d1, s1], dtype=float))


class Fig2Map(MapSystem):
    """Interval map with two trapping regions.

    ``trap_pad`` (``mu``) sizes the trapping intervals
    ``I_2 = [a - (a+mu)^2 - mu, a + mu]`` around ``[q_a^2(0), q_a(0)]`` and
    ``I_1``, its image under the conjugacy ``x -> -(x + 5)``.
    """

    name = "fig2"
    code = 2
    p = 2

    def __init__(self, a=None, trap_pad=0.15):
        if a is None:
            a = default_quadratic_parameter()
        a = float(a)
        if not 1.0 < a < 2.0:
            raise InvalidParams("fig2: parameter a must lie in (1, 2)")
        mu = float(trap_pad)
        if not mu > 0:
            raise InvalidParams("fig2: trap_pad must be positive")
        super().__init__(
            PhaseDomain.interval(-7.0, 2.0),
            {"a": a, "trap_pad": mu},
            SmoothnessConstants(B=2.0, beta=1.0, b_exponent=0.25),
        )
        self._a = a
        coeffs = _hermite_quintic(-1.0 - a, 4.0, 2.0, a - 4.0, 4.0, -2.0)
        self._coeffs = coeffs
        dpoly = np.polynomial.Polynomial(coeffs).deriv()
        roots = dpoly.roots()
        roots = np.sort(roots[np.abs(roots.imag) < 1e-12].real)
        roots = roots[(roots > 0.0) & (roots < 1.0)]
        self._critical = np.concatenate([[-5.0], roots - 3.0, [0.0]])

        v = a + mu
        u = a - v * v - mu
        if u < -2.0 or abs(u) > v:
            raise InvalidParams("fig2: trap_pad too large for a trapping interval around q_a's core")
        self._traps = ((-5.0 - v, -5.0 - u), (u, v))
        self._margin = self._image_margin(-7.0, 2.0)
        if not self._margin > 0:
            raise InvalidParams("fig2: map does not send the interval into its interior")
        self._trap_margin = min(self._image_margin(lo, hi) for lo, hi in self._traps)
        if not self._trap_margin > 0:
            raise InvalidParams("fig2: trapping intervals are not mapped into their interiors")
        self._freeze()

    @property
    def kernel_params(self):
        return np.concatenate([[self._a], self._coeffs])

    @property
    def has_critical_set(self):
        return True

    @property
    def critical_points(self):
        return tuple(self._critical)

    @property
    def trapping_intervals(self):
        """``(I_1, I_2)``: the left (around ``p_a``'s core) and right trapping intervals."""
        return self._traps

    @property
    def margin(self):
        return self._margin

    @property
    def trap_margin(self):
        return self._trap_margin

    def image_range(self, lo, hi):
        cands = [lo, hi] + [c for c in self._critical if lo < c < hi]
        vals = self._image(np.asarray(cands, dtype=float)[:, None])[:, 0]
        return float(vals.min()), float(vals.max())

    def _image_margin(self, lo, hi):
        fmin, fmax = self.image_range(lo, hi)
        return min(fmin - lo, hi - fmax)

    def _image(self, X):
        x = X[:, 0]
        a = self._a
        c = self._coeffs
        right = a - x * x
        left = (x + 5.0) * (x + 5.0) - 5.0 - a
        t = x + 3.0
        glue = ((((c[5] * t + c[4]) * t + c[3]) * t + c[2]) * t + c[1]) * t + c[0]
        return np.where(x >= -2.0, right, np.where(x <= -3.0, left, glue))[:, None]

    def _jacobian(self, X):
        x = X[:, 0]
        c = self._coeffs
        t = x + 3.0
        glue = (((5.0 * c[5] * t + 4.0 * c[4]) * t + 3.0 * c[3]) * t + 2.0 * c[2]) * t + c[1]
        d = np.where(x >= -2.0, -2.0 * x, np.where(x <= -3.0, 2.0 * (x + 5.0), glue))
        return d[:, None, None]

    def _critical_distance(self, X):
        return np.min(np.abs(X[:, :1] - self._critical[None, :]), axis=1)

    _inv_norm = staticmethod(_inv_norm_1d)


class VianaMap(MapSystem):
    """Skew product over ``s -> d s`` with quadratic fibre maps.

    ``interval`` defaults to the largest symmetric ``[-L, L]`` with
    ``L = 1.9, 1.89, ...`` that passes the invariance scan.
    """

    name = "viana"
    code = 3

    def __init__(self, d=16, a0=None, alpha_skew=0.01, kappa=0.0, interval=None, eta=0.1):
        if int(d) != d or d < 16:
            raise InvalidParams("viana: d must be an integer >= 16")
        if a0 is None:
            a0 = default_quadratic_parameter()
        a0 = float(a0)
        if not 1.0 < a0 < 2.0:
            raise InvalidParams("viana: a0 must lie in (1, 2)")
        alpha = float(alpha_skew)
        if not alpha > 0:
            raise InvalidParams("viana: alpha_skew must be positive")
        if not 0 < eta < 0.25:
            raise InvalidParams("viana: eta must lie in (0, 1/4)")
        self._d = float(d)
        self._a0 = a0
        self._alpha = alpha
        self._kappa = float(kappa)
        if interval is None:
            L = 1.9
            while L > 1.0:
                margin = self._invariance_margin(-L, L)
                if margin > 0:
                    break
                L = round(L - 0.01, 10)
            else:
                raise InvalidParams("viana: no invariant interval found; alpha_skew too large?")
            lo, hi = -L, L
        else:
            lo, hi = map(float, interval)
            if not (-2.0 < lo < hi < 2.0):
                raise InvalidParams("viana: interval must lie inside (-2, 2)")
        margin = self._invariance_margin(lo, hi)
        if not margin > 0:
            raise InvalidParams("viana: S^1 x I is not mapped into its interior")
        super().__init__(
            PhaseDomain.cylinder(lo, hi),
            {"d": int(d), "a0": a0, "alpha_skew": alpha, "kappa": self._kappa,
             "interval": (lo, hi), "eta": float(eta)},
            SmoothnessConstants(B=2.0, beta=1.0, b_exponent=0.25),
        )
        self._margin = margin
        self._freeze()

    def _invariance_margin(self, lo, hi, n=256):
        s = np.concatenate([np.linspace(0.0, 1.0, n, endpoint=False), [0.25, 0.75]])
        x = np.concatenate([np.linspace(lo, hi, n), [0.0]])
        S, X = np.meshgrid(s, x, indexing="ij")
        q = self._a0 + self._alpha * np.sin(TWO_PI * S) - X * X
        return float(min(q.min() - lo, hi - q.max()))

    @property
    def kernel_params(self):
        return np.array([self._d, self._a0, self._alpha, self._kappa])

    @property
    def has_critical_set(self):
        return True

    @property
    def margin(self):
        return self._margin

    def _image(self, X):
        s = X[:, 0]
        x = X[:, 1]
        out = np.empty_like(X)
        out[:, 0] = self._d * s + self._kappa * x * x
        out[:, 1] = self._a0 + self._alpha * np.sin(TWO_PI * s) - x * x
        return out

    def partials(self, X):
        """``(d_s g, d_x g, d_s q, d_x q)`` at each point of ``X``."""
        s = X[:, 0]
        x = X[:, 1]
        ds_g = np.full_like(s, self._d)
        dx_g = 2.0 * self._kappa * x
        ds_q = TWO_PI * self._alpha * np.cos(TWO_PI * s)
        dx_q = -2.0 * x
        return ds_g, dx_g, ds_q, dx_q

    def _jacobian(self, X):
        ds_g, dx_g, ds_q, dx_q = self.partials(X)
        J = np.empty((X.shape[0], 2, 2))
        J[:, 0, 0] = ds_g
        J[:, 0, 1] = dx_g
        J[:, 1, 0] = ds_q
        J[:, 1, 1] = dx_q
        return J

    def _inv_norm(self, X, J):
        # max-entry norm of the inverse matrix
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        entries = np.abs(J).reshape(J.shape[0], 4).max(axis=1)
        return entries / np.abs(det)

    def _critical_distance(self, X):
        return np.abs(X[:, 1])


class TorusMap(MapSystem):
    """``(x, y) -> (3x - A b(r) (x - cx), 3y) mod 1`` with ``b(r) = (1 - r^2/R^2)^3`` on ``W``.

    The construction scan checks ``||Df^{-1}|| <= 1 + eta`` on ``W`` and
    ``|det Df| > 1`` everywhere on a 512 x 512 grid.
    """

    name = "torus"
    code = 4

    def __init__(self, eta=0.1, amplitude=2.0, center=(0.5, 0.5), radius=0.15, scan=512):
        cx, cy = map(float, center)
        R = float(radius)
        A = float(amplitude)
        if not 0 < R < 1.0 / 6.0:
            raise InvalidParams("torus: radius must lie in (0, 1/6) so f is injective on W")
        if not (R <= cx <= 1 - R and R <= cy <= 1 - R):
            raise InvalidParams("torus: W must not straddle the fundamental domain edge")
        if not eta > 0:
            raise InvalidParams("torus: eta must be positive")
        self._cx, self._cy, self._R, self._A = cx, cy, R, A
        g = (np.arange(scan) + 0.5) / scan
        G = np.stack(np.meshgrid(g, g, indexing="ij"), axis=-1).reshape(-1, 2)
        G = np.concatenate([G, [[cx, cy]]])
        J = self._jacobian(G)
        det = np.abs(J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0])
        inW = np.hypot(G[:, 0] - cx, G[:, 1] - cy) < R
        inv = self._inv_norm(G, J)
        self.sigma = float(det.min())
        self.max_inv_norm_W = float(inv[inW].max())
        self.lam = float(inv[~inW].max())
        if not self.sigma > 1.0:
            raise InvalidParams(f"torus: |det Df| drops to {self.sigma:.4f} <= 1")
        if self.max_inv_norm_W > 1.0 + eta:
            raise InvalidParams(
                f"torus: ||Df^-1|| reaches {self.max_inv_norm_W:.4f} > 1 + eta on W"
            )
        super().__init__(
            PhaseDomain.torus2(),
            {"eta": float(eta), "amplitude": A, "center": (cx, cy), "radius": R},
            SmoothnessConstants(B=2.0, beta=1.0, b_exponent=0.25),
        )
        self._freeze()

    @property
    def kernel_params(self):
        return np.array([self._cx, self._cy, self._R, self._A])

    def in_W(self, X):
        X = np.atleast_2d(X)
        return np.hypot(X[:, 0] - self._cx, X[:, 1] - self._cy) < self._R

    def _bump(self, X):
        dx = X[:, 0] - self._cx
        dy = X[:, 1] - self._cy
        u = (dx * dx + dy * dy) / (self._R * self._R)
        w = 1.0 - u
        inside = u < 1.0
        return dx, dy, u, w, inside

    def _image(self, X):
        dx, dy, u, w, inside = self._bump(X)
        beta = np.where(inside, w * w * w, 0.0)
        out = np.empty_like(X)
        out[:, 0] = 3.0 * X[:, 0] - self._A * beta * dx
        out[:, 1] = 3.0 * X[:, 1]
        return out

    def _jacobian(self, X):
        dx, dy, u, w, inside = self._bump(X)
        beta = np.where(inside, w * w * w, 0.0)
        # d beta / dx = -6 w^2 dx / R^2 inside W
        g = np.where(inside, 6.0 * w * w / (self._R * self._R), 0.0)
        J = np.zeros((X.shape[0], 2, 2))
        J[:, 0, 0] = 3.0 - self._A * beta + self._A * g * dx * dx
        J[:, 0, 1] = self._A * g * dx * dy
        J[:, 1, 1] = 3.0
        return J

    def _inv_norm(self, X, J):
        # operator 2-norm of the inverse = 1 / smallest singular value
        fro2 = np.sum(J.reshape(J.shape[0], 4) ** 2, axis=1)
        det = J[:, 0, 0] * J[:, 1, 1] - J[:, 0, 1] * J[:, 1, 0]
        disc = np.sqrt(np.maximum(fro2 * fro2 - 4.0 * det * det, 0.0))
        smin2 = 2.0 * det * det / (fro2 + disc)
        return 1.0 / np.sqrt(smin2)


@functools.lru_cache(maxsize=None)
def default_quadratic_parameter() -> float:
    """Pre-periodic parameter for ``a - x^2`` found by the root search in :mod:`viana`."""
    from .viana import find_misiurewicz_a0

    return find_misiurewicz_a0().a0


CATALOG = {
    "doubling": DoublingMap,
    "fig1": Fig1Map,
    "fig2": Fig2Map,
    "viana": VianaMap,
    "torus": TorusMap,
}


def build_system(name: str, params=None) -> MapSystem:
    try:
        cls = CATALOG[name]
    except KeyError:
        raise UnknownCatalogId(f"unknown system {name!r}; choose from {sorted(CATALOG)}") from None
    params = dict(params or {})
    try:
        return cls(**params)
    except TypeError as exc:
        raise InvalidParams(f"{name}: {exc}") from None
