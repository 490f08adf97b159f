"""Phase domains: circles, intervals, the cylinder S^1 x I and the 2-torus.

States are plain float arrays whose last axis holds the coordinates.  Circle
factors are stored in a chart ``[lo, lo + L)`` and every distance wraps.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import OutOfDomain

KINDS = ("circle", "interval", "cylinder", "torus2")


@dataclass(frozen=True)
class PhaseDomain:
    kind: str
    lows: tuple
    highs: tuple
    periodic: tuple

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown domain kind {self.kind!r}")
        if not (len(self.lows) == len(self.highs) == len(self.periodic)):
            raise ValueError("inconsistent coordinate description")
        for lo, hi in zip(self.lows, self.highs):
            if not hi > lo:
                raise ValueError("empty coordinate range")

    @classmethod
    def circle(cls, length=1.0, lo=0.0):
        return cls("circle", (float(lo),), (float(lo) + float(length),), (True,))

    @classmethod
    def interval(cls, lo, hi):
        return cls("interval", (float(lo),), (float(hi),), (False,))

    @classmethod
    def cylinder(cls, lo, hi):
        """``S^1 x [lo, hi]`` with the circle of unit length first."""
        return cls("cylinder", (0.0, float(lo)), (1.0, float(hi)), (True, False))

    @classmethod
    def torus2(cls):
        return cls("torus2", (0.0, 0.0), (1.0, 1.0), (True, True))

    @property
    def dim(self) -> int:
        return len(self.lows)

    @property
    def lengths(self) -> np.ndarray:
        return np.subtract(self.highs, self.lows)

    @property
    def volume(self) -> float:
        return float(np.prod(self.lengths))

    def as_points(self, x) -> np.ndarray:
        """Coerce scalars / single states / batches to shape ``(m, dim)``."""
        arr = np.asarray(x, dtype=float)
        if arr.ndim == 0:
            arr = arr.reshape(1, 1)
        elif arr.ndim == 1:
            arr = arr.reshape(-1, self.dim) if self.dim == 1 else arr.reshape(1, -1)
        if arr.shape[-1] != self.dim:
            raise OutOfDomain(f"expected {self.dim} coordinate(s), got {arr.shape[-1]}")
        return arr

    def wrap(self, x: np.ndarray) -> np.ndarray:
        """Reduce circle coordinates into their chart; interval coordinates are left alone.

        The operation order here is mirrored exactly by the compiled kernel.
        """
        out = np.array(x, dtype=float, copy=True)
        for c, per in enumerate(self.periodic):
            if not per:
                continue
            lo = self.lows[c]
            length = self.highs[c] - lo
            y = out[..., c] - lo
            r = y - length * np.floor(y / length)
            r = np.where(r < 0.0, r + length, r)
            r = np.where(r >= length, 0.0, r)
            out[..., c] = r + lo
        return out

    def contains(self, x, tol: float = 0.0) -> np.ndarray:
        pts = self.as_points(x)
        ok = np.ones(pts.shape[:-1], dtype=bool)
        for c, per in enumerate(self.periodic):
            v = pts[..., c]
            if per:
                ok &= (v >= self.lows[c] - tol) & (v < self.highs[c] + tol)
            else:
                ok &= (v >= self.lows[c] - tol) & (v <= self.highs[c] + tol)
        return ok

    def check(self, x, tol: float = 1e-12) -> np.ndarray:
        pts = self.as_points(x)
        if not np.all(self.contains(pts, tol)):
            raise OutOfDomain(f"state outside {self.kind} domain {self.lows}..{self.highs}")
        return self.wrap(pts)

    def coordinate_delta(self, x, y) -> np.ndarray:
        """Signed shortest displacement ``y - x`` per coordinate (wrapping circles)."""
        d = np.asarray(y, dtype=float) - np.asarray(x, dtype=float)
        d = np.array(d, copy=True)
        for c, per in enumerate(self.periodic):
            if per:
                length = self.highs[c] - self.lows[c]
                d[..., c] = d[..., c] - length * np.round(d[..., c] / length)
        return d

    def distance(self, x, y) -> np.ndarray:
        """Flat (Euclidean) distance with wrap-around on circle factors."""
        px = self.as_points(x)
        py = self.as_points(y)
        d = self.coordinate_delta(px, py)
        out = np.sqrt(np.sum(d * d, axis=-1))
        return out

    def from_unit(self, u: np.ndarray) -> np.ndarray:
        """Map points of the unit cube affinely onto the domain."""
        u = np.asarray(u, dtype=float)
        return np.asarray(self.lows) + u * self.lengths
