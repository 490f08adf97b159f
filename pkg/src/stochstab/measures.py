"""Histogram measures and the estimators that fill them.

A :class:`HistogramMeasure` is a piecewise-constant probability measure on
a regular grid of a phase domain, cells flattened in row-major order.
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass

import numpy as np

from .errors import DomainMismatch, InvalidParams
from .noise import NoiseKernel
from .orbits import occupation_counts

DEFAULT_BINS = 128


def normalize_bins(domain, bins) -> tuple:
    if np.ndim(bins) == 0:
        bins = (int(bins),) * domain.dim
    bins = tuple(int(b) for b in bins)
    if len(bins) != domain.dim or min(bins) < 1:
        raise InvalidParams(f"bins {bins} do not fit a {domain.dim}-d domain")
    return bins


@dataclass(eq=False)
class HistogramMeasure:
    domain: object
    bins: tuple
    masses: np.ndarray

    def __post_init__(self):
        self.bins = normalize_bins(self.domain, self.bins)
        m = np.asarray(self.masses, dtype=float).ravel()
        if m.size != int(np.prod(self.bins)):
            raise InvalidParams("mass vector does not match the grid")
        if np.any(m < 0):
            raise InvalidParams("masses must be nonnegative")
        total = m.sum()
        if not total > 0:
            raise InvalidParams("measure has no mass")
        self.masses = m / total

    # -- constructors -----------------------------------------------------
    @classmethod
    def from_counts(cls, domain, bins, counts):
        return cls(domain, bins, np.asarray(counts, dtype=float))

    @classmethod
    def uniform(cls, domain, bins=DEFAULT_BINS):
        bins = normalize_bins(domain, bins)
        return cls(domain, bins, np.ones(int(np.prod(bins))))

    @classmethod
    def point_mass(cls, domain, bins, x):
        bins = normalize_bins(domain, bins)
        masses = np.zeros(int(np.prod(bins)))
        masses[cell_index(domain, bins, domain.check(x))[0]] = 1.0
        return cls(domain, bins, masses)

    @classmethod
    def from_cdf(cls, domain, bins, cdf):
        """1-D measure whose cell masses are increments of ``cdf`` at the cell edges."""
        if domain.dim != 1:
            raise InvalidParams("from_cdf is one-dimensional")
        bins = normalize_bins(domain, bins)
        F = np.asarray(cdf(cell_edges(domain, bins)[0]), dtype=float)
        return cls(domain, bins, np.clip(np.diff(F), 0.0, None))

    @classmethod
    def from_points(cls, domain, bins, X):
        bins = normalize_bins(domain, bins)
        idx = cell_index(domain, bins, domain.as_points(X))
        return cls(domain, bins, np.bincount(idx, minlength=int(np.prod(bins))).astype(float))

    # -- geometry ---------------------------------------------------------
    @property
    def cells(self) -> int:
        return self.masses.size

    def edges(self):
        return cell_edges(self.domain, self.bins)

    def centers(self) -> np.ndarray:
        """Cell centers, shape ``(cells, dim)`` in row-major order."""
        mids = [0.5 * (e[:-1] + e[1:]) for e in self.edges()]
        grids = np.meshgrid(*mids, indexing="ij")
        return np.stack([g.ravel() for g in grids], axis=1)

    def grid(self) -> np.ndarray:
        return self.masses.reshape(self.bins)

    def density(self) -> np.ndarray:
        cell_volume = self.domain.volume / self.cells
        return self.grid() / cell_volume

    def marginal(self, axis: int) -> "HistogramMeasure":
        from .domains import PhaseDomain

        dom = self.domain
        lo, hi = dom.lows[axis], dom.highs[axis]
        sub = PhaseDomain.circle(hi - lo, lo) if dom.periodic[axis] else PhaseDomain.interval(lo, hi)
        others = tuple(a for a in range(dom.dim) if a != axis)
        return HistogramMeasure(sub, (self.bins[axis],), self.grid().sum(axis=others))

    def mass_in(self, lo, hi, axis: int = 0) -> float:
        """Mass of cells whose centers lie in ``[lo, hi]`` along ``axis``."""
        c = self.centers()[:, axis]
        return float(self.masses[(c >= lo) & (c <= hi)].sum())

    def compatible(self, other) -> bool:
        return self.domain == other.domain and self.bins == other.bins

    def require_compatible(self, other):
        if not self.compatible(other):
            raise DomainMismatch("measures live on different domains or grids")

    def l1_distance(self, other) -> float:
        self.require_compatible(other)
        return float(np.abs(self.masses - other.masses).sum())

    def mix(self, other, w: float = 0.5) -> "HistogramMeasure":
        self.require_compatible(other)
        return HistogramMeasure(self.domain, self.bins, (1 - w) * self.masses + w * other.masses)

    # -- CSV --------------------------------------------------------------
    def to_csv(self, path=None) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        head = ["bin_index"]
        for c in range(self.domain.dim):
            head += [f"coord{c + 1}_lo", f"coord{c + 1}_hi"]
        w.writerow(head + ["mass"])
        edges = self.edges()
        for i, multi in enumerate(np.ndindex(*self.bins)):
            row = [str(i)]
            for c, k in enumerate(multi):
                row += [fmt(edges[c][k]), fmt(edges[c][k + 1])]
            w.writerow(row + [fmt(self.masses[i])])
        text = buf.getvalue()
        if path is not None:
            with open(path, "w", newline="") as fh:
                fh.write(text)
        return text

    @classmethod
    def from_csv(cls, domain, path_or_text) -> "HistogramMeasure":
        text = path_or_text
        if "\n" not in str(path_or_text):
            with open(path_or_text) as fh:
                text = fh.read()
        rows = list(csv.reader(io.StringIO(text)))
        head, body = rows[0], rows[1:]
        if head[0] != "bin_index" or head[-1] != "mass" or len(head) != 2 + 2 * domain.dim:
            raise InvalidParams("unexpected histogram CSV header")
        idx = np.array([int(r[0]) for r in body])
        if not np.array_equal(idx, np.arange(len(body))):
            raise InvalidParams("histogram rows must be ordered by bin_index")
        bins = []
        for c in range(domain.dim):
            los = np.array([float(r[1 + 2 * c]) for r in body])
            bins.append(np.unique(los).size)
        return cls(domain, tuple(bins), np.array([float(r[-1]) for r in body]))


def fmt(x: float) -> str:
    """Decimal text with 12 significant digits."""
    return f"{float(x):.12g}"


def cell_edges(domain, bins):
    return [np.linspace(domain.lows[c], domain.highs[c], bins[c] + 1) for c in range(domain.dim)]


def cell_index(domain, bins, X) -> np.ndarray:
    """Row-major cell of each point (same arithmetic as the occupation kernel)."""
    from ._pykernels import bin_index

    return bin_index(domain, np.asarray(X, dtype=float), np.asarray(bins, dtype=np.int64))


def _zero_kernel(system):
    mode = "rotational" if any(system.domain.periodic) else "additive"
    return NoiseKernel.for_system(system, mode, 0.0)


def birkhoff_histogram(system, x0, n: int, bins=DEFAULT_BINS, burn_in: int = 0) -> HistogramMeasure:
    """Occupation measure of the unperturbed orbit ``x_0 .. x_{n-1}``."""
    return random_birkhoff_histogram(system, _zero_kernel(system), x0, n, bins, seed=0, stream=0,
                                     burn_in=burn_in)


def random_birkhoff_histogram(system, kernel, x0, n: int, bins=DEFAULT_BINS, seed: int = 0,
                              stream: int = 0, burn_in: int = 0) -> HistogramMeasure:
    """Occupation measure of one random orbit ``x_burn .. x_{burn+n-1}``."""
    X0 = system.domain.check(x0)
    return random_birkhoff_batch(system, kernel, X0, n, bins, seed, stream, burn_in)[0]


def random_birkhoff_batch(system, kernel, x0s, n: int, bins=DEFAULT_BINS, seed: int = 0,
                          stream0: int = 0, burn_in: int = 0):
    """One occupation measure per start point; start ``i`` uses stream ``stream0 + i``."""
    if n < 1:
        raise InvalidParams("n must be at least 1")
    bins = normalize_bins(system.domain, bins)
    counts = occupation_counts(system, kernel, x0s, n, bins, seed, stream0, burn_in=burn_in)
    return [HistogramMeasure(system.domain, bins, c) for c in counts]


def pushforward_average(system, kernel, x0, n_time: int, n_samples: int, bins=DEFAULT_BINS,
                        seed: int = 0, stream0: int = 0) -> HistogramMeasure:
    """``(1/n) sum_{j<n} (f^j_x)_* theta^N``: mass ``1/(n_time n_samples)`` per iterate ``j = 0..n-1``."""
    if n_time < 1 or n_samples < 1:
        raise InvalidParams("n_time and n_samples must be positive")
    bins = normalize_bins(system.domain, bins)
    X0 = np.repeat(system.domain.check(x0), n_samples, axis=0)
    counts = occupation_counts(system, kernel, X0, n_time, bins, seed, stream0)
    return HistogramMeasure(system.domain, bins, counts.sum(axis=0))


def average_measures(measures) -> HistogramMeasure:
    first = measures[0]
    for m in measures[1:]:
        first.require_compatible(m)
    return HistogramMeasure(first.domain, first.bins, np.mean([m.masses for m in measures], axis=0))
