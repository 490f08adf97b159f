"""Stationarity residuals, clustering of empirical measures, convex fits and verdicts."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.cluster.hierarchy import fcluster, linkage
from scipy.optimize import nnls

from .errors import InvalidParams
from .measures import HistogramMeasure
from .noise import uniforms

VERDICTS = ("stable-consistent", "inconclusive", "inconsistent")


def sample_from_histogram(mu: HistogramMeasure, count: int, seed: int, stream: int = 0) -> np.ndarray:
    """``count`` points drawn from ``mu`` (cell by inverse CDF, then uniform inside the cell)."""
    dim = mu.domain.dim
    u = uniforms(seed, stream, 0, count * (dim + 1)).reshape(count, dim + 1)
    cdf = np.cumsum(mu.masses)
    cell = np.minimum(np.searchsorted(cdf, u[:, 0] * cdf[-1], side="right"), mu.cells - 1)
    multi = np.unravel_index(cell, mu.bins)
    X = np.empty((count, dim))
    for c in range(dim):
        lo = mu.domain.lows[c]
        h = mu.domain.lengths[c] / mu.bins[c]
        X[:, c] = lo + (multi[c] + u[:, 1 + c]) * h
    return mu.domain.wrap(X)


def stationarity_terms(mu, system, kernel, family, mc_samples: int, seed: int, stream: int = 0):
    """Per-member ``int phi dmu - E[phi(f_t x)]`` and the Monte Carlo standard error of each."""
    if mu.domain != system.domain:
        raise InvalidParams("measure and system live on different domains")
    X = sample_from_histogram(mu, mc_samples, seed, stream)
    T = kernel.embed(kernel.draw(seed, stream + 1, 0, mc_samples))
    vals = family.evaluate(system.step(X, T))
    diff = family.integrals(mu) - vals.mean(axis=1)
    se = vals.std(axis=1, ddof=1) / np.sqrt(mc_samples)
    return diff, se


def stationarity_residual(mu, system, kernel, family, mc_samples: int, seed: int, stream: int = 0) -> float:
    """``max_phi |int phi dmu - int int phi(f_t x) dmu dtheta|`` with the double integral by Monte Carlo."""
    diff, _ = stationarity_terms(mu, system, kernel, family, mc_samples, seed, stream)
    return float(np.max(np.abs(diff)))


def pairwise_distances(samples, family) -> np.ndarray:
    I = np.array([family.integrals(s) for s in samples])
    return np.einsum("n,ijn->ij", family.weights, np.abs(I[:, None, :] - I[None, :, :]))


@dataclass
class MeasureCluster:
    representatives: list
    assignments: np.ndarray
    distances: np.ndarray

    @property
    def l(self) -> int:
        return len(self.representatives)

    def representative_gaps(self, family) -> np.ndarray:
        if self.l < 2:
            return np.array([])
        D = pairwise_distances(self.representatives, family)
        return D[np.triu_indices(self.l, 1)]


def cluster_measures(samples, threshold: float, family) -> MeasureCluster:
    """Single-linkage clusters under ``d_P``: members closer than ``threshold`` chain together.

    Labels are numbered by first appearance; representatives are cluster
    averages.
    """
    if not samples:
        raise InvalidParams("need at least one sample")
    for s in samples[1:]:
        samples[0].require_compatible(s)
    D = pairwise_distances(samples, family)
    if len(samples) == 1:
        raw = np.array([1])
    else:
        iu = np.triu_indices(len(samples), 1)
        raw = fcluster(linkage(D[iu], method="single"), t=threshold, criterion="distance")
    order = {}
    labels = np.array([order.setdefault(r, len(order)) for r in raw])
    reps = []
    for c in range(len(order)):
        masses = np.mean([samples[i].masses for i in np.nonzero(labels == c)[0]], axis=0)
        reps.append(HistogramMeasure(samples[0].domain, samples[0].bins, masses))
    return MeasureCluster(reps, labels, D)


@dataclass
class ConvexFit:
    weights: np.ndarray
    residual: float

    def reconstruction(self, basis) -> HistogramMeasure:
        masses = sum(w * b.masses for w, b in zip(self.weights, basis))
        return HistogramMeasure(basis[0].domain, basis[0].bins, masses)


def convex_fit(mu, basis, penalty: float = 1e3) -> ConvexFit:
    """Simplex-constrained least squares on bin masses.

    Non-negative least squares on the system augmented by the row
    ``penalty * sum(w) = penalty``, then renormalized; the residual is the
    L2 norm of the mass difference.
    """
    if not basis:
        raise InvalidParams("basis must be nonempty")
    for b in basis:
        mu.require_compatible(b)
    B = np.array([b.masses for b in basis]).T
    scale = penalty * max(1.0, float(np.linalg.norm(B, axis=0).max()))
    A = np.vstack([B, np.full((1, B.shape[1]), scale)])
    y = np.concatenate([mu.masses, [scale]])
    w, _ = nnls(A, y)
    w = w / w.sum()
    return ConvexFit(w, float(np.linalg.norm(B @ w - mu.masses)))


def verdict(d_values, slack, tol: float) -> str:
    """Classify a sweep ordered by decreasing epsilon.

    ``stable-consistent``: distances nonincreasing (up to ``slack``) and the
    last one within ``tol``.  ``inconsistent``: last distance above ``tol``
    and the sequence not nonincreasing.  Anything else is ``inconclusive``.
    """
    d = np.asarray(d_values, dtype=float)
    s = np.broadcast_to(np.asarray(slack, dtype=float), d.shape)
    if d.size == 0:
        return "inconclusive"
    monotone = bool(np.all(d[1:] <= d[:-1] + s[1:]))
    final_ok = bool(d[-1] <= tol)
    if monotone and final_ok:
        return "stable-consistent"
    if not final_ok and not monotone:
        return "inconsistent"
    return "inconclusive"
