"""Weak* distance between histogram measures and a 1-D transport cross-check.

The weak* distance is ``d_P(mu, nu) = sum_n 2^-n |int phi_n dmu - int phi_n dnu|``
over a fixed list of test functions, each bounded by 1:

* circle factor: ``1, cos(2 pi k u), sin(2 pi k u)`` for ``k = 1..K``;
* interval factor: Chebyshev ``T_0 .. T_K`` in the rescaled coordinate;
* two factors: products, enumerated by total index and then by the first
  index, keeping the first ``max_members`` of them.

Integrals against a histogram use exact cell averages of each test
function, so ``d_P`` depends only on the masses.
"""
from __future__ import annotations

import numpy as np
from numpy.polynomial import chebyshev as C

from .errors import DomainMismatch, InvalidParams, NotOneDimensional

DEFAULT_K = 16
# weights beyond 2^-64 vanish next to the leading terms in double precision
DEFAULT_MAX_MEMBERS = 64


def _factor_count(periodic, K):
    return 2 * K + 1 if periodic else K + 1


def _factor_eval(periodic, K, u, j):
    """Value of the ``j``-th 1-D member at normalized coordinates ``u`` in ``[0, 1]``."""
    if periodic:
        if j == 0:
            return np.ones_like(u)
        k = (j + 1) // 2
        return np.cos(2 * np.pi * k * u) if j % 2 else np.sin(2 * np.pi * k * u)
    coef = np.zeros(j + 1)
    coef[j] = 1.0
    return C.chebval(2.0 * u - 1.0, coef)


def _factor_cell_averages(periodic, K, nb):
    """Matrix ``(members, nb)`` of exact averages over ``nb`` equal cells of ``[0, 1]``."""
    e = np.linspace(0.0, 1.0, nb + 1)
    h = 1.0 / nb
    rows = []
    for j in range(_factor_count(periodic, K)):
        if periodic:
            if j == 0:
                rows.append(np.ones(nb))
                continue
            k = (j + 1) // 2
            w = 2 * np.pi * k
            if j % 2:
                rows.append((np.sin(w * e[1:]) - np.sin(w * e[:-1])) / (w * h))
            else:
                rows.append((np.cos(w * e[:-1]) - np.cos(w * e[1:])) / (w * h))
        else:
            coef = np.zeros(j + 1)
            coef[j] = 1.0
            anti = C.chebint(coef)
            y = 2.0 * e - 1.0
            # d(y) = 2 du, so the average over a cell of width h is delta(anti) / (2h)
            rows.append((C.chebval(y[1:], anti) - C.chebval(y[:-1], anti)) / (2.0 * h))
    return np.array(rows)


class TestFunctionFamily:
    """Fixed separating family on a gridded domain, with weights ``2^-n`` (``n = 1, 2, ...``)."""

    __test__ = False  # not a pytest class

    def __init__(self, domain, bins, K: int = DEFAULT_K, max_members: int = DEFAULT_MAX_MEMBERS,
                 check: bool = True):
        from .measures import normalize_bins

        if K < 1:
            raise InvalidParams("K must be at least 1")
        self.domain = domain
        self.bins = normalize_bins(domain, bins)
        self.K = int(K)
        counts = [_factor_count(p, K) for p in domain.periodic]
        if domain.dim == 1:
            self.index = [(j,) for j in range(counts[0])]
        else:
            pairs = [(i, j) for i in range(counts[0]) for j in range(counts[1])]
            pairs.sort(key=lambda ij: (ij[0] + ij[1], ij[0]))
            self.index = pairs[:max_members]
        self.weights = 0.5 ** np.arange(1, len(self.index) + 1)
        fac = [_factor_cell_averages(p, K, nb) for p, nb in zip(domain.periodic, self.bins)]
        if domain.dim == 1:
            self.cell_avgs = fac[0]
        else:
            self.cell_avgs = np.array([np.outer(fac[0][i], fac[1][j]).ravel() for i, j in self.index])
        if check:
            self._check_separation()

    def __len__(self):
        return len(self.index)

    def _check_separation(self):
        # every point mass must be distinguishable from the uniform measure
        unif = self.cell_avgs.mean(axis=1)
        gap = self.weights @ np.abs(self.cell_avgs - unif[:, None])
        if np.min(gap) <= 1e-12:
            raise InvalidParams("test family does not separate cells at this grid resolution")

    def integrals(self, mu) -> np.ndarray:
        if mu.domain != self.domain or mu.bins != self.bins:
            raise DomainMismatch("measure grid differs from the family grid")
        return self.cell_avgs @ mu.masses

    def evaluate(self, X) -> np.ndarray:
        """Point values ``(members, m)`` of each member at points ``X`` of shape ``(m, dim)``."""
        X = self.domain.as_points(X)
        u = (X - np.asarray(self.domain.lows)) / self.domain.lengths
        vals = []
        for idx in self.index:
            v = np.ones(X.shape[0])
            for c, j in enumerate(idx):
                v = v * _factor_eval(self.domain.periodic[c], self.K, u[:, c], j)
            vals.append(v)
        return np.array(vals)


def weak_star_distance(mu, nu, family: TestFunctionFamily) -> float:
    mu.require_compatible(nu)
    diff = np.abs(family.integrals(mu) - family.integrals(nu))
    return float(family.weights @ diff)


def wasserstein_1d(mu, nu) -> float:
    """Transport distance at grid resolution; cyclic optimum on circles."""
    mu.require_compatible(nu)
    dom = mu.domain
    if dom.dim != 1:
        raise NotOneDimensional("Wasserstein cross-check is one-dimensional")
    h = dom.lengths[0] / mu.cells
    D = np.cumsum(mu.masses - nu.masses)
    if dom.periodic[0]:
        # the optimal rotation of the cumulative difference is its median
        D = D - np.median(D)
    return float(np.abs(D).sum() * h)
