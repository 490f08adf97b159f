"""Experiment drivers: stability sweep, physical-measure count, tails, skew-product diagnostics.

Every driver fills a report object row by row, so a caller holding the
report still has the finished rows if a later row fails.

Stream layout (all draws use the configured base seed):

* orbit ``i``, repetition ``r`` at grid index ``e``: ``(e << 40) + (r << 20) + i``
* stationarity Monte Carlo at grid index ``e``: ``(e << 40) + 2^39``
* reference orbits: ``2^62 + i``; start points on 2-D domains: ``2^63``
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .analysis import cluster_measures, convex_fit, stationarity_residual, verdict
from .errors import InsufficientHorizon
from .hyperbolic import HypParams, fit_geometric_tail, tail_profile, uniform_tail_statistic
from .measures import HistogramMeasure, average_measures, random_birkhoff_batch
from .metrics import TestFunctionFamily, wasserstein_1d, weak_star_distance
from .noise import NoiseKernel, sample_points
from .orbits import orbit_chunks
from . import kernels
from .viana import (
    VianaParams,
    contraction_ratios,
    depth_statistics,
    foliation_fixed_point,
)

STAT_STREAM = 1 << 39
REF_STREAM = 1 << 62
START_STREAM = 1 << 63


def orbit_stream(e: int, r: int = 0, i: int = 0) -> int:
    return (e << 40) + (r << 20) + i


def pmap(func, items, threads: int = 1):
    """Ordered map, optionally on a thread pool (the kernels release the GIL)."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as ex:
        return list(ex.map(func, items))


def make_kernel(system, cfg, eps: float) -> NoiseKernel:
    return NoiseKernel.for_system(system, cfg["kernel.mode"], eps)


def hyp_params(cfg, system) -> HypParams:
    delta = cfg["hyp.delta"]
    if delta is None:
        delta = VianaParams.of(system).default_delta if system.name == "viana" else 0.1
    b = cfg["hyp.b"] if cfg["hyp.b"] is not None else system.constants.b_exponent
    return HypParams(cfg["hyp.alpha"], delta, b)


def start_points(system, count: int, seed: int) -> np.ndarray:
    """Deterministic start grid: evenly spread in 1-D (split between trapping
    intervals when the map has them), uniform random on 2-D domains."""
    dom = system.domain
    if dom.dim == 2:
        return sample_points(dom, count, seed, START_STREAM)
    # a shifted grid keeps away from critical and fixed points at round numbers
    shift = 0.5 + 0.1234
    traps = getattr(system, "trapping_intervals", None)
    if traps:
        groups = np.array_split(np.arange(count), len(traps))
        pts = []
        for (lo, hi), g in zip(traps, groups):
            pts.extend(lo + (np.arange(g.size) + shift) / max(g.size, 1) * (hi - lo))
        return np.array(pts)[:, None]
    lo, L = dom.lows[0], dom.lengths[0]
    return dom.wrap((lo + (np.arange(count) + shift) / count * L)[:, None])


def trap_escapes(system, kernel, x0s, n: int, interval, seed: int, stream0: int = 0,
                 group: int = 100) -> np.ndarray:
    """Per orbit, whether ``x_1 .. x_n`` ever leaves the closed ``interval``."""
    lo, hi = interval
    x0s = np.asarray(x0s, dtype=float).reshape(-1, 1)
    out = np.zeros(x0s.shape[0], dtype=bool)
    for g0 in range(0, x0s.shape[0], group):
        X = x0s[g0:g0 + group]
        esc = np.zeros(X.shape[0], dtype=bool)
        for j0, S in orbit_chunks(system, kernel, X, n + 1, seed, stream0 + g0):
            x = S[:, 1:, 0] if j0 == 0 else S[:, :, 0]
            esc |= np.any((x < lo) | (x > hi), axis=1)
        out[g0:g0 + group] = esc
    return out


# -- reference measures -------------------------------------------------------

def _arcsine_cdf(center):
    def cdf(x):
        y = np.clip(np.asarray(x) - center, -1.0, 1.0)
        return 0.5 + np.arcsin(y) / np.pi
    return cdf


def fig1_references(domain, bins):
    """The two absolutely continuous invariant measures of the circle example (closed form)."""
    left = HistogramMeasure.from_cdf(domain, bins, _arcsine_cdf(-2.0))
    right = HistogramMeasure.from_cdf(domain, bins, _arcsine_cdf(0.0))
    return [left, right]


@dataclass
class References:
    measures: list
    kind: str  # "closed-form" or "proxy"
    p: int


def reference_measures(system, cfg) -> References:
    bins = cfg["grid.bins"]
    dom = system.domain
    if system.name == "doubling":
        return References([HistogramMeasure.uniform(dom, bins)], "closed-form", 1)
    if system.name == "fig1":
        return References(fig1_references(dom, bins), "closed-form", 2)
    eps_ref = cfg["reference.epsilon"]
    if eps_ref is None:
        # d*s mod 1 is exact in binary and collapses to 0 without any noise
        eps_ref = 1e-9 if system.name == "viana" else 0.0
    mode = cfg["kernel.mode"] if eps_ref > 0 else ("rotational" if any(dom.periodic) else "additive")
    kernel = NoiseKernel.for_system(system, mode, eps_ref)
    n_ref = cfg["budget.n"] * cfg["budget.reference_factor"]
    traps = getattr(system, "trapping_intervals", None)
    if traps:
        starts = np.array([[0.5 * (lo + hi) + 0.01234] for lo, hi in traps])
    elif dom.dim == 2:
        starts = sample_points(dom, 1, cfg.seed, REF_STREAM)
    else:
        starts = np.array([[dom.lows[0] + 0.3123 * dom.lengths[0]]])
    ms = random_birkhoff_batch(system, kernel, starts, n_ref, bins, cfg.seed, REF_STREAM,
                               burn_in=cfg["budget.burn_in"])
    return References(ms, "proxy", len(ms))


# -- stability sweep ------------------------------------------------------------

@dataclass
class StabilityReport:
    system: str
    p: int
    reference: str
    rows: list = field(default_factory=list)
    verdict: str = "inconclusive"
    tol: float = 0.02
    seeds: list = field(default_factory=list)

    def recompute_verdict(self):
        d = [r["d_weakstar"] for r in self.rows]
        se = [r["se"] for r in self.rows]
        self.verdict = verdict(d, se, self.tol)
        return self.verdict


def row_verdicts(rows, tol):
    """Verdict of every prefix of the sweep (the last equals the overall verdict)."""
    d = [r["d_weakstar"] for r in rows]
    se = [r["se"] for r in rows]
    return [verdict(d[: i + 1], se[: i + 1], tol) for i in range(len(rows))]


def _empirical_measures(system, cfg, e, eps, threads=1):
    kernel = make_kernel(system, cfg, eps)
    starts = start_points(system, cfg["budget.starts"], cfg.seed)
    reps = range(cfg["budget.seeds_per_start"])

    def one(r):
        return random_birkhoff_batch(system, kernel, starts, cfg["budget.n"], cfg["grid.bins"],
                                     cfg.seed, orbit_stream(e, r), burn_in=cfg["budget.burn_in"])

    out = []
    for ms in pmap(one, reps, threads):
        out.extend(ms)
    return kernel, out


def run_stability_sweep(cfg, report: StabilityReport | None = None, threads: int = 1) -> StabilityReport:
    system = cfg.build_system()
    refs = reference_measures(system, cfg)
    if report is None:
        report = StabilityReport(system.name, refs.p, refs.kind)
    report.p, report.reference, report.tol = refs.p, refs.kind, cfg["thresholds.stability_tol"]
    family = TestFunctionFamily(system.domain, cfg["grid.bins"], cfg["grid.family_k"])
    for e, eps in enumerate(cfg.epsilons):
        kernel, ms = _empirical_measures(system, cfg, e, eps, threads)
        report.seeds.append({"purpose": f"orbits eps={eps}", "seed": cfg.seed,
                             "stream0": orbit_stream(e), "count": len(ms)})
        clusters = cluster_measures(ms, cfg["thresholds.merge"], family)
        pooled = average_measures(ms)
        fit = convex_fit(pooled, refs.measures)
        target = fit.reconstruction(refs.measures)
        per = np.array([weak_star_distance(m, target, family) for m in ms])
        se = float(per.std(ddof=1) / math.sqrt(per.size)) if per.size > 1 else 0.0
        d_w = wasserstein_1d(pooled, target) if system.domain.dim == 1 else float("nan")
        stat = stationarity_residual(pooled, system, kernel, family, cfg["budget.mc_samples"], cfg.seed,
                                     orbit_stream(e) + STAT_STREAM)
        own = [min(weak_star_distance(rep, ref, family) for ref in refs.measures)
               for rep in clusters.representatives]
        report.rows.append({
            "epsilon": eps,
            "d_weakstar": weak_star_distance(pooled, target, family),
            "d_wasserstein": d_w,
            "l_clusters": clusters.l,
            "weights": list(fit.weights),
            "fit_residual": fit.residual,
            "stationarity_residual": stat,
            "se": se,
            "cluster_ref_distances": own,
            "cluster_gaps": list(clusters.representative_gaps(family)),
        })
        for r, v in zip(report.rows, row_verdicts(report.rows, report.tol)):
            r["verdict_row"] = v
    report.recompute_verdict()
    return report


# -- physical measure count ------------------------------------------------------

KNOWN_P = {"doubling": 1, "fig1": 2, "fig2": 2}


@dataclass
class CountReport:
    system: str
    p: int | None
    rows: list = field(default_factory=list)
    seeds: list = field(default_factory=list)

    @property
    def l_le_p(self) -> bool:
        return self.p is None or all(r["l"] <= self.p for r in self.rows)

    @property
    def monotone(self) -> bool:
        """``l`` as a function of ``epsilon`` is nonincreasing: along the decreasing grid it never drops."""
        ls = [r["l"] for r in self.rows]
        return all(b >= a for a, b in zip(ls, ls[1:]))


def run_physical_count(cfg, report: CountReport | None = None, threads: int = 1) -> CountReport:
    system = cfg.build_system()
    if report is None:
        report = CountReport(system.name, KNOWN_P.get(system.name))
    family = TestFunctionFamily(system.domain, cfg["grid.bins"], cfg["grid.family_k"])
    for e, eps in enumerate(cfg.epsilons):
        _, ms = _empirical_measures(system, cfg, e, eps, threads)
        report.seeds.append({"purpose": f"orbits eps={eps}", "seed": cfg.seed,
                             "stream0": orbit_stream(e), "count": len(ms)})
        clusters = cluster_measures(ms, cfg["thresholds.merge"], family)
        report.rows.append({"epsilon": eps, "l": clusters.l, "assignments": clusters.assignments.tolist(),
                            "gaps": list(clusters.representative_gaps(family))})
    return report


# -- first hyperbolic time tails ------------------------------------------------

@dataclass
class TailReport:
    system: str
    hyp: HypParams
    cutoff: int
    profiles: list = field(default_factory=list)
    fits: list = field(default_factory=list)
    statistic: float = float("nan")
    per_eps_statistic: list = field(default_factory=list)
    seeds: list = field(default_factory=list)

    @property
    def taus(self):
        return [f.tau if f is not None else float("nan") for f in self.fits]

    @property
    def tau_spread(self) -> float:
        t = [x for x in self.taus if np.isfinite(x)]
        return float(max(t) - min(t)) if t else float("nan")

    @property
    def statistic_spread(self) -> float:
        s = np.array(self.per_eps_statistic)
        return float((s.max() - s.min()) / s.max()) if s.size and s.max() > 0 else 0.0


def run_tail_experiment(cfg, report: TailReport | None = None, threads: int = 1) -> TailReport:
    system = cfg.build_system()
    hp = hyp_params(cfg, system)
    if report is None:
        report = TailReport(system.name, hp, cfg["budget.tail_cutoff"])

    def one(item):
        e, eps = item
        return tail_profile(system, make_kernel(system, cfg, eps), hp, cfg["budget.samples"],
                            cfg["budget.n_max"], cfg.seed, orbit_stream(e))

    for (e, eps), prof in zip(enumerate(cfg.epsilons), pmap(one, list(enumerate(cfg.epsilons)), threads)):
        report.seeds.append({"purpose": f"tail eps={eps}", "seed": cfg.seed,
                             "stream0": orbit_stream(e), "count": cfg["budget.samples"]})
        report.profiles.append(prof)
        try:
            report.fits.append(fit_geometric_tail(prof))
        except InsufficientHorizon:
            report.fits.append(None)
        report.per_eps_statistic.append(uniform_tail_statistic([prof], report.cutoff))
    report.statistic = uniform_tail_statistic(report.profiles, report.cutoff)
    return report


# -- skew-product diagnostics ---------------------------------------------------

@dataclass
class VianaReport:
    delta: float
    c: float
    gamma: float
    orbit_rows: list = field(default_factory=list)
    pass_fraction: dict = field(default_factory=dict)
    deep_fractions: dict = field(default_factory=dict)
    deficit_fractions: dict = field(default_factory=dict)
    depth_rows: list = field(default_factory=list)
    foliation: object = None
    foliation_summary: dict = field(default_factory=dict)
    seeds: list = field(default_factory=list)

    @property
    def deep_nonincreasing(self) -> bool:
        ns = sorted(self.deep_fractions)
        med = [float(np.median(self.deep_fractions[n])) for n in ns]
        return all(b <= a for a, b in zip(med, med[1:]))


def orbit_averages(system, kernel, n, count, delta, seed, stream0, group=10):
    """Central expansion and recurrence averages of ``count`` orbits of length ``n``."""
    exp_avg = np.empty(count)
    rec_avg = np.empty(count)
    for g0 in range(0, count, group):
        ids = range(g0, min(count, g0 + group))
        x0 = np.concatenate([sample_points(system.domain, 1, seed, stream0 + i) for i in ids])
        T = np.stack([kernel.embed(kernel.draw(seed, stream0 + i, 0, n)) for i in ids])
        x = kernels.iterate(system, x0, T)[:, :-1, 1]
        ax = np.abs(x)
        with np.errstate(divide="ignore"):
            exp_avg[g0:g0 + len(ids)] = -np.mean(np.log(2.0 * ax), axis=1)
            rec_avg[g0:g0 + len(ids)] = -np.mean(np.log(np.where(ax >= delta, 1.0, ax)), axis=1)
    return exp_avg, rec_avg


def run_viana_diagnostics(cfg, report: VianaReport | None = None, threads: int = 1) -> VianaReport:
    system = cfg.build_system()
    params = VianaParams.of(system)
    if report is None:
        report = VianaReport(hyp_params(cfg, system).delta, cfg["thresholds.c"], cfg["thresholds.gamma"])
    delta = report.delta
    seed = cfg.seed
    for e, eps in enumerate(cfg.epsilons):
        kernel = make_kernel(system, cfg, eps)
        ea, ra = orbit_averages(system, kernel, cfg["budget.n"], cfg["budget.orbits"], delta, seed,
                                orbit_stream(e))
        report.seeds.append({"purpose": f"viana orbits eps={eps}", "seed": seed,
                             "stream0": orbit_stream(e), "count": cfg["budget.orbits"]})
        for i, (a, b) in enumerate(zip(ea, ra)):
            report.orbit_rows.append({"epsilon": eps, "sample": i, "expansion_average": a,
                                      "recurrence_average": b})
        ok = (ea <= -report.c) & (ra <= report.gamma)
        report.pass_fraction[eps] = {"both": float(ok.mean()), "expansion": float(np.mean(ea <= -report.c)),
                                     "recurrence": float(np.mean(ra <= report.gamma))}
    kernel = make_kernel(system, cfg, cfg.epsilons[0])
    for n in cfg["budget.depth_ns"]:
        fr = []
        for rep in range(3):
            st = depth_statistics(system, kernel, n, cfg["budget.depth_samples"], seed + rep,
                                  orbit_stream(0, 1))
            report.seeds.append({"purpose": f"depth n={n}", "seed": seed + rep,
                                 "stream0": orbit_stream(0, 1), "count": cfg["budget.depth_samples"]})
            fr.append(float(st.deep_return.mean()))
            if rep == 0:
                report.depth_rows.extend(st.rows())
        report.deep_fractions[n] = fr
    for n in cfg["budget.deficit_ns"]:
        st = depth_statistics(system, kernel, n, cfg["budget.depth_samples"], seed, orbit_stream(0, 2))
        report.deficit_fractions[n] = float(np.mean(~st.deep_return & (st.g_sum >= cfg["thresholds.deficit_gamma"] * n)))
    fol = foliation_fixed_point(system, (cfg["foliation.ns"], cfg["foliation.nx"]), cfg["foliation.tol"],
                                cfg["foliation.max_iters"])
    ratios = contraction_ratios(fol.changes)
    report.foliation = fol
    report.foliation_summary = {
        "iterations": fol.iterations,
        "residual": fol.residual,
        "sup": fol.sup(),
        "max_contraction": float(ratios.max()) if ratios.size else 0.0,
        "depth_threshold": params.depth_threshold,
    }
    return report
