"""CSV, plot-data and manifest emission.

Floats are written with 12 significant digits and rows in a fixed order, so
reruns with the same configuration give byte-identical CSV files.
"""
from __future__ import annotations

import csv
import json
import os
import platform

import numpy as np
import scipy

from . import __version__
from .kernels import BACKEND
from .measures import fmt


def _cell(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return fmt(v)
    return str(v)


class OutputDir:
    """Single writer for one run's output directory; remembers what it wrote."""

    def __init__(self, path):
        self.path = str(path)
        os.makedirs(self.path, exist_ok=True)
        self.files = []

    def _target(self, name):
        if name not in self.files:
            self.files.append(name)
        return os.path.join(self.path, name)

    def write_csv(self, name, header, rows):
        with open(self._target(name), "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for r in rows:
                w.writerow([_cell(v) for v in r])

    def write_dat(self, name, xs, ys):
        """Two whitespace-separated columns, ready for gnuplot and friends."""
        with open(self._target(name), "w") as fh:
            for x, y in zip(xs, ys):
                fh.write(f"{_cell(x)} {_cell(y)}\n")

    def write_manifest(self, cfg, command, seeds, wall_time, status, extra=None):
        doc = {
            "command": command,
            "status": status,
            "config": cfg.echo() if cfg is not None else None,
            "seeds": seeds,
            "versions": {
                "stochstab": __version__,
                "backend": BACKEND,
                "numpy": np.__version__,
                "scipy": scipy.__version__,
                "python": platform.python_version(),
            },
            "wall_time_seconds": wall_time,
            "files": list(self.files),
        }
        if extra:
            doc.update(extra)
        with open(os.path.join(self.path, "manifest.json"), "w") as fh:
            json.dump(doc, fh, indent=2, sort_keys=True, default=_json_default)
            fh.write("\n")
        return doc


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    return str(o)


# -- per-experiment writers -----------------------------------------------

def stability_header(p: int):
    return (["epsilon", "d_weakstar", "d_wasserstein", "l_clusters"]
            + [f"w{i + 1}" for i in range(p)]
            + ["fit_residual", "stationarity_residual", "verdict_row"])


def write_stability(out: OutputDir, report):
    rows = []
    for r in report.rows:
        w = list(r["weights"]) + [0.0] * (report.p - len(r["weights"]))
        rows.append([r["epsilon"], r["d_weakstar"], r["d_wasserstein"], r["l_clusters"], *w,
                     r["fit_residual"], r["stationarity_residual"], r["verdict_row"]])
    out.write_csv("stability.csv", stability_header(report.p), rows)
    eps = [r["epsilon"] for r in report.rows]
    out.write_dat("d_weakstar.dat", eps, [r["d_weakstar"] for r in report.rows])
    out.write_dat("stationarity_residual.dat", eps, [r["stationarity_residual"] for r in report.rows])
    if report.rows and np.isfinite(report.rows[0]["d_wasserstein"]):
        out.write_dat("d_wasserstein.dat", eps, [r["d_wasserstein"] for r in report.rows])


def write_count(out: OutputDir, report):
    out.write_csv("count.csv", ["epsilon", "l"], [[r["epsilon"], r["l"]] for r in report.rows])
    out.write_dat("count.dat", [r["epsilon"] for r in report.rows], [r["l"] for r in report.rows])


def write_tail(out: OutputDir, report):
    rows = []
    for e, prof in enumerate(report.profiles):
        surv = prof.survival()
        for k in range(prof.n_max + 1):
            rows.append([prof.epsilon, k, int(prof.counts[k]), surv[k]])
        out.write_dat(f"tail_survival_{e}.dat", range(prof.n_max + 1), surv)
    out.write_csv("tail.csv", ["epsilon", "k", "count", "p_gt_k"], rows)
    fits = [[p.epsilon, f.tau if f else float("nan"), p.censored, s]
            for p, f, s in zip(report.profiles, report.fits, report.per_eps_statistic)]
    out.write_csv("tail_fit.csv", ["epsilon", "tau", "censored", "tail_statistic"], fits)


def write_viana(out: OutputDir, report):
    out.write_csv("viana_orbits.csv", ["epsilon", "sample", "expansion_average", "recurrence_average"],
                  [[r["epsilon"], r["sample"], r["expansion_average"], r["recurrence_average"]]
                   for r in report.orbit_rows])
    out.write_csv("depth.csv", ["sample", "n", "g_sum", "deep_return_flag"], report.depth_rows)
    ns = sorted(report.deep_fractions)
    out.write_csv("deep_return.csv", ["n", "fraction_median", "fraction_min", "fraction_max"],
                  [[n, float(np.median(report.deep_fractions[n])), min(report.deep_fractions[n]),
                    max(report.deep_fractions[n])] for n in ns])
    out.write_dat("deep_return.dat", ns, [float(np.median(report.deep_fractions[n])) for n in ns])
    dn = sorted(report.deficit_fractions)
    out.write_dat("deficit.dat", dn, [report.deficit_fractions[n] for n in dn])
    if report.foliation is not None:
        out.write_csv("foliation.csv", ["s_index", "x_index", "xi_value"], report.foliation.rows())
        out.write_dat("foliation_changes.dat", range(1, len(report.foliation.changes) + 1),
                      report.foliation.changes)


def write_orbit(out: OutputDir, trace):
    dim = trace.states.shape[1]
    header = ["j"] + [f"x{c + 1}" for c in range(dim)] + ["log_inv_norm"]
    rows = []
    for j in range(trace.n + 1):
        li = trace.log_inv_norms[j] if j < trace.n else float("nan")
        rows.append([j, *trace.states[j], li])
    out.write_csv("orbit.csv", header, rows)
