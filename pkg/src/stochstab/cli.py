"""Command line entry point: ``stochstab <command> --config FILE [--out DIR] [--seed N] [--threads N]``.

Exit codes: 0 success, 2 configuration error, 3 runtime error, 4 the
stability verdict came out ``inconsistent``.
"""
from __future__ import annotations

import argparse
import sys
import time

import numpy as np

from . import experiments as ex
from . import output
from .config import load_config
from .errors import ParseError, StochStabError, ValidationError
from .noise import NoiseKernel
from .orbits import random_orbit

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_INCONSISTENT = 0, 2, 3, 4


def _u64(text):
    v = int(text, 0)
    if not 0 <= v < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return v


def _positive(text):
    v = int(text)
    if v < 1:
        raise argparse.ArgumentTypeError("must be at least 1")
    return v


def _common(parser, default):
    d = argparse.SUPPRESS if default is None else None
    parser.add_argument("--config", metavar="PATH", default=d, help="key = value configuration file")
    parser.add_argument("--out", metavar="DIR", default=d, help="output directory (default: output.dir)")
    parser.add_argument("--seed", metavar="U64", type=_u64, default=d, help="override seeds.base")
    parser.add_argument("--threads", metavar="N", type=_positive, default=d, help="worker threads")


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochstab", description="Stochastic stability experiments.")
    _common(p, default="top")
    sub = p.add_subparsers(dest="command", required=True)
    helps = {
        "stability": "distance of empirical stationary measures to the physical ones along the noise grid",
        "count": "number of distinct ergodic stationary measures per noise level",
        "tail": "tail of the first hyperbolic time per noise level",
        "viana-diag": "expansion, recurrence, depth and central-foliation diagnostics for the skew product",
        "orbit": "write a single random orbit",
    }
    for name, h in helps.items():
        sp = sub.add_parser(name, help=h)
        _common(sp, default=None)
        if name == "orbit":
            sp.add_argument("--x0", default=None, help="comma-separated start point (default: domain center)")
            sp.add_argument("--n", type=_positive, default=None, help="orbit length (default: budget.n)")
            sp.add_argument("--epsilon", type=float, default=None, help="noise size (default: first grid value)")
    return p


def _run_orbit(cfg, args, out):
    system = cfg.build_system()
    dom = system.domain
    eps = args.epsilon if args.epsilon is not None else cfg.epsilons[0]
    kernel = NoiseKernel.for_system(system, cfg["kernel.mode"], eps)
    if args.x0:
        x0 = np.array([float(t) for t in args.x0.split(",")])
    else:
        x0 = np.asarray(dom.lows) + 0.5123 * np.asarray(dom.lengths)
    n = args.n or cfg["budget.n"]
    trace = random_orbit(system, kernel, x0, n, seed=cfg.seed)
    output.write_orbit(out, trace)
    seeds = [{"purpose": "orbit", "seed": cfg.seed, "stream0": 0, "count": 1}]
    return seeds, {"redraws": int(trace.redraws)}


DRIVERS = {
    "stability": (ex.run_stability_sweep, output.write_stability),
    "count": (ex.run_physical_count, output.write_count),
    "tail": (ex.run_tail_experiment, output.write_tail),
    "viana-diag": (ex.run_viana_diagnostics, output.write_viana),
}


def _summary(command, report):
    if command == "stability":
        return {"verdict": report.verdict, "p": report.p, "reference": report.reference}
    if command == "count":
        return {"p": report.p, "l_le_p": report.l_le_p, "monotone": report.monotone}
    if command == "tail":
        return {"taus": report.taus, "tail_statistic": report.statistic,
                "statistic_spread": report.statistic_spread}
    if command == "viana-diag":
        return {"pass_fraction": {str(k): v for k, v in report.pass_fraction.items()},
                "deep_nonincreasing": report.deep_nonincreasing,
                "deficit_fractions": {str(k): v for k, v in report.deficit_fractions.items()},
                "foliation": report.foliation_summary}
    return {}


def _empty_report(command, cfg):
    system = cfg.build_system()
    if command == "stability":
        return ex.StabilityReport(system.name, 0, "")
    if command == "count":
        return ex.CountReport(system.name, ex.KNOWN_P.get(system.name))
    if command == "tail":
        return ex.TailReport(system.name, ex.hyp_params(cfg, system), cfg["budget.tail_cutoff"])
    return ex.VianaReport(ex.hyp_params(cfg, system).delta, cfg["thresholds.c"], cfg["thresholds.gamma"])


def _run_driver(command, cfg, threads):
    # drivers append to the report row by row, so a failure leaves the finished rows behind
    report = _empty_report(command, cfg)
    try:
        return DRIVERS[command][0](cfg, report, threads=threads)
    except Exception as exc:
        exc.partial_report = report
        raise


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    t0 = time.perf_counter()
    try:
        if not getattr(args, "config", None):
            raise ParseError("--config is required")
        cfg = load_config(args.config)
        if getattr(args, "seed", None) is not None:
            cfg.override("seeds.base", args.seed)
    except (ParseError, ValidationError) as exc:
        print(f"stochstab: configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    out = output.OutputDir(getattr(args, "out", None) or cfg["output.dir"])
    threads = getattr(args, "threads", None) or 1
    command = args.command
    try:
        if command == "orbit":
            seeds, extra = _run_orbit(cfg, args, out)
            out.write_manifest(cfg, command, seeds, time.perf_counter() - t0, "ok", extra)
            return EXIT_OK
        report = _run_driver(command, cfg, threads)
    except (StochStabError, ArithmeticError, ValueError, OSError, MemoryError) as exc:
        partial = getattr(exc, "partial_report", None)
        seeds = []
        if partial is not None:
            try:
                DRIVERS[command][1](out, partial)
                seeds = partial.seeds if hasattr(partial, "seeds") else []
            except Exception:  # flushing is best effort
                pass
        try:
            out.write_manifest(cfg, command, seeds, time.perf_counter() - t0, "error",
                               {"error": f"{type(exc).__name__}: {exc}"})
        except OSError:
            pass
        print(f"stochstab: runtime error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    DRIVERS[command][1](out, report)
    summary = _summary(command, report)
    out.write_manifest(cfg, command, report.seeds, time.perf_counter() - t0, "ok", {"summary": summary})
    for k, v in summary.items():
        print(f"{k}: {v}")
    if command == "stability" and report.verdict == "inconsistent":
        return EXIT_INCONSISTENT
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
