"""Flat ``key = value`` experiment configuration.

Keys are dotted (``system.name``, ``kernel.epsilons``, ...).  Lines starting
with ``#`` are comments.  Unknown or repeated keys are rejected; after
parsing, the whole configuration is validated and every violated rule is
reported at once.
"""
from __future__ import annotations

from dataclasses import dataclass, field

from .errors import InvalidParams, ParseError, ValidationError
from .systems import CATALOG, build_system


def _float(text):
    return float(text)


def _int(text):
    v = float(text)
    if v != int(v):
        raise ValueError(f"{text!r} is not an integer")
    return int(v)


def _floats(text):
    return [float(t) for t in text.split(",") if t.strip()]


def _ints(text):
    return [_int(t) for t in text.split(",") if t.strip()]


def _str(text):
    return text


# key -> (parser, default)
SCHEMA = {
    "system.name": (_str, None),
    "kernel.mode": (_str, "additive"),
    "kernel.epsilons": (_floats, None),
    "hyp.alpha": (_float, 0.5),
    "hyp.delta": (_float, None),
    "hyp.b": (_float, None),
    "thresholds.c": (_float, 0.01),
    "thresholds.gamma": (_float, 0.05),
    "thresholds.merge": (_float, 0.02),
    "thresholds.stability_tol": (_float, 0.02),
    "thresholds.deficit_gamma": (_float, 1.0),
    "budget.n": (_int, 100000),
    "budget.burn_in": (_int, 0),
    "budget.starts": (_int, 8),
    "budget.seeds_per_start": (_int, 1),
    "budget.mc_samples": (_int, 100000),
    "budget.reference_factor": (_int, 10),
    "budget.samples": (_int, 10000),
    "budget.n_max": (_int, 60),
    "budget.tail_cutoff": (_int, 2),
    "budget.orbits": (_int, 200),
    "budget.depth_ns": (_ints, [100, 400, 900]),
    "budget.deficit_ns": (_ints, [200, 400, 800]),
    "budget.depth_samples": (_int, 2000),
    "grid.bins": (_int, 128),
    "grid.family_k": (_int, 16),
    "reference.epsilon": (_float, None),
    "foliation.ns": (_int, 256),
    "foliation.nx": (_int, 128),
    "foliation.tol": (_float, 1e-10),
    "foliation.max_iters": (_int, 200),
    "foliation.mc": (_int, 8),
    "foliation.horizon": (_int, 20),
    "seeds.base": (_int, 1),
    "output.dir": (_str, "out"),
}

# accepted system parameters and their parsers
SYSTEM_PARAMS = {
    "doubling": {"factor": _int},
    "fig1": {},
    "fig2": {"a": _float, "trap_pad": _float},
    "viana": {"d": _int, "a0": _float, "alpha_skew": _float, "kappa": _float,
              "interval": _floats, "eta": _float},
    "torus": {"eta": _float, "amplitude": _float, "center": _floats, "radius": _float},
}

BUDGET_KEYS = [k for k in SCHEMA if k.startswith("budget.") and k not in ("budget.burn_in",)]


@dataclass
class ExperimentConfig:
    values: dict
    system_params: dict
    raw: list = field(default_factory=list)

    def __getitem__(self, key):
        return self.values[key]

    def get(self, key, default=None):
        return self.values.get(key, default)

    @property
    def system_name(self) -> str:
        return self.values["system.name"]

    @property
    def epsilons(self) -> list:
        return list(self.values["kernel.epsilons"])

    @property
    def seed(self) -> int:
        return int(self.values["seeds.base"])

    def build_system(self):
        return build_system(self.system_name, self.system_params)

    def echo(self) -> dict:
        out = dict(self.values)
        for k, v in self.system_params.items():
            out[f"system.{k}"] = v
        return out

    def override(self, key, value):
        self.values[key] = value


def parse_config(text: str) -> ExperimentConfig:
    values = {}
    sys_raw = {}
    seen = {}
    raw = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.strip()
        if not body or body.startswith("#"):
            continue
        if "=" not in body:
            raise ParseError("expected 'key = value'", line=lineno)
        key, _, val = body.partition("=")
        key = key.strip()
        val = val.split("#", 1)[0].strip()
        if not key:
            raise ParseError("empty key", line=lineno)
        if key in seen:
            raise ParseError(f"duplicate key (first on line {seen[key]})", line=lineno, key=key)
        seen[key] = lineno
        raw.append((key, val))
        if key in SCHEMA:
            parser = SCHEMA[key][0]
            try:
                values[key] = parser(val)
            except ValueError as exc:
                raise ParseError(f"bad value {val!r}: {exc}", line=lineno, key=key) from None
        elif key.startswith("system."):
            sys_raw[key[len("system."):]] = (val, lineno)
        else:
            raise ParseError("unknown key", line=lineno, key=key)

    name = values.get("system.name")
    system_params = {}
    if name in SYSTEM_PARAMS:
        allowed = SYSTEM_PARAMS[name]
        for p, (val, lineno) in sys_raw.items():
            if p not in allowed:
                raise ParseError(f"unknown parameter for system {name!r}", line=lineno, key=f"system.{p}")
            try:
                system_params[p] = allowed[p](val)
            except ValueError as exc:
                raise ParseError(f"bad value {val!r}: {exc}", line=lineno, key=f"system.{p}") from None
        for key in ("center", "interval"):
            if key in system_params:
                system_params[key] = tuple(system_params[key])
    elif sys_raw:
        p, (val, lineno) = next(iter(sys_raw.items()))
        raise ParseError("system parameters given for an unknown system", line=lineno, key=f"system.{p}")

    for key, (_, default) in SCHEMA.items():
        values.setdefault(key, default)
    cfg = ExperimentConfig(values, system_params, raw)
    validate(cfg)
    return cfg


def validate(cfg: ExperimentConfig):
    v = cfg.values
    problems = []
    if v["system.name"] is None:
        problems.append("system.name is required")
    elif v["system.name"] not in CATALOG:
        problems.append(f"system.name {v['system.name']!r} is not in the catalog {sorted(CATALOG)}")
    if v["kernel.mode"] not in ("additive", "rotational"):
        problems.append("kernel.mode must be 'additive' or 'rotational'")
    eps = v["kernel.epsilons"]
    if not eps:
        problems.append("kernel.epsilons is required")
    else:
        if any(e < 0 for e in eps):
            problems.append("kernel.epsilons must be nonnegative")
        if any(b >= a for a, b in zip(eps, eps[1:])):
            problems.append("kernel.epsilons must be strictly decreasing")
    if not 0 < v["hyp.alpha"] < 1:
        problems.append("hyp.alpha must lie in (0, 1)")
    for key in ("hyp.delta", "hyp.b"):
        if v[key] is not None and not v[key] > 0:
            problems.append(f"{key} must be positive")
    if v["reference.epsilon"] is not None and v["reference.epsilon"] < 0:
        problems.append("reference.epsilon must be nonnegative")
    for key in ("thresholds.c", "thresholds.gamma", "thresholds.merge", "thresholds.stability_tol",
                "thresholds.deficit_gamma", "foliation.tol"):
        if not v[key] > 0:
            problems.append(f"{key} must be positive")
    for key in BUDGET_KEYS + ["grid.bins", "grid.family_k", "foliation.ns", "foliation.nx",
                              "foliation.max_iters", "foliation.mc", "foliation.horizon"]:
        val = v[key]
        vals = val if isinstance(val, list) else [val]
        if not vals or any(x < 1 for x in vals):
            problems.append(f"{key} must be at least 1")
    if v["budget.burn_in"] < 0:
        problems.append("budget.burn_in must be nonnegative")
    if v["budget.tail_cutoff"] > v["budget.n_max"]:
        problems.append("budget.tail_cutoff must not exceed budget.n_max")
    if not 0 <= v["seeds.base"] < 2 ** 64:
        problems.append("seeds.base must be an unsigned 64-bit integer")
    if not problems:
        try:
            cfg.build_system()
        except InvalidParams as exc:
            problems.append(f"system parameters: {exc}")
    if problems:
        raise ValidationError(problems)


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ParseError(f"cannot read {path}: {exc}") from None
    return parse_config(text)
