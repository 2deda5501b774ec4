"""Command line runner: weights, constructions, seminorms, nets, association.

Every command is a pipeline over a validated run configuration. The report
(JSON, to --out or stdout) echoes the configuration and the library version;
eps-indexed traces go to --csv with columns (eps, omega(1/eps), value).

Exit status: 0 when every asserted property holds, 1 when one fails (the
failing assertion is named on stderr and in the report), 2 on a validation
error (the offending field path is named).

Usage:
    ultrascale weights check log2
    ultrascale weights compare "power(1/3)" "power(0.5)" --mode strong
    ultrascale construct stronger "power(0.5)"
    ultrascale net classify --net "planted(c=-2)" --weight "power(0.5)" --case roumieu
    ultrascale experiment 7.2 weight="power(0.5)" omega1="power(0.25)"
    ultrascale run experiment=7.2 weight="power(0.5)" omega1="power(0.25)"
    ultrascale suite --out suite.json
"""
from __future__ import annotations

import os

# cap BLAS pools before numpy loads; job-level parallelism is ours
if os.environ.get("ULTRASCALE_THREADS"):
    for _var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(_var, "1")

import argparse
import csv
import json
import math
import re
import sys
import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from . import __version__
from . import algebra as al
from . import association as asn
from . import suite as su
from .constructions import (
    build_stronger,
    build_weaker,
    combine,
    dominate_sequence,
    witness_small_o,
)
from .scales import DELTA, K_MAX, WINDOW, EpsSchedule, classify_constants, make_scale
from .spectral import (
    DEFAULT_L,
    DEFAULT_N,
    GridFunction,
    SeminormOverflow,
    SeminormSpec,
    log_seminorm,
    seminorm,
)
from .weights import AUDIT_SEED, DEFAULT_T_CAP, Weight, check_axioms, compare, make_weight

EXIT_OK, EXIT_PROPERTY, EXIT_VALIDATION = 0, 1, 2
AXIOM_NAMES = {"a": "subadditivity", "b": "integral condition", "c": "growth over log"}
CASE_CHOICES = ("beurling", "roumieu", "roumieu-proj", "roumieu-inductive",
                "roumieu-projective")


class ConfigError(ValueError):
    """Validation failure at a config field path."""

    def __init__(self, path: str, msg: str):
        super().__init__(f"{path}: {msg}")
        self.path = path


# -- configuration -----------------------------------------------------------

@dataclass
class Field:
    kind: str
    default: object = None
    required: bool = False
    choices: tuple | None = None


def _defaults() -> dict:
    return {
        "weight": "power(0.5)",
        "schedule": {"k_min": 4.0, "k_max": 40.0, "step": 1.0},
        "grid": {"L": DEFAULT_L, "N": DEFAULT_N},
        "truncations": {"k_max": K_MAX, "roumieu_depth": 4, "window": WINDOW,
                        "delta": DELTA, "T_cap": DEFAULT_T_CAP},
        "seed": AUDIT_SEED,
        "output": {"json": None, "csv": None},
    }


TOP_KEYS = ("weight", "schedule", "grid", "truncations", "seed", "output")


@dataclass
class RunConfig:
    pipeline: str
    params: dict = field(default_factory=dict)
    weight: str = "power(0.5)"
    schedule: dict = field(default_factory=lambda: _defaults()["schedule"])
    grid: dict = field(default_factory=lambda: _defaults()["grid"])
    truncations: dict = field(default_factory=lambda: _defaults()["truncations"])
    seed: int = AUDIT_SEED
    output: dict = field(default_factory=lambda: _defaults()["output"])

    def echo(self) -> dict:
        return {"pipeline": self.pipeline, "params": self.params, "weight": self.weight,
                "schedule": self.schedule, "grid": self.grid,
                "truncations": self.truncations, "seed": self.seed}

    # resolved objects
    def eps_schedule(self) -> EpsSchedule:
        s = self.schedule
        return EpsSchedule(s["k_min"], s["k_max"], s["step"])

    def net_config(self, variant: str = "L1") -> al.Config:
        t = self.truncations
        return al.Config(delta=t["delta"], k_max=t["k_max"], window=int(t["window"]),
                         roumieu_depth=int(t["roumieu_depth"]), variant=variant)

    def make_weight(self, spec: str) -> Weight:
        return make_weight(spec, T_cap=self.truncations["T_cap"])


def _check_number(path: str, v, integer: bool = False, positive: bool = False):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    if integer and float(v) != int(v):
        raise ConfigError(path, f"expected an integer, got {v!r}")
    if not math.isfinite(float(v)) or (positive and v <= 0):
        raise ConfigError(path, f"expected a positive finite number, got {v!r}")
    return int(v) if integer else float(v)


def _merge_section(cfg: dict, key: str, value, path: str) -> None:
    base = cfg[key]
    if not isinstance(base, dict):
        cfg[key] = value
        return
    if not isinstance(value, dict):
        raise ConfigError(path, f"expected an object, got {value!r}")
    for k, v in value.items():
        if k not in base:
            raise ConfigError(f"{path}.{k}", f"unknown field (known: {sorted(base)})")
        base[k] = v


def build_config(pipeline: str, params: dict, overrides: dict | None = None) -> RunConfig:
    """Validate pipeline parameters and top-level sections into a RunConfig."""
    if pipeline not in PIPELINES:
        raise ConfigError("pipeline", f"unknown pipeline {pipeline!r} "
                                      f"(known: {sorted(PIPELINES)})")
    cfg = _defaults()
    for k, v in (overrides or {}).items():
        if k not in TOP_KEYS:
            raise ConfigError(k, "unknown top-level field")
        _merge_section(cfg, k, v, k)
    s = cfg["schedule"]
    for k in ("k_min", "k_max"):
        s[k] = _check_number(f"schedule.{k}", s[k])
    s["step"] = _check_number("schedule.step", s["step"], positive=True)
    try:
        EpsSchedule(s["k_min"], s["k_max"], s["step"])
    except ValueError as e:
        raise ConfigError("schedule", str(e)) from None
    g = cfg["grid"]
    g["L"] = _check_number("grid.L", g["L"], positive=True)
    g["N"] = _check_number("grid.N", g["N"], integer=True, positive=True)
    if g["N"] & (g["N"] - 1):
        raise ConfigError("grid.N", f"{g['N']} is not a power of two")
    t = cfg["truncations"]
    for k in ("k_max", "delta", "T_cap"):
        t[k] = _check_number(f"truncations.{k}", t[k], positive=True)
    for k in ("roumieu_depth", "window"):
        t[k] = _check_number(f"truncations.{k}", t[k], integer=True, positive=True)
    cfg["seed"] = _check_number("seed", cfg["seed"], integer=True)
    rc = RunConfig(pipeline, {}, **{k: cfg[k] for k in TOP_KEYS})
    _check_weight("weight", rc.weight, rc)
    schema = PIPELINES[pipeline].fields
    for k in params:
        if k not in schema:
            raise ConfigError(f"params.{k}", f"unknown field for {pipeline} "
                                             f"(known: {sorted(schema)})")
    for k, f in schema.items():
        path = f"params.{k}"
        if k not in params:
            if f.required:
                raise ConfigError(path, "required field missing")
            rc.params[k] = f.default
            continue
        rc.params[k] = _check_field(path, params[k], f, rc)
    return rc


def _check_weight(path: str, spec, rc: RunConfig) -> str:
    if not isinstance(spec, str):
        raise ConfigError(path, f"expected a weight descriptor, got {spec!r}")
    try:
        rc.make_weight(spec)
    except Exception as e:
        raise ConfigError(path, f"invalid weight {spec!r}: {e}") from None
    return spec


def _check_field(path: str, v, f: Field, rc: RunConfig):
    if f.choices is not None and v not in f.choices:
        raise ConfigError(path, f"expected one of {list(f.choices)}, got {v!r}")
    if f.kind == "weight":
        return _check_weight(path, v, rc)
    if f.kind == "weights":
        items = v.split(";") if isinstance(v, str) else v
        if not isinstance(items, list) or not items:
            raise ConfigError(path, "expected a non-empty list of weight descriptors")
        return [_check_weight(f"{path}[{i}]", s.strip() if isinstance(s, str) else s, rc)
                for i, s in enumerate(items)]
    if f.kind == "float":
        return _check_number(path, v)
    if f.kind == "int":
        return _check_number(path, v, integer=True, positive=True)
    if f.kind == "floats":
        if not isinstance(v, list) or not v:
            raise ConfigError(path, f"expected a non-empty list of numbers, got {v!r}")
        return [_check_number(f"{path}[{i}]", x) for i, x in enumerate(v)]
    if f.kind == "path":
        if not isinstance(v, str) or not os.path.exists(v):
            raise ConfigError(path, f"no such file or directory: {v!r}")
        return v
    if f.kind == "gridcsv":
        if not isinstance(v, str) or not os.path.isfile(v):
            raise ConfigError(path, f"no such file: {v!r}")
        try:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore")
                GridFunction.from_csv(v)
        except (ValueError, IndexError) as e:
            raise ConfigError(path, f"not a grid-function CSV (x, re, im): {e}") from None
        return v
    if f.kind == "net":
        if not isinstance(v, str):
            raise ConfigError(path, f"expected a net descriptor, got {v!r}")
        if os.path.isdir(v) or v in ("two-mollifier", "embedded-delta", "slowed-delta", "slowed"):
            return v
        try:
            al.make_net(v, rc.make_weight(rc.weight), rc.eps_schedule())
        except (al.NetError, ValueError) as e:
            raise ConfigError(path, str(e)) from None
        return v
    if f.kind == "dist":
        try:
            asn.make_distribution(str(v))
        except asn.AssociationError as e:
            raise ConfigError(path, str(e)) from None
        return v
    if f.kind == "ids":
        ids = v if isinstance(v, list) else [x for x in str(v).split(",") if x]
        try:
            ids = [int(x) for x in ids]
        except (TypeError, ValueError):
            raise ConfigError(path, f"expected criterion ids, got {v!r}") from None
        bad = [i for i in ids if i not in su.BY_ID]
        if bad:
            raise ConfigError(path, f"unknown criterion ids {bad}")
        return ids
    if f.kind == "bool":
        if not isinstance(v, bool):
            raise ConfigError(path, f"expected true or false, got {v!r}")
        return v
    if f.kind == "label":
        # experiment names such as 7.2 arrive as numbers from key=value parsing
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            return repr(v)
        if not isinstance(v, str):
            raise ConfigError(path, f"expected a name, got {v!r}")
        return v
    if f.kind == "str":
        if not isinstance(v, str):
            raise ConfigError(path, f"expected a string, got {v!r}")
        return v
    return v


# -- pipeline outcomes -------------------------------------------------------

@dataclass
class Outcome:
    result: dict
    assertions: list = field(default_factory=list)
    traces: dict = field(default_factory=dict)

    def check(self, name: str, ok, detail=None) -> bool:
        self.assertions.append({"name": name, "passed": bool(ok), "detail": detail})
        return bool(ok)

    @property
    def failed(self) -> list:
        return [a for a in self.assertions if not a["passed"]]


def _trace(w: Weight, eps, values) -> list:
    eps = np.asarray(eps, dtype=float)
    return [[float(e), float(w(1.0 / e)), float(v)] for e, v in zip(eps, values)]


def _expect(out: Outcome, name: str, got, want) -> None:
    if want is not None:
        out.check(f"{name} == {want}", got == want, {"got": got})


# -- pipelines ---------------------------------------------------------------

def p_weights_check(rc: RunConfig) -> Outcome:
    w = rc.make_weight(rc.params["spec"])
    r = check_axioms(w, seed=rc.seed)
    out = Outcome({"weight": _weight_json(w), "axioms": r.to_json()})
    for ax in ("a", "b", "c"):
        out.check(f"axiom {ax} ({AXIOM_NAMES[ax]})", r.flags[ax],
                  {"status": r.status[ax], "witness": r.witnesses.get(ax)})
    return out


def p_weights_compare(rc: RunConfig) -> Outcome:
    w1, w2 = rc.make_weight(rc.params["spec1"]), rc.make_weight(rc.params["spec2"])
    mode = {"weak": "weak-equiv", "strong": "strong"}[rc.params["mode"]]
    v = compare(w1, w2, mode)
    out = Outcome({"w1": w1.label, "w2": w2.label, "mode": mode, "verdict": v.to_json()})
    _expect(out, "relation", v.relation, rc.params["expect"])
    return out


def _weight_json(w: Weight) -> dict:
    try:
        return w.to_json()
    except Exception:
        return {"label": w.label, "kind": w.kind}


def _construction(out: Outcome, w: Weight, built: Weight, below: Weight, above: Weight,
                  axioms_ok: bool) -> None:
    r = check_axioms(built)
    out.result["weight"] = _weight_json(built)
    out.result["certificate"] = {"axioms": r.to_json()}
    out.check("output passes axioms", axioms_ok, r.status)
    rel = compare(below, above, "strong")
    out.result["certificate"]["order"] = rel.to_json()
    out.check(f"{below.label} << {above.label}", rel.relation == "strongly-less",
              rel.diagnostic or None)


def p_construct(rc: RunConfig) -> Outcome:
    op = rc.params["op"]
    p = rc.params
    out = Outcome({"op": op})
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        if op in ("stronger", "weaker"):
            w = rc.make_weight(p["spec"])
            if op == "stronger":
                s = build_stronger(w, int(p["n_max"]))
                _construction(out, w, s, w, s, check_axioms(s).passed)
            else:
                s = build_weaker(w, int(p["n_max"]))
                _construction(out, w, s, s, w, su.weaker_axioms(s, w))
            T = s.breakpoint_ts
            n = np.arange(1, len(T) + 1)
            want = n * w(T) if op == "stronger" else w(T) / n
            out.check("breakpoint values", np.array_equal(s(T), want))
        elif op in ("mean", "join"):
            if p["spec2"] is None:
                raise ConfigError("params.spec2", "required for mean and join")
            w1, w2 = rc.make_weight(p["spec"]), rc.make_weight(p["spec2"])
            m = combine(w1, w2, "geometric-mean" if op == "mean" else "join")
            if op == "mean":
                _construction(out, w1, m, w1, m, check_axioms(m).passed)
                rel = compare(m, w2, "strong")
                out.check(f"{m.label} << {w2.label}", rel.relation == "strongly-less")
            else:
                _construction(out, w1, m, w1, m, check_axioms(m).passed)
                rel = compare(w2, m, "strong")
                out.check(f"{w2.label} << {m.label}", rel.relation == "strongly-less")
        elif op == "dominate":
            if not p["seq"]:
                raise ConfigError("params.seq", "required for dominate")
            w = rc.make_weight(p["spec"])
            seq = [rc.make_weight(s) for s in p["seq"]]
            d = dominate_sequence(seq, w)
            _construction(out, w, d, d, w, check_axioms(d).passed)
            for v in seq:
                out.check(f"{v.label} << {d.label}",
                          compare(v, d, "strong").relation == "strongly-less")
        elif op == "witness":
            if p["log_g"] is None:
                raise ConfigError("params.log_g", "required for witness")
            w = rc.make_weight(p["spec"])
            log_g = _expression(p["log_g"], "params.log_g")
            wit = witness_small_o(log_g, w, p["direction"])
            out.result.update(direction=wit.direction, l=wit.l,
                              weight=_weight_json(wit.weight), certificate=wit.certificate)
            key = "decreasing" if wit.direction == "growth" else "verified"
            out.check(f"witness certificate ({key})", wit.certificate.get(key))
    out.result["warnings"] = sorted({str(c.message) for c in caught})
    return out


_EXPR_NAMES = {name: getattr(np, name) for name in
               ("sqrt", "log", "log1p", "exp", "sin", "cos", "abs", "pi", "e")}


def _expression(src: str, path: str) -> Callable:
    """log g(t) from an arithmetic expression in t (numpy functions, no builtins)."""
    try:
        code = compile(src, "<log_g>", "eval")
    except SyntaxError as e:
        raise ConfigError(path, f"not an expression: {e.msg}") from None
    bad = [n for n in code.co_names if n != "t" and n not in _EXPR_NAMES]
    if bad:
        raise ConfigError(path, f"unknown names {bad}; allowed: t, {sorted(_EXPR_NAMES)}")

    def f(t):
        return np.asarray(eval(code, {"__builtins__": {}}, {**_EXPR_NAMES, "t": t}),
                          dtype=float) + 0 * np.asarray(t, dtype=float)
    return f


def p_seminorm(rc: RunConfig) -> Outcome:
    p = rc.params
    f = GridFunction.from_csv(p["f"])
    w = rc.make_weight(rc.weight)
    spec = SeminormSpec(w, p["l"], p["variant"])
    out = Outcome({"file": p["f"], "weight": w.label, "l": p["l"], "variant": spec.variant,
                   "N": f.N, "L": f.L, "log_value": log_seminorm(f, spec)})
    try:
        out.result["value"] = seminorm(f, spec)
        out.check("seminorm finite", math.isfinite(out.result["value"]))
    except SeminormOverflow as e:
        out.result["value"] = None
        out.check("seminorm representable", False, str(e))
    return out


def _net(rc: RunConfig, spec: str, w: Weight):
    sched = rc.eps_schedule()
    if os.path.isdir(spec):
        return al.load_sampled_net(spec)
    if spec == "two-mollifier":
        return asn.two_mollifier_difference(sched)
    if spec in ("embedded-delta", "slowed-delta", "slowed"):
        net = asn.embed(asn.make_distribution("delta"), w, check=False)
        if spec != "embedded-delta":
            net = asn.slowdown(net, w, rc.make_weight(rc.params.get("omega1") or
                                                      "power(0.25)"), check=False)
        return net
    return al.make_net(spec, w, sched)


def _seminorm_trace(rc: RunConfig, net, w: Weight, variant: str) -> list:
    eps = net.schedule.eps
    return _trace(w, eps, al.log_seminorm_sequence(net, w, 1.0, variant, eps))


def p_net_classify(rc: RunConfig) -> Outcome:
    p = rc.params
    w = rc.make_weight(rc.weight)
    net = _net(rc, p["net"], w)
    cfg = rc.net_config(p["variant"])
    v = al.classify_regular(net, w, p["case"], p["variant"], cfg)
    out = Outcome({"net": net.to_json(), "verdict": v.to_json()})
    out.traces["log_seminorm_h1"] = _seminorm_trace(rc, net, w, cfg.variant)
    out.check("verdict conclusive", v.cls != "Inconclusive", v.reason or None)
    _expect(out, "class", v.cls, p["expect"])
    return out


def p_net_classify_constants(rc: RunConfig) -> Outcome:
    p = rc.params
    with open(p["data"], newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows or not {"k", "epsilon", "value"} <= set(rows[0]):
        raise ConfigError("params.data", "CSV needs columns k, epsilon, value")
    try:
        ks = np.array([float(r["k"]) for r in rows])
        vals = np.array([float(r["value"]) for r in rows])
        # optional log|value| column for sequences below the float range
        logs = (np.array([float(r["log_value"]) for r in rows])
                if "log_value" in rows[0] else None)
        eps = np.array([float(r["epsilon"]) for r in rows])
    except (TypeError, ValueError) as e:
        raise ConfigError("params.data", f"non-numeric entry: {e}") from None
    if np.any(np.abs(eps - np.exp2(-ks)) > 1e-12 * eps):
        raise ConfigError("params.data", "epsilon column must equal 2^-k")
    steps = np.diff(ks)
    if len(ks) < 2 or np.ptp(steps) > 1e-9 or steps[0] <= 0:
        raise ConfigError("params.data", "k must increase in even steps")
    sched = EpsSchedule(float(ks[0]), float(ks[-1]), float(steps[0]))
    w = rc.make_weight(rc.weight)
    t = rc.truncations
    s = make_scale(p["scale"], w, int(t["roumieu_depth"]), sched)
    window = min(int(t["window"]), len(ks))
    v = classify_constants(None if logs is not None else vals, s, log_abs=logs,
                           presentation=p["presentation"], delta=t["delta"],
                           k_max=t["k_max"], window=window)
    out = Outcome({"data": p["data"], "verdict": v.to_json()})
    out.traces["values"] = _trace(w, sched.eps, vals if logs is None else logs)
    out.check("verdict conclusive", v.cls != "Inconclusive", v.reason or None)
    _expect(out, "class", v.cls, p["expect"])
    return out


def p_net_l2(rc: RunConfig) -> Outcome:
    p = rc.params
    w = rc.make_weight(rc.weight)
    net = _net(rc, p["net"], w)
    cfg = rc.net_config()
    full = al.classify_net(net, w, p["case"], cfg=cfg)
    out = Outcome({"net": net.to_json(), "classification": full.cls})
    out.traces["log_l2"] = _trace(w, net.schedule.eps, al.log_l2_sequence(net))
    if not out.check("net is moderate", full.moderate, full.cls):
        return out
    r = al.negligible_via_l2(net, w, p["case"], cfg, moderate=True)
    out.result["l2"] = r
    out.check("L2 verdict matches classification", r["negligible"] == full.negligible,
              {"l2": r["negligible"], "full": full.negligible})
    return out


def p_net_sharp_ball(rc: RunConfig) -> Outcome:
    p = rc.params
    w = rc.make_weight(rc.weight)
    net = _net(rc, p["net"], w)
    r = al.sharp_ball_membership(net, w, p["case"], int(p["n"]), p["m"], p["l"],
                                 cfg=rc.net_config())
    out = Outcome({"ball": r})
    _expect(out, "member", r["member"], p["expect"])
    return out


def p_embed(rc: RunConfig) -> Outcome:
    p = rc.params
    w = rc.make_weight(rc.weight)
    T = asn.make_distribution(p["dist"])
    net = asn.embed(T, w, check=True)
    mod = net.meta.get("moderate", {})
    out = Outcome({"dist": T.to_json(), "net": net.to_json()})
    for case, ok in mod.items():
        out.check(f"embedding moderate ({case})", ok)
    rho = asn.default_test_set(w)[0]
    tr = asn.pairing_trace(net, T, rho)
    ks = np.asarray(tr.schedule.ks, dtype=float)
    out.traces[f"pairing_{rho.label}"] = _trace(w, np.exp2(-ks), tr.diffs)
    return out


def p_associate(rc: RunConfig) -> Outcome:
    p = rc.params
    w = rc.make_weight(rc.weight)
    T = asn.make_distribution(p["dist"])
    net = asn.embed(T, w, check=False)
    if p["net"] == "slowed":
        net = asn.slowdown(net, w, rc.make_weight(p["omega1"]))
    elif p["net"] != "embedded":
        net = _net(rc, p["net"], w)
    r = asn.associate(net, T, w, p["case"], delta=rc.truncations["delta"],
                      k_max=rc.truncations["k_max"])
    out = Outcome({"association": r.to_json()})
    out.check("strict => strong => simple", r.ordering_ok)
    _expect(out, "verdict", r.verdict, p["expect"])
    for t in r.traces:
        ks = np.asarray(t.schedule.ks, dtype=float)
        out.traces[f"pairing_{t.test}"] = _trace(w, np.exp2(-ks), t.diffs)
    return out


EXPERIMENT_PARAMS = {
    "beurling-7.1": ("T", "bump", "lambdas"),
    "roumieu-counterexample-7.2": ("omega1",),
    "roumieu-strict-7.3": ("T", "bump", "h", "net", "omega1"),
    "r-strong-7.5": ("T", "bump", "omega_inf", "omega_b"),
    "translation-8.1": ("case", "planted", "coef", "power", "shifts"),
    "pairing-8.2-8.3": ("case", "net"),
    "regular-pairing-8.4-8.5": ("case", "net"),
}
_EXP_ALIASES = {**asn._EXPERIMENT_ALIASES, **asn._EQUALITY_ALIASES}


def p_experiment(rc: RunConfig) -> Outcome:
    p = rc.params
    name = _EXP_ALIASES.get(p["name"], p["name"])
    if name not in EXPERIMENT_PARAMS:
        raise ConfigError("params.name", f"unknown experiment {p['name']!r} "
                                         f"(known: {sorted(_EXP_ALIASES)})")
    extra = dict(p["params"] or {})
    for k in extra:
        if k not in EXPERIMENT_PARAMS[name]:
            raise ConfigError(f"params.{k}", f"not a parameter of {name} "
                                             f"(known: {list(EXPERIMENT_PARAMS[name])})")
    for k in ("omega1", "omega_inf", "omega_b"):
        if k in extra:
            _check_weight(f"params.{k}", extra[k], rc)
    w = rc.make_weight(rc.weight)
    if name in asn.EQUALITY_MODES:
        case = extra.pop("case", "roumieu-inductive")
        if case not in CASE_CHOICES:
            raise ConfigError("params.case", f"expected one of {list(CASE_CHOICES)}")
        net = extra.pop("net", None)
        net = None if net in (None, "two-mollifier") else _net(rc, net, w)
        r = asn.equality_criteria(name, net, w, case, extra)
    else:
        r = asn.comparison_experiment(name, {"weight": rc.weight, **extra})
    rep = r.to_json()
    out = Outcome({"experiment": rep})
    want = p["expect_status"] or asn.CERTIFIED
    if r.status == asn.NOT_MET and want != asn.NOT_MET:
        for k, h in r.hypotheses.items():
            if isinstance(h, dict) and h.get("holds") is False:
                out.check(f"hypothesis {k}", False, h)
    out.check(f"status {want}", r.status == want, {"status": r.status})
    c = r.conclusion or {}
    if "verdicts" in c:
        out.result["verdicts"] = {k: ("yes" if v else "no") for k, v in c["verdicts"].items()}
    if "verdict" in c:
        out.result["verdict"] = c["verdict"]
    return out


def p_suite(rc: RunConfig) -> Outcome:
    p = rc.params
    T_cap = rc.truncations["T_cap"] / p["t_cap_divisor"]
    rows = su.run_suite(p["only"], T_cap=T_cap)
    matrix = su.experiment_matrix(rows)
    out = Outcome({"T_cap": T_cap, "rows": [r.to_json() for r in rows],
                   "matrix": {f"{r.id}:{r.key}": r.status for r in rows},
                   "experiments": matrix})
    for r in rows:
        out.check(f"criterion {r.id} {r.key}", r.status != su.FAIL,
                  [k for k, v in r.checks.items() if not v])
    for name, st in matrix.items():
        out.check(f"experiment {name}", st != su.FAIL, st)
    out.result["lines"] = [r.line() for r in rows]
    return out


@dataclass
class Pipeline:
    run: Callable
    fields: dict


_W = Field("weight", required=True)
_CASE = Field("str", "beurling", choices=CASE_CHOICES)
PIPELINES = {
    "weights-check": Pipeline(p_weights_check, {"spec": _W}),
    "weights-compare": Pipeline(p_weights_compare, {
        "spec1": _W, "spec2": _W, "mode": Field("str", "weak", choices=("weak", "strong")),
        "expect": Field("str", None)}),
    "construct": Pipeline(p_construct, {
        "op": Field("str", required=True, choices=("stronger", "weaker", "mean", "join",
                                                   "dominate", "witness")),
        "spec": _W, "spec2": Field("weight", None), "seq": Field("weights", None),
        "n_max": Field("int", 24), "log_g": Field("str", None),
        "direction": Field("str", "growth", choices=("growth", "decay"))}),
    "seminorm-eval": Pipeline(p_seminorm, {
        "f": Field("gridcsv", required=True), "l": Field("float", 1.0),
        "variant": Field("str", "a", choices=("a", "b", "c", "L1", "Linf", "L2"))}),
    "net-classify": Pipeline(p_net_classify, {
        "net": Field("net", required=True), "case": _CASE,
        "variant": Field("str", "L1", choices=("a", "b", "c", "L1", "Linf", "L2")),
        "expect": Field("str", None)}),
    "net-classify-constants": Pipeline(p_net_classify_constants, {
        "data": Field("path", required=True),
        "scale": Field("str", "beurling", choices=("beurling", "roumieu")),
        "presentation": Field("str", "inductive", choices=("inductive", "projective")),
        "expect": Field("str", None)}),
    "net-l2-criterion": Pipeline(p_net_l2, {"net": Field("net", required=True),
                                            "case": _CASE}),
    "net-sharp-ball": Pipeline(p_net_sharp_ball, {
        "net": Field("net", required=True), "case": _CASE, "n": Field("int", 1),
        "m": Field("float", 1.0), "l": Field("float", 1.0), "expect": Field("bool", None)}),
    "embed": Pipeline(p_embed, {"dist": Field("dist", "delta")}),
    "associate": Pipeline(p_associate, {
        "dist": Field("dist", "delta"), "net": Field("net", "embedded"),
        "omega1": Field("weight", "power(0.25)"),
        "case": Field("str", "roumieu-inductive", choices=CASE_CHOICES),
        "expect": Field("str", None, choices=(None, "strict", "strong", "simple", "none"))}),
    "experiment": Pipeline(p_experiment, {
        "name": Field("label", required=True), "params": Field("any", None),
        "expect_status": Field("str", None, choices=(None, asn.CERTIFIED, asn.NOT_MET,
                                                     asn.FAILED))}),
    "suite": Pipeline(p_suite, {"only": Field("ids", None),
                                "t_cap_divisor": Field("float", 1.0)}),
}


# -- report emission ---------------------------------------------------------

def _clean(x):
    if isinstance(x, dict):
        return {str(k): _clean(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_clean(v) for v in x]
    if isinstance(x, np.ndarray):
        return _clean(x.tolist())
    if isinstance(x, (bool, np.bool_)):
        return bool(x)
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (str, int)) or x is None:
        return x
    return str(x)


def execute(rc: RunConfig) -> tuple[int, dict]:
    """Run a validated config; returns (exit status, report)."""
    try:
        out = PIPELINES[rc.pipeline].run(rc)
    except ConfigError:
        raise
    except (ValueError, ArithmeticError) as e:
        # the inputs validated, so a library rejection is a failed precondition
        out = Outcome({"error": f"{type(e).__name__}: {e}"})
        out.check("precondition", False, str(e))
    failed = out.failed
    report = {"version": __version__, "config": rc.echo(), "result": out.result,
              "assertions": out.assertions, "passed": not failed,
              "failed_assertion": failed[0]["name"] if failed else None}
    report = _clean(report)
    if out.traces and rc.output.get("csv"):
        report["traces"] = write_traces(rc.output["csv"], out.traces)
    return (EXIT_PROPERTY if failed else EXIT_OK), report


def write_traces(path: str, traces: dict) -> list:
    """One CSV per trace; several traces get a name suffix before the extension."""
    written = []
    stem, ext = os.path.splitext(path)
    for name in sorted(traces):
        safe = re.sub(r"[^A-Za-z0-9.=-]+", "_", name).strip("_")
        p = path if len(traces) == 1 else f"{stem}_{safe}{ext or '.csv'}"
        with open(p, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["eps", "omega_inv_eps", "value"])
            for row in traces[name]:
                wr.writerow([repr(float(v)) for v in row])
        written.append(p)
    return written


def dumps(report: dict) -> str:
    return json.dumps(report, indent=2, sort_keys=True, allow_nan=False) + "\n"


# -- argument parsing --------------------------------------------------------

def parse_value(s: str):
    """key=value values: JSON when it parses (numbers, lists, true), else the string."""
    try:
        return json.loads(s)
    except json.JSONDecodeError:
        return s


def parse_assignments(items: list[str]) -> dict:
    out: dict = {}
    for item in items:
        key, sep, val = item.partition("=")
        if not sep or not key:
            raise ConfigError(item, "expected key=value")
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError(key, "conflicting assignments")
        node[parts[-1]] = parse_value(val)
    return out


def load_config_file(path: str) -> dict:
    try:
        with open(path) as fh:
            d = json.load(fh)
    except OSError as e:
        raise ConfigError("--config", str(e)) from None
    except json.JSONDecodeError as e:
        raise ConfigError("--config", f"invalid JSON: {e}") from None
    if not isinstance(d, dict):
        raise ConfigError("--config", "top level must be an object")
    return d


def split_config(d: dict) -> tuple[str | None, dict, dict]:
    """(pipeline, params, top-level overrides) from a flat or nested config dict."""
    d = dict(d)
    pipeline = d.pop("pipeline", None)
    if "experiment" in d:
        pipeline = pipeline or "experiment"
        d.setdefault("name", d.pop("experiment"))
    params = dict(d.pop("params", {}) or {})
    top = {k: d.pop(k) for k in list(d) if k in TOP_KEYS}
    params.update(d)
    return pipeline, params, top


def _common(p: argparse.ArgumentParser, weight: bool = True) -> None:
    if weight:
        p.add_argument("--weight", help="weight descriptor for the net / scale / seminorm")
    p.add_argument("--config", help="JSON config file (merged under command-line values)")
    p.add_argument("--out", help="JSON report path (default: stdout)")
    p.add_argument("--csv", help="CSV trace path, columns eps, omega(1/eps), value")
    p.add_argument("--set", dest="assign", action="append", default=[], metavar="KEY=VALUE",
                   help="override any config field, e.g. schedule.k_max=30")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="ultrascale", description=__doc__.split("\n")[0])
    ap.add_argument("--version", action="version", version=f"ultrascale {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    wp = sub.add_parser("weights", help="audit or compare weights")
    wsub = wp.add_subparsers(dest="action", required=True)
    p = wsub.add_parser("check", help="audit the weight axioms")
    p.add_argument("spec")
    _common(p, weight=False)
    p = wsub.add_parser("compare", help="weak equivalence or strong inequality")
    p.add_argument("spec1")
    p.add_argument("spec2")
    p.add_argument("--mode", choices=("weak", "strong"))
    p.add_argument("--expect", help="assert the relation (e.g. strongly-less)")
    _common(p, weight=False)

    cp = sub.add_parser("construct", help="build weights with certificates")
    cp.add_argument("op", choices=("stronger", "weaker", "mean", "join", "dominate",
                                   "witness"))
    cp.add_argument("spec")
    cp.add_argument("spec2", nargs="?", help="second weight for mean / join")
    cp.add_argument("--seq", help="';'-separated weights for dominate")
    cp.add_argument("--n-max", type=int)
    cp.add_argument("--log-g", help="expression in t for log g (witness)")
    cp.add_argument("--direction", choices=("growth", "decay"))
    _common(cp, weight=False)

    sp = sub.add_parser("seminorm", help="weighted Fourier seminorms")
    ssub = sp.add_subparsers(dest="action", required=True)
    p = ssub.add_parser("eval", help="evaluate on a CSV grid function (x, re, im)")
    p.add_argument("--f", required=True)
    p.add_argument("--l", type=float)
    p.add_argument("--variant", choices=("a", "b", "c", "L1", "Linf", "L2"))
    _common(p)

    npar = sub.add_parser("net", help="classify nets")
    nsub = npar.add_subparsers(dest="action", required=True)
    p = nsub.add_parser("classify", help="Regular / Moderate / Negligible / Neither")
    p.add_argument("--net", required=True, help="catalog descriptor or k<k>.csv directory")
    p.add_argument("--case", choices=CASE_CHOICES)
    p.add_argument("--variant", choices=("a", "b", "c", "L1", "Linf", "L2"))
    p.add_argument("--expect")
    _common(p)
    p = nsub.add_parser("classify-constants", help="classify a sequence r_eps")
    p.add_argument("--data", required=True, help="CSV with columns k, epsilon, value")
    p.add_argument("--scale", choices=("beurling", "roumieu"))
    p.add_argument("--presentation", choices=("inductive", "projective"))
    p.add_argument("--expect")
    _common(p)
    p = nsub.add_parser("l2-criterion", help="negligibility from L2 norms alone")
    p.add_argument("--net", required=True)
    p.add_argument("--case", choices=CASE_CHOICES)
    _common(p)
    p = nsub.add_parser("sharp-ball", help="membership in a sharp-topology ball")
    p.add_argument("--net", required=True)
    p.add_argument("--case", choices=CASE_CHOICES)
    p.add_argument("--n", type=int)
    p.add_argument("--m", type=float)
    p.add_argument("--l", type=float)
    _common(p)

    p = sub.add_parser("embed", help="mollifier embedding of a catalog distribution")
    p.add_argument("--dist")
    _common(p)
    p = sub.add_parser("associate", help="association of a net with a distribution")
    p.add_argument("--dist")
    p.add_argument("--net", help="embedded, slowed, or a catalog net")
    p.add_argument("--omega1")
    p.add_argument("--case", choices=CASE_CHOICES)
    p.add_argument("--expect", choices=("strict", "strong", "simple", "none"))
    _common(p)

    p = sub.add_parser("experiment", help="regularity comparison / equality experiments")
    p.add_argument("name", help="7.1 7.2 7.3 7.5 8.1 8.2 8.4 or the full name")
    p.add_argument("assign_pos", nargs="*", metavar="KEY=VALUE")
    p.add_argument("--expect-status", choices=(asn.CERTIFIED, asn.NOT_MET, asn.FAILED))
    _common(p)

    p = sub.add_parser("suite", help="run the acceptance matrix")
    p.add_argument("--only", help="comma-separated criterion ids")
    p.add_argument("--t-cap-divisor", type=float,
                   help="shrink every audit range by this factor")
    _common(p, weight=False)

    p = sub.add_parser("run", help="run a pipeline from key=value pairs")
    p.add_argument("items", nargs="*", metavar="PIPELINE|KEY=VALUE")
    p.add_argument("--config")
    p.add_argument("--out")
    p.add_argument("--csv")
    return ap


def _given(ns: argparse.Namespace, *names: str) -> dict:
    return {n: getattr(ns, n) for n in names if getattr(ns, n, None) is not None}


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    base: dict = load_config_file(ns.config) if getattr(ns, "config", None) else {}
    pipeline, params, top = split_config(base)
    cmd = ns.command
    if cmd == "run":
        assigns = []
        for item in ns.items:
            if "=" in item:
                assigns.append(item)
            elif item.replace("_", "-") in PIPELINES:
                pipeline = item.replace("_", "-")
            else:
                raise ConfigError("pipeline", f"unknown pipeline {item!r} "
                                              f"(known: {sorted(PIPELINES)})")
        pl, pr, tp = split_config(parse_assignments(assigns))
        pipeline = pl or pipeline
        params.update(pr)
        _deep_update(top, tp)
        if pipeline is None:
            raise ConfigError("pipeline", "no pipeline given (e.g. experiment=7.2)")
    else:
        if cmd in ("weights", "seminorm", "net"):
            pipeline = f"{cmd}-{ns.action}"
        else:
            pipeline = cmd
        cli = {}
        if cmd == "weights":
            cli = _given(ns, "spec", "spec1", "spec2", "mode", "expect")
        elif cmd == "construct":
            cli = _given(ns, "op", "spec", "spec2", "log_g", "direction", "n_max")
            if ns.seq:
                cli["seq"] = ns.seq
        elif cmd == "seminorm":
            cli = _given(ns, "f", "l", "variant")
        elif cmd == "net":
            cli = _given(ns, "net", "case", "variant", "expect", "data", "scale",
                         "presentation", "n", "m", "l")
        elif cmd in ("embed", "associate"):
            cli = _given(ns, "dist", "net", "omega1", "case", "expect")
        elif cmd == "experiment":
            pl, pr, tp = split_config(parse_assignments(ns.assign_pos))
            extra = dict(params.pop("params", None) or {})
            extra.update({k: v for k, v in params.items() if k not in ("name",
                                                                      "expect_status")})
            extra.update(pr)
            params = {k: v for k, v in params.items() if k in ("name", "expect_status")}
            top.update({k: extra.pop(k) for k in list(extra) if k in TOP_KEYS})
            _deep_update(top, tp)
            cli = {"name": ns.name, "params": extra or None}
            cli.update(_given(ns, "expect_status"))
        elif cmd == "suite":
            cli = _given(ns, "only", "t_cap_divisor")
        params.update(cli)
        pl, pr, tp = split_config(parse_assignments(getattr(ns, "assign", [])))
        params.update(pr)
        _deep_update(top, tp)
        if getattr(ns, "weight", None):
            top["weight"] = ns.weight
    if pipeline == "experiment":
        extra = dict(params.get("params") or {})
        for k in list(params):
            if k not in ("name", "params", "expect_status"):
                extra[k] = params.pop(k)
        if "weight" in extra:
            top["weight"] = extra.pop("weight")
        params["params"] = extra or None
    out = dict(top.get("output") or {})
    if getattr(ns, "out", None):
        out["json"] = ns.out
    if getattr(ns, "csv", None):
        out["csv"] = ns.csv
    if out:
        top["output"] = out
    return build_config(pipeline, params, top)


def _deep_update(a: dict, b: dict) -> None:
    for k, v in b.items():
        if isinstance(v, dict) and isinstance(a.get(k), dict):
            _deep_update(a[k], v)
        else:
            a[k] = v


def main(argv: list[str] | None = None) -> int:
    ap = build_parser()
    ns = ap.parse_args(argv)
    try:
        try:
            su.threads()
        except ValueError as e:
            raise ConfigError("env.ULTRASCALE_THREADS", str(e)) from None
        rc = config_from_args(ns)
        status, report = execute(rc)
    except ConfigError as e:
        print(f"validation error: {e}", file=sys.stderr)
        return EXIT_VALIDATION
    text = dumps(report)
    dest = rc.output.get("json")
    if dest:
        with open(dest, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    if status == EXIT_PROPERTY:
        a = next(x for x in report["assertions"] if not x["passed"])
        print(f"property failed: {a['name']}: {json.dumps(a['detail'], sort_keys=True)}",
              file=sys.stderr)
    return status


if __name__ == "__main__":
    sys.exit(main())
