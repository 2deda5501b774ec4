"""Acceptance matrix: one row per criterion, plus the experiment sub-matrix.

Each criterion is a function returning named boolean checks with evidence.
A row passes when every check holds. When the suite runs with a reduced
certificate range (T_cap below the default) a failed or erroring row is
reported as inconclusive: a short audit range is not evidence against a
property.
"""
from __future__ import annotations

import math
import os
import time
import traceback
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import algebra as al
from . import association as asn
from . import spectral as sp
from .constructions import (
    PartialConstructionWarning,
    build_stronger,
    build_weaker,
    combine,
    concave_envelope,
    regularize,
    witness_small_o,
)
from .scales import DEFAULT_SCHEDULE, fit_exponent
from .weights import (
    DEFAULT_T_CAP,
    Weight,
    WeightError,
    audit_grid,
    check_axioms,
    compare,
    make_weight,
)

PASS, FAIL, INCONCLUSIVE = "pass", "fail", "inconclusive"
WEIGHT_CATALOG = ("power(0.2)", "power(1/3)", "power(0.5)", "power(0.7)")
DIST_CATALOG = ("delta", "delta-derivative(1)", "heaviside", "density")
EXPERIMENT_ROWS = ("7.1", "7.2", "7.3", "7.5", "8.1", "8.2", "8.4")
# catalog nets exercised by the L2 and closure criteria; each property is
# checked only in the cases where its hypotheses (moderateness) hold
CLOSURE_NETS = ("bump", "half", "neg2", "neg3", "super", "super15", "zero", "moll", "slow",
                "embedded")
PRODUCT_PAIRS = (("moll", "bump"), ("moll", "embedded"), ("bump", "half"), ("slow", "bump"),
                 ("moll", "super15"), ("bump", "super"), ("embedded", "zero"), ("half", "neg3"))
SLOPE_TOL = {"noiseless": 0.05, "noisy": 0.1}
STRICT_SLOPE = -0.2


@dataclass
class Row:
    id: int
    key: str
    title: str
    status: str
    checks: dict = field(default_factory=dict)
    detail: dict = field(default_factory=dict)
    experiments: dict = field(default_factory=dict)
    seconds: float = 0.0

    @property
    def passed(self) -> bool:
        return self.status == PASS

    def line(self) -> str:
        bad = [k for k, v in self.checks.items() if not v]
        tail = f"  failing: {', '.join(bad)}" if bad else ""
        return f"[{self.status.upper():<12}] {self.id:>2} {self.key:<26} {self.title}{tail}"

    def to_json(self) -> dict:
        return {"id": self.id, "key": self.key, "title": self.title, "status": self.status,
                "checks": self.checks, "detail": self.detail,
                "experiments": self.experiments}


class _Checks:
    """Collects named checks and their evidence."""

    def __init__(self):
        self.ok: dict = {}
        self.detail: dict = {}
        self.experiments: dict = {}

    def __call__(self, name: str, cond, evidence=None) -> bool:
        self.ok[name] = bool(cond)
        if evidence is not None:
            self.detail[name] = evidence
        return bool(cond)


def _w(spec: str, T_cap: float) -> Weight:
    return make_weight(spec, T_cap=T_cap)


# -- criteria ----------------------------------------------------------------

def weight_axioms(ck: _Checks, T_cap: float) -> None:
    for spec in WEIGHT_CATALOG:
        r = check_axioms(_w(spec, T_cap))
        ck(f"{spec} passes", r.passed, r.status)
    r = check_axioms(_w("log2", T_cap))
    wit = r.witnesses.get("a") or {}
    ck("log2 fails subadditivity", not r.flags["a"])
    ck("log2 witness (1,1)", (wit.get("x"), wit.get("y")) == (1.0, 1.0), wit)
    ck("log2 witness values", abs(wit.get("lhs", 0) - 1.2069) <= 1e-3
       and abs(wit.get("rhs", 0) - 0.9609) <= 1e-3)
    r = check_axioms(_w("log1", T_cap))
    ck("log1 fails growth", r.status["c"] == "fail", r.status)
    try:
        make_weight("power(1.0)", T_cap=T_cap)
        rejected = False
    except WeightError:
        rejected = True
    ck("power(1.0) rejected by constructor", rejected)
    r = check_axioms(Weight.from_function(lambda t: t ** 1.0, "power(1.0)", T_cap=T_cap))
    ck("power(1.0) fails integral condition", not r.flags["b"], r.status)


def regularization(ck: _Checks, T_cap: float) -> None:
    g = audit_grid(T_cap)
    for spec in WEIGHT_CATALOG:
        w = _w(spec, T_cap)
        f, v = regularize(w)(g), w(g)
        ck(f"{spec} sandwich", np.all(f >= 0.5 * v * (1 - 1e-6)) and np.all(f <= v * (1 + 1e-6)))
    f = regularize(_w("power(0.5)", T_cap))(g)
    err = float(np.max(np.abs(f - (2 - math.sqrt(2)) * np.sqrt(g)) / np.sqrt(g)))
    ck("power(0.5) closed form", err <= 1e-6, {"max_rel_err": err})


def concave_bound(ck: _Checks, T_cap: float) -> None:
    g = audit_grid(T_cap)
    for spec in WEIGHT_CATALOG:
        f = regularize(_w(spec, T_cap))
        fv, hv = f(g), concave_envelope(f)(g)
        ck(f"{spec} f <= env <= 2f", np.all(hv >= fv * (1 - 1e-12)) and np.all(hv <= 2 * fv))


def strong_constructions(ck: _Checks, T_cap: float) -> None:
    for spec in WEIGHT_CATALOG:
        w = _w(spec, T_cap)
        with warnings.catch_warnings():
            warnings.simplefilter("error", PartialConstructionWarning)
            s, k = build_stronger(w), build_weaker(w)
        Ts, Tk = s.breakpoint_ts, k.breakpoint_ts
        ck(f"stronger({spec}) breakpoints", np.array_equal(s(Ts), np.arange(1, len(Ts) + 1)
                                                           * w(Ts)))
        ck(f"weaker({spec}) breakpoints", np.array_equal(k(Tk), w(Tk) / np.arange(1, len(Tk) + 1)))
        ck(f"stronger({spec}) axioms", check_axioms(s).passed)
        ck(f"weaker({spec}) axioms", weaker_axioms(k, w), check_axioms(k).status)
        ck(f"{spec} << stronger", compare(w, s, "strong").relation == "strongly-less")
        ck(f"weaker << {spec}", compare(k, w, "strong").relation == "strongly-less")


def weaker_axioms(k: Weight, w: Weight) -> bool:
    """check_axioms, with growth inherited from w when the audit range is too short.

    Beyond its last breakpoint the weaker weight is w/N, and w/log -> oo
    is invariant under positive scaling.
    """
    r = check_axioms(k)
    if r.passed:
        return True
    last = k.params["pieces"][-1] if "pieces" in k.params else None
    scaled_tail = (last is not None and last.get("affine") is None and last.get("base") == 0
                   and last.get("scale", 0) > 0)
    return (r.flags["a"] and r.flags["b"] and r.status["c"] == "inconclusive"
            and scaled_tail and check_axioms(w).flags["c"])


def interpolation_join(ck: _Checks, T_cap: float) -> None:
    w1, w2 = _w("power(1/3)", T_cap), _w("power(1/2)", T_cap)
    g = audit_grid(T_cap)
    m = combine(w1, w2, "geometric-mean")
    err = float(np.max(np.abs(m(g) - g ** (5 / 12)) / g ** (5 / 12)))
    ck("mean = power(5/12)", err <= 1e-12, {"max_rel_err": err})
    ck("w1 << mean", compare(w1, m, "strong").relation == "strongly-less")
    ck("mean << w2", compare(m, w2, "strong").relation == "strongly-less")
    j = combine(w1, w2, "join")
    ck("w1 << join", compare(w1, j, "strong").relation == "strongly-less")
    ck("w2 << join", compare(w2, j, "strong").relation == "strongly-less")


def small_o_witnesses(ck: _Checks, T_cap: float) -> None:
    w = _w("power(0.5)", T_cap)
    wit = witness_small_o(lambda t: t ** 0.25, w, "growth")
    ck("e^{t^1/4}: decreasing trend", wit.certificate["decreasing"])
    ck("e^{t^1/4}: witness << w", compare(wit.weight, w, "strong").relation == "strongly-less")
    try:
        witness_small_o(lambda t: np.sqrt(t), w, "growth")
        msg = ""
    except WeightError as e:
        msg = str(e)
    ck("e^{sqrt t}: rejected at k = 1/2", "k = 0.5" in msg, msg)


def spectral_layer(ck: _Checks, T_cap: float) -> None:
    bumps = {"gevrey": sp.make_bump("gevrey"), "polynomial": sp.make_bump("polynomial", p=3),
             "triangle": sp.make_bump("triangle"),
             "narrow": sp.make_bump("gevrey", center=0.3, radius=0.5)}
    for name, f in bumps.items():
        e = sp.spectrum(f).parseval_error
        ck(f"parseval {name}", e < 1e-6, e)
    par = sp.GridFunction.from_callable(lambda x: 1 - x ** 2, (-1, 1), label="parabola")
    prof = sp.spectrum(par)
    m = np.abs(prof.xi) <= prof.xi_max / 4
    xi = prof.xi[m]
    xs = np.where(xi == 0, 1.0, xi)
    exact = np.abs(np.where(xi == 0, 4 / 3, 4 * (np.sin(xs) - xs * np.cos(xs)) / xs ** 3))
    # relative to the peak |f^(0)|: pointwise relative error is meaningless at the zeros
    err = float(np.max(np.abs(prof.magnitudes[m] - exact)) / (4 / 3))
    ck("(1-x^2)_+ analytic spectrum", err < 1e-6, err)
    s = bumps["gevrey"].decay.s
    ck("gevrey decay exponent", abs(s - 2.0) <= 0.2, s)


def exponent_engine(ck: _Checks, T_cap: float) -> None:
    w = _w("power(0.5)", T_cap)
    x = w(DEFAULT_SCHEDULE.inv)
    rng = np.random.default_rng(7)
    noise = np.log1p(0.01 * rng.standard_normal(x.size))
    for c in (-3.0, 0.0, 2.0):
        a = fit_exponent(log_values=c * x, w=w).slope
        b = fit_exponent(log_values=c * x + noise, w=w).slope
        ck(f"slope {c:g} noiseless", abs(a - c) <= SLOPE_TOL["noiseless"], a)
        ck(f"slope {c:g} noisy", abs(b - c) <= SLOPE_TOL["noisy"], b)


def roumieu_equivalences(ck: _Checks, T_cap: float) -> None:
    w = _w("power(0.5)", T_cap)
    for name in al.NET_CATALOG:
        r = al.crosscheck_roumieu(al.make_net(name, w), w)
        ck(f"net {name}", r["status"] == "agree", r)
    tests = {"gevrey": sp.make_bump("gevrey"), "gevrey-p2": sp.make_bump("gevrey", p=2),
             "polynomial": sp.make_bump("polynomial", p=3), "triangle": sp.make_bump("triangle")}
    for name, f in tests.items():
        a = sp.test_membership(f, w, "roumieu").member
        b = sp.test_membership(f, w, "roumieu-projective").member
        ck(f"test function {name}", a == b, [a, b])


def l2_criterion(ck: _Checks, T_cap: float) -> None:
    w = _w("power(0.5)", T_cap)
    for name in CLOSURE_NETS:
        net = al.make_net(name, w)
        for case in al.CASES:
            v = al.classify_net(net, w, case)
            if not v.moderate:
                continue
            got = al.negligible_via_l2(net, w, case, moderate=True)["negligible"]
            ck(f"{name} {case}", got == v.negligible, [got, v.negligible])


def closure(ck: _Checks, T_cap: float) -> None:
    w = _w("power(0.5)", T_cap)
    nets = {n: al.make_net(n, w) for n in CLOSURE_NETS}
    cls = {(n, c): al.classify_net(nets[n], w, c) for n in nets for c in al.CASES}
    for a, b in PRODUCT_PAIRS:
        p = al.combine_nets(nets[a], nets[b])
        for c in al.CASES:
            va, vb = cls[a, c], cls[b, c]
            if not (va.moderate and vb.moderate):
                continue
            v = al.classify_net(p, w, c)
            ck(f"{a} x {b} {c} moderate", v.moderate, v.cls)
            if va.negligible or vb.negligible:
                ck(f"{a} x {b} {c} negligible", v.cls == "Negligible", v.cls)
    for n in ("moll", "super", "neg3", "zero", "embedded", "half"):
        d = al.combine_nets(nets[n], op="derivative")
        for c in al.CASES:
            v = al.classify_net(d, w, c)
            ck(f"d/dx {n} {c} keeps class",
               (v.moderate, v.negligible) == (cls[n, c].moderate, cls[n, c].negligible),
               [v.cls, cls[n, c].cls])
    s = al.combine_nets(nets["bump"], op="scalar", log_r=lambda e: -w(1 / e) ** 1.3)
    ck("negligible constant x bump", all(al.classify_net(s, w, c).cls == "Negligible"
                                         for c in al.CASES))


def embedding_association(ck: _Checks, T_cap: float) -> None:
    w = _w("power(0.5)", T_cap)
    for name in DIST_CATALOG:
        T = asn.make_distribution(name)
        net = asn.embed(T, w)
        for case in al.CASES:
            r = asn.associate(net, T, w, case)
            slopes = [float(row["s_w"]) for row in r.per_test]
            ck(f"{name} {case} strict", r.strict and max(slopes) <= STRICT_SLOPE,
               {"verdict": r.verdict, "max_slope": max(slopes)})
            ck(f"{name} {case} ordering", r.ordering_ok)


def counterexample(ck: _Checks, T_cap: float) -> None:
    r = asn.comparison_experiment("7.2", {"weight": "power(0.5)", "omega1": "power(0.25)"})
    ok = ck("experiment certified", r.passed, r.status)
    ck("verdicts", (r.conclusion or {}).get("verdicts") ==
       {"regular": True, "strong": True, "strict": False})
    ck("delta fails every decay test",
       not any(t["bounded"] for t in (r.conclusion or {}).get("decay_tests", [{"bounded": 1}])))
    w, w1 = _w("power(0.5)", T_cap), _w("power(0.25)", T_cap)
    delta = asn.make_distribution("delta")
    slowed = asn.slowdown(asn.embed(delta, w), w, w1)
    ck("eta = sqrt eps", abs(asn.slowing_map(w, w1)(2.0 ** -12) - 2.0 ** -6) <= 1e-15)
    v = al.classify_regular(slowed, w, "roumieu-inductive")
    ck("slowed net roumieu Regular", v.cls == "Regular", v.cls)
    fam = {x.label for x in al.roumieu_family(w)}
    for case in ("roumieu-inductive", "roumieu-projective"):
        a = asn.associate(slowed, delta, w, case)
        ck(f"{case} strong, witness in family", a.strong and a.witness in fam, a.witness)
        ck(f"{case} not strict", not a.strict
           and all(float(row["s_w"]) >= -al.DELTA for row in a.per_test))
    ck.experiments["7.2"] = ok and all(ck.ok.values())


def comparison_experiments(ck: _Checks, T_cap: float) -> None:
    for name in ("7.1", "7.3", "7.5"):
        r = asn.comparison_experiment(name)
        ok = ck(f"{name} certified", r.passed, r.status)
        rows = (r.conclusion or {}).get("decay", [])
        ok &= ck(f"{name} decay bounds hold", rows and all(row["bounded"] for row in rows))
        ck.experiments[name] = bool(ok)
    neg = asn.comparison_experiment("7.3", {"net": "slowed"})
    ctrl = ck("7.3 negative control not met", neg.status == asn.NOT_MET, neg.status)
    ck.experiments["7.3"] = ck.experiments["7.3"] and ctrl


def equality(ck: _Checks, T_cap: float) -> None:
    w = _w("power(0.5)", T_cap)
    r = asn.equality_criteria("8.1", w=w)
    ok = ck("planted net resolves to constant", r.passed
            and r.conclusion["verdict"] == "constant")
    ck.experiments["8.1"] = ok
    for mode in ("8.2", "8.4"):
        r = asn.equality_criteria(mode, w=w)
        c = r.conclusion or {}
        ok = ck(f"{mode} two-mollifier catalog pairings negligible",
                c.get("catalog_pairings", {}).get("negligible", False))
        ok &= ck(f"{mode} two-mollifier self-pairing not negligible",
                 not c.get("self_pairing", {}).get("negligible", True))
        ok &= ck(f"{mode} verdict nonzero (cautionary)",
                 c.get("verdict") == "nonzero" and c.get("cautionary"))
        z = asn.equality_criteria(mode, al.planted_net(w, power=1.5), w)
        ok &= ck(f"{mode} negligible net certified zero", z.passed
                 and z.conclusion["verdict"] == "zero")
        ck.experiments[mode] = bool(ok)


CRITERIA = (
    (1, "weights.axioms", "catalog weight axioms and counterexamples", weight_axioms),
    (2, "constructions.regularize", "regularization sandwich", regularization),
    (3, "constructions.envelope", "concave envelope bound", concave_bound),
    (4, "constructions.strong", "stronger / weaker constructions", strong_constructions),
    (5, "constructions.mean-join", "interpolation and join", interpolation_join),
    (6, "constructions.witness", "small-o witnesses", small_o_witnesses),
    (7, "spectral", "Parseval, analytic spectrum, gevrey decay", spectral_layer),
    (8, "scales.exponent", "planted exponent recovery", exponent_engine),
    (9, "algebra.roumieu", "inductive = projective Roumieu verdicts", roumieu_equivalences),
    (10, "algebra.l2", "L2 negligibility criterion", l2_criterion),
    (11, "algebra.closure", "product / derivative closure", closure),
    (12, "association.embed", "embeddings strictly associated", embedding_association),
    (13, "association.counterexample", "strong but not strict counterexample",
     counterexample),
    (14, "association.comparison", "regularity comparison experiments",
     comparison_experiments),
    (15, "association.equality", "equality criteria", equality),
)
BY_ID = {c[0]: c for c in CRITERIA}


def run_criterion(cid: int, T_cap: float = DEFAULT_T_CAP) -> Row:
    cid, key, title, fn = BY_ID[cid]
    ck = _Checks()
    t0 = time.perf_counter()
    err = None
    try:
        with np.errstate(all="ignore"), warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            fn(ck, T_cap)
    except Exception as e:  # a crash is a failed row, with the traceback as evidence
        err = f"{type(e).__name__}: {e}"
        ck("ran without error", False, traceback.format_exc(limit=3))
    ok = bool(ck.ok) and all(ck.ok.values())
    status = PASS if ok else (INCONCLUSIVE if T_cap < DEFAULT_T_CAP else FAIL)
    if err:
        ck.detail["error"] = err
    return Row(cid, key, title, status, ck.ok, _jsonable(ck.detail), ck.experiments,
               time.perf_counter() - t0)


def experiment_matrix(rows: list[Row]) -> dict:
    """Pass/fail per experiment name, from the criteria that ran it."""
    out = {}
    for name in EXPERIMENT_ROWS:
        seen = [r for r in rows if name in r.experiments]
        if not seen:
            out[name] = "not run"
        elif all(r.experiments[name] for r in seen):
            out[name] = PASS
        else:
            out[name] = INCONCLUSIVE if any(r.status == INCONCLUSIVE for r in seen) else FAIL
    return out


def threads() -> int:
    v = os.environ.get("ULTRASCALE_THREADS", "1")
    try:
        return max(1, int(v))
    except ValueError:
        raise ValueError(f"ULTRASCALE_THREADS={v!r} is not an integer") from None


def run_suite(ids=None, T_cap: float = DEFAULT_T_CAP, jobs: int | None = None) -> list[Row]:
    """Run the criteria (all by default); rows come back in id order."""
    ids = sorted(BY_ID) if ids is None else list(ids)
    jobs = threads() if jobs is None else jobs
    if jobs <= 1 or len(ids) <= 1:
        return [run_criterion(i, T_cap) for i in ids]
    with ProcessPoolExecutor(max_workers=min(jobs, len(ids))) as ex:
        return list(ex.map(run_criterion, ids, [T_cap] * len(ids)))


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.bool_, bool)):
        return bool(x)
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        x = float(x)
        return x if math.isfinite(x) else str(x)
    if isinstance(x, (str, int)) or x is None:
        return x
    return str(x)
