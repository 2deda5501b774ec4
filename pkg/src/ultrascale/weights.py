"""Weight functions: representation, axiom audit and ordering tests."""
from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from typing import Any, Callable

import numpy as np
from scipy.stats import qmc

from ._quad import QuadratureError, simpson

DEFAULT_T_CAP = 1e30
AUDIT_SEED = 20240607
PAIRS_PER_DECADE = 512
TREND_WINDOW = 8
TREND_THRESHOLD = 0.05


class WeightError(ValueError):
    """A descriptor or table that cannot define a weight."""


class RepresentationError(RuntimeError):
    """Evaluation produced negative or non-finite values."""


@dataclass(frozen=True)
class Breakpoint:
    t: float
    piece: dict

    def to_json(self) -> dict:
        return {"t": self.t, "piece": self.piece}


@dataclass(frozen=True, eq=False)
class Weight:
    """Evaluable candidate weight on [0, T_cap].

    ``func`` must be vectorised over numpy arrays. ``kind``/``params`` carry
    enough information to rebuild the weight from JSON.
    """

    func: Callable[[np.ndarray], np.ndarray]
    label: str
    kind: str = "callable"
    params: dict = field(default_factory=dict)
    breakpoints: tuple = ()
    T_cap: float = DEFAULT_T_CAP

    def __call__(self, t):
        arr = np.asarray(t, dtype=float)
        out = np.asarray(self.func(np.atleast_1d(arr)), dtype=float)
        if arr.ndim == 0:
            return float(out.reshape(-1)[0])
        return out.reshape(arr.shape)

    def evaluate_checked(self, t) -> np.ndarray:
        vals = np.atleast_1d(self(t))
        bad = ~np.isfinite(vals) | (vals < 0)
        if np.any(bad):
            i = int(np.argmax(bad))
            arg = np.atleast_1d(np.asarray(t, dtype=float))[i]
            raise RepresentationError(
                f"{self.label}: eval({arg:g}) = {vals[i]!r} is negative or non-finite")
        return vals

    @property
    def breakpoint_ts(self) -> np.ndarray:
        return np.array([b.t for b in self.breakpoints], dtype=float)

    @classmethod
    def from_function(cls, func, label: str, T_cap: float = DEFAULT_T_CAP) -> "Weight":
        """Wrap an arbitrary vectorised callable (not validated as a weight)."""
        return cls(func=func, label=label, kind="callable", T_cap=T_cap)

    def to_json(self) -> dict:
        if self.kind == "callable":
            raise WeightError(f"{self.label}: ad-hoc callables are not serialisable")
        return {
            "label": self.label,
            "kind": self.kind,
            "params": self.params,
            "breakpoints": [b.to_json() for b in self.breakpoints],
            "T_cap": self.T_cap,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2)


# -- catalog -----------------------------------------------------------------

def power(a: float, T_cap: float = DEFAULT_T_CAP) -> Weight:
    a = float(a)
    if a >= 1:
        raise WeightError(
            f"power({a:g}) rejected: integral condition fails "
            f"(int_1^oo t^{a:g}/t^2 dt diverges)")
    if a <= 0:
        raise WeightError(
            f"power({a:g}) rejected: growth condition fails "
            f"(t^{a:g}/log(1+t) stays bounded)")
    return Weight(lambda t: np.power(t, a), label=f"power({a:g})", kind="power",
                  params={"a": a}, T_cap=T_cap)


def log1(T_cap: float = DEFAULT_T_CAP) -> Weight:
    return Weight(np.log1p, label="log1", kind="log1", T_cap=T_cap)


def log2(T_cap: float = DEFAULT_T_CAP) -> Weight:
    return Weight(lambda t: np.log1p(t) ** 2, label="log2", kind="log2", T_cap=T_cap)


def scaled(c: float, base: Weight) -> Weight:
    c = float(c)
    if c <= 0:
        raise WeightError("scale factor must be positive")
    return Weight(lambda t: c * base(t), label=f"{c:g}*{base.label}", kind="scaled",
                  params={"c": c, "base": base.to_json()},
                  breakpoints=base.breakpoints, T_cap=base.T_cap)


def compose_power(base: Weight, theta: float) -> Weight:
    """t -> base(t**theta), 0 < theta <= 1."""
    theta = float(theta)
    if not 0 < theta <= 1:
        raise WeightError("compose exponent must lie in (0, 1]")
    return Weight(lambda t: base(np.power(t, theta)), label=f"compose({base.label},{theta:g})",
                  kind="compose", params={"base": base.to_json(), "theta": theta},
                  T_cap=base.T_cap)


def table(points, T_cap: float = DEFAULT_T_CAP, label: str | None = None) -> Weight:
    """Piecewise-linear weight through ``points`` [(t, value), ...].

    (0, 0) is prepended when absent; beyond the last point the last slope is
    continued.
    """
    pts = sorted((float(t), float(v)) for t, v in points)
    if not pts or pts[0][0] != 0.0:
        pts.insert(0, (0.0, 0.0))
    ts = np.array([p[0] for p in pts])
    vs = np.array([p[1] for p in pts])
    if vs[0] != 0.0:
        raise WeightError("breakpoint table must start at (0, 0)")
    if np.any(np.diff(ts) <= 0):
        raise WeightError("breakpoint table has repeated abscissae")
    if np.any(np.diff(vs) < 0):
        i = int(np.argmax(np.diff(vs) < 0))
        raise WeightError(f"non-monotone breakpoint table at t={ts[i + 1]:g}")
    slope = (vs[-1] - vs[-2]) / (ts[-1] - ts[-2])

    def f(t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, ts, vs)
        beyond = t > ts[-1]
        out[beyond] = vs[-1] + slope * (t[beyond] - ts[-1])
        return out

    bps = tuple(Breakpoint(float(t), {"value": float(v)}) for t, v in zip(ts[1:], vs[1:]))
    return Weight(f, label=label or "table", kind="table",
                  params={"points": [[float(t), float(v)] for t, v in zip(ts, vs)]},
                  breakpoints=bps, T_cap=T_cap)


_FUNC_RE = re.compile(r"^\s*([A-Za-z_]\w*)\s*(?:\((.*)\))?\s*$", re.S)


def _split_args(s: str) -> list[str]:
    parts, depth, cur = [], 0, []
    for ch in s:
        if ch == "," and depth == 0:
            parts.append("".join(cur).strip())
            cur = []
            continue
        depth += ch == "("
        depth -= ch == ")"
        cur.append(ch)
    if "".join(cur).strip():
        parts.append("".join(cur).strip())
    return parts


def _number(s: str) -> float:
    if "/" in s:
        num, den = s.split("/", 1)
        return float(num) / float(den)
    return float(s)


def make_weight(spec: Any, T_cap: float = DEFAULT_T_CAP) -> Weight:
    """Build a weight from a catalog descriptor.

    Accepted forms: a Weight; a JSON dict as produced by ``Weight.to_json``;
    a JSON string or ``@path`` to a JSON file; a text descriptor such as
    ``power(0.5)``, ``3*power(1/2)``, ``log1``, ``log2``, ``table(...)`` or a
    composite like ``stronger(power(0.5))``, ``mean(power(1/3), power(1/2))``.
    """
    if isinstance(spec, Weight):
        return spec
    if isinstance(spec, dict):
        return from_json(spec)
    if not isinstance(spec, str):
        raise WeightError(f"unsupported weight descriptor {spec!r}")
    s = spec.strip()
    if s.startswith("@"):
        with open(s[1:]) as fh:
            return from_json(json.load(fh))
    if s.startswith("{"):
        return from_json(json.loads(s))
    m = re.match(r"^\s*([0-9.eE+\-/]+)\s*\*\s*(.+)$", s, re.S)
    if m:
        return scaled(_number(m.group(1)), make_weight(m.group(2), T_cap))
    m = _FUNC_RE.match(s)
    if not m:
        raise WeightError(f"cannot parse weight descriptor {spec!r}")
    name, argstr = m.group(1), m.group(2)
    args = _split_args(argstr) if argstr else []
    if name == "power":
        return power(_number(args[0]), T_cap)
    if name == "log1":
        return log1(T_cap)
    if name == "log2":
        return log2(T_cap)
    if name == "scaled":
        return scaled(_number(args[0]), make_weight(args[1], T_cap))
    if name == "compose":
        return compose_power(make_weight(args[0], T_cap), _number(args[1]))
    if name == "table":
        vals = json.loads("[" + argstr + "]")
        return table(vals, T_cap)
    from . import constructions as C
    unary = {"regularize": C.regularize, "envelope": C.concave_envelope,
             "stronger": C.build_stronger, "weaker": C.build_weaker}
    if name in unary:
        return unary[name](make_weight(args[0], T_cap))
    if name in ("mean", "join", "sup"):
        a, b = make_weight(args[0], T_cap), make_weight(args[1], T_cap)
        if name == "sup":
            return C.pointwise_sup(a, b)
        return C.combine(a, b, "geometric-mean" if name == "mean" else "join")
    raise WeightError(f"unknown weight kind {name!r}")


def from_json(d: dict) -> Weight:
    kind = d.get("kind")
    p = d.get("params", {})
    T_cap = float(d.get("T_cap", DEFAULT_T_CAP))
    if kind == "power":
        return power(p["a"], T_cap)
    if kind == "log1":
        return log1(T_cap)
    if kind == "log2":
        return log2(T_cap)
    if kind == "scaled":
        return scaled(p["c"], from_json(p["base"]))
    if kind == "compose":
        return compose_power(from_json(p["base"]), p["theta"])
    if kind == "table":
        return table(p["points"], T_cap, label=d.get("label"))
    from . import constructions as C
    return C.from_json_composite(d)


# -- audit -------------------------------------------------------------------

def audit_grid(T_cap: float = DEFAULT_T_CAP) -> np.ndarray:
    """Geometric grid 2^(j/4), j = 0 .. 4*log2(T_cap)."""
    jmax = int(math.floor(4 * math.log2(T_cap) + 1e-9))
    return 2.0 ** (np.arange(jmax + 1) / 4.0)


def audit_pairs(T_cap: float = DEFAULT_T_CAP, seed: int = AUDIT_SEED,
                per_decade: int = PAIRS_PER_DECADE) -> tuple[np.ndarray, np.ndarray]:
    """Subadditivity audit pairs (x, y) with x + y <= T_cap.

    Diagonal grid pairs come first (starting at (1, 1)), then ``per_decade``
    scrambled Sobol pairs per decade from 1e-3 up: x is log-uniform in the
    decade and y log-uniform in [1e-3, x].
    """
    g = audit_grid(T_cap)
    diag = g[2 * g <= T_cap]
    xs, ys = [diag], [diag]
    lo = -3
    hi = int(math.floor(math.log10(T_cap)))
    sob = qmc.Sobol(d=2, scramble=True, seed=seed)
    for dec in range(lo, hi):
        u = sob.random(per_decade)
        x = 10.0 ** (dec + u[:, 0])
        y = 10.0 ** (lo + (np.log10(x) - lo) * u[:, 1])
        keep = x + y <= T_cap
        xs.append(x[keep])
        ys.append(y[keep])
    return np.concatenate(xs), np.concatenate(ys)


@dataclass
class AxiomReport:
    label: str
    flags: dict
    status: dict
    witnesses: dict
    integral_bound: float | None
    tail_bound: float | None
    T_cap: float
    details: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(self.flags.values())

    def to_json(self) -> dict:
        return {"label": self.label, "passed": self.passed, "flags": self.flags,
                "status": self.status, "witnesses": self.witnesses,
                "integral_bound": self.integral_bound, "tail_bound": self.tail_bound,
                "T_cap": self.T_cap, "details": self.details}


def dyadic_increments(w: Weight, jmax: int) -> np.ndarray:
    """I_j = int_{2^j}^{2^(j+1)} w(t)/t^2 dt for j = 0 .. jmax-1.

    Substituting t = 2^j u gives I_j = 2^-j int_1^2 w(2^j u)/u^2 du, which is
    integrated for all blocks at once.
    """
    scales = 2.0 ** np.arange(jmax)

    def g(u):
        return w.evaluate_checked(np.outer(u, scales).ravel()).reshape(len(u), jmax) \
            / (u[:, None] ** 2)

    try:
        vals = simpson(g, 1.0, 2.0, rtol=1e-11, min_level=4, max_level=14,
                       accept_rtol=1e-7)
    except QuadratureError as exc:
        raise RepresentationError(f"{w.label}: {exc}") from exc
    return vals / scales


def integral_certificate(w: Weight) -> dict:
    """Dyadic partial sums of int_1^T w/t^2 plus a tail estimate."""
    jmax = int(math.floor(math.log2(w.T_cap)))
    inc = dyadic_increments(w, jmax)
    T = 2.0 ** jmax
    last = np.arange(jmax - TREND_WINDOW, jmax)
    ratios = inc[last[1:]] / np.where(inc[last[:-1]] > 0, inc[last[:-1]], np.inf)
    decaying = bool(np.all(ratios < 0.999))
    vals = w.evaluate_checked(np.concatenate([2.0 ** last, 2.0 ** (last + 1)]))
    v0, v1 = vals[:TREND_WINDOW], vals[TREND_WINDOW:]
    with np.errstate(divide="ignore", invalid="ignore"):
        local = np.where(v0 > 0, np.log2(np.maximum(v1, 1e-300) / v0), 0.0)
    a_eff = float(max(np.max(local), 0.0))
    wT = float(w.evaluate_checked(T)[0])
    partial = float(np.sum(inc))
    if decaying and a_eff < 1:
        tail = wT / T / (1.0 - a_eff)
    else:
        tail = math.inf
    return {"partial": partial, "tail": tail, "total": partial + tail,
            "decaying": decaying, "a_eff": a_eff, "increment_ratios": ratios.tolist(),
            "T": T}


def growth_certificate(w: Weight, Ms=(10.0, 100.0, 1000.0)) -> dict:
    g = audit_grid(w.T_cap)
    g = g[g >= 2]
    r = w.evaluate_checked(g) / np.log1p(g)
    out = {}
    tail = r[-TREND_WINDOW:]
    increasing = bool(np.all(np.diff(tail) > 0))
    for M in Ms:
        below = np.nonzero(r <= M)[0]
        if below.size == 0:
            out[M] = {"status": "pass", "t_M": float(g[0])}
        elif below[-1] < len(g) - TREND_WINDOW:
            out[M] = {"status": "pass", "t_M": float(g[below[-1] + 1])}
        elif increasing:
            out[M] = {"status": "inconclusive", "ratio_at_cap": float(r[-1])}
        else:
            out[M] = {"status": "fail", "t": float(g[-1]), "ratio": float(r[-1])}
    return out


def check_axioms(w: Weight, seed: int = AUDIT_SEED) -> AxiomReport:
    """Audit the weight axioms on the standard grid up to ``w.T_cap``.

    Raises RepresentationError for negative or non-finite values.
    """
    flags, status, wit = {}, {}, {}
    details: dict = {"seed": seed}
    g = np.concatenate([[0.0], audit_grid(w.T_cap)])
    vals = w.evaluate_checked(g)
    zero_ok = vals[0] == 0.0
    d = np.diff(vals)
    mono_ok = bool(np.all(d >= 0))
    x, y = audit_pairs(w.T_cap, seed)
    wx, wy, wxy = w.evaluate_checked(x), w.evaluate_checked(y), w.evaluate_checked(x + y)
    tol = 1e-9 * (1 + np.abs(wx + wy))
    viol = wxy > wx + wy + tol
    sub_ok = not bool(np.any(viol))
    flags["a"] = bool(zero_ok and mono_ok and sub_ok)
    if not zero_ok:
        wit["a"] = {"kind": "zero", "value": float(vals[0])}
    elif not mono_ok:
        i = int(np.argmax(d < 0))
        wit["a"] = {"kind": "monotone", "t1": float(g[i]), "t2": float(g[i + 1]),
                    "w1": float(vals[i]), "w2": float(vals[i + 1])}
    elif not sub_ok:
        i = int(np.argmax(viol))
        wit["a"] = {"kind": "subadditive", "x": float(x[i]), "y": float(y[i]),
                    "lhs": float(wxy[i]), "rhs": float(wx[i] + wy[i])}
    status["a"] = "pass" if flags["a"] else "fail"
    details["n_pairs"] = int(x.size)

    cert = integral_certificate(w)
    flags["b"] = bool(cert["decaying"] and math.isfinite(cert["tail"]))
    status["b"] = "pass" if flags["b"] else "fail"
    if not flags["b"]:
        wit["b"] = {"kind": "divergent", "increment_ratios": cert["increment_ratios"]}
    details["integral"] = cert

    gc = growth_certificate(w)
    st = [v["status"] for v in gc.values()]
    flags["c"] = all(s == "pass" for s in st)
    status["c"] = "fail" if "fail" in st else ("inconclusive" if "inconclusive" in st else "pass")
    if not flags["c"]:
        wit["c"] = {str(M): v for M, v in gc.items() if v["status"] != "pass"}
    details["growth"] = {str(M): v for M, v in gc.items()}
    return AxiomReport(label=w.label, flags=flags, status=status, witnesses=wit,
                       integral_bound=cert["total"] if flags["b"] else None,
                       tail_bound=cert["tail"] if flags["b"] else None,
                       T_cap=w.T_cap, details=details)


# -- ordering ----------------------------------------------------------------

@dataclass
class OrderVerdict:
    relation: str
    constants: tuple | None = None
    ratio_trace: list | None = None
    diagnostic: str = ""

    def to_json(self) -> dict:
        return {"relation": self.relation, "constants": self.constants,
                "ratio_trace": self.ratio_trace, "diagnostic": self.diagnostic}


def trend_window(w1: Weight, w2: Weight, window: int = TREND_WINDOW) -> np.ndarray:
    """Points on which the tail trend of w1/w2 is judged.

    The last ``window`` audit-grid points, or the last ``window`` breakpoints
    when the weights carry that many: between and beyond its breakpoints a
    constructed weight may run parallel to its input, which would hide the
    trend. Only breakpoints up to the end of the shortest construction count.
    """
    T_cap = min(w1.T_cap, w2.T_cap)
    ends = [w.breakpoint_ts[-1] for w in (w1, w2) if w.breakpoints]
    bps = np.union1d(w1.breakpoint_ts, w2.breakpoint_ts)
    bps = bps[bps <= min([T_cap] + ends)]
    if bps.size >= window:
        return bps[-window:]
    return audit_grid(T_cap)[-window:]


def tends_to_zero(ratios: np.ndarray, threshold: float = TREND_THRESHOLD) -> str:
    """'yes', 'no' or 'inconclusive' for a finite ratio tail."""
    d = np.diff(ratios)
    if np.all(d < 0):
        return "yes" if ratios[-1] < threshold else "inconclusive"
    if np.all(d >= 0) or np.ptp(ratios) <= 1e-12 * np.max(np.abs(ratios)):
        return "no"
    return "inconclusive"


def compare(w1: Weight, w2: Weight, mode: str = "weak-equiv",
            window: int = TREND_WINDOW, threshold: float = TREND_THRESHOLD,
            spread_limit: float = 4.0) -> OrderVerdict:
    """Decide weak equivalence or strong inequality w1 << w2 on the audit grid."""
    T_cap = min(w1.T_cap, w2.T_cap)
    if mode in ("strong", "strong-less"):
        pts = trend_window(w1, w2, window)
        a, b = w1.evaluate_checked(pts), w2.evaluate_checked(pts)
        r = a / b
        trace = [[float(t), float(v)] for t, v in zip(pts, r)]
        res = tends_to_zero(r, threshold)
        if res == "yes":
            return OrderVerdict("strongly-less", ratio_trace=trace)
        if res == "inconclusive":
            diag = ("ratio decreasing but above threshold at T_cap"
                    if np.all(np.diff(r) < 0) else "oscillating ratio, no trend")
            return OrderVerdict("inconclusive", ratio_trace=trace, diagnostic=diag)
        return OrderVerdict("incomparable", ratio_trace=trace,
                            diagnostic="ratio does not tend to zero")
    if mode not in ("weak", "weak-equiv"):
        raise ValueError(f"unknown compare mode {mode!r}")
    g = audit_grid(T_cap)
    a, b = w1.evaluate_checked(g), w2.evaluate_checked(g)
    r = b / a
    k, m = float(np.min(r)), float(np.max(r))
    trace = [[float(t), float(v)] for t, v in zip(g[-window:], r[-window:])]
    for x, y in ((w1, w2), (w2, w1)):
        if compare(x, y, "strong", window, threshold).relation == "strongly-less":
            return OrderVerdict("incomparable", ratio_trace=trace,
                                diagnostic=f"{x.label} << {y.label}")
    tail = r[-window:]
    if m / k > spread_limit and (np.all(np.diff(tail) > 0) or np.all(np.diff(tail) < 0)):
        return OrderVerdict("inconclusive", ratio_trace=trace,
                            diagnostic="ratio spread still drifting at T_cap")
    return OrderVerdict("weak-equivalent", constants=(k, m))
