"""Asymptotic scales, exponent fitting and the classification of nets of constants.

Every "o(e^{+-k w(1/eps)})" statement is decided on a finite dyadic schedule
eps_k = 2^-k by a least-squares slope of log|r| against w(1/eps) over the
tail of the schedule, together with a comparison of the slopes on the early
and late halves of that tail (to separate a steady exponent from one that
keeps growing or fades out).

Sequences are handled in log form throughout, so that e^{-w(1/eps)^1.2} is
representable at eps = 2^-40.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np

from .constructions import dominate_sequence, geometric_mean, weight_sum
from .weights import Weight, WeightError, compose_power, make_weight

DELTA = 0.05
WINDOW = 12
K_MAX = 64.0
TREND_RATIO = 1.25
BEURLING_INDICES = tuple(2.0 ** j for j in range(-4, 7))
RMS_FLOOR = 0.1
# relative resolution of a log-quadrature; residuals below it are noise
REL_NOISE = 1e-5
CERT_RATIO = 0.05
LOG_THRESHOLD = math.log(0.05)

CLASSES = ("Moderate", "Negligible", "Neither", "Inconclusive")


class FitError(ValueError):
    pass


@dataclass(frozen=True)
class EpsSchedule:
    """eps_k = 2^-k for k = k_min, k_min + step, ..., k_max."""
    k_min: float = 4
    k_max: float = 40
    step: float = 1.0

    def __post_init__(self):
        if self.step <= 0:
            raise ValueError("schedule step must be positive")
        if self.k_max - self.k_min < self.step:
            raise ValueError("schedule needs at least two points")
        if self.k_max > 1000:
            raise ValueError("eps = 2^-k_max is not representable")

    def __len__(self) -> int:
        return int(round((self.k_max - self.k_min) / self.step)) + 1

    @property
    def ks(self) -> np.ndarray:
        ks = self.k_min + self.step * np.arange(len(self))
        return ks.astype(int) if self.step == 1 and float(self.k_min).is_integer() else ks

    @property
    def eps(self) -> np.ndarray:
        return np.exp2(-np.asarray(self.ks, dtype=float))

    @property
    def inv(self) -> np.ndarray:
        return np.exp2(np.asarray(self.ks, dtype=float))

    def to_json(self) -> dict:
        d = {"k_min": self.k_min, "k_max": self.k_max}
        if self.step != 1:
            d["step"] = self.step
        return d


DEFAULT_SCHEDULE = EpsSchedule()


# -- exponent fitting ---------------------------------------------------------

def _k(v) -> float:
    v = float(v)
    return int(v) if v.is_integer() else v


def _slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    xm, ym = x.mean(), y.mean()
    dx = x - xm
    c = float(np.dot(dx, y - ym) / np.dot(dx, dx))
    return c, float(ym - c * xm)


def _trend(early: float, late: float, tiny: float) -> str:
    if abs(late) <= tiny and abs(early) <= tiny:
        return "steady"
    if abs(late) >= TREND_RATIO * abs(early) and abs(late) > tiny and early * late >= 0:
        return "diverging"
    if abs(late) <= abs(early) / TREND_RATIO and abs(early) > tiny:
        return "vanishing"
    return "steady"


@dataclass
class ExponentFit:
    """Slope of log N_k against x_k = w(1/eps_k) over the tail window."""
    slope: float
    intercept: float
    rms: float
    window: tuple
    early_slope: float
    late_slope: float
    trend: str
    unreliable: bool
    delta: float = DELTA
    against: str = ""
    n_points: int = 0
    range_limited: bool = False

    @property
    def asymptotic_slope(self) -> float:
        """The slope as eps -> 0: +-inf if it keeps growing, 0 if it fades."""
        if self.slope == -math.inf:
            return -math.inf
        if self.trend == "diverging":
            return math.copysign(math.inf, self.late_slope)
        if self.trend == "vanishing":
            return 0.0
        return self.slope

    def to_json(self) -> dict:
        s = self.asymptotic_slope
        return {"slope": self.slope, "intercept": self.intercept, "rms": self.rms,
                "window": list(self.window), "early_slope": self.early_slope,
                "late_slope": self.late_slope, "trend": self.trend,
                "asymptotic_slope": s if math.isfinite(s) else str(s),
                "unreliable": self.unreliable, "delta": self.delta, "against": self.against,
                "n_points": self.n_points, "range_limited": self.range_limited}


def fit_exponent(values=None, w: Weight | None = None, schedule: EpsSchedule = DEFAULT_SCHEDULE,
                 window: int = WINDOW, log_values=None, x=None, delta: float = DELTA,
                 ) -> ExponentFit:
    """Fit log values ~ c w(1/eps) + b over the last ``window`` schedule points.

    Pass positive ``values`` or their logarithms as ``log_values``; ``x`` may
    replace w(1/eps) by any other abscissa on the schedule. Entries of
    ``log_values`` equal to -inf (exact zeros) are allowed only all together.
    """
    if log_values is None:
        v = np.asarray(values, dtype=float)
        if np.any(~np.isfinite(v)) or np.any(v <= 0):
            raise FitError("values must be positive and finite")
        y = np.log(v)
    else:
        y = np.asarray(log_values, dtype=float)
    if x is None:
        if w is None:
            raise FitError("need a weight or an abscissa")
        x = w(schedule.inv)
        against = w.label
    else:
        against = "x"
    x = np.asarray(x, dtype=float)
    if x.shape != y.shape or y.shape != (len(schedule),):
        raise FitError(f"expected {len(schedule)} values on the schedule, got {y.shape}")
    ks = schedule.ks
    if np.any(np.isnan(y)) or np.any(y == math.inf):
        raise FitError("values must be finite")
    if np.all(y == -math.inf):
        win = (_k(ks[-window]), _k(ks[-1]))
        return ExponentFit(-math.inf, -math.inf, 0.0, win, -math.inf, -math.inf, "steady",
                           False, delta, against, window)
    if np.any(y == -math.inf):
        raise FitError("sequence is partly zero; supply log values without underflow")
    xs, ys, kk = x[-window:], y[-window:], ks[-window:]
    c, b = _slope(xs, ys)
    res = ys - (c * xs + b)
    with np.errstate(over="ignore"):
        rms = float(np.sqrt(np.mean(res ** 2)))
    h = window // 2
    ce, _ = _slope(xs[:h], ys[:h])
    cl, _ = _slope(xs[h:], ys[h:])
    floor = max(RMS_FLOOR, REL_NOISE * float(np.max(np.abs(ys))))
    # slopes a noise-level residual could produce over the window count as zero
    tiny = max(1e-9, 8 * floor / max(float(xs[-1] - xs[0]), 1e-300))
    trend = _trend(ce, cl, tiny)
    unreliable = rms > max(0.5 * abs(c) * float(np.mean(xs)), floor)
    steps = np.diff(ys)
    if trend == "vanishing" and (np.all(steps > 0) or np.all(steps < 0)):
        # monotone sub-scale growth: the residual is curvature, not noise
        unreliable = False
    return ExponentFit(c, b, rms, (_k(kk[0]), _k(kk[-1])), ce, cl, trend,
                       bool(unreliable), delta, against, len(xs))


def fit_on_range(log_values, x, schedule: EpsSchedule, window: int = WINDOW,
                 delta: float = DELTA, min_points: int = 6) -> ExponentFit:
    """fit_exponent restricted to the finite tail of a partly overflowing sequence."""
    y = np.asarray(log_values, dtype=float)
    x = np.asarray(x, dtype=float)
    ok = np.isfinite(y) & np.isfinite(x)
    if np.all(y == -math.inf):
        return fit_exponent(log_values=y, x=x, schedule=schedule, window=window, delta=delta)
    if ok.all():
        return fit_exponent(log_values=y, x=x, schedule=schedule, window=window, delta=delta)
    idx = np.nonzero(ok)[0]
    if not idx.size:
        raise FitError("no finite point on the schedule")
    # longest finite run starting at the schedule start
    last = idx[0]
    while last + 1 < len(y) and ok[last + 1]:
        last += 1
    n = last - idx[0] + 1
    if n < min_points:
        raise FitError(f"only {n} finite points before overflow")
    sub = EpsSchedule(_k(schedule.ks[idx[0]]), _k(schedule.ks[last]), schedule.step)
    win = min(window, n - n % 2)
    fit = fit_exponent(log_values=y[idx[0]:last + 1], x=x[idx[0]:last + 1], schedule=sub,
                       window=win, delta=delta)
    fit.range_limited = True
    return fit


# -- scales -------------------------------------------------------------------

@dataclass
class Scale:
    """Beurling scale a_k = e^{-k w(1/eps)} or Roumieu scale a_v = e^{-v(1/eps)}, v << w."""
    kind: str
    w: Weight
    indices: tuple
    closed: bool = False
    schedule: EpsSchedule = DEFAULT_SCHEDULE
    trace: list = field(default_factory=list)

    def index_label(self, idx) -> str:
        return f"{idx:g}" if self.kind == "beurling" else idx.label

    def log_member(self, idx, eps=None) -> np.ndarray:
        inv = self.schedule.inv if eps is None else 1.0 / np.asarray(eps, dtype=float)
        if self.kind == "beurling":
            return -float(idx) * self.w(inv)
        return -idx(inv)

    def member(self, idx, eps=None) -> np.ndarray:
        return np.exp(self.log_member(idx, eps))

    def to_json(self) -> dict:
        return {"kind": self.kind, "weight": self.w.label,
                "indices": [self.index_label(i) for i in self.indices],
                "closed": self.closed, "schedule": self.schedule.to_json()}


def _certified_below(v: Weight, w: Weight, T: float) -> bool:
    return float(v(T) / w(T)) < CERT_RATIO


@lru_cache(maxsize=16)
def _family_cached(w: Weight, depth: int, T: float) -> tuple:
    # compositions w(t^theta) separate from each other visibly on a finite
    # window; build_weaker outputs run parallel to w/n past their last
    # breakpoint and would cross them inside the schedule
    thetas = [j / depth for j in range(1, depth)] if depth > 1 else [0.5]
    comps = [compose_power(w, th) for th in thetas]
    members = list(comps)
    for a, b in zip(comps[:-1], comps[1:]):
        members.append(geometric_mean(a, b))
    members = [m for m in members if _certified_below(m, w, T)]
    members.sort(key=lambda m: float(m(T)))
    return tuple(members)


def roumieu_family(w: Weight, depth: int = 4, schedule: EpsSchedule = DEFAULT_SCHEDULE
                   ) -> list[Weight]:
    """Constructed weights v << w, sorted by their size at the end of the schedule."""
    if not 1 <= depth <= 8:
        raise ValueError("roumieu depth must lie in 1 .. 8")
    return list(_family_cached(w, depth, float(schedule.inv[-1])))


def make_scale(kind: str, w: Weight | str, roumieu_depth: int = 4,
               schedule: EpsSchedule = DEFAULT_SCHEDULE, indices=None) -> Scale:
    """A Beurling or Roumieu scale on ``w``.

    ``indices`` replaces the default index sample and closes the index set
    (product witnesses must then come from the listed indices).
    """
    if isinstance(w, str):
        w = make_weight(w)
    if kind not in ("beurling", "roumieu"):
        raise ValueError(f"unknown scale kind {kind!r}")
    if indices is not None:
        return Scale(kind, w, tuple(indices), closed=True, schedule=schedule)
    if kind == "beurling":
        return Scale(kind, w, BEURLING_INDICES, schedule=schedule)
    return Scale(kind, w, tuple(roumieu_family(w, roumieu_depth, schedule)), schedule=schedule)


def _log_tends_to_minus_inf(log_ratio: np.ndarray, window: int = 8) -> bool:
    tail = log_ratio[-window:]
    return bool(np.all(np.diff(tail) < 0) and tail[-1] < LOG_THRESHOLD)


def _ordered(s: Scale, a, b) -> bool:
    """True when index b is 'larger' than a (a_b = o(a_a) expected)."""
    if s.kind == "beurling":
        return float(b) > float(a)
    T = s.schedule.inv[-1]
    return float(b(T)) > float(a(T))


def check_scale_axioms(s: Scale, max_pairs: int = 6) -> dict:
    """Ordering and product conditions on sampled index pairs."""
    idx = list(s.indices)
    pairs = [(idx[i], idx[i + 1]) for i in range(len(idx) - 1)]
    if len(idx) > 2:
        pairs.append((idx[0], idx[-1]))
    ordering = []
    for a, b in pairs:
        if not _ordered(s, a, b):
            a, b = b, a
        lr = s.log_member(b) - s.log_member(a)
        ordering.append({"small": s.index_label(a), "large": s.index_label(b),
                         "passed": _log_tends_to_minus_inf(lr),
                         "final_log_ratio": float(lr[-1])})
    prod_pairs = [(x, x) for x in idx[:1]] + pairs[: max_pairs - 1]
    product = []
    status = "pass"
    for l, m in prod_pairs[:max_pairs]:
        target = s.log_member(l) + s.log_member(m)
        row = {"l": s.index_label(l), "m": s.index_label(m)}
        cands = []
        if s.closed:
            cands = list(idx)
        elif s.kind == "beurling":
            cands = [float(l) + float(m) + 1.0]
        else:
            try:
                cands = [dominate_sequence([weight_sum(l, m)], s.w)]
                row["construction"] = "dominate([sum(l, m)], w)"
            except WeightError as e:
                row["construction_error"] = str(e)
                s.trace.append(str(e))
        found = None
        for k in cands:
            if _log_tends_to_minus_inf(s.log_member(k) - target):
                found = k
                break
        row["witness"] = s.index_label(found) if found is not None else None
        row["passed"] = found is not None
        if not row["passed"]:
            if "construction_error" in row:
                status = "inconclusive" if status == "pass" else status
            else:
                status = "fail"
        product.append(row)
    if not all(r["passed"] for r in ordering):
        status = "fail"
    return {"scale": s.to_json(), "ordering": ordering, "product": product,
            "status": status, "passed": status == "pass"}


# -- nets of constants ----------------------------------------------------------

@dataclass
class Verdict:
    cls: str
    case: str
    moderate: bool | None
    negligible: bool | None
    evidence: dict = field(default_factory=dict)
    reason: str = ""
    delta: float = DELTA
    k_max: float = K_MAX

    def to_json(self) -> dict:
        return {"class": self.cls, "case": self.case, "moderate": self.moderate,
                "negligible": self.negligible, "evidence": self.evidence,
                "reason": self.reason, "delta": self.delta, "k_max": self.k_max}


def verdict_class(moderate: bool | None, negligible: bool | None) -> str:
    if moderate is None:
        return "Inconclusive"
    if not moderate:
        return "Neither"
    if negligible is None:
        return "Inconclusive"
    return "Negligible" if negligible else "Moderate"


def beurling_pattern(s_inf: float, delta: float = DELTA, k_max: float = K_MAX):
    """(moderate, negligible) for the projective Beurling quantifiers."""
    moderate = s_inf <= k_max - delta
    return moderate, moderate and s_inf <= -k_max - delta


def roumieu_pattern(s_inf: float, delta: float = DELTA):
    """(moderate, negligible) for the inductive Roumieu quantifiers."""
    moderate = s_inf <= delta
    return moderate, moderate and s_inf <= -delta


def projective_pattern(slopes: list[float], delta: float = DELTA):
    """(moderate, negligible) from asymptotic slopes against each v << w.

    Moderate: some v with |r| = O(e^{v}); negligible: |r| = o(e^{-v}) for every v.
    """
    moderate = any(s <= 1 - delta for s in slopes)
    return moderate, moderate and all(s <= -1 - delta for s in slopes)


def _log_abs(r=None, log_abs=None) -> np.ndarray:
    if log_abs is not None:
        return np.asarray(log_abs, dtype=float)
    a = np.abs(np.asarray(r))
    if np.any(~np.isfinite(a)):
        raise FitError("sequence must be finite")
    with np.errstate(divide="ignore"):
        return np.log(a.astype(float))


def classify_constants(r=None, s: Scale | None = None, log_abs=None,
                       presentation: str = "inductive", delta: float = DELTA,
                       k_max: float = K_MAX, window: int = WINDOW) -> Verdict:
    """Moderate / Negligible / Neither for a sequence r_eps over the scale's schedule.

    Roumieu scales use the inductive constants (slopes against w) by default;
    ``presentation="projective"`` uses slopes against each constructed v << w.
    """
    y = _log_abs(r, log_abs)
    w = s.w
    sched = s.schedule
    case = s.kind if s.kind == "beurling" else f"roumieu-{presentation}"
    try:
        fit = fit_exponent(log_values=y, w=w, schedule=sched, window=window, delta=delta)
    except FitError as e:
        return Verdict("Inconclusive", case, None, None, reason=str(e), delta=delta, k_max=k_max)
    ev = {"fit": fit.to_json(), "config": {"delta": delta, "k_max": k_max, "window": window,
                                           "schedule": sched.to_json()}}
    if fit.unreliable:
        return Verdict("Inconclusive", case, None, None, ev, "unreliable fit", delta, k_max)
    s_inf = fit.asymptotic_slope
    if s.kind == "beurling":
        mod, neg = beurling_pattern(s_inf, delta, k_max)
        ev["pattern"] = "moderate: exists k slope <= k; negligible: slope <= -k for all k"
    elif presentation == "inductive":
        mod, neg = roumieu_pattern(s_inf, delta)
        ev["pattern"] = "moderate: slope <= k for all k > 0; negligible: slope <= -c, some c > 0"
    elif presentation == "projective":
        slopes = []
        rows = []
        for v in s.indices:
            f = fit_exponent(log_values=y, x=v(sched.inv), schedule=sched, window=window,
                             delta=delta)
            slopes.append(f.asymptotic_slope)
            rows.append({"index": v.label, "fit": f.to_json()})
        mod, neg = projective_pattern(slopes, delta)
        ev["per_index"] = rows
        ev["pattern"] = "moderate: exists v, O(e^v); negligible: o(e^-v) for all v"
    else:
        raise ValueError(f"unknown presentation {presentation!r}")
    return Verdict(verdict_class(mod, neg), case, bool(mod), bool(neg), ev, "", delta, k_max)


# -- moderate functions -------------------------------------------------------

def _safe_log_F(log_F: Callable, u: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore", invalid="ignore"):
        out = np.asarray(log_F(u), dtype=float)
    return np.where(np.isnan(out), np.inf, out)


def log_of(F: Callable) -> Callable:
    """u -> log F(e^u) for a positive scalar function F."""
    def g(u):
        with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
            return np.log(np.asarray(F(np.exp(u)), dtype=float))
    return g


def check_moderate_function(F: Callable | None = None, s: Scale | None = None,
                            log_F: Callable | None = None, delta: float = DELTA,
                            window: int = WINDOW) -> dict:
    """Sampled test of F(1/a_l) = o(1/a_m) per index l, plus a log-log degree fit.

    ``log_F(u) = log F(e^u)`` avoids overflow for fast-growing F. The Beurling
    index set is all positive reals, so the witness m is the fitted exponent
    plus the margin; Roumieu witnesses are searched in the constructed family
    (every member but the largest is probed).
    """
    if log_F is None:
        log_F = log_of(F)
    sched = s.schedule
    rows = []
    range_limited = False
    if s.kind == "beurling":
        probes = list(s.indices)
    else:
        probes = list(s.indices[:-1]) if len(s.indices) > 1 else list(s.indices)
    for l in probes:
        u = -s.log_member(l)
        y = _safe_log_F(log_F, u)
        row = {"l": s.index_label(l)}
        if s.kind == "beurling":
            try:
                fit = fit_on_range(y, s.w(sched.inv), sched, window, delta)
            except FitError as e:
                row.update(witness=None, skipped=f"range limited: {e}")
                range_limited = True
                rows.append(row)
                continue
            range_limited |= fit.range_limited
            m = fit.asymptotic_slope
            row["fit"] = fit.to_json()
            row["m_fit"] = m if math.isfinite(m) else str(m)
            row["witness"] = max(m + delta, delta) if m < math.inf else None
        else:
            row["witness"] = None
            for v in s.indices:
                try:
                    fit = fit_on_range(y, v(sched.inv), sched, window, delta)
                except FitError:
                    continue
                range_limited |= fit.range_limited
                if fit.asymptotic_slope <= 1 - delta:
                    row["witness"] = v.label
                    row["fit"] = fit.to_json()
                    break
        rows.append(row)
    probed = [r for r in rows if "skipped" not in r]
    moderate = bool(probed) and all(r["witness"] is not None for r in probed)
    return {"scale": s.to_json(), "per_index": rows, "moderate": moderate,
            "degree": polynomial_degree(log_F, float(sched.inv[-1])),
            "range_limited": range_limited}


def polynomial_degree(log_F: Callable, x_max: float, n: int = 24) -> dict:
    """Slope of log F against log x on the upper and lower halves of [1, x_max]."""
    u = np.linspace(0.0, math.log(x_max), 2 * n + 1)[1:]
    y = _safe_log_F(log_F, u)
    ok = np.isfinite(y)
    if ok.sum() < 4:
        return {"degree": None, "diverges": True, "range": None}
    uu, yy = u[ok], y[ok]
    h = len(uu) // 2
    lo, _ = _slope(uu[:h], yy[:h])
    hi, _ = _slope(uu[h:], yy[h:])
    diverges = bool(not ok.all() or (hi > 1.25 * max(abs(lo), 1e-9) and hi - lo > DELTA))
    return {"degree": None if diverges else hi, "degree_lower": lo, "degree_upper": hi,
            "diverges": diverges, "range": [float(math.exp(uu[0])), float(math.exp(uu[-1]))]}
