"""Constructive devices on weights: regularisation, envelopes, stronger and
weaker weights, interpolation, joins, sequence domination and small-o
witnesses."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._quad import QuadratureError, simpson
from .weights import (
    DEFAULT_T_CAP,
    TREND_THRESHOLD,
    TREND_WINDOW,
    Breakpoint,
    RepresentationError,
    Weight,
    WeightError,
    audit_grid,
    compare,
    dyadic_increments,
    from_json,
    integral_certificate,
)

MAX_BREAKPOINTS = 24
MAX_SEQUENCE = 32


class PartialConstructionWarning(UserWarning):
    pass


# -- regularisation and envelope ---------------------------------------------

def _regularized_func(base: Weight, rtol: float = 1e-8):
    def f(x):
        x = np.asarray(x, dtype=float)
        flat = x.ravel()

        def g(y):
            return base(np.outer(y, flat).ravel()).reshape(len(y), flat.size) / (y[:, None] ** 2)

        try:
            vals = simpson(g, 1.0, 2.0, rtol=rtol, atol=1e-300, min_level=4, max_level=16,
                           accept_rtol=1e-6)
        except QuadratureError as exc:
            raise RepresentationError(f"regularize({base.label}): {exc}") from exc
        return vals.reshape(x.shape)
    return f


def regularize(w: Weight) -> Weight:
    """f(x) = int_1^2 w(x y)/y^2 dy: increasing, f/x nonincreasing, w/2 <= f <= w."""
    return Weight(_regularized_func(w), label=f"regularize({w.label})", kind="regularized",
                  params={"base": w.to_json()}, breakpoints=w.breakpoints, T_cap=w.T_cap)


def upper_concave_hull(x, y) -> tuple[np.ndarray, np.ndarray]:
    """Vertices of the least concave majorant of the points (x_i, y_i)."""
    order = np.argsort(x, kind="stable")
    xs, ys = np.asarray(x, float)[order], np.asarray(y, float)[order]
    hx: list[float] = []
    hy: list[float] = []
    for px, py in zip(xs, ys):
        if hx and px == hx[-1]:
            if py <= hy[-1]:
                continue
            hx.pop()
            hy.pop()
        while len(hx) >= 2:
            s1 = (hy[-1] - hy[-2]) / (hx[-1] - hx[-2])
            s2 = (py - hy[-1]) / (px - hx[-1])
            if s2 >= s1:
                hx.pop()
                hy.pop()
            else:
                break
        hx.append(px)
        hy.append(py)
    return np.array(hx), np.array(hy)


def _hull_func(vx: np.ndarray, vy: np.ndarray):
    slope = (vy[-1] - vy[-2]) / (vx[-1] - vx[-2]) if len(vx) > 1 else 0.0

    def h(t):
        t = np.asarray(t, dtype=float)
        out = np.interp(t, vx, vy)
        beyond = t > vx[-1]
        out[beyond] = vy[-1] + slope * (t[beyond] - vx[-1])
        return out
    return h


def _envelope_points(T_cap: float) -> np.ndarray:
    jmax = int(math.floor(4 * math.log2(T_cap) + 1e-9))
    return np.concatenate([[0.0], 2.0 ** (np.arange(-160, jmax + 1) / 4.0)])


def concave_envelope(w: Weight) -> Weight:
    """Least concave majorant of w sampled on the (extended) audit grid."""
    t = _envelope_points(w.T_cap)
    v = w.evaluate_checked(t)
    if np.any(np.diff(v) < 0):
        raise WeightError(f"{w.label} is not increasing; apply regularize first")
    q = v[1:] / t[1:]
    if np.any(np.diff(q) > 1e-12 * q[:-1]):
        raise WeightError(f"{w.label}: w(t)/t is not nonincreasing; apply regularize first")
    vx, vy = upper_concave_hull(t, v)
    return Weight(_hull_func(vx, vy), label=f"envelope({w.label})", kind="envelope",
                  params={"base": w.to_json(), "vertices": np.column_stack([vx, vy]).tolist()},
                  T_cap=w.T_cap)


# -- piecewise weights ---------------------------------------------------------

def _piecewise_func(bases: list[Weight], pieces: list[dict]):
    starts = np.array([p["start"] for p in pieces], dtype=float)

    def f(t):
        t = np.asarray(t, dtype=float)
        out = np.empty_like(t)
        idx = np.searchsorted(starts, t, side="right") - 1
        for i, p in enumerate(pieces):
            m = idx == i
            if not np.any(m):
                continue
            tm = t[m]
            val = p["scale"] * bases[p["base"]](tm)
            aff = p.get("affine")
            if aff is not None:
                t0, v0, t1, v1 = aff
                val = np.maximum(val, v0 + (v1 - v0) * (tm - t0) / (t1 - t0))
            out[m] = val
        return out
    return f


def piecewise(bases: list[Weight], pieces: list[dict], label: str,
              T_cap: float, extra: dict | None = None) -> Weight:
    bps = tuple(Breakpoint(float(p["start"]), {k: v for k, v in p.items() if k != "start"})
                for p in pieces[1:])
    params = {"bases": [b.to_json() for b in bases], "pieces": pieces}
    if extra:
        params.update(extra)
    return Weight(_piecewise_func(bases, pieces), label=label, kind="piecewise",
                  params=params, breakpoints=bps, T_cap=T_cap)


def pointwise_sup(w1: Weight, w2: Weight) -> Weight:
    return Weight(lambda t: np.maximum(w1(t), w2(t)), label=f"sup({w1.label},{w2.label})",
                  kind="sup", params={"a": w1.to_json(), "b": w2.to_json()},
                  T_cap=min(w1.T_cap, w2.T_cap))


def geometric_mean(w1: Weight, w2: Weight) -> Weight:
    bps = tuple(sorted(w1.breakpoints + w2.breakpoints, key=lambda b: b.t))
    return Weight(lambda t: np.sqrt(w1(t) * w2(t)), label=f"mean({w1.label},{w2.label})",
                  kind="geomean", params={"a": w1.to_json(), "b": w2.to_json()},
                  breakpoints=bps, T_cap=min(w1.T_cap, w2.T_cap))


def weight_sum(w1: Weight, w2: Weight) -> Weight:
    bps = tuple(sorted(w1.breakpoints + w2.breakpoints, key=lambda b: b.t))
    return Weight(lambda t: w1(t) + w2(t), label=f"sum({w1.label},{w2.label})",
                  kind="sum", params={"a": w1.to_json(), "b": w2.to_json()},
                  breakpoints=bps, T_cap=min(w1.T_cap, w2.T_cap))


def from_json_composite(d: dict) -> Weight:
    kind, p = d.get("kind"), d.get("params", {})
    if kind == "regularized":
        return regularize(from_json(p["base"]))
    if kind == "envelope":
        base = from_json(p["base"])
        v = np.array(p["vertices"], dtype=float)
        return Weight(_hull_func(v[:, 0], v[:, 1]), label=d.get("label", "envelope"),
                      kind="envelope", params=p, T_cap=base.T_cap)
    if kind == "sup":
        return pointwise_sup(from_json(p["a"]), from_json(p["b"]))
    if kind == "geomean":
        return geometric_mean(from_json(p["a"]), from_json(p["b"]))
    if kind == "sum":
        return weight_sum(from_json(p["a"]), from_json(p["b"]))
    if kind == "piecewise":
        bases = [from_json(b) for b in p["bases"]]
        extra = {k: v for k, v in p.items() if k not in ("bases", "pieces")}
        return piecewise(bases, p["pieces"], d.get("label", "piecewise"),
                         float(d.get("T_cap", DEFAULT_T_CAP)), extra)
    raise WeightError(f"unknown weight kind {kind!r}")


# -- stronger and weaker weights --------------------------------------------

def _tails(w: Weight) -> tuple[np.ndarray, float]:
    """tail[j] = int_{2^j}^oo w/t^2 dt for j = 0 .. jmax (last entry is the bound)."""
    jmax = int(math.floor(math.log2(w.T_cap)))
    inc = dyadic_increments(w, jmax)
    cert = integral_certificate(w)
    if not math.isfinite(cert["tail"]):
        raise WeightError(f"{w.label}: integral condition not certified")
    tails = np.concatenate([np.cumsum(inc[::-1])[::-1], [0.0]]) + cert["tail"]
    return tails, float(tails[0])


def _warn_partial(kind: str, w: Weight, placed: int, n_max: int) -> None:
    warnings.warn(f"{kind}({w.label}): only {placed} of {n_max} breakpoints fit below "
                  f"T_cap={w.T_cap:g}", PartialConstructionWarning, stacklevel=3)


def build_stronger(w: Weight, n_max: int = MAX_BREAKPOINTS) -> Weight:
    """A weight w' with w << w' and w'(T_n) = n w(T_n) at the breakpoints.

    T_n are powers of two found by doubling from the previous breakpoint until
    the tail int_{T_n}^oo w/t^2 is at most A/2^n and the affine bridge to the
    next breakpoint keeps w'(t)/t nonincreasing.
    """
    tails, A = _tails(w)
    jmax = len(tails) - 1
    Ts: list[float] = []
    j = 0
    n = 1
    while n <= n_max:
        found = False
        while j <= jmax:
            T = 2.0 ** j
            ok = tails[j] <= A / 2 ** n
            if ok and Ts:
                Tp = Ts[-1]
                ok = n * w(T) / T <= (n - 1) * w(Tp) / Tp
            if ok:
                found = True
                break
            j += 1
        if not found:
            break
        Ts.append(2.0 ** j)
        j += 1
        n += 1
    if len(Ts) < n_max:
        _warn_partial("stronger", w, len(Ts), n_max)
    if not Ts:
        raise WeightError(f"stronger({w.label}): no breakpoint below T_cap")
    N = len(Ts)
    pieces = [{"start": 0.0, "base": 0, "scale": 1.0, "affine": None}]
    for i, T in enumerate(Ts):
        n = i + 1
        aff = None
        if i + 1 < N:
            aff = [T, n * w(T), Ts[i + 1], (n + 1) * w(Ts[i + 1])]
        pieces.append({"start": T, "base": 0, "scale": float(n), "affine": aff, "n": n})
    return piecewise([w], pieces, f"stronger({w.label})", w.T_cap,
                     {"partial": N < n_max, "certified_range": Ts[-1]})


def build_weaker(w: Weight, n_max: int = MAX_BREAKPOINTS, min_T=None,
                 label: str | None = None) -> Weight:
    """A weight w'' with w'' << w and w''(T_n) = w(T_n)/n at the breakpoints.

    ``min_T(n)`` optionally imposes an extra lower bound on T_n.
    """
    g = audit_grid(w.T_cap)
    g = g[g >= 2]
    ratio = w.evaluate_checked(g) / np.log1p(g)
    # suffix minimum: ratio >= n^2 for every grid point beyond t
    suffix_min = np.minimum.accumulate(ratio[::-1])[::-1]
    jmax = int(math.floor(math.log2(w.T_cap)))
    Ts: list[float] = []
    j = 0
    n = 1
    while n <= n_max:
        found = False
        while j <= jmax:
            T = 2.0 ** j
            k = np.searchsorted(g, T)
            ok = k < len(g) and suffix_min[k] >= n * n
            if ok and min_T is not None:
                ok = T >= min_T(n)
            if ok and Ts:
                Tp = Ts[-1]
                ok = (w(T) / n >= w(Tp) / (n - 1)
                      and w(T) / (n * T) <= w(Tp) / ((n - 1) * Tp))
            if ok:
                found = True
                break
            j += 1
        if not found:
            break
        Ts.append(2.0 ** j)
        j += 1
        n += 1
    if len(Ts) < n_max:
        _warn_partial("weaker", w, len(Ts), n_max)
    if not Ts:
        raise WeightError(f"weaker({w.label}): no breakpoint below T_cap")
    N = len(Ts)
    pieces = [{"start": 0.0, "base": 0, "scale": 1.0, "affine": None}]
    for i, T in enumerate(Ts):
        n = i + 1
        if i + 1 < N:
            aff = [T, w(T) / n, Ts[i + 1], w(Ts[i + 1]) / (n + 1)]
            pieces.append({"start": T, "base": 0, "scale": 1.0 / (n + 1), "affine": aff, "n": n})
        else:
            pieces.append({"start": T, "base": 0, "scale": 1.0 / n, "affine": None, "n": n})
    return piecewise([w], pieces, label or f"weaker({w.label})", w.T_cap,
                     {"partial": N < n_max, "certified_range": Ts[-1]})


def combine(w1: Weight, w2: Weight, mode: str = "geometric-mean") -> Weight:
    """Geometric mean (requires w1 << w2) or join = stronger(sup(w1, w2))."""
    if mode in ("geometric-mean", "mean"):
        v = compare(w1, w2, "strong")
        if v.relation != "strongly-less":
            raise WeightError(f"geometric mean needs {w1.label} << {w2.label} "
                              f"(compare gave {v.relation})")
        return geometric_mean(w1, w2)
    if mode == "join":
        out = build_stronger(pointwise_sup(w1, w2))
        return Weight(out.func, label=f"join({w1.label},{w2.label})", kind=out.kind,
                      params=out.params, breakpoints=out.breakpoints, T_cap=out.T_cap)
    raise ValueError(f"unknown combine mode {mode!r}")


def dominate_sequence(ws: list[Weight], w: Weight) -> Weight:
    """A weight w'' with ws[n] << w'' << w for every listed n.

    The list is extended by the geometric mean of its last member with w.
    On [T_n, T_{n+1}) the value is sup(ws[n], A_n), where the affine bridge
    A_n joins ws[n](T_n) to ws[n+1](T_{n+1}).
    """
    if not ws:
        raise WeightError("dominate_sequence needs at least one weight")
    if len(ws) > MAX_SEQUENCE:
        raise WeightError(f"sequence longer than {MAX_SEQUENCE}")
    chain = list(ws) + [w]
    for i in range(len(chain) - 1):
        v = compare(chain[i], chain[i + 1], "strong")
        if v.relation != "strongly-less":
            raise WeightError(f"ordering fails at index {i}: {chain[i].label} << "
                              f"{chain[i + 1].label} not established ({v.relation})")
    ext = list(ws) + [geometric_mean(ws[-1], w)]
    T_cap = min(x.T_cap for x in ext + [w])
    g = audit_grid(T_cap)
    wg = w.evaluate_checked(g)
    vals = [x.evaluate_checked(g) for x in ext]
    jmax = int(math.floor(math.log2(T_cap)))
    Ts: list[float] = []
    j = 0
    M = len(ext)
    for n in range(1, M + 1):
        cur = vals[n - 1]
        nxt = vals[n] if n < M else cur
        good = (cur <= nxt) & (nxt <= wg / (n + 1))
        # first grid point from which the condition holds on the rest of the grid
        bad_idx = np.nonzero(~good)[0]
        if not bad_idx.size:
            start = 0.0
        elif bad_idx[-1] + 1 < len(g):
            start = g[bad_idx[-1] + 1]
        else:
            start = math.inf
        found = False
        while j <= jmax:
            T = 2.0 ** j
            ok = T >= start
            if ok and Ts:
                Tp = Ts[-1]
                ok = (ext[n - 1](T) >= ext[n - 2](Tp)
                      and ext[n - 1](T) / T <= ext[n - 2](Tp) / Tp)
            if ok:
                found = True
                break
            j += 1
        if not found:
            raise WeightError(f"dominate_sequence: breakpoint {n} does not fit below T_cap")
        Ts.append(2.0 ** j)
        j += 1
    pieces = [{"start": 0.0, "base": 0, "scale": 1.0, "affine": None}]
    for i, T in enumerate(Ts):
        n = i + 1
        aff = None
        if n < M:
            aff = [T, ext[n - 1](T), Ts[i + 1], ext[n](Ts[i + 1])]
        pieces.append({"start": T, "base": n - 1, "scale": 1.0, "affine": aff, "n": n})
    # before T_1 follow ws[0]; beyond the last breakpoint follow the appended mean
    return piecewise(ext, pieces, f"dominate([{','.join(x.label for x in ws)}],{w.label})",
                     T_cap, {"certified_range": Ts[-1]})


# -- small-o witnesses ------------------------------------------------------

@dataclass
class Witness:
    direction: str
    weight: Weight | None
    l: float | None = None
    certificate: dict = field(default_factory=dict)


GROWTH_PROBES = (1.0, 0.5, 0.25, 0.125)
DECAY_PROBES = tuple(2.0 ** j for j in range(-6, 7))


def _log_trend(values: np.ndarray) -> str:
    """Trend of a log-ratio tail: 'to-minus-inf', 'diverging', or 'flat'."""
    d = np.diff(values)
    if np.all(d < 0) and values[-1] < math.log(TREND_THRESHOLD):
        return "to-minus-inf"
    if np.all(d > 0):
        return "diverging"
    return "flat"


def witness_small_o(log_g, w: Weight, direction: str = "growth",
                    n_max: int = MAX_BREAKPOINTS) -> Witness:
    """Constructive small-o witnesses against e^{k w}.

    ``log_g`` is the logarithm of the positive sampled function, so that
    growth like e^{t^(1/4)} is handled without overflow.

    growth: needs log g - k w -> -inf for k in GROWTH_PROBES and returns
    w'' << w with g = o(e^{w''}). decay: finds the largest probed l with
    g e^{l w} -> 0 and verifies g = o(e^{-w'}) for w' = build_weaker(w).
    """
    g = audit_grid(w.T_cap)
    tail = g[-TREND_WINDOW:]
    lg_tail = np.asarray(log_g(tail), dtype=float)
    wt = w.evaluate_checked(tail)
    if direction == "growth":
        trends = {k: _log_trend(lg_tail - k * wt) for k in GROWTH_PROBES}
        failing = [k for k, v in trends.items() if v != "to-minus-inf"]
        if failing:
            diverging = [k for k in failing if trends[k] == "diverging"]
            k_fail = diverging[0] if diverging else failing[0]
            raise WeightError(f"precondition fails at k = {k_fail:g}: "
                              f"g is not o(e^(k w)) on the audit grid", )
        lg_all = np.asarray(log_g(g), dtype=float)
        w_all = w.evaluate_checked(g)

        def min_T(n):
            ok = lg_all < -math.log(n) + w_all / n
            bad = np.nonzero(~ok)[0]
            if not bad.size:
                return 0.0
            if bad[-1] + 1 >= len(g):
                return math.inf
            return float(g[bad[-1] + 1])

        wit = build_weaker(w, n_max=n_max, min_T=min_T, label=f"witness({w.label})")
        diff = lg_tail - wit.evaluate_checked(tail)
        cert = {"probes": {str(k): v for k, v in trends.items()},
                "log_ratio_tail": diff.tolist(),
                "decreasing": bool(np.all(np.diff(diff) < 0))}
        return Witness("growth", wit, certificate=cert)
    if direction == "decay":
        ok = [l for l in DECAY_PROBES if _log_trend(lg_tail + l * wt) == "to-minus-inf"]
        if not ok:
            raise WeightError("no probed l gives g e^(l w) -> 0 on the audit grid")
        l = max(ok)
        wk = build_weaker(w, n_max=n_max)
        diff = lg_tail + wk.evaluate_checked(tail)
        cert = {"working_l": ok, "log_ratio_tail": diff.tolist(),
                "verified": _log_trend(diff) == "to-minus-inf"}
        return Witness("decay", wk, l=l, certificate=cert)
    raise ValueError(f"unknown direction {direction!r}")
