"""Embedding of distributions by mollifier convolution and association tests.

Pairing differences <g_eps - T, rho> of an embedded net are evaluated in
frequency space as (1/pi) Re int_0^inf T^(xi) (phi^(eps xi) - 1) conj(rho^(xi)),
which has no cancellation. rho^ is only known above the round-off floor, so
each test function gets its own eps range: the points where the difference is
still resolvable. Fits use the tail envelope sup_{eps' <= eps} |D(eps')|,
since gevrey spectra change sign and |D| has isolated zeros.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.interpolate import CubicSpline
from scipy.optimize import brentq

from ._quad import log_integral, trapezoid_weights
from .algebra import (
    CASES,
    INDEX_GRID,
    REGULAR_TOL,
    GridFactor,
    Net,
    Term,
    canonical_case,
    classify_net,
    classify_regular,
    derivative_factor,
    combine_nets,
    log_l2_sequence,
    log_seminorm_sequence,
    mollifier_net,
    mollifier_factor,
    reparametrize,
)
from .scales import (
    DELTA,
    K_MAX,
    WINDOW,
    EpsSchedule,
    ExponentFit,
    FitError,
    classify_constants,
    fit_exponent,
    make_scale,
    roumieu_family,
)
from .spectral import (
    GridFunction,
    make_bump,
    make_mollifier,
    smooth_step,
    test_membership,
)
from .weights import Weight, compare, make_weight

RESOLVE_FLOOR = 1e-12
ASSOC_STEP = 0.25
ASSOC_K_MIN = 1.0
MIN_POINTS = 8
SIMPLE_RATIO = 0.05
HEAVISIDE_PLATEAU = (2.5, 3.5)


class AssociationError(ValueError):
    pass


# -- distributions ------------------------------------------------------------

@dataclass
class DistributionSpec:
    """delta, delta-derivative (order m <= 4), heaviside, or a density grid function."""
    kind: str
    m: int = 0
    density: GridFunction | None = None
    label: str = ""

    def __post_init__(self):
        if self.kind not in ("delta", "delta-derivative", "heaviside", "density"):
            raise AssociationError(f"unknown distribution kind {self.kind!r}")
        if self.kind == "delta-derivative" and not 0 <= self.m <= 4:
            raise AssociationError("derivative order must lie in 0 .. 4")
        if self.kind == "density" and self.density is None:
            raise AssociationError("density distribution needs a grid function")
        if not self.label:
            self.label = {"delta": "delta", "heaviside": "H",
                          "delta-derivative": f"delta^({self.m})"}.get(
                              self.kind, f"density[{getattr(self.density, 'label', '')}]")
        self._factor = GridFactor(self.density) if self.kind == "density" else None

    @property
    def support(self) -> tuple:
        if self.kind == "density":
            return tuple(self.density.support)
        if self.kind == "heaviside":
            return (0.0, math.inf)
        return (0.0, 0.0)

    def hat(self, xi) -> np.ndarray:
        """T^ on xi > 0 (heaviside: 1/(i xi), valid where phi^ - 1 vanishes near 0)."""
        xi = np.asarray(xi, dtype=float)
        if self.kind == "delta":
            return np.ones(xi.shape, dtype=complex)
        if self.kind == "delta-derivative":
            return (1j * xi) ** self.m + 0j
        if self.kind == "heaviside":
            with np.errstate(divide="ignore", invalid="ignore"):
                return np.where(xi > 0, 1.0 / (1j * np.where(xi > 0, xi, 1.0)), 0.0)
        return self._factor(xi, None)

    def pair(self, rho: GridFunction) -> float:
        """Exact action <T, rho> for a real grid test function."""
        r = rho.samples.real
        x = rho.x
        if self.kind == "delta":
            return self.delta_value(rho)["value"]
        if self.kind == "delta-derivative":
            if self.m == 0:
                return self.delta_value(rho)["value"]
            return (-1) ** self.m * _spectral_derivative_at_zero(rho, self.m)
        if self.kind == "heaviside":
            wts = np.where(x > 0, rho.h, np.where(x == 0, rho.h / 2, 0.0))
            return float(np.dot(wts, r))
        f = self.density
        if (f.L, f.N) != (rho.L, rho.N):
            raise AssociationError("density and test function live on different grids")
        return float(rho.h * np.dot(f.samples.real, r))

    @staticmethod
    def delta_value(rho: GridFunction) -> dict:
        """rho(0) by cubic interpolation, with its deviation from the spectral value."""
        x, r = rho.x, rho.samples.real
        i = int(np.searchsorted(x, 0.0))
        sl = slice(max(i - 4, 0), min(i + 4, x.size))
        val = float(CubicSpline(x[sl], r[sl])(0.0))
        exact = _spectral_derivative_at_zero(rho, 0)
        return {"value": val, "interpolation_error": abs(val - exact)}

    def to_json(self) -> dict:
        d = {"kind": self.kind, "label": self.label}
        if self.kind == "delta-derivative":
            d["m"] = self.m
        return d


def _spectral_derivative_at_zero(rho: GridFunction, m: int) -> float:
    g = GridFactor(rho)
    xi = g.nodes()
    vals = (1j * xi) ** m * g(xi, None)
    return float(np.real(np.dot(trapezoid_weights(xi), vals)) / math.pi)


def make_distribution(spec: str, **kw) -> DistributionSpec:
    """Catalog lookup: 'delta', 'delta-derivative(m)', 'heaviside', 'density'
    (gevrey bump by default)."""
    s = spec.strip().lower()
    if s.startswith("delta-derivative") or s.startswith("delta'"):
        m = int(s[s.index("(") + 1:s.index(")")]) if "(" in s else 1
        return DistributionSpec("delta-derivative", m=m)
    if s == "delta":
        return DistributionSpec("delta")
    if s in ("heaviside", "h"):
        return DistributionSpec("heaviside")
    if s.startswith("density"):
        f = kw.get("density") or make_bump("gevrey", **kw.get("bump", {}))
        return DistributionSpec("density", density=f)
    raise AssociationError(f"unknown distribution {spec!r}")


def heaviside_cutoff(L: float = 16.0, N: int = 2 ** 14) -> GridFunction:
    """H times a smooth cut-off equal to 1 on [0, 2.5] and 0 beyond 3.5."""
    a, b = HEAVISIDE_PLATEAU

    def f(x):
        return np.where(x >= 0, smooth_step((b - x) / (b - a)), 0.0)
    return GridFunction.from_callable(f, (0.0, b), L, N, "H*psi")


# -- embedding ----------------------------------------------------------------

def embed(T: DistributionSpec, w: Weight, check: bool = True, inner: float = 1.0,
          outer: float = 2.0) -> Net:
    """The net (T * phi_eps), phi_eps(x) = phi(x/eps)/eps, held as T^(xi) phi^(eps xi)."""
    moll = mollifier_factor(None, inner, outer)
    if T.kind == "delta":
        factors = [moll]
        support = (-1.0, 1.0)
    elif T.kind == "delta-derivative":
        factors = [derivative_factor(T.m), moll] if T.m else [moll]
        support = (-1.0, 1.0)
    elif T.kind == "heaviside":
        g = GridFactor(heaviside_cutoff())
        factors = [g, moll]
        support = (-1.0, HEAVISIDE_PLATEAU[1] + 1)
    else:
        factors = [T._factor, moll]
        a, b = T.support
        support = (a - 1, b + 1)
    net = Net([Term(factors=factors)], f"{T.label}*phi_eps", support=support,
              meta={"dist": T, "eta": None, "mollifier": (inner, outer)})
    if check:
        net.meta["moderate"] = {c: classify_net(net, w, c).moderate for c in CASES}
    return net


def heaviside_embedding_value(x_over_eps: float, w: Weight | None = None) -> dict:
    """(H * phi_eps)(x) = int_{-inf}^{x/eps} phi; independent of eps."""
    m = make_mollifier(w)
    phi = m.phi
    cum = phi.h * np.cumsum(phi.samples.real)
    val = float(np.interp(x_over_eps, phi.x, cum))
    return {"value": val, "x_over_eps": x_over_eps,
            "tail_mass": float(phi.h * np.sum(np.abs(phi.samples.real[phi.x < x_over_eps])))}


def density_l2_error(net: Net, schedule: EpsSchedule | None = None) -> dict:
    """log ||f * phi_eps - f||_2 per eps, for an embedded density."""
    T = net.meta.get("dist")
    if T is None or T.kind != "density":
        raise AssociationError("L2 convergence applies to embedded densities")
    g = T._factor
    xi = g.nodes()
    inner, outer = net.meta["mollifier"]
    fh = np.abs(g(xi, None))
    sched = schedule or _resolvable_schedule(g.band_limit)
    out = []
    for e in sched.eps:
        d = np.abs(_moll_minus_one(e * xi, inner, outer)) * fh
        with np.errstate(divide="ignore"):
            v = 0.5 * (log_integral(2 * np.log(d), trapezoid_weights(xi)) + math.log(2)
                       - math.log(2 * math.pi))
        out.append(v)
    return {"schedule": sched, "log_l2": np.array(out)}


def _moll_minus_one(s, inner, outer):
    from .spectral import mollifier_hat
    return mollifier_hat(s, inner, outer) - 1.0


# -- slowing down -------------------------------------------------------------

def slowing_map(w: Weight, w1: Weight) -> Callable:
    """eta with w1(1/eps) = w(1/eta(eps)); closed form for two power weights."""
    if w1 is w or (w1.kind == w.kind and w1.params == w.params and w1.kind != "callable"):
        return lambda e: e
    if w.kind == "power" and w1.kind == "power":
        r = w1.params["a"] / w.params["a"]
        return lambda e: e ** r

    def eta(e):
        target = float(w1(1.0 / e))
        if target <= float(w(1.0)):
            return 1.0
        hi = math.log(1.0 / e)
        lo = 0.0
        if float(w(math.exp(hi))) < target:
            raise AssociationError(f"{w1.label} exceeds {w.label} at 1/eps = {1 / e:g}")
        u = brentq(lambda u: float(w(math.exp(u))) - target, lo, hi, xtol=1e-12)
        return math.exp(-u)
    return eta


def slowdown(net: Net, w: Weight, w1: Weight, check: bool = True) -> Net:
    """eps -> g_{eta(eps)} with w1(1/eps) = w(1/eta(eps))."""
    same = w1 is w or (w1.kind == w.kind and w1.params == w.params and w1.kind != "callable")
    if check and not same:
        rel = compare(w1, w, "strong").relation
        if rel != "strongly-less":
            raise AssociationError(f"slowdown needs {w1.label} << {w.label} (got {rel})")
    eta = slowing_map(w, w1)
    out = reparametrize(net, eta, f"{net.label}(eta)")
    inner = net.meta.get("eta")
    out.meta["eta"] = eta if inner is None else (lambda e: inner(eta(e)))
    out.meta["slowed_by"] = (w.label, w1.label)
    return out


# -- test functions -----------------------------------------------------------

TEST_SHAPES = ((0.0, 1.0), (0.0, 0.5), (0.3, 0.5), (-0.5, 0.8), (0.2, 1.2))


@dataclass
class TestFunction:
    """Certified test function; ``sigma`` (a weight >> w in which its spectrum
    decays) certifies Beurling-negligible pairings."""
    rho: GridFunction
    factor: GridFactor
    certified: dict
    sigma: Weight | None = None

    @property
    def label(self) -> str:
        return self.rho.label


TestFunction.__test__ = False


def default_test_set(w: Weight, case: str = "roumieu-inductive") -> list[TestFunction]:
    """Five gevrey bumps within K = [-2, 2], certified members of the case's class.

    Beurling uses p = 2 (decay faster than every e^{-l w}); Roumieu p = 1.
    """
    case = canonical_case(case)
    p = 2.0 if case == "beurling" else 1.0
    out = []
    for c, r in TEST_SHAPES:
        f = make_bump("gevrey", center=c, radius=r, p=p)
        t = make_test_function(f, w, case, p)
        if t.certified["member"]:
            out.append(t)
    return out


def _certify(f: GridFunction, w: Weight, case: str) -> dict:
    if case == "beurling":
        v = test_membership(f, w, "beurling")
        return {"member": bool(v.member), "beurling": v.member}
    a = test_membership(f, w, "roumieu").member
    b = test_membership(f, w, "roumieu-projective").member
    return {"member": bool(a and b), "inductive": a, "projective": b}


def make_test_function(f: GridFunction, w: Weight, case: str,
                       gevrey_order: float | None = None) -> TestFunction:
    """Certify f; a gevrey bump of order p has spectrum ~ e^{-c xi^{p/(p+1)}}."""
    sigma = None
    if gevrey_order is not None:
        cand = make_weight(f"power({gevrey_order / (gevrey_order + 1):.12g})")
        if compare(w, cand, "strong").relation == "strongly-less":
            sigma = cand
    return TestFunction(f, GridFactor(f), _certify(f, w, canonical_case(case)), sigma)


# -- pairing differences ------------------------------------------------------

def _resolvable_schedule(band: float, k_min: float = ASSOC_K_MIN,
                         step: float = ASSOC_STEP) -> EpsSchedule:
    k_hi = math.floor(math.log2(band / 2) / step) * step
    if k_hi - k_min < step:
        raise AssociationError(f"test spectrum band {band:g} too narrow")
    return EpsSchedule(k_min, k_hi, step)


def pairing(net: Net, rho: TestFunction, eps: float) -> float:
    """<g_eps, rho> by Parseval on the test function's FFT nodes."""
    xi = rho.factor.nodes()
    vals = net.hat(xi, eps) * np.conj(rho.factor(xi, None))
    return float(np.real(np.dot(trapezoid_weights(xi), vals)) / math.pi)


def pairing_differences(net: Net, T: DistributionSpec, rho: TestFunction,
                        schedule: EpsSchedule) -> tuple[np.ndarray, np.ndarray | None]:
    """D(eps) = <g_eps - T, rho> on the schedule, and for embedded nets the
    majorant B(eps) = |<src - T, rho>| + (1/pi) int |src^ (phi^(eps xi) - 1) rho^|."""
    src = net.meta.get("dist")
    eta = net.meta.get("eta") or (lambda e: e)
    d = np.empty(len(schedule))
    if src is None:
        t = T.pair(rho.rho)
        for i, e in enumerate(schedule.eps):
            d[i] = pairing(net, rho, e) - t
        return d, None
    inner, outer = net.meta["mollifier"]
    xi = rho.factor.nodes()
    base = src.hat(xi) * np.conj(rho.factor(xi, None))
    wts = trapezoid_weights(xi)
    offset = 0.0 if src is T else src.pair(rho.rho) - T.pair(rho.rho)
    b = np.empty(len(schedule))
    for i, e in enumerate(schedule.eps):
        m = _moll_minus_one(eta(e) * xi, inner, outer) * base
        d[i] = float(np.real(np.dot(wts, m)) / math.pi) + offset
        b[i] = float(np.dot(wts, np.abs(m)) / math.pi) + abs(offset)
    return d, b


def _tail_envelope(d: np.ndarray) -> np.ndarray:
    return np.maximum.accumulate(np.abs(d)[::-1])[::-1]


@dataclass
class PairingTrace:
    test: str
    schedule: EpsSchedule
    diffs: np.ndarray
    envelope: np.ndarray
    resolvable: int
    reference: float
    majorant: bool = False

    def to_json(self) -> dict:
        ks = np.asarray(self.schedule.ks, dtype=float)
        return {"test": self.test, "schedule": self.schedule.to_json(),
                "resolvable_points": self.resolvable, "reference": self.reference,
                "magnitude": "majorant" if self.majorant else "tail envelope",
                "rows": [[float(k), float(d), float(v)] for k, d, v in
                         zip(ks, self.diffs, self.envelope)]}


def _eta_schedule(net: Net, band: float) -> EpsSchedule:
    """Schedule whose eta-images cover the resolvable range of the base schedule."""
    base = _resolvable_schedule(band)
    eta = net.meta.get("eta")
    if eta is None:
        return base
    # invert eta on the endpoints: eta is increasing with eta(eps) >= eps
    def pull(k):
        target = 2.0 ** -k
        if abs(eta(target) - target) <= 1e-15 * target:
            return k
        return brentq(lambda kk: math.log2(eta(2.0 ** -kk)) + k, k, 64 * k + 64, xtol=1e-10)
    k0, k1 = pull(base.k_min), pull(base.k_max)
    n = len(base)
    return EpsSchedule(k0, k1, (k1 - k0) / (n - 1))


def pairing_trace(net: Net, T: DistributionSpec, rho: TestFunction,
                  floor: float = RESOLVE_FLOOR) -> PairingTrace:
    """Pairing differences on the resolvable range of rho (prefix above the floor).

    ``envelope`` is the fitted magnitude: the majorant for embedded nets
    (same exponential rate as |D|, free of sign changes), else the tail
    envelope sup_{eps' <= eps} |D(eps')|.
    """
    sched = _eta_schedule(net, rho.factor.band_limit)
    d, b = pairing_differences(net, T, rho, sched)
    mag = _tail_envelope(d) if b is None else b
    ref = float(np.max(np.abs(rho.factor.values))) * max(1.0, abs(T.pair(rho.rho)))
    bad = mag <= floor * ref
    n = int(np.argmax(bad)) if bad.any() else d.size
    return PairingTrace(rho.label, sched, d, mag[:n], n, ref, b is not None)


# -- association ---------------------------------------------------------------

def _fit_trace(tr: PairingTrace, x_fn: Callable, delta: float, window: int | None = WINDOW
               ) -> ExponentFit:
    n = tr.resolvable
    if n == 0 or np.all(tr.envelope == 0):
        sub = EpsSchedule(tr.schedule.k_min, tr.schedule.k_min + tr.schedule.step,
                          tr.schedule.step)
        return fit_exponent(log_values=np.full(2, -math.inf), x=np.zeros(2), schedule=sub,
                            window=2, delta=delta)
    ks = np.asarray(tr.schedule.ks, dtype=float)[:n]
    sub = EpsSchedule(float(ks[0]), float(ks[-1]), tr.schedule.step)
    with np.errstate(divide="ignore"):
        y = np.log(tr.envelope)
    x = x_fn(sub.inv)
    win = n - n % 2 if window is None else min(window, n - n % 2)
    if np.any(y == -math.inf):
        raise FitError("envelope reaches zero inside the resolvable range")
    return fit_exponent(log_values=y, x=x, schedule=sub, window=win, delta=delta)


@dataclass
class AssociationReport:
    net: str
    dist: str
    case: str
    verdict: str
    simple: bool
    strong: bool
    strict: bool
    witness: object = None
    per_test: list = field(default_factory=list)
    traces: list = field(default_factory=list, repr=False)
    flags: list = field(default_factory=list)

    @property
    def ordering_ok(self) -> bool:
        return (not self.strict or self.strong) and (not self.strong or self.simple)

    def to_json(self) -> dict:
        return {"net": self.net, "dist": self.dist, "case": self.case, "verdict": self.verdict,
                "simple": self.simple, "strong": self.strong, "strict": self.strict,
                "witness": self.witness, "ordering_ok": self.ordering_ok,
                "per_test": self.per_test, "flags": self.flags,
                "traces": [t.to_json() for t in self.traces]}


def _s(fit: ExponentFit) -> float:
    return fit.asymptotic_slope


def _fit_json(fit: ExponentFit) -> dict:
    return fit.to_json()


def associate(net: Net, T: DistributionSpec, w: Weight, case: str = "roumieu-inductive",
              tests: list[TestFunction] | None = None, delta: float = DELTA,
              k_max: float = K_MAX) -> AssociationReport:
    """Simple / strong / strict association of the net with T."""
    case = canonical_case(case)
    tests = default_test_set(w, case) if tests is None else tests
    tests = [t for t in tests if t.certified.get("member")]
    if not tests:
        raise AssociationError("no certified test function in the test set")
    fam = roumieu_family(w)
    rows, traces, flags = [], [], []
    simple = True
    for rho in tests:
        tr = pairing_trace(net, T, rho)
        traces.append(tr)
        row = {"test": rho.label, "resolvable_points": tr.resolvable}
        env = tr.envelope
        if env.size == 0 or env[0] == 0:
            # below round-off from the first point on: numerically zero
            row.update(simple=True, zero=True, fit_w=None, s_w=-math.inf, s_sigma=-math.inf)
            row["s_family"] = {v.label: -math.inf for v in fam}
            rows.append(row)
            continue
        if tr.resolvable < MIN_POINTS:
            flags.append(f"{rho.label}: only {tr.resolvable} resolvable points")
            row.update(simple=False, fit_w=None, s_w=math.nan, s_sigma=math.nan)
            row["s_family"] = {v.label: math.nan for v in fam}
            rows.append(row)
            continue
        tends = bool(env[-1] <= SIMPLE_RATIO * env[0])
        row["simple"] = tends
        simple &= tends
        try:
            fw = _fit_trace(tr, w, delta)
            row["fit_w"] = _fit_json(fw)
            row["s_w"] = _s(fw)
            fams = {}
            for v in fam:
                fv = _fit_trace(tr, v, delta)
                fams[v.label] = _s(fv)
                if fv.unreliable:
                    flags.append(f"unreliable fit for {rho.label} against {v.label}")
            row["s_family"] = fams
            row["s_sigma"] = math.nan
            if rho.sigma is not None:
                fs = _fit_trace(tr, rho.sigma, delta)
                row["sigma"] = rho.sigma.label
                row["s_sigma"] = _s(fs)
            if fw.unreliable:
                flags.append(f"unreliable fit for {rho.label} against {w.label}")
        except FitError as exc:
            flags.append(f"{rho.label}: {exc}")
            row.update(fit_w=None, s_w=math.nan, s_sigma=math.nan)
            row["s_family"] = {v.label: math.nan for v in fam}
        rows.append(row)
    sw = [r["s_w"] for r in rows]
    # strong: one decay rate for the whole test set
    if case == "beurling":
        bs = [b for b in INDEX_GRID if all(s <= -b - delta for s in sw)]
        witness = max(bs) if bs else None
        # negligible in the beurling ring: slope below -k_max against w, or any
        # negative slope against a weight sigma >> w
        strict_each = [r["s_w"] <= -k_max - delta or r.get("s_sigma", math.nan) <= -delta
                       for r in rows]
    else:
        ok = [v for v in fam if all(r["s_family"][v.label] <= -1 - delta for r in rows)]
        witness = ok[-1].label if ok else None
        if case == "roumieu-inductive":
            strict_each = [s <= -delta for s in sw]
        else:
            strict_each = [all(s <= -1 - delta for s in r["s_family"].values()) for r in rows]
    strong = witness is not None
    strict = all(strict_each)
    for r, st in zip(rows, strict_each):
        r["strict"] = bool(st)
        r["s_w"] = _num(r["s_w"])
        r["s_family"] = {k: _num(v) for k, v in r["s_family"].items()}
        if "s_sigma" in r:
            r["s_sigma"] = _num(r["s_sigma"])
    verdict = ("strict" if strict and strong and simple else
               "strong" if strong and simple else "simple" if simple else "none")
    if any(math.isnan(s) for s in sw):
        verdict = "inconclusive"
    return AssociationReport(net.label, T.label, case, verdict, bool(simple), bool(strong),
                             bool(strict), witness, rows, traces, flags)


def _num(v: float):
    return v if math.isfinite(v) else str(v)


# -- comparison experiments ------------------------------------------------------

CERTIFIED = "certified"
NOT_MET = "hypotheses not met"
FAILED = "conclusion failed"
DELTA_XI_MAX = 1e6
EXPERIMENTS = ("beurling-7.1", "roumieu-counterexample-7.2", "roumieu-strict-7.3",
               "r-strong-7.5")
_EXPERIMENT_ALIASES = {"7.1": "beurling-7.1", "7.2": "roumieu-counterexample-7.2",
                       "7.3": "roumieu-strict-7.3", "7.5": "r-strong-7.5"}


@dataclass
class ExperimentReport:
    """Hypotheses, conclusion and status of one experiment.

    status is 'certified' only when every hypothesis and the conclusion hold;
    a failed hypothesis stops the run before any conclusion is drawn.
    """
    name: str
    status: str
    hypotheses: dict
    conclusion: dict | None
    params: dict
    flags: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.status == CERTIFIED

    def to_json(self) -> dict:
        return {"name": self.name, "status": self.status, "passed": self.passed,
                "hypotheses": self.hypotheses, "conclusion": self.conclusion,
                "params": self.params, "flags": list(self.flags)}


def weight_inverse(w: Weight, y: float) -> float:
    """Smallest t >= 1 with w(t) = y, by bisection in log t."""
    if y <= float(w(1.0)):
        return 1.0
    if w.kind == "power":
        return float(y ** (1.0 / w.params["a"]))
    hi = 1.0
    while float(w(math.exp(hi))) < y:
        hi *= 2
        if hi > 1e4:
            raise AssociationError(f"{w.label} never reaches {y:g}")
    return math.exp(brentq(lambda u: float(w(math.exp(u))) - y, 0.0, hi, xtol=1e-12))


def _decay_range(T: DistributionSpec, n: int = 512) -> tuple[np.ndarray, bool]:
    """xi nodes where T^ is resolved; the flag says whether a tail model exists."""
    if T.kind == "density":
        top = T._factor.band_limit
        return np.geomspace(1.0, top, n), T._factor.tail is not None
    return np.geomspace(1.0, DELTA_XI_MAX, n), False


def decay_bound(T: DistributionSpec, log_mult: Callable, label: str = "") -> dict:
    """Is sup e^{m(xi)} |T^(xi)| finite? Checked on the resolved range.

    The sup of log|T^| + m over the upper half of the range is compared with
    the sup over the lower half: a bounded product attains its sup early.
    For densities the fitted tail model is checked out to 1e12 as well.
    """
    xi, has_tail = _decay_range(T)
    with np.errstate(divide="ignore"):
        g = np.log(np.abs(T.hat(xi))) + log_mult(xi)
    half = xi.size // 2
    lower, upper = float(np.max(g[:half])), float(np.max(g[half:]))
    bounded = upper <= lower + 1e-9
    out = {"multiplier": label, "xi_range": [float(xi[0]), float(xi[-1])],
           "sup_lower_half": lower, "sup_upper_half": upper, "bounded": bool(bounded)}
    if has_tail:
        fac = T._factor
        far = np.geomspace(fac.band_limit, 1e12, 512)
        gm = fac._log_tail(far) + log_mult(far)
        out["tail_model_bounded"] = bool(np.all(np.diff(gm[far > 10 * fac.band_limit]) <= 0))
        bounded = bounded and out["tail_model_bounded"]
        out["bounded"] = bool(bounded)
    return out


def _hyp(ok: bool, **evidence) -> dict:
    return {"holds": bool(ok), **evidence}


def _stop(name, hyps, params, flags) -> ExperimentReport | None:
    if all(h["holds"] for h in hyps.values()):
        return None
    return ExperimentReport(name, NOT_MET, hyps, None, params, flags)


def _dist_param(params: dict, default: dict) -> DistributionSpec:
    T = params.get("T")
    if isinstance(T, DistributionSpec):
        return T
    spec = T or default.get("T", "density")
    bump = params.get("bump", default.get("bump", {}))
    return make_distribution(spec, bump=bump) if str(spec).startswith("density") \
        else make_distribution(spec)


def _weight_param(params: dict, key: str, default: str) -> Weight:
    v = params.get(key, default)
    return v if isinstance(v, Weight) else make_weight(v)


def _regular_index_roumieu(v) -> float | None:
    """Largest sampled index whose seminorm grows at most like e^{k w} for every k."""
    ok = [r["h"] for r in v.evidence if r["_s"] <= REGULAR_TOL]
    return max(ok) if ok else None


def fourier_association_index(T: DistributionSpec, w: Weight, b: float,
                              schedule: EpsSchedule, delta: float = DELTA) -> dict:
    """Smallest sampled h with |T^ - g^_eps| <= C e^{h w(xi) - b w(1/eps)}.

    For an embedded net T^ - g^_eps vanishes for |xi| <= 1/eps and is bounded by
    |T^| beyond, so the bound reduces to max_{xi >= 1/eps} log|T^| - h w(xi)
    + b w(1/eps) staying bounded along the schedule. |T^| beyond its resolved
    range is taken from the fitted tail model.
    """
    if T.kind != "density" or T._factor.tail is None:
        return {"h": None, "reason": "no decay model for T^"}
    fac = T._factor
    inv = schedule.inv
    for h in (0.0,) + tuple(INDEX_GRID):
        y = []
        for t in inv:
            xi = np.geomspace(t, max(t, 1.0) * 1e6, 2048)
            lm, _ = fac.log_eval(xi, None)
            lm = np.where(xi > fac.band_limit, fac._log_tail(xi), lm)
            y.append(float(np.max(lm - h * w(xi))) + b * float(w(t)))
        y = np.array(y)
        x = w(inv)
        slope = float(np.polyfit(x[-WINDOW:], y[-WINDOW:], 1)[0])
        if slope <= delta and np.all(np.isfinite(y)):
            return {"h": float(h), "slope": slope}
    return {"h": None, "reason": "no sampled h bounds the difference"}


def comparison_experiment(name: str, params: dict | None = None) -> ExperimentReport:
    """Instantiate a regularity-comparison result on catalog objects.

    beurling-7.1: strong association with a beurling-regular net forces
    e^{lam w}|T^| bounded for every lam. roumieu-counterexample-7.2: the slowed
    mollifier is roumieu-regular and strongly (not strictly) associated to delta,
    whose transform never decays. roumieu-strict-7.3: strict association with a
    roumieu-regular net gives decay at lam = min(h, l/2). r-strong-7.5: w_b-R-strong
    association plus the w_inf growth bound gives decay against every w_lam << w.
    """
    params = dict(params or {})
    name = _EXPERIMENT_ALIASES.get(name, name)
    if name not in EXPERIMENTS:
        raise AssociationError(f"unknown experiment {name!r}")
    run = {"beurling-7.1": _exp_beurling, "roumieu-counterexample-7.2": _exp_counterexample,
           "roumieu-strict-7.3": _exp_roumieu_strict, "r-strong-7.5": _exp_r_strong}[name]
    return run(name, params)


def _echo(params: dict, **resolved) -> dict:
    out = {k: v for k, v in params.items() if isinstance(v, (str, int, float, list, dict))}
    out.update({k: (v.label if hasattr(v, "label") else v) for k, v in resolved.items()})
    return out


def _exp_beurling(name, params):
    w = _weight_param(params, "weight", "power(0.5)")
    T = _dist_param(params, {"T": "density", "bump": {"p": 3.0}})
    lams = [float(x) for x in params.get("lambdas", (0.25, 0.5))]
    echo = _echo(params, weight=w, T=T, lambdas=lams)
    flags = []
    net = embed(T, w, check=False)
    reg = classify_regular(net, w, "beurling")
    k = reg.details.get("sup_slope")
    hyps = {"regular": _hyp(bool(reg.regular), cls=reg.cls, k=k)}
    assoc = associate(net, T, w, "beurling")
    hyps["strong"] = _hyp(assoc.strong, verdict=assoc.verdict, b=assoc.witness)
    stop = _stop(name, hyps, echo, flags + assoc.flags)
    if stop:
        return stop
    b = float(assoc.witness)
    k = max(float(k), 0.0)
    fh = fourier_association_index(T, w, b, net.schedule)
    hyps["fourier_index"] = _hyp(fh["h"] is not None, **fh)
    stop = _stop(name, hyps, echo, flags)
    if stop:
        return stop
    h = fh["h"]
    rows = []
    xi_s = np.geomspace(2.0, _decay_range(T)[0][-1], 6)
    for lam in lams:
        l = lam + k * (lam + h) / b
        # crossover: w(1/eps) = (lam + h)/b w(xi) zeroes the first exponent,
        # and l makes the second vanish too
        cross = [{"xi": float(x), "w_inv_eps": (lam + h) / b * float(w(x)),
                  "second_exponent": (lam - l + k * (lam + h) / b) * float(w(x))}
                 for x in xi_s]
        dec = decay_bound(T, lambda x, lam=lam: lam * w(x), f"exp({lam:g} w)")
        rows.append({"lambda": lam, "l": l, "crossover": cross, **dec})
    ok = all(r["bounded"] for r in rows)
    return ExperimentReport(name, CERTIFIED if ok else FAILED, hyps,
                            {"decay": rows, "holds": ok}, echo, flags)


def _exp_counterexample(name, params):
    w = _weight_param(params, "weight", "power(0.5)")
    w1 = _weight_param(params, "omega1", "power(0.25)")
    echo = _echo(params, weight=w, omega1=w1)
    T = make_distribution("delta")
    net = slowdown(embed(T, w, check=False), w, w1)
    reg = classify_regular(net, w, "roumieu-inductive")
    hyps = {"regular": _hyp(bool(reg.regular), cls=reg.cls,
                            crosscheck=reg.details.get("crosscheck"))}
    assoc = associate(net, T, w, "roumieu-inductive")
    self_slopes = [r["s_w"] for r in assoc.per_test]
    hyps["strong"] = _hyp(assoc.strong, witness=assoc.witness)
    hyps["not_strict"] = _hyp(not assoc.strict, self_scale_slopes=self_slopes)
    stop = _stop(name, hyps, echo, list(assoc.flags))
    if stop:
        return stop
    tests = [decay_bound(T, lambda x, lam=lam: lam * w(x), f"exp({lam:g} w)")
             for lam in INDEX_GRID]
    tests += [decay_bound(T, v, f"exp({v.label})") for v in roumieu_family(w)]
    fails = all(not t["bounded"] for t in tests)
    concl = {"delta_hat_modulus": 1.0, "decay_tests": tests, "fails_every_test": fails,
             "verdicts": {"regular": True, "strong": True, "strict": False},
             "holds": fails}
    return ExperimentReport(name, CERTIFIED if fails else FAILED, hyps, concl, echo,
                            list(assoc.flags))


def _exp_roumieu_strict(name, params):
    w = _weight_param(params, "weight", "power(0.5)")
    T = _dist_param(params, {"T": "density", "bump": {"p": 1.0}})
    hs = [float(x) for x in params.get("h", (0.25, 0.5, 1.0))]
    variant = params.get("net", "embedded")
    echo = _echo(params, weight=w, T=T, h=hs, net=variant)
    net = embed(T, w, check=False)
    if variant == "slowed":
        w1 = _weight_param(params, "omega1", "power(0.25)")
        echo["omega1"] = w1.label
        net = slowdown(net, w, w1)
    elif variant != "embedded":
        raise AssociationError(f"unknown net variant {variant!r}")
    reg = classify_regular(net, w, "roumieu-inductive")
    l = _regular_index_roumieu(reg) if reg.regular else None
    hyps = {"regular": _hyp(bool(reg.regular), cls=reg.cls, l=l)}
    assoc = associate(net, T, w, "roumieu-inductive")
    hyps["strict"] = _hyp(assoc.strict, verdict=assoc.verdict)
    stop = _stop(name, hyps, echo, list(assoc.flags))
    if stop:
        return stop
    rows = []
    for h in hs:
        lam = min(h, l / 2)
        rows.append({"h": h, "lambda": lam,
                     **decay_bound(T, lambda x, lam=lam: lam * w(x), f"exp({lam:g} w)")})
    ok = all(r["bounded"] for r in rows)
    return ExperimentReport(name, CERTIFIED if ok else FAILED, hyps,
                            {"decay": rows, "holds": ok}, echo, list(assoc.flags))


def _exp_r_strong(name, params):
    w = _weight_param(params, "weight", "power(0.5)")
    w_inf = _weight_param(params, "omega_inf", "power(0.125)")
    w_b = _weight_param(params, "omega_b", "power(0.25)")
    T = _dist_param(params, {"T": "density", "bump": {"p": 1.0}})
    echo = _echo(params, weight=w, omega_inf=w_inf, omega_b=w_b, T=T)
    flags = ["reconstructed bound: |T^ - g^_eps| <= C exp(w_l(|xi|) - w_b(1/eps))"]
    net = embed(T, w, check=False)
    fam = roumieu_family(w)
    order = compare(w_inf, w_b, "strong")
    hyps = {"omega_b_dominates": _hyp(order.relation == "strongly-less",
                                      relation=order.relation)}
    reg = classify_regular(net, w, "roumieu-inductive")
    hyps["regular"] = _hyp(bool(reg.regular), cls=reg.cls)
    sched = net.schedule
    sub = EpsSchedule(max(sched.k_min, sched.k_max - WINDOW + 1), sched.k_max)
    growth = []
    for v in fam:
        y = log_seminorm_sequence(net, v, 1.0, "L1", sub.eps)
        f = fit_exponent(log_values=y, w=w_inf, schedule=sub)
        growth.append({"seminorm_weight": v.label, "slope": _num(f.asymptotic_slope)})
    hyps["growth_o_exp_w_inf"] = _hyp(
        all(float(g["slope"]) <= 1 - DELTA for g in growth), per_weight=growth)
    tests = default_test_set(w, "roumieu-inductive")
    slopes = []
    for rho in tests:
        tr = pairing_trace(net, T, rho)
        f = _fit_trace(tr, w_b, DELTA)
        slopes.append({"test": rho.label, "slope": _num(_s(f))})
    hyps["w_b_R_strong"] = _hyp(all(float(s["slope"]) <= -1 - DELTA for s in slopes),
                                per_test=slopes)
    stop = _stop(name, hyps, echo, flags)
    if stop:
        return stop
    rows = []
    for v in fam:
        dec = decay_bound(T, v, f"exp({v.label})")
        # 1/eps = w_b^{-1}(w'_lam(xi)) with w'_lam = 2 w_lam; the leftover exponent
        # w_lam + w_inf(1/eps) must be << w for some w_h << w to absorb it
        xs = np.geomspace(1e2, 1e12, 8)
        inv = [weight_inverse(w_b, 2 * float(v(x))) for x in xs]
        left = [float(v(x)) + float(w_inf(t)) for x, t in zip(xs, inv)]
        ratio = [a / float(w(x)) for a, x in zip(left, xs)]
        sub_tab = [{"xi": float(x), "inv_eps": t, "leftover": a, "ratio_to_w": r}
                   for x, t, a, r in zip(xs, inv, left, ratio)]
        absorbed = bool(np.all(np.diff(ratio) < 0))
        rows.append({**dec, "substitution": sub_tab, "leftover_below_w": absorbed,
                     "holds": dec["bounded"] and absorbed})
    ok = all(r["holds"] for r in rows)
    return ExperimentReport(name, CERTIFIED if ok else FAILED, hyps,
                            {"decay": rows, "holds": ok}, echo, flags)


# -- equality criteria -------------------------------------------------------------

EQUALITY_MODES = ("translation-8.1", "pairing-8.2-8.3", "regular-pairing-8.4-8.5")
_EQUALITY_ALIASES = {"8.1": "translation-8.1", "8.2": "pairing-8.2-8.3",
                     "8.3": "pairing-8.2-8.3", "8.4": "regular-pairing-8.4-8.5",
                     "8.5": "regular-pairing-8.4-8.5"}
SHIFTS = (math.pi / 2, 1.0, 0.5, 0.25)
BALL_RADII = (1.0, 2.0, 4.0)
BALL_ORDERS = (0, 1, 2)
BALL_POINTS = 4097
LOWER_OMEGA = "power(0.25)"


@dataclass
class SpatialNet:
    """f_eps(x) = sum_i e^{a_i(eps)} p_i(x) with profiles defined on all of R.

    Terms holding the same amplitude function are summed before evaluation, so
    differences such as f(. + h) - f cancel exactly in the log domain.
    """
    terms: list
    label: str = "f"
    schedule: EpsSchedule = field(default_factory=EpsSchedule)

    def translate(self, h: float) -> "SpatialNet":
        return SpatialNet([(a, (lambda x, p=p: p(x + h))) for a, p in self.terms],
                          f"{self.label}(.+{h:g})", self.schedule)

    def minus(self, other: "SpatialNet") -> "SpatialNet":
        neg = [(a, (lambda x, p=p: -p(x))) for a, p in other.terms]
        return SpatialNet(self.terms + neg, f"{self.label}-{other.label}", self.schedule)

    def at_zero(self) -> "SpatialNet":
        """The constant net x -> f_eps(0)."""
        return SpatialNet([(a, (lambda x, c=float(p(np.zeros(1))[0]): np.full(np.shape(x), c)))
                           for a, p in self.terms], f"{self.label}(0)", self.schedule)

    def _groups(self) -> list:
        out: dict = {}
        for a, p in self.terms:
            out.setdefault(id(a), [a, []])[1].append(p)
        return list(out.values())

    def log_l2_ball(self, eps: float, R: float, order: int = 0) -> float:
        """log ||d^order f_eps||_{L2(-R, R)}; derivatives by finite differences."""
        x = np.linspace(-R, R, BALL_POINTS)
        logs, vals = [], []
        for a, ps in self._groups():
            v = np.sum([p(x) for p in ps], axis=0).astype(float)
            for _ in range(order):
                v = np.gradient(v, x, edge_order=2)
            if np.max(np.abs(v)) > 1e-12 * max(1.0, np.max(np.abs([p(x) for p in ps]))):
                logs.append(float(a(eps)))
                vals.append(v)
        if not logs:
            return -math.inf
        M = max(logs)
        s = np.sum([math.exp(l - M) * v for l, v in zip(logs, vals)], axis=0)
        n2 = float(np.dot(trapezoid_weights(x), s ** 2))
        return M + 0.5 * math.log(n2) if n2 > 0 else -math.inf

    def log_ball_sequence(self) -> np.ndarray:
        """Largest ball/derivative L2 norm per eps (negligible iff each one is)."""
        return np.array([max(self.log_l2_ball(e, R, m) for R in BALL_RADII
                             for m in BALL_ORDERS) for e in self.schedule.eps])


def planted_spatial_net(w: Weight, kind: str = "constant+sin", coef: float = 5.0,
                        power: float = 1.0) -> SpatialNet:
    """'constant+sin': c_eps + e^{-coef w(1/eps)^power} sin(x) with c_eps = w(1/eps);
    'sin': the eps-independent net sin(x)."""
    if kind == "sin":
        return SpatialNet([(lambda e: 0.0, np.sin)], "sin")
    if kind != "constant+sin":
        raise AssociationError(f"unknown planted net {kind!r}")
    const = (lambda e: math.log(float(w(1.0 / e))), lambda x: np.ones(np.shape(x)))
    pert = (lambda e: -coef * float(w(1.0 / e)) ** power, np.sin)
    return SpatialNet([const, pert], f"c_eps+exp(-{coef:g}w^{power:g})sin")


def _scale_for(case: str, w: Weight, schedule: EpsSchedule):
    kind = "beurling" if case == "beurling" else "roumieu"
    return make_scale(kind, w, schedule=schedule)


def _negligible(y: np.ndarray, case: str, w: Weight, schedule: EpsSchedule) -> dict:
    pres = "projective" if case == "roumieu-projective" else "inductive"
    v = classify_constants(log_abs=y, s=_scale_for(case, w, schedule), presentation=pres)
    try:
        slope = fit_exponent(log_values=y, w=w, schedule=schedule).asymptotic_slope
    except FitError:
        slope = math.nan
    return {"cls": v.cls, "negligible": bool(v.negligible),
            "moderate": None if v.moderate is None else bool(v.moderate),
            "slope": _num(float(slope))}


def lower_test_set(w: Weight, case: str) -> list[TestFunction]:
    """Test functions of lower regularity than the class.

    Beurling: gevrey p = 1 bumps, whose spectra only decay like e^{-c w}, so
    they lie in the Banach step D^{(w),k} for k below c. Roumieu: gevrey
    p = 1/2 bumps certified in the Beurling class of w1 = t^{1/4} << w.
    """
    case = canonical_case(case)
    out = []
    for c, r in TEST_SHAPES:
        if case == "beurling":
            f = make_bump("gevrey", center=c, radius=r, p=1.0)
            cert = {"member": f.decay is not None, "class": "D^(w),k",
                    "k_below": None if f.decay is None else f.decay.c}
        else:
            f = make_bump("gevrey", center=c, radius=r, p=0.5)
            w1 = make_weight(LOWER_OMEGA)
            cert = {"member": bool(test_membership(f, w1, "beurling").member),
                    "class": f"D^({w1.label})"}
        if cert["member"]:
            out.append(TestFunction(f, GridFactor(f), cert, None))
    return out


def log_pairing_majorant(net: Net, rho: TestFunction, eps: float) -> float:
    """log of (1/pi) int_0^inf |g^_eps rho^| >= log|<g_eps, rho>|, in the log domain.

    Beyond its resolved band |rho^| follows the test function's fitted decay
    tail, as grid factors of nets do.
    """
    xi_n, _ = net.log_spectrum(eps)
    xi = np.union1d(xi_n, rho.factor.nodes())
    xi = xi[xi >= 0]
    lr, _ = rho.factor.log_eval(xi, None)
    lg = net.log_abs(xi, eps)
    return log_integral(lg + lr, trapezoid_weights(xi)) - math.log(math.pi)


def pairing_trace_log(net: Net, rho: TestFunction) -> np.ndarray:
    """log pairing majorants on the net's own schedule."""
    return np.array([log_pairing_majorant(net, rho, e) for e in net.schedule.eps])


def _pairing_negligible(net: Net, tests: list[TestFunction], w: Weight, case: str) -> dict:
    rows = []
    for rho in tests:
        y = pairing_trace_log(net, rho)
        row = {"test": rho.label}
        if np.all(y == -math.inf):
            row.update(cls="Negligible", negligible=True, zero=True)
        else:
            row.update(_negligible(y, case, w, net.schedule))
        rows.append(row)
    flags = [r["negligible"] for r in rows]
    state = None if any(f is None for f in flags) else all(flags)
    return {"negligible": state, "per_test": rows}


def _self_pairing(net: Net, w: Weight, case: str) -> dict:
    y = 2 * log_l2_sequence(net)
    out = _negligible(y, case, w, net.schedule)
    out["log_self_pairing_last"] = _num(float(y[-1]))
    return out


def two_mollifier_difference(schedule: EpsSchedule | None = None) -> Net:
    """phi_{1,eps} - phi_{2,eps} for two admissible mollifiers."""
    sched = schedule or EpsSchedule()
    a = mollifier_net(sched, 1.0, 2.0)
    b = mollifier_net(sched, 0.5, 1.5)
    d = combine_nets(a, b, op="difference")
    d.label = "phi1_eps-phi2_eps"
    return d


def equality_criteria(mode: str, net=None, w: Weight | str = "power(0.5)",
                      case: str = "roumieu-inductive", params: dict | None = None
                      ) -> ExperimentReport:
    """When is a net zero, or a generalized constant?

    translation-8.1: shift invariance up to Negligible, then the net minus its
    value at 0 (L2 norms of derivatives on balls). pairing-8.2-8.3: pairings
    against lower-regularity tests (the equality hypothesis), against the class
    catalog, and the self-pairing ||h_eps||_2^2, whose negligibility is the
    zero criterion. regular-pairing-8.4-8.5: for Regular nets the class catalog
    alone suffices, through the bound |<g, g>| = O(e^{(-a+h) w(1/eps)}).
    """
    params = dict(params or {})
    w = make_weight(w) if isinstance(w, str) else w
    mode = _EQUALITY_ALIASES.get(mode, mode)
    if mode not in EQUALITY_MODES:
        raise AssociationError(f"unknown equality mode {mode!r}")
    case = canonical_case(case)
    if mode == "translation-8.1":
        return _eq_translation(mode, net, w, case, params)
    net = two_mollifier_difference() if net is None else net
    echo = {"mode": mode, "net": net.label, "weight": w.label, "case": case, **{
        k: v for k, v in params.items() if isinstance(v, (str, int, float, list))}}
    catalog = _pairing_negligible(net, default_test_set(w, case), w, case)
    selfp = _self_pairing(net, w, case)
    verdict = "zero" if selfp["negligible"] else "nonzero"
    concl = {"verdict": verdict, "self_pairing": selfp, "catalog_pairings": catalog,
             "cautionary": bool(catalog["negligible"] and not selfp["negligible"])}
    if mode == "pairing-8.2-8.3":
        lower = _pairing_negligible(net, lower_test_set(w, case), w, case)
        hyps = {"lower_regularity_pairings_negligible": _hyp(bool(lower["negligible"]),
                                                             **lower)}
    else:
        reg = classify_regular(net, w, case)
        hyps = {"regular": _hyp(bool(reg.regular), cls=reg.cls),
                "catalog_pairings_negligible": _hyp(bool(catalog["negligible"]))}
        # |<g, g>| = O(e^{(-a + h) w(1/eps)}): a from the pairings, h from regularity
        a = min(-float(r.get("slope", -math.inf)) for r in catalog["per_test"])
        h = max(float(reg.details.get("sup_slope", 0.0)), 0.0) if case == "beurling" else 0.0
        concl["self_pairing_bound"] = {"a": _num(a), "h": h, "predicted_slope": _num(h - a),
                                       "measured_slope": selfp["slope"]}
    met = all(h["holds"] for h in hyps.values())
    # the criterion applies only under its hypotheses; the verdict itself always
    # comes from the self-pairing criterion
    concl["holds"] = bool(selfp["negligible"]) if met else None
    status = (CERTIFIED if selfp["negligible"] else FAILED) if met else NOT_MET
    return ExperimentReport(mode, status, hyps, concl, echo)


def _eq_translation(mode, net, w, case, params):
    net = planted_spatial_net(w, params.get("planted", "constant+sin"),
                              float(params.get("coef", 5.0)),
                              float(params.get("power", 1.0))) if net is None else net
    shifts = [float(h) for h in params.get("shifts", SHIFTS)]
    echo = {"mode": mode, "net": net.label, "weight": w.label, "case": case,
            "shifts": shifts, "radii": list(BALL_RADII), "orders": list(BALL_ORDERS)}
    rows = []
    for h in shifts:
        d = net.translate(h).minus(net)
        rows.append({"shift": h, **_negligible(d.log_ball_sequence(), case, w, net.schedule)})
    bad = [r["shift"] for r in rows if not r["negligible"]]
    hyps = {"translation_invariant": _hyp(not bad, per_shift=rows, failing_shifts=bad)}
    if bad:
        return ExperimentReport(mode, NOT_MET, hyps, None, echo)
    rest = net.minus(net.at_zero())
    res = _negligible(rest.log_ball_sequence(), case, w, net.schedule)
    const = [float(sum(math.exp(a(e)) * float(p(np.zeros(1))[0]) for a, p in net.terms))
             for e in net.schedule.eps[:3]]
    concl = {"verdict": "constant" if res["negligible"] else "not constant",
             "constant": f"{net.label}(0)", "constant_head": const,
             "remainder": res, "holds": res["negligible"]}
    return ExperimentReport(mode, CERTIFIED if res["negligible"] else FAILED, hyps,
                            concl, echo)
