"""Nets of functions and their classification in the generalized algebras.

A net is held in frequency space: a sum of terms, each a log amplitude in eps
times a product of spectral factors (gridded FFT spectra or analytic hats,
possibly dilated by a map of eps). This keeps the eps -> 0 behaviour
evaluable down to eps = 2^-40, where a spatial grid cannot resolve phi_eps.

Seminorms of g_eps use |g^(xi)| e^{h w(|xi|)} over xi >= 0 (all catalog nets
are real, so |g^| is even) on the nodes of the gridded factors plus a
geometric grid reaching the band limit of the analytic factors.
"""
from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._quad import log_integral, trapezoid_weights
from .scales import (
    DEFAULT_SCHEDULE,
    DELTA,
    K_MAX,
    WINDOW,
    EpsSchedule,
    ExponentFit,
    fit_exponent,
    roumieu_family,
)
from .spectral import (
    NOISE_FLOOR,
    GridError,
    fit_fourier_decay,
    GridFunction,
    canonical_variant,
    inverse_spectrum,
    make_bump,
    mollifier_hat,
    spectrum,
)
from .weights import Weight

INDEX_GRID = tuple(2.0 ** j for j in range(-6, 7))
REGULAR_TOL = 1e-3
GEOM_NODES = 2048
CONV_NODES = 1024
CHUNK = 128
TAIL_MAX = 2.0 ** 46
CASES = ("beurling", "roumieu-inductive", "roumieu-projective")
_CASE_ALIASES = {"roumieu": "roumieu-inductive", "roumieu-proj": "roumieu-projective",
                 "projective": "roumieu-projective", "inductive": "roumieu-inductive"}


class NetError(ValueError):
    pass


def canonical_case(case: str) -> str:
    case = _CASE_ALIASES.get(case, case)
    if case not in CASES:
        raise NetError(f"unknown case {case!r}")
    return case


# -- spectral factors ---------------------------------------------------------

class GridFactor:
    """Spectrum of a GridFunction, floored at the round-off level.

    Beyond the floor the magnitude is continued by the fitted decay model
    a - b log xi - c xi^(1/s) (when it decays), so seminorms see the true
    growth of e^{h w} against the spectrum instead of a hard cut.
    """

    def __init__(self, f: GridFunction, floor: float = NOISE_FLOOR, tail: bool = True):
        prof = spectrum(f)
        v = prof.values.copy()
        mag = np.abs(v)
        if mag.max() > 0:
            v[mag < floor * mag.max()] = 0
        nz = np.nonzero(v)[0]
        self.f = f
        self.xi = prof.xi
        self.values = v
        self.band_limit = float(np.max(np.abs(self.xi[nz]))) if nz.size else 0.0
        self.label = f.label
        self.tail = None
        self.tail_cut = self.band_limit
        if tail and nz.size:
            fit = getattr(f, "decay", None) or fit_fourier_decay(prof, floor)
            if fit is not None and fit.c > 0:
                self.tail = fit
                self.tail_cut = TAIL_MAX

    def _log_tail(self, xi) -> np.ndarray:
        t = self.tail
        return t.a - t.b * np.log(xi) - t.c * xi ** (1 / t.s)

    def nodes(self) -> np.ndarray:
        """Nonnegative FFT nodes up to the last nonzero value."""
        return self.xi[(self.xi >= 0) & (self.xi <= self.band_limit)]

    def signed_nodes(self) -> np.ndarray:
        return self.xi[np.abs(self.xi) <= self.band_limit]

    def band(self, eps, tails: bool = True) -> float:
        return self.tail_cut if tails else self.band_limit

    def __call__(self, xi, eps) -> np.ndarray:
        xi = np.asarray(xi, dtype=float)
        re = np.interp(xi, self.xi, self.values.real, left=0.0, right=0.0)
        im = np.interp(xi, self.xi, self.values.imag, left=0.0, right=0.0)
        out = re + 1j * im
        if self.tail is not None:
            a = np.abs(xi)
            far = (a > self.band_limit) & (a <= self.tail_cut)
            if far.any():
                out[far] = np.exp(self._log_tail(a[far]))
        return out

    def log_eval(self, xi, eps):
        xi = np.asarray(xi, dtype=float)
        v = GridFactor.__call__(self, xi, eps)
        lm, ph = _log_phase(v)
        if self.tail is not None:
            a = np.abs(xi)
            far = (a > self.band_limit) & (a <= self.tail_cut)
            lm[far] = self._log_tail(a[far])
            ph[far] = 1.0
        return lm, ph


class AnalyticFactor:
    """xi -> hat(s(eps) xi); ``band`` is the support bound of hat (None: unbounded)."""

    def __init__(self, hat: Callable, band: float | None = None,
                 dilation: Callable | None = None, label: str = ""):
        self.hat = hat
        self.band_limit = band
        self.dilation = dilation
        self.label = label

    def scale(self, eps) -> float:
        return 1.0 if self.dilation is None else float(self.dilation(eps))

    def band(self, eps, tails: bool = True) -> float:
        if self.band_limit is None:
            return math.inf
        return self.band_limit / self.scale(eps)

    def __call__(self, xi, eps) -> np.ndarray:
        return np.asarray(self.hat(self.scale(eps) * np.asarray(xi, dtype=float)),
                          dtype=complex)

    def log_eval(self, xi, eps):
        return _log_phase(self(xi, eps))


def _log_phase(v: np.ndarray):
    """(log|v|, v/|v|) with phase 1 at zeros."""
    a = np.abs(v)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        lm = np.log(a)
        ph = np.where(a > 0, v / np.where(a > 0, a, 1.0), 1.0 + 0j)
    return lm, ph


def mollifier_factor(dilation: Callable | None = None, inner: float = 1.0,
                     outer: float = 2.0) -> AnalyticFactor:
    return AnalyticFactor(lambda x: mollifier_hat(x, inner, outer), outer,
                          dilation if dilation is not None else (lambda e: e), "phi^")


def derivative_factor(m: int = 1) -> AnalyticFactor:
    return AnalyticFactor(lambda x: (1j * x) ** m, None, None, f"(i xi)^{m}")


def translation_factor(c: float) -> AnalyticFactor:
    """Spectrum multiplier of g(x - c)."""
    return AnalyticFactor(lambda x: np.exp(-1j * c * x), None, None, f"shift({c:g})")


# -- terms --------------------------------------------------------------------

def _const_log_amp(eps):
    return 0.0


@dataclass
class Term:
    log_amp: Callable = _const_log_amp
    factors: list = field(default_factory=list)
    coef: complex = 1.0
    eps_map: Callable | None = None

    def e(self, eps) -> float:
        return float(eps if self.eps_map is None else self.eps_map(eps))

    def amp(self, eps) -> float:
        return float(self.log_amp(self.e(eps)))

    def band(self, eps, tails: bool = True) -> float:
        e = self.e(eps)
        return min([f.band(e, tails) for f in self.factors] + [math.inf])

    def grid_factors(self) -> list:
        return [f for f in self.factors if isinstance(f, GridFactor)]

    def __call__(self, xi, eps) -> np.ndarray:
        e = self.e(eps)
        out = np.full(np.shape(xi), complex(self.coef))
        for f in self.factors:
            out = out * f(xi, e)
        return out

    def log_eval(self, xi, eps):
        """(log|term|, phase) without the amplitude, robust to underflow."""
        e = self.e(eps)
        c = complex(self.coef)
        lm = np.full(np.shape(xi), math.log(abs(c)) if c != 0 else -math.inf)
        ph = np.full(np.shape(xi), c / abs(c) if c != 0 else 1.0 + 0j)
        for f in self.factors:
            a, b = f.log_eval(xi, e)
            lm = lm + a
            ph = ph * b
        return lm, ph

    def with_factor(self, f) -> "Term":
        return Term(self.log_amp, self.factors + [f], self.coef, self.eps_map)

    def reparam(self, eta: Callable) -> "Term":
        inner = self.eps_map
        new = (lambda e: eta(e)) if inner is None else (lambda e: inner(eta(e)))
        return Term(self.log_amp, list(self.factors), self.coef, new)


class ConvTerm(Term):
    """Spectrum of the product a * b: (1/2pi) (a^ conv b^)(xi)."""

    def __init__(self, a: Term, b: Term):
        super().__init__(lambda e: 0.0, [], 1.0, None)
        self.a, self.b = a, b

    def amp(self, eps) -> float:
        return self.a.amp(eps) + self.b.amp(eps)

    def band(self, eps, tails: bool = True) -> float:
        # the narrow side enters through its resolved nodes only
        n, wide = self._narrow(eps)
        return n.band(eps, tails=False) + wide.band(eps, tails)

    def grid_factors(self) -> list:
        return []

    def _narrow(self, eps):
        a, b = self.a, self.b
        return (a, b) if a.band(eps, tails=False) <= b.band(eps, tails=False) else (b, a)

    @staticmethod
    def _signed_nodes(t: Term, eps) -> np.ndarray:
        g = t.grid_factors()
        if g:
            return g[0].signed_nodes()
        B = t.band(eps, tails=False)
        if not math.isfinite(B):
            raise NetError("product factor without band limit")
        return np.linspace(-B, B, 4097)

    def __call__(self, xi, eps) -> np.ndarray:
        n, wide = self._narrow(eps)
        eta = self._signed_nodes(n, eps)
        vals = n(eta, eps)
        keep = vals != 0
        eta, vals = eta[keep], vals[keep]
        wts = trapezoid_weights(eta) * vals / (2 * np.pi)
        xi = np.asarray(xi, dtype=float)
        out = np.zeros(xi.shape, dtype=complex)
        for i in range(0, xi.size, CHUNK):
            xs = xi[i:i + CHUNK]
            arg = xs[:, None] - eta[None, :]
            out[i:i + CHUNK] = wide(arg.ravel(), eps).reshape(arg.shape) @ wts
        return out

    def reparam(self, eta: Callable) -> "Term":
        return ConvTerm(self.a.reparam(eta), self.b.reparam(eta))

    def log_eval(self, xi, eps):
        return _log_phase(self(xi, eps))

    def with_factor(self, f) -> "Term":
        return _FactoredConv(self, f)


class _FactoredConv(Term):
    def __init__(self, inner: Term, f):
        super().__init__(lambda e: 0.0, [], 1.0, None)
        self.inner, self.f = inner, f

    def amp(self, eps):
        return self.inner.amp(eps)

    def band(self, eps, tails=True):
        return min(self.inner.band(eps, tails), self.f.band(eps, tails))

    def grid_factors(self):
        return []

    def __call__(self, xi, eps):
        return self.inner(xi, eps) * self.f(xi, eps)

    def log_eval(self, xi, eps):
        a, p = self.inner.log_eval(xi, eps)
        b, q = self.f.log_eval(xi, eps)
        return a + b, p * q

    def reparam(self, eta):
        return _FactoredConv(self.inner.reparam(eta), self.f)

    def with_factor(self, f):
        return _FactoredConv(self, f)


# -- nets ---------------------------------------------------------------------

@dataclass
class Net:
    """Lazily evaluated net eps -> g_eps given by spectral terms."""
    terms: list
    label: str = ""
    schedule: EpsSchedule = DEFAULT_SCHEDULE
    support: tuple = (-2.0, 2.0)
    meta: dict = field(default_factory=dict)
    _cache: dict = field(default_factory=dict, repr=False)

    def nodes(self, eps) -> np.ndarray:
        grids = [f for t in self.terms for f in t.grid_factors()]
        B = max([t.band(eps) for t in self.terms] + [0.0])
        if not math.isfinite(B):
            raise NetError(f"{self.label}: spectrum is not band limited")
        parts = []
        top = 0.0
        for g in grids:
            parts.append(g.nodes())
            top = max(top, g.band_limit)
        if B > top:
            lo = max(top, 1.0)
            parts.append(np.linspace(0.0, lo, 33 if top == 0 else 2))
            parts.append(np.geomspace(lo, B, GEOM_NODES if not grids else GEOM_NODES // 2))
        return np.unique(np.concatenate(parts)) if parts else np.zeros(1)

    def log_abs(self, xi, eps) -> np.ndarray:
        """log|g^_eps(xi)| in the log domain (no underflow of small terms)."""
        xi = np.asarray(xi, dtype=float)
        logs, phases = [], []
        for t in self.terms:
            a = t.amp(eps)
            if math.isfinite(a):
                lm, ph = t.log_eval(xi, eps)
                logs.append(lm + a)
                phases.append(ph)
        if not logs:
            return np.full(xi.shape, -math.inf)
        if len(logs) == 1:
            return logs[0]
        L = np.vstack(logs)
        M = np.max(L, axis=0)
        Mf = np.where(np.isfinite(M), M, 0.0)
        with np.errstate(invalid="ignore"):
            S = np.sum(np.exp(L - Mf) * np.vstack(phases), axis=0)
        with np.errstate(divide="ignore"):
            return np.where(np.isfinite(M), np.log(np.abs(S)) + Mf, -math.inf)

    def log_spectrum(self, eps) -> tuple[np.ndarray, np.ndarray]:
        """(xi, log|g^_eps(xi)|) on the nonnegative evaluation nodes."""
        key = float(eps)
        if key in self._cache:
            return self._cache[key]
        if not self.terms:
            xi = np.zeros(1)
            out = (xi, np.full(1, -math.inf))
        else:
            xi = self.nodes(eps)
            out = (xi, self.log_abs(xi, eps))
        self._cache[key] = out
        return out

    def hat(self, xi, eps) -> np.ndarray:
        """Complex spectrum at signed frequencies (may overflow for huge amplitudes)."""
        xi = np.asarray(xi, dtype=float)
        S = np.zeros(xi.shape, dtype=complex)
        for t in self.terms:
            a = t.amp(eps)
            if math.isfinite(a):
                S += math.exp(a) * t(xi, eps)
        return S

    def sample(self, eps, L: float = 16.0, N: int = 2 ** 14) -> GridFunction:
        """Spatial samples of g_eps on the standard grid (needs band <= pi/h)."""
        h = 2 * L / N
        B = max([t.band(eps, tails=False) for t in self.terms] + [0.0])
        if B > math.pi / h:
            raise GridError(f"{self.label}: eps = {eps:g} not resolved by h = {h:g}")
        xi = np.fft.fftshift(2 * np.pi * np.fft.fftfreq(N, d=h))
        vals = inverse_spectrum(xi, self.hat(xi, eps), L).real
        return GridFunction(vals.astype(complex), L, (-L, L), f"{self.label}@{eps:g}")

    def to_json(self) -> dict:
        return {"label": self.label, "schedule": self.schedule.to_json(),
                "support": list(self.support), "terms": len(self.terms), "meta": self.meta}


def _copy(net: Net, terms, label, **meta) -> Net:
    return Net(terms, label, net.schedule, net.support, {**net.meta, **meta})


# -- catalog ------------------------------------------------------------------

_BUMP_CACHE: dict = {}


def catalog_bump(kind: str = "gevrey", **kw) -> GridFactor:
    key = (kind, tuple(sorted(kw.items())))
    if key not in _BUMP_CACHE:
        _BUMP_CACHE[key] = GridFactor(make_bump(kind, **kw))
    return _BUMP_CACHE[key]


def planted_net(w: Weight, c: float = 0.0, power: float | None = None,
                bump: GridFactor | None = None, schedule: EpsSchedule = DEFAULT_SCHEDULE,
                label: str | None = None) -> Net:
    """e^{c w(1/eps)} times a fixed bump, or e^{-w(1/eps)^power} times the bump."""
    b = bump if bump is not None else catalog_bump()
    if power is None:
        def la(e):
            return c * w(1.0 / e)
        lab = label or f"e^({c:g} w)*{b.label}"
    else:
        def la(e):
            return -w(1.0 / e) ** power
        lab = label or f"e^(-w^{power:g})*{b.label}"
    return Net([Term(la, [b])], lab, schedule, (b.f.support[0], b.f.support[1]))


def zero_net(schedule: EpsSchedule = DEFAULT_SCHEDULE) -> Net:
    return Net([], "zero", schedule)


def mollifier_net(schedule: EpsSchedule = DEFAULT_SCHEDULE, inner: float = 1.0,
                  outer: float = 2.0) -> Net:
    """phi_eps(x) = phi(x/eps)/eps, i.e. phi_eps^(xi) = phi^(eps xi)."""
    return Net([Term(factors=[mollifier_factor(None, inner, outer)])], "phi_eps", schedule,
               (-1.0, 1.0))


def convolved_net(f: GridFunction | GridFactor, schedule: EpsSchedule = DEFAULT_SCHEDULE,
                  label: str | None = None) -> Net:
    """f * phi_eps for a compactly supported grid function f."""
    g = f if isinstance(f, GridFactor) else GridFactor(f)
    return Net([Term(factors=[g, mollifier_factor()])], label or f"{g.label}*phi_eps",
               schedule, (g.f.support[0] - 1, g.f.support[1] + 1))


def reparametrize(net: Net, eta: Callable, label: str | None = None) -> Net:
    """eps -> g_{eta(eps)}."""
    return _copy(net, [t.reparam(eta) for t in net.terms], label or f"{net.label}(eta)")


# name -> descriptor; the moderate members are the closure/L2 catalog
NET_CATALOG = {
    "bump": "planted(c=0)",
    "grow": "planted(c=2)",
    "half": "planted(c=0.5)",
    "neg2": "planted(c=-2)",
    "neg3": "planted(c=-3)",
    "super": "planted(power=1.3)",
    "super15": "planted(power=1.5)",
    "zero": "zero",
    "moll": "mollifier",
    "slow": "slowed-mollifier",
    "embedded": "embedded",
}
_NET_SPEC = re.compile(r"^\s*([a-z][a-z0-9_-]*)\s*(?:\((.*)\))?\s*$")


def parse_net_spec(spec: str) -> tuple[str, dict]:
    """'planted(c=2)' -> ('planted', {'c': 2.0}); bare names take no parameters."""
    m = _NET_SPEC.match(spec)
    if not m:
        raise NetError(f"malformed net spec {spec!r}")
    name, body = m.group(1), m.group(2)
    params = {}
    for part in filter(None, (p.strip() for p in (body or "").split(","))):
        key, sep, val = part.partition("=")
        if not sep:
            raise NetError(f"net spec {spec!r}: parameter {part!r} is not key=value")
        try:
            params[key.strip()] = float(val)
        except ValueError:
            raise NetError(f"net spec {spec!r}: {key.strip()} is not a number") from None
    return name, params


def make_net(spec: str, w: Weight, schedule: EpsSchedule = DEFAULT_SCHEDULE) -> Net:
    """Build a catalog net from a descriptor or a NET_CATALOG name.

    planted(c=.. | power=..), zero, mollifier(inner=, outer=), slowed-mollifier
    (eps -> sqrt eps) and embedded (gevrey bump * phi_eps).
    """
    name, p = parse_net_spec(NET_CATALOG.get(spec, spec))
    if name == "planted":
        if set(p) - {"c", "power"}:
            raise NetError(f"planted: unknown parameters {sorted(set(p) - {'c', 'power'})}")
        return planted_net(w, p.get("c", 0.0), p.get("power"), schedule=schedule)
    if p and name in ("zero", "slowed-mollifier", "embedded"):
        raise NetError(f"{name} takes no parameters")
    if name == "zero":
        return zero_net(schedule)
    if name == "mollifier":
        return mollifier_net(schedule, p.get("inner", 1.0), p.get("outer", 2.0))
    if name == "slowed-mollifier":
        return reparametrize(mollifier_net(schedule), math.sqrt)
    if name == "embedded":
        return convolved_net(catalog_bump(), schedule)
    raise NetError(f"unknown net {name!r}; catalog: {sorted(NET_CATALOG)}")


_SAMPLE_FILE = re.compile(r"^k(\d+(?:\.\d+)?)\.csv$")


@dataclass
class SampledNet(Net):
    """A net given by spatial samples, one grid function per eps = 2^-k."""
    samples: dict = field(default_factory=dict)

    def log_spectrum(self, eps) -> tuple[np.ndarray, np.ndarray]:
        key = float(eps)
        if key not in self._cache:
            f = self.samples.get(key)
            if f is None:
                raise NetError(f"{self.label}: no samples at eps = {key:g}")
            # user samples may fill the window; no edge guard
            prof = spectrum(f, edge_guard=0)
            pos = prof.xi >= 0
            mag = prof.magnitudes[pos]
            mag = np.where(mag >= NOISE_FLOOR * max(mag.max(), 1e-300), mag, 0.0)
            with np.errstate(divide="ignore"):
                self._cache[key] = (prof.xi[pos], np.log(mag))
        return self._cache[key]

    def hat(self, xi, eps):
        raise NetError("sampled nets carry no analytic spectrum")


def load_sampled_net(directory: str) -> SampledNet:
    """Read files k<k>.csv (columns x, re, im) from a directory.

    The k values must form an arithmetic progression; they define the schedule.
    """
    files = {}
    for name in sorted(os.listdir(directory)):
        m = _SAMPLE_FILE.match(name)
        if m:
            files[float(m.group(1))] = os.path.join(directory, name)
    if len(files) < 2:
        raise NetError(f"{directory}: need at least two k<k>.csv sample files")
    ks = sorted(files)
    steps = np.diff(ks)
    if np.ptp(steps) > 1e-9:
        raise NetError(f"{directory}: k values {ks} are not evenly spaced")
    sched = EpsSchedule(ks[0], ks[-1], float(steps[0]))
    samples = {}
    for k, e in zip(ks, sched.eps):
        samples[float(e)] = GridFunction.from_csv(files[k], f"k{k:g}")
    lo = min(f.support[0] for f in samples.values())
    hi = max(f.support[1] for f in samples.values())
    return SampledNet([], os.path.basename(os.path.normpath(directory)), sched, (lo, hi),
                      samples=samples)


# -- seminorm sequences -------------------------------------------------------

def _log_norm(xi, lm, expo, variant: str) -> float:
    v = canonical_variant(variant)
    if v == "Linf":
        z = lm + expo
        z = z[np.isfinite(z)]
        return float(z.max()) if z.size else -math.inf
    wts = trapezoid_weights(xi)
    if v == "L1":
        return float(log_integral(lm + expo, wts) + math.log(2))
    return float(0.5 * (log_integral(2 * (lm + expo), wts) + math.log(2)))


def log_seminorm_sequence(net: Net, weight: Weight, index: float = 1.0, variant: str = "L1",
                          eps=None) -> np.ndarray:
    """log of int |g^_eps| e^{index * weight(|xi|)} (or sup / L2 form) per eps."""
    eps = net.schedule.eps if eps is None else np.asarray(eps)
    out = []
    for e in eps:
        xi, lm = net.log_spectrum(e)
        expo = index * weight(xi) if index else np.zeros_like(xi)
        out.append(_log_norm(xi, lm, expo, variant))
    return np.array(out)


def log_l2_sequence(net: Net, eps=None) -> np.ndarray:
    """log ||g_eps||_2 by Parseval."""
    eps = net.schedule.eps if eps is None else np.asarray(eps)
    out = []
    for e in eps:
        xi, lm = net.log_spectrum(e)
        v = 0.5 * (log_integral(2 * lm, trapezoid_weights(xi)) + math.log(2)
                   - math.log(2 * math.pi))
        out.append(float(v))
    return np.array(out)


def _window(net: Net, window: int) -> EpsSchedule:
    s = net.schedule
    return EpsSchedule(max(s.k_min, s.k_max - (window - 1) * s.step), s.k_max, s.step)


def _fit(y, x, sched, window, delta) -> ExponentFit:
    return fit_exponent(log_values=y, x=x, schedule=sched, window=window, delta=delta)


# -- verdicts -----------------------------------------------------------------

@dataclass
class NetVerdict:
    cls: str
    case: str
    moderate: bool | None
    negligible: bool | None
    regular: bool | None = None
    evidence: list = field(default_factory=list)
    details: dict = field(default_factory=dict)
    reason: str = ""

    def to_json(self) -> dict:
        return {"class": self.cls, "case": self.case, "moderate": self.moderate,
                "negligible": self.negligible, "regular": self.regular,
                "evidence": self.evidence, "details": self.details, "reason": self.reason}


def _cls(moderate, negligible, regular=None) -> str:
    if moderate is None:
        return "Inconclusive"
    if not moderate:
        return "Neither"
    if negligible:
        return "Negligible"
    if regular:
        return "Regular"
    return "Moderate"


def _s(fit: ExponentFit) -> float:
    return fit.asymptotic_slope


def _row(fit: ExponentFit, **keys) -> dict:
    return {**keys, "fit": fit.to_json()}


@dataclass
class Config:
    delta: float = DELTA
    k_max: float = K_MAX
    window: int = WINDOW
    index_grid: tuple = INDEX_GRID
    roumieu_depth: int = 4
    regular_tol: float = REGULAR_TOL
    variant: str = "L1"

    def to_json(self) -> dict:
        return {"delta": self.delta, "k_max": self.k_max, "window": self.window,
                "index_grid": list(self.index_grid), "roumieu_depth": self.roumieu_depth,
                "regular_tol": self.regular_tol, "variant": self.variant}


def _family(w: Weight, cfg: Config, sched: EpsSchedule) -> list[Weight]:
    return roumieu_family(w, cfg.roumieu_depth, sched)


def _dyadic_witness(s: float, cfg: Config) -> float | None:
    """Smallest dyadic k (any size) with s <= k - delta."""
    if not s < math.inf:
        return None
    need = max(s + cfg.delta, cfg.index_grid[0])
    return 2.0 ** math.ceil(math.log2(need))


def net_evidence(net: Net, w: Weight, case: str, cfg: Config | None = None) -> dict:
    """Exponent fits for every sampled seminorm index on the fit window."""
    cfg = cfg or Config()
    case = canonical_case(case)
    sched = _window(net, cfg.window)
    eps = sched.eps
    x = w(sched.inv)
    if case in ("beurling", "roumieu-inductive"):
        rows = []
        for hh in cfg.index_grid:
            y = log_seminorm_sequence(net, w, hh, cfg.variant, eps)
            rows.append(_row(_fit(y, x, sched, cfg.window, cfg.delta), h=hh))
        return {"case": case, "rows": rows, "schedule": sched.to_json()}
    fam = _family(w, cfg, net.schedule)
    rows = []
    for v1 in fam:
        y = log_seminorm_sequence(net, v1, 1.0, cfg.variant, eps)
        for v2 in fam:
            f = _fit(y, v2(sched.inv), sched, cfg.window, cfg.delta)
            rows.append(_row(f, seminorm_weight=v1.label, eps_weight=v2.label))
    return {"case": case, "rows": rows, "family": [v.label for v in fam],
            "schedule": sched.to_json()}


def _slopes(ev: dict) -> list[float]:
    return [r["_s"] for r in ev["rows"]]


def _attach(ev: dict) -> dict:
    for r in ev["rows"]:
        s = r["fit"]["asymptotic_slope"]
        r["_s"] = float(s)
    return ev


def _pattern(ev: dict, cfg: Config) -> tuple:
    """(moderate, negligible, regular, details) for the evidence table."""
    case = ev["case"]
    rows = ev["rows"]
    if any(r["fit"]["unreliable"] for r in rows):
        return None, None, None, {"reason": "unreliable fit in evidence table"}
    d = cfg.delta
    if case == "beurling":
        s = np.array([r["_s"] for r in rows])
        witnesses = [_dyadic_witness(v, cfg) for v in s]
        moderate = bool(np.all(s < math.inf))
        negligible = moderate and bool(np.all(s <= -cfg.k_max - d))
        regular = moderate and bool(np.max(s) <= cfg.k_max - d)
        det = {"pattern": "moderate: for all h exists k; negligible: for all h, k; "
                          "regular: exists k for all h",
               "k_witness_per_h": witnesses, "sup_slope": float(np.max(s)),
               "alternative_exists_k_forall_h": regular}
        return moderate, negligible, regular, det
    if case == "roumieu-inductive":
        s = np.array([r["_s"] for r in rows])
        m = float(np.min(s))
        moderate = m <= d
        negligible = moderate and m <= -d
        regular = moderate and m <= cfg.regular_tol
        h_best = rows[int(np.argmin(s))]["h"]
        det = {"pattern": "moderate: for all k exists h; negligible: exists k, h; "
                          "regular: exists h for all k",
               "min_slope": m, "h_witness": h_best}
        return moderate, negligible, regular, det
    fam = ev["family"]
    tab = {(r["seminorm_weight"], r["eps_weight"]): r["_s"] for r in rows}
    low = fam[:-1] if len(fam) > 1 else fam
    moderate = all(any(tab[(v1, v2)] <= 1 - d for v2 in fam) for v1 in low)
    negligible = moderate and all(tab[(v1, v2)] <= -1 - d for v1 in fam for v2 in fam)
    reg_w = [v1 for v1 in fam if all(tab[(v2, v1)] <= 1 - d for v2 in fam)]
    regular = moderate and bool(reg_w)
    det = {"pattern": "moderate: for all w1 exists w2; negligible: for all w1, w2; "
                      "regular: exists w1 for all w2",
           "regular_witness": reg_w[0] if reg_w else None}
    return moderate, negligible, regular, det


def classify_net(net: Net, w: Weight, case: str = "beurling", variant: str = "L1",
                 cfg: Config | None = None) -> NetVerdict:
    """Moderate / Negligible / Neither with the evidence table of fitted exponents."""
    cfg = cfg or Config()
    if variant != cfg.variant:
        cfg = Config(**{**cfg.__dict__, "variant": variant})
    case = canonical_case(case)
    ev = _attach(net_evidence(net, w, case, cfg))
    mod, neg, reg, det = _pattern(ev, cfg)
    det["config"] = cfg.to_json()
    v = NetVerdict(_cls(mod, neg), case, mod, neg, None, ev["rows"], det,
                   det.get("reason", ""))
    v._regular = reg
    return v


def classify_regular(net: Net, w: Weight, case: str = "beurling", variant: str = "L1",
                     cfg: Config | None = None) -> NetVerdict:
    """Regular / Moderate / Negligible / Neither; roumieu presentations are cross-checked."""
    case = canonical_case(case)
    v = classify_net(net, w, case, variant, cfg)
    v.regular = v._regular
    v.cls = _cls(v.moderate, v.negligible, v.regular) if v.cls != "Negligible" else v.cls
    if case != "beurling":
        other = "roumieu-projective" if case == "roumieu-inductive" else "roumieu-inductive"
        o = classify_net(net, w, other, variant, cfg)
        v.details["crosscheck"] = {"case": other, "regular": o._regular,
                                   "agree": o._regular == v.regular}
    return v


def crosscheck_roumieu(net: Net, w: Weight, variant: str = "L1",
                       cfg: Config | None = None) -> dict:
    """Inductive versus projective Roumieu verdicts (moderate, negligible, regular)."""
    a = classify_regular(net, w, "roumieu-inductive", variant, cfg)
    b = classify_regular(net, w, "roumieu-projective", variant, cfg)
    if "Inconclusive" in (a.cls, b.cls):
        status = "inconclusive"
    else:
        same = (a.moderate, a.negligible, a.regular) == (b.moderate, b.negligible, b.regular)
        status = "agree" if same else "disagree"
    return {"net": net.label, "inductive": a.cls, "projective": b.cls, "status": status,
            "flags": {"inductive": [a.moderate, a.negligible, a.regular],
                      "projective": [b.moderate, b.negligible, b.regular]}}


def negligible_via_l2(net: Net, w: Weight, case: str = "beurling",
                      cfg: Config | None = None, moderate: bool | None = None) -> dict:
    """Negligibility decided from ||g_eps||_2 alone (nets already known moderate)."""
    cfg = cfg or Config()
    case = canonical_case(case)
    if moderate is None:
        moderate = classify_net(net, w, case, cfg=cfg).moderate
    if not moderate:
        raise NetError(f"{net.label}: L2 criterion needs a moderate net")
    sched = _window(net, cfg.window)
    y = log_l2_sequence(net, sched.eps)
    d = cfg.delta
    if case == "roumieu-projective":
        fam = _family(w, cfg, net.schedule)
        fits = [_fit(y, v(sched.inv), sched, cfg.window, d) for v in fam]
        neg = all(_s(f) <= -1 - d for f in fits)
        ev = [_row(f, eps_weight=v.label) for f, v in zip(fits, fam)]
    else:
        f = _fit(y, w(sched.inv), sched, cfg.window, d)
        s = _s(f)
        neg = s <= -cfg.k_max - d if case == "beurling" else s <= -d
        ev = [_row(f)]
    return {"net": net.label, "case": case, "negligible": bool(neg), "evidence": ev}


def sharp_ball_membership(net: Net, w: Weight, case: str = "beurling", n: int = 1,
                          m: float = 1.0, l: float = 1.0, w1: Weight | None = None,
                          w2: Weight | None = None, cfg: Config | None = None) -> dict:
    """Membership in B(n, m, l) (beurling) or B(K, w1, w2) (roumieu).

    Omega_n = [-n L/8, n L/8] with L = 16; the net's support must lie inside.
    """
    cfg = cfg or Config()
    case = canonical_case(case)
    half = n * 16.0 / 8
    a, b = net.support
    res = {"net": net.label, "case": case, "Omega_n": [-half, half]}
    if a < -half or b > half:
        res.update(member=False, flag="support not inside Omega_n")
        return res
    sched = _window(net, cfg.window)
    if case == "beurling":
        y = log_seminorm_sequence(net, w, m, cfg.variant, sched.eps)
        f = _fit(y, w(sched.inv), sched, cfg.window, cfg.delta)
        member = _s(f) <= -l - cfg.delta
        res.update(m=m, l=l)
    else:
        fam = _family(w, cfg, net.schedule)
        w1 = w1 or fam[0]
        w2 = w2 or fam[0]
        y = log_seminorm_sequence(net, w1, 1.0, cfg.variant, sched.eps)
        f = _fit(y, w2(sched.inv), sched, cfg.window, cfg.delta)
        member = _s(f) <= -1 - cfg.delta
        res.update(w1=w1.label, w2=w2.label)
    if f.unreliable:
        res.update(member=False, flag="unreliable fit", fit=f.to_json())
        return res
    res.update(member=bool(member), fit=f.to_json())
    return res


# -- closure operations -------------------------------------------------------

def combine_nets(a: Net, b: Net | None = None, op: str = "product", shift: float = 0.0,
                 log_r: Callable | None = None, sign: complex = 1.0) -> Net:
    """product(a, b), derivative(a), translate(a, shift) or scalar(a, r_eps).

    ``log_r`` gives log|r_eps| as a function of eps; ``sign`` its phase.
    """
    if op == "product":
        if b is None:
            raise NetError("product needs two nets")
        if a.schedule != b.schedule:
            raise NetError("nets live on different schedules")
        terms = []
        for ta in a.terms:
            for tb in b.terms:
                terms.append(_product_term(ta, tb))
        lo = max(a.support[0], b.support[0])
        hi = min(a.support[1], b.support[1])
        return Net(terms, f"({a.label})*({b.label})", a.schedule, (lo, max(lo, hi)))
    if op == "derivative":
        return _copy(a, [t.with_factor(derivative_factor(1)) for t in a.terms],
                     f"d/dx {a.label}")
    if op == "translate":
        net = _copy(a, [t.with_factor(translation_factor(shift)) for t in a.terms],
                    f"{a.label}(x-{shift:g})")
        net.support = (a.support[0] + shift, a.support[1] + shift)
        return net
    if op == "scalar":
        if log_r is None:
            raise NetError("scalar multiplication needs log_r")
        terms = [_scaled_term(t, log_r, sign) for t in a.terms]
        return _copy(a, terms, f"r*{a.label}")
    if op == "difference":
        return _copy(a, a.terms + [_negated(t) for t in b.terms], f"{a.label}-{b.label}")
    raise NetError(f"unknown net operation {op!r}")


def _negated(t: Term) -> Term:
    return _ScaledTerm(t, lambda e: 0.0, -1.0)


class _ScaledTerm(Term):
    def __init__(self, inner: Term, log_r: Callable, sign: complex):
        super().__init__(lambda e: 0.0, [], 1.0, None)
        self.inner, self.log_r, self.sign = inner, log_r, sign

    def amp(self, eps):
        return self.inner.amp(eps) + float(self.log_r(eps))

    def band(self, eps, tails=True):
        return self.inner.band(eps, tails)

    def grid_factors(self):
        return self.inner.grid_factors()

    def __call__(self, xi, eps):
        return self.sign * self.inner(xi, eps)

    def log_eval(self, xi, eps):
        a, p = self.inner.log_eval(xi, eps)
        return a, p * self.sign

    def with_factor(self, f):
        return _ScaledTerm(self.inner.with_factor(f), self.log_r, self.sign)

    def reparam(self, eta):
        lr = self.log_r
        return _ScaledTerm(self.inner.reparam(eta), lambda e: lr(eta(e)), self.sign)


def _scaled_term(t: Term, log_r: Callable, sign: complex) -> Term:
    return _ScaledTerm(t, log_r, sign)


def _plain_grid(t: Term) -> bool:
    return (type(t) is Term and t.eps_map is None and t.factors
            and all(isinstance(f, GridFactor) for f in t.factors))


def _product_term(ta: Term, tb: Term) -> Term:
    # fixed grid functions multiply exactly in space
    if _plain_grid(ta) and _plain_grid(tb) and len(ta.factors) == len(tb.factors) == 1:
        fa, fb = ta.factors[0].f, tb.factors[0].f
        if (fa.L, fa.N) == (fb.L, fb.N):
            lo = max(fa.support[0], fb.support[0])
            hi = min(fa.support[1], fb.support[1])
            prod = fa.samples * fb.samples
            if hi < lo:
                prod = np.zeros_like(prod)
                lo = hi = 0.0
            g = GridFunction(prod, fa.L, (lo, hi), f"{fa.label}*{fb.label}")
            la, lb = ta.log_amp, tb.log_amp
            return Term(lambda e: la(e) + lb(e), [GridFactor(g)], ta.coef * tb.coef)
    return ConvTerm(ta, tb)
