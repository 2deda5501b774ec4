"""FFT grid machinery, Fourier seminorms, bump catalog, mollifiers and
test-function class membership (one space dimension)."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import logsumexp

from .weights import Weight, make_weight

DEFAULT_L = 16.0
DEFAULT_N = 2 ** 14
NOISE_FLOOR = 1e-13
MAX_EXPONENT = 700.0
MARGIN = 0.05


class GridError(ValueError):
    """Invalid grid, support or window."""


class SeminormOverflow(OverflowError):
    def __init__(self, msg: str, max_l: float):
        super().__init__(msg)
        self.max_l = max_l


def _is_pow2(n: int) -> bool:
    return n > 0 and (n & (n - 1)) == 0


@dataclass(eq=False)
class GridFunction:
    """Samples at x_j = -L + j h, j = 0..N-1, h = 2L/N, zero outside ``support``.

    ``sampler`` (optional) regenerates the samples on a finer grid.
    """

    samples: np.ndarray
    L: float
    support: tuple
    label: str = ""
    sampler: Callable | None = field(default=None, repr=False)

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=complex)
        if not _is_pow2(self.N):
            raise GridError(f"N = {self.N} is not a power of two")
        a, b = self.support
        if not (-self.L <= a <= b <= self.L):
            raise GridError(f"support {self.support} outside window [-{self.L}, {self.L}]")
        outside = (self.x < a) | (self.x > b)
        if np.any(self.samples[outside] != 0):
            raise GridError(f"{self.label}: nonzero samples outside declared support")

    @property
    def N(self) -> int:
        return int(self.samples.size)

    @property
    def h(self) -> float:
        return 2 * self.L / self.N

    @property
    def x(self) -> np.ndarray:
        return -self.L + self.h * np.arange(self.N)

    @classmethod
    def from_callable(cls, f, support, L: float = DEFAULT_L, N: int = DEFAULT_N,
                      label: str = "") -> "GridFunction":
        a, b = support
        h = 2 * L / N
        x = -L + h * np.arange(N)
        vals = np.zeros(N, dtype=complex)
        m = (x >= a) & (x <= b)
        vals[m] = f(x[m])

        def sampler(L2, N2):
            return cls.from_callable(f, support, L2, N2, label)

        return cls(vals, L, (a, b), label, sampler)

    def refine(self, factor: int = 2) -> "GridFunction":
        if self.sampler is None:
            raise GridError(f"{self.label}: no sampler available for refinement")
        return self.sampler(self.L, self.N * factor)

    def translate(self, c: float) -> "GridFunction":
        """f(x - c) for a shift c that is a multiple of the grid step."""
        k = c / self.h
        if abs(k - round(k)) > 1e-9:
            raise GridError("translation is not a multiple of the grid step")
        a, b = self.support
        src = self.sampler

        def sampler(L2, N2):
            return src(L2, N2).translate(c)

        return GridFunction(np.roll(self.samples, int(round(k))), self.L, (a + c, b + c),
                            f"{self.label}(x-{c:g})", sampler if src is not None else None)

    def to_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            wr = csv.writer(fh)
            wr.writerow(["x", "re", "im"])
            for xv, v in zip(self.x, self.samples):
                wr.writerow([repr(float(xv)), repr(float(v.real)), repr(float(v.imag))])

    @classmethod
    def from_csv(cls, path: str, label: str | None = None) -> "GridFunction":
        data = np.loadtxt(path, delimiter=",", skiprows=1)
        x, vals = data[:, 0], data[:, 1] + 1j * data[:, 2]
        N = x.size
        h = x[1] - x[0]
        L = -x[0]
        if abs(2 * L / N - h) > 1e-9 * h:
            raise GridError("CSV abscissae are not the standard grid")
        nz = np.nonzero(vals)[0]
        support = (float(x[nz[0]]), float(x[nz[-1]])) if nz.size else (0.0, 0.0)
        return cls(vals, float(L), support, label or path)


@dataclass
class SpectralProfile:
    """f^(xi) = int f(x) e^{-i x xi} dx on the FFT frequency grid (ascending)."""

    xi: np.ndarray
    values: np.ndarray
    h: float
    L: float
    parseval_error: float
    convention: str = "fhat(xi) = int f(x) exp(-i x xi) dx, trapezoid-scaled FFT"

    @property
    def magnitudes(self) -> np.ndarray:
        return np.abs(self.values)

    @property
    def xi_max(self) -> float:
        return math.pi / self.h

    @property
    def dxi(self) -> float:
        return float(self.xi[1] - self.xi[0])


def frequency_grid(L: float, N: int) -> np.ndarray:
    h = 2 * L / N
    return np.fft.fftshift(2 * np.pi * np.fft.fftfreq(N, d=h))


def spectrum(f: GridFunction, edge_guard: int = 2) -> SpectralProfile:
    """Spectrum under the fixed convention, with the Parseval residual."""
    a, b = f.support
    if a < -f.L + edge_guard * f.h or b > f.L - edge_guard * f.h:
        raise GridError(f"{f.label}: support {f.support} touches the window edge")
    N, h, L = f.N, f.h, f.L
    xi = 2 * np.pi * np.fft.fftfreq(N, d=h)
    vals = h * np.exp(1j * L * xi) * np.fft.fft(f.samples)
    xi, vals = np.fft.fftshift(xi), np.fft.fftshift(vals)
    lhs = h * np.sum(np.abs(f.samples) ** 2)
    rhs = (xi[1] - xi[0]) * np.sum(np.abs(vals) ** 2) / (2 * np.pi)
    err = abs(lhs - rhs) / lhs if lhs > 0 else abs(rhs)
    return SpectralProfile(xi, vals, h, L, float(err))


def inverse_spectrum(xi: np.ndarray, values: np.ndarray, L: float) -> np.ndarray:
    """Samples on the standard grid from spectrum values on the ascending grid."""
    N = xi.size
    h = 2 * L / N
    v = np.fft.ifftshift(values)
    xi_u = np.fft.ifftshift(xi)
    return np.fft.ifft(v * np.exp(-1j * L * xi_u)) / h


# -- seminorms ---------------------------------------------------------------

VARIANTS = ("L1", "Linf", "L2")
_ALIASES = {"a": "L1", "b": "Linf", "c": "L2", "l1": "L1", "linf": "Linf", "l2": "L2"}


def canonical_variant(v: str) -> str:
    if v in VARIANTS:
        return v
    try:
        return _ALIASES[v.lower()]
    except KeyError:
        raise ValueError(f"unknown seminorm variant {v!r}") from None


@dataclass(frozen=True)
class SeminormSpec:
    weight: Weight
    l: float
    variant: str = "L1"
    K: tuple | None = None
    noise_floor: float = NOISE_FLOOR

    def __post_init__(self):
        if self.l < 0:
            raise ValueError("seminorm index must be >= 0")
        object.__setattr__(self, "variant", canonical_variant(self.variant))


def _floored(mag: np.ndarray, floor: float) -> np.ndarray:
    if mag.size == 0 or floor <= 0:
        return mag
    top = mag.max()
    return np.where(mag >= floor * top, mag, 0.0)


def log_seminorm_values(xi: np.ndarray, log_mag: np.ndarray, exponent: np.ndarray,
                        variant: str, dxi: float) -> float:
    """log of the seminorm given log|f^| and the exponent l w(|xi|) per node."""
    variant = canonical_variant(variant)
    with np.errstate(invalid="ignore"):
        if variant == "Linf":
            v = log_mag + exponent
            v = v[np.isfinite(v)]
            return float(v.max()) if v.size else -math.inf
        if variant == "L1":
            v = log_mag + exponent
            v = v[np.isfinite(v)]
            return float(logsumexp(v) + math.log(dxi)) if v.size else -math.inf
        v = 2 * (log_mag + exponent)
        v = v[np.isfinite(v)]
        return float(0.5 * (logsumexp(v) + math.log(dxi))) if v.size else -math.inf


def log_seminorm(f: GridFunction | SpectralProfile, spec: SeminormSpec) -> float:
    prof = f if isinstance(f, SpectralProfile) else spectrum(f)
    mag = _floored(prof.magnitudes, spec.noise_floor)
    with np.errstate(divide="ignore"):
        lm = np.log(mag)
    expo = spec.l * spec.weight(np.abs(prof.xi)) if spec.l > 0 else np.zeros_like(prof.xi)
    return log_seminorm_values(prof.xi, lm, expo, spec.variant, prof.dxi)


def max_index(w: Weight, xi_max: float) -> float:
    return MAX_EXPONENT / max(w(xi_max), 1e-300)


def seminorm(f: GridFunction | SpectralProfile, spec: SeminormSpec) -> float:
    """Weighted Fourier seminorm: int |f^| e^{l w}, sup |f^| e^{l w} or the L2 form.

    Magnitudes below ``noise_floor`` times the maximum are treated as zero;
    the truncation is part of the result's meaning on a finite grid.
    """
    prof = f if isinstance(f, SpectralProfile) else spectrum(f)
    lmax = max_index(spec.weight, prof.xi_max)
    if spec.l > lmax:
        raise SeminormOverflow(
            f"e^(l w(xi_max)) overflows for l = {spec.l:g}; max l = {lmax:.6g}", lmax)
    mag = _floored(prof.magnitudes, spec.noise_floor)
    fac = np.exp(spec.l * spec.weight(np.abs(prof.xi))) if spec.l > 0 else 1.0
    g = mag * fac
    if spec.variant == "Linf":
        return float(g.max())
    if spec.variant == "L1":
        return float(np.sum(g) * prof.dxi)
    return float(math.sqrt(np.sum(g ** 2) * prof.dxi))


def seminorm_refinement(f: GridFunction, spec: SeminormSpec, levels: int = 2) -> dict:
    """Seminorm on N, 2N, 4N, ...; divergent when it grows by more than 10%
    under each of the successive refinements (or overflows)."""
    vals: list = []
    g = f
    for i in range(levels + 1):
        if i:
            g = g.refine()
        try:
            vals.append(seminorm(g, spec))
        except SeminormOverflow:
            vals.append(math.inf)
    growth = [b / a if a > 0 else math.inf for a, b in zip(vals[:-1], vals[1:])]
    divergent = all(r > 1.10 for r in growth)
    stable = all(abs(r - 1) < 0.01 for r in growth)
    return {"values": vals, "growth": growth, "divergent": divergent, "stable": stable}


def noise_cutoff(prof: SpectralProfile, floor: float = NOISE_FLOOR) -> float:
    """Largest |xi| at which |f^| is above the noise floor."""
    mag = prof.magnitudes
    if mag.max() == 0:
        return 0.0
    keep = mag >= floor * mag.max()
    return float(np.max(np.abs(prof.xi[keep])))


def norm_equivalence_report(f: GridFunction, w: Weight, l: float,
                            refine: bool = True) -> dict:
    """Measured constants between the three seminorm families.

    C1 = |f|_l / |f|^inf_l, C2 = |f|_l / |f|^inf_{2l} (bounded by
    int e^{-l w}), C3 = |f|_l / |f|^2_l, C4 = |f|_l / |f|^2_{2l}.
    """
    prof = spectrum(f)
    rep: dict = {"label": f.label, "weight": w.label, "l": l, "partial": False}

    def measure(p):
        vals = {}
        for name, var, idx in (("L1_l", "L1", l), ("Linf_l", "Linf", l),
                               ("Linf_2l", "Linf", 2 * l), ("L2_l", "L2", l),
                               ("L2_2l", "L2", 2 * l)):
            try:
                vals[name] = seminorm(p, SeminormSpec(w, idx, var))
            except SeminormOverflow:
                vals[name] = None
        return vals

    vals = measure(prof)
    rep["seminorms"] = vals
    if any(v is None for v in vals.values()):
        rep["partial"] = True
        return rep

    def ratios(v):
        def q(a, b):
            return None if v[b] == 0 else v[a] / v[b]
        return {"C1": q("L1_l", "Linf_l"), "C2": q("L1_l", "Linf_2l"),
                "C3": q("L1_l", "L2_l"), "C4": q("L1_l", "L2_2l")}

    r = ratios(vals)
    rep["ratios"] = r
    rep["undefined"] = all(v is None for v in r.values())
    xi = prof.xi
    c2_bound = float(np.sum(np.exp(-l * w(np.abs(xi)))) * prof.dxi)
    rep["C2_bound"] = c2_bound
    rep["C2_ok"] = r["C2"] is None or r["C2"] <= c2_bound * (1 + 1e-9)
    rep["C1_positive"] = r["C1"] is None or r["C1"] > 0
    if refine and f.sampler is not None and not rep["undefined"]:
        r2 = ratios(measure(spectrum(f.refine())))
        rep["ratios_refined"] = r2
        rep["refinement_change"] = {k: abs(r2[k] - r[k]) / abs(r[k]) for k in r}
    return rep


# -- catalog -----------------------------------------------------------------

def gevrey_profile(y: np.ndarray, p: float = 1.0) -> np.ndarray:
    out = np.zeros_like(y, dtype=float)
    m = np.abs(y) < 1
    out[m] = np.exp(-1.0 / (1.0 - y[m] ** 2) ** p)
    return out


@dataclass
class DecayFit:
    s: float
    c: float
    b: float
    a: float
    xi_range: tuple
    residual: float


def fit_fourier_decay(prof: SpectralProfile, floor: float = NOISE_FLOOR,
                      s: float | None = None) -> DecayFit | None:
    """Fit log env ~ a - b log xi - c xi^(1/s) over the last two decades below
    the noise cutoff. env is the running maximum of |f^| from the right.
    A known exponent s is held fixed; otherwise it is scanned."""
    k = prof.xi > 0
    xi, mag = prof.xi[k], prof.magnitudes[k]
    if mag.size == 0 or mag.max() == 0:
        return None
    env = np.maximum.accumulate(mag[::-1])[::-1]
    top = max(env[0], prof.magnitudes.max())
    band = xi[env >= floor * top]
    if band.size == 0:
        return None
    hi = band[-1]
    m = (xi >= hi / 100) & (xi <= hi)
    X, Y = xi[m], np.log(env[m])
    best = None
    for s in ([s] if s is not None else np.linspace(1.05, 5.0, 396)):
        A = np.column_stack([np.ones_like(X), -np.log(X), -X ** (1 / s)])
        coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
        res = float(np.sqrt(np.mean((A @ coef - Y) ** 2)))
        if best is None or res < best[0]:
            best = (res, s, coef)
    res, s, coef = best
    return DecayFit(s=float(s), c=float(coef[2]), b=float(coef[1]), a=float(coef[0]),
                    xi_range=(float(hi / 100), float(hi)), residual=res)


def make_bump(kind: str = "gevrey", center: float = 0.0, radius: float = 1.0,
              p: float = 1.0, L: float = DEFAULT_L, N: int = DEFAULT_N,
              scale: float = 1.0) -> GridFunction:
    """Catalog test functions with exact-zero tails.

    gevrey: exp(-1/(1-y^2)^p), y = (x - center)/radius (decay exponent
    s = (p+1)/p); polynomial: (1-y^2)^p; triangle: (1-|y|).
    """
    if radius <= 0:
        raise GridError("radius must be positive")
    if kind == "gevrey":
        def f(x):
            return scale * gevrey_profile((x - center) / radius, p)
    elif kind == "polynomial":
        def f(x):
            y = (x - center) / radius
            return scale * np.where(np.abs(y) <= 1, (1 - y ** 2) ** p, 0.0)
    elif kind == "triangle":
        def f(x):
            y = (x - center) / radius
            return scale * np.maximum(1 - np.abs(y), 0.0)
    else:
        raise GridError(f"unknown bump kind {kind!r}")
    label = f"{kind}(c={center:g},r={radius:g}" + (f",p={p:g})" if kind != "triangle" else ")")
    g = GridFunction.from_callable(f, (center - radius, center + radius), L, N, label)
    g.decay = fit_fourier_decay(spectrum(g), s=(p + 1) / p if kind == "gevrey" else None)
    return g


def smooth_step(s: np.ndarray) -> np.ndarray:
    """C-infinity step: 0 for s <= 0, 1 for s >= 1, built from e^{-1/s}."""
    s = np.clip(np.asarray(s, dtype=float), 0.0, 1.0)
    with np.errstate(divide="ignore", over="ignore"):
        a = np.where(s > 0, np.exp(-1.0 / np.where(s > 0, s, 1.0)), 0.0)
        b = np.where(s < 1, np.exp(-1.0 / np.where(s < 1, 1 - s, 1.0)), 0.0)
    return a / (a + b)


def mollifier_hat(xi, inner: float = 1.0, outer: float = 2.0) -> np.ndarray:
    """phi^: 1 on |xi| <= inner, smooth step down to 0 at |xi| = outer."""
    a = np.abs(np.asarray(xi, dtype=float))
    return np.where(a <= inner, 1.0, np.where(a >= outer, 0.0,
                                              smooth_step((outer - a) / (outer - inner))))


@dataclass
class Mollifier:
    phi: GridFunction
    inner: float
    outer: float
    weight_label: str
    checks: dict

    def hat(self, xi):
        return mollifier_hat(xi, self.inner, self.outer)


MOLLIFIER_L = 1024.0
MOLLIFIER_N = 2 ** 17


def make_mollifier(w: Weight | str | None = None, inner: float = 1.0, outer: float = 2.0,
                   L: float = MOLLIFIER_L, N: int = MOLLIFIER_N,
                   tail_tol: float = 1e-10) -> Mollifier:
    """Mollifier built in frequency space: phi^ = 1 near 0, 0 for |xi| >= outer.

    phi decays only like exp(-c sqrt|x|), hence the wide default window.
    """
    wl = make_weight(w).label if w is not None else "none"
    xi = frequency_grid(L, N)
    vals = inverse_spectrum(xi, mollifier_hat(xi, inner, outer), L).real
    h = 2 * L / N
    x = -L + h * np.arange(N)
    tail = float(h * np.sum(np.abs(vals[np.abs(x) > L / 2])))
    if tail > tail_tol:
        raise GridError(f"mollifier tail mass {tail:.3g} beyond L/2 exceeds {tail_tol:g}; "
                        "enlarge the window")
    phi = GridFunction(vals.astype(complex), L, (-L, L), f"mollifier({inner:g},{outer:g})")
    checks = mollifier_checks(phi, inner)
    checks["tail_mass"] = tail
    return Mollifier(phi, inner, outer, wl, checks)


def mollifier_checks(phi: GridFunction, inner: float, kmax: int = 8,
                     floor: float = 1e-13) -> dict:
    """Mass, spatial moments (normalised) and spectral flatness at 0."""
    x, v, h = phi.x, phi.samples.real, phi.h
    mass = float(h * np.sum(v))
    X = float(np.max(np.abs(x[np.abs(v) > floor * np.abs(v).max()])))
    m = np.abs(x) <= X
    spatial = {}
    for k in range(1, kmax + 1):
        mom = float(h * np.sum(x[m] ** k * v[m]))
        nrm = float(h * np.sum(np.abs(x[m]) ** k * np.abs(v[m])))
        spatial[k] = {"moment": mom, "normalised": mom / nrm}
    # spectrum recomputed from the samples; x^k moments are i^k d^k phi^/dxi^k at 0
    N, L = phi.N, phi.L
    xi = 2 * np.pi * np.fft.fftfreq(N, d=h)
    vals = h * np.exp(1j * L * xi) * np.fft.fft(phi.samples)
    xi, vals = np.fft.fftshift(xi), np.fft.fftshift(vals)
    dxi = xi[1] - xi[0]
    i0 = int(np.argmin(np.abs(xi)))
    half = int(0.5 * inner / dxi)
    seg = vals[i0 - half:i0 + half + 1]
    flat = float(np.max(np.abs(seg - 1)))
    return {"mass": mass, "effective_support": X, "spatial_moments": spatial,
            "spectral_flatness": flat, "flat_window": float(half * dxi)}


# -- membership --------------------------------------------------------------

BEURLING_L = (0.25, 0.5, 1.0, 2.0)
ROUMIEU_L = tuple(2.0 ** j for j in range(-6, 2))


def _decay_rates(prof: SpectralProfile, w: Weight, floor: float = NOISE_FLOOR):
    """Decay rates of the envelope against w over the last two decades below
    the noise cutoff: c = -d log env / d w."""
    k = prof.xi > 0
    xi, mag = prof.xi[k], prof.magnitudes[k]
    env = np.maximum.accumulate(mag[::-1])[::-1]
    top = prof.magnitudes.max()
    band = xi[env >= floor * top]
    hi = band[-1]
    out = []
    for lo_f, hi_f in ((0.01, 0.1), (0.1, 1.0)):
        m = (xi >= hi * lo_f) & (xi <= hi * hi_f)
        X, Y = w(xi[m]), np.log(env[m])
        A = np.column_stack([X, np.ones_like(X)])
        coef, *_ = np.linalg.lstsq(A, Y, rcond=None)
        out.append(-float(coef[0]))
    return out[0], out[1], float(hi)


@dataclass
class MembershipVerdict:
    member: bool | None
    case: str
    evidence: dict

    @property
    def label(self) -> str:
        return {True: "member", False: "non-member", None: "inconclusive"}[self.member]


def _rate_cell(prof, w, l, delta, refined_prof=None):
    c_prev, c_last, band = _decay_rates(prof, w)
    collapse = c_last < 0.5 * c_prev
    # a rate that keeps growing across decades means decay faster than any e^{-l w}
    growing = c_prev > 0 and c_last >= c_prev * (1 + delta)
    cell = {"l": l, "rate_prev": c_prev, "rate_last": c_last, "band": band,
            "collapse": bool(collapse), "growing": bool(growing)}
    if collapse:
        cell["ok"] = False
    elif growing or c_last >= l * (1 + delta):
        cell["ok"] = True
    elif c_last <= l * (1 - delta):
        cell["ok"] = False
    else:
        cell["ok"] = None
    if cell["ok"] and refined_prof is not None:
        spec = SeminormSpec(w, l, "L1")
        try:
            a, b = seminorm(prof, spec), seminorm(refined_prof, spec)
            cell["seminorm"], cell["seminorm_refined"] = a, b
            cell["stable"] = abs(b - a) <= 0.01 * abs(a)
            if not cell["stable"]:
                cell["ok"] = False
        except SeminormOverflow:
            cell["ok"] = False
    return cell


def test_membership(f: GridFunction, w: Weight, case: str = "roumieu",
                    delta: float = MARGIN, weaker=None) -> MembershipVerdict:
    """Class membership from Fourier decay rates measured against w.

    beurling: every l in BEURLING_L; roumieu: some l in ROUMIEU_L;
    roumieu-projective: index 1 against each of the supplied (or constructed)
    weaker weights. A collapsing rate (polynomial decay) is a non-member.
    """
    prof = spectrum(f)
    if prof.magnitudes.max() == 0:
        return MembershipVerdict(True, case, {"reason": "zero function"})
    try:
        refined = spectrum(f.refine()) if f.sampler is not None else None
    except GridError:
        refined = None
    ev: dict = {"weight": w.label, "cells": [], "refined": refined is not None}
    if case == "beurling":
        cells = [_rate_cell(prof, w, l, delta, refined) for l in BEURLING_L]
        oks = [c["ok"] for c in cells]
        member = False if False in oks else (None if None in oks else True)
    elif case == "roumieu":
        cells = [_rate_cell(prof, w, l, delta, refined) for l in ROUMIEU_L]
        oks = [c["ok"] for c in cells]
        member = True if True in oks else (None if None in oks else False)
    elif case in ("roumieu-projective", "roumieu-proj"):
        ws = weaker if weaker is not None else default_weaker_family(w)
        cells = []
        for wk in ws:
            c = _rate_cell(prof, wk, 1.0, delta, refined)
            c["weaker"] = wk.label
            cells.append(c)
        oks = [c["ok"] for c in cells]
        member = False if False in oks else (None if None in oks else True)
    else:
        raise ValueError(f"unknown case {case!r}")
    ev["cells"] = cells
    return MembershipVerdict(member, case, ev)


test_membership.__test__ = False

_WEAKER_CACHE: dict = {}


def default_weaker_family(w: Weight) -> list[Weight]:
    """Three constructed weights strongly below w."""
    from .constructions import build_weaker, geometric_mean
    key = (w.label, w.T_cap)
    if key not in _WEAKER_CACHE:
        w1 = build_weaker(w)
        w2 = build_weaker(w1)
        _WEAKER_CACHE[key] = [geometric_mean(w1, w), w1, w2]
    return _WEAKER_CACHE[key]
