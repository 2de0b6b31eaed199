"""Slow reference evaluations by nested real-line quadrature.

These share no contour code with the closed forms: the end-to-end law is
rebuilt from ``P(gamma < g) = int F_F(g (1 + C/x)) f_R(x) dx`` with the FSO
CDF tabulated once and the RF density in its Bessel-K form.
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate, interpolate, special

from .e2e_metrics import E2EParams, ModulationScheme, capacity_c0
from .fso_link import fso_snr_cdf, fso_snr_pdf
from .rf_link import rf_snr_pdf_bessel


def _rf_support(p: E2EParams):
    """Quadrature breakpoints around the bulk of the RF SNR law."""
    mean = p.rf.gamma_bar * p.rf.k * p.rf.m / p.rf.psi ** 2
    sd = mean * math.sqrt(1 / p.rf.k + 1 / p.rf.m + 1 / (p.rf.k * p.rf.m))
    hi = mean + 40 * sd
    pts = sorted({max(mean + j * sd, mean * 1e-3) for j in (-3, -1, 0, 1, 3, 8)})
    return hi, [v for v in pts if v < hi]


class FsoCdfTable:
    """FSO SNR CDF tabulated in (log gamma, log F) with a power-law lower tail."""

    def __init__(self, p: E2EParams, n: int = 600):
        f = p.fso
        mean_f = p.gamma_h * (f.n_f * f.a0 * f.h_p) ** p.r
        self.lg = np.linspace(math.log(mean_f) - 25.0, math.log(mean_f) + 12.0, n)
        vals = fso_snr_cdf(np.exp(self.lg), p.gamma_h, f)
        keep = vals > 0
        self.lg, vals = self.lg[keep], vals[keep]
        self._spline = interpolate.CubicSpline(self.lg, np.log(vals))
        self._slope = min(f.alpha, f.beta, f.w) / p.r

    def __call__(self, g):
        lg = np.log(np.asarray(g, dtype=float))
        inside = np.clip(lg, self.lg[0], self.lg[-1])
        out = self._spline(inside) + self._slope * np.minimum(lg - self.lg[0], 0.0)
        return np.where(lg > self.lg[-1], 1.0, np.exp(out))


def cdf_nested(gamma: float, p: E2EParams, epsrel: float = 1e-11,
               table: FsoCdfTable | None = None) -> float:
    hi, pts = _rf_support(p)
    if table is None:
        def ff(v):
            return fso_snr_cdf(v, p.gamma_h, p.fso)
    else:
        ff = table

    def f(x):
        return ff(gamma * (1 + p.c / x)) * rf_snr_pdf_bessel(x, p.rf)

    return integrate.quad(f, 0, hi, points=pts, limit=500, epsrel=epsrel, epsabs=0)[0]


def pdf_nested(gamma: float, p: E2EParams, epsrel: float = 1e-11) -> float:
    hi, pts = _rf_support(p)

    def f(x):
        u = 1 + p.c / x
        return u * fso_snr_pdf(gamma * u, p.gamma_h, p.fso) * rf_snr_pdf_bessel(x, p.rf)

    return integrate.quad(f, 0, hi, points=pts, limit=500, epsrel=epsrel, epsabs=0)[0]


class CdfTable:
    """End-to-end CDF on a log grid, interpolated in (log gamma, log F)."""

    def __init__(self, p: E2EParams, lo: float, hi: float, n: int = 161):
        self.g = np.logspace(math.log10(lo), math.log10(hi), n)
        fso = FsoCdfTable(p)
        vals = np.array([cdf_nested(g, p, epsrel=1e-10, table=fso) for g in self.g])
        lg = np.log(self.g)
        lo_ok = vals > 0
        self._lf = interpolate.PchipInterpolator(lg[lo_ok], np.log(vals[lo_ok]))
        hi_ok = 1 - vals > 1e-13
        self._l1mf = interpolate.PchipInterpolator(lg[hi_ok], np.log(1 - vals[hi_ok]))
        self._top = lg[hi_ok][-1]
        self.vals = vals

    def cdf(self, g):
        return np.exp(self._lf(np.log(g)))

    def ccdf(self, g):
        lg = np.log(g)
        return np.where(lg > self._top, 0.0, np.exp(self._l1mf(np.minimum(lg, self._top))))


def _gamma_range(p: E2EParams):
    """SNR interval outside which the end-to-end CDF is 0 or 1 to double precision."""
    f = p.fso
    mean_f = p.gamma_h * (f.n_f * f.a0 * f.h_p) ** p.r
    return mean_f * 1e-12, mean_f * 1e4


def ber_quadrature(scheme: ModulationScheme, p: E2EParams, table: CdfTable | None = None) -> float:
    """delta sum_m int q^p / (2 Gamma(p)) g^(p-1) e^(-q g) F(g) dg."""
    lo, hi = _gamma_range(p)
    table = table or CdfTable(p, lo, hi)
    total = 0.0
    for qb in scheme.q:
        pb = scheme.p
        lw = pb * math.log(qb) - math.lgamma(pb) - math.log(2)

        def f(lg):
            g = math.exp(lg)
            return math.exp(lw + pb * lg - qb * g) * float(table.cdf(g))

        edge = math.log(min(hi, 60.0 / qb))
        total += integrate.quad(f, math.log(lo), edge, limit=400, epsrel=1e-8, epsabs=0)[0]
    return scheme.delta * total


def capacity_quadrature(p: E2EParams, c0: float | None = None, table: CdfTable | None = None) -> float:
    """int c0 (1 - F(g)) / (1 + c0 g) dg."""
    c0 = capacity_c0(p.r) if c0 is None else c0
    lo, hi = _gamma_range(p)
    table = table or CdfTable(p, lo, hi)

    def f(lg):
        g = math.exp(lg)
        return c0 * g / (1 + c0 * g) * float(table.ccdf(g))

    head = c0 * lo  # F ~ 0 below lo
    return head + integrate.quad(f, math.log(lo), math.log(hi), limit=400, epsrel=1e-8, epsabs=0)[0]


def moment_factorised(n: float, p: E2EParams) -> float:
    """E[gamma^n] = E[gamma_F^n] * E[(x / (x + C))^n] by independence of the hops."""
    f = p.fso
    # E[h^(r n)] of the FSO gain from its Mellin transform at s = r n
    k = 2 * np.arange(f.k_f + 1) + 1
    s = p.r * n
    series = float(np.sum(f.series() * (f.w + s) ** (-k.astype(float))))
    eh = (f.prefactor * series * special.gamma(f.alpha + s) * special.gamma(f.beta + s)
          / f.gain_scale ** s)
    hi, pts = _rf_support(p)
    rf = integrate.quad(lambda x: (x / (x + p.c)) ** n * rf_snr_pdf_bessel(x, p.rf), 0, hi,
                        points=pts, limit=500, epsrel=1e-12, epsabs=0)[0]
    return p.gamma_h ** n * eh * rf
