"""FSO hop: attenuation, pointing/misalignment loss, turbulence and the SNR law.

The aggregate optical gain is ``h = h_p * h_g * h_a`` where ``h_a`` is the
sum of ``N_F`` i.i.d. Gamma-Gamma paths, itself approximated by a single
Gamma-Gamma law with shapes ``(alpha, beta)`` and mean ``N_F``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate, optimize

from . import specfun
from .scenario import LinkGeometry, ScenarioConfig, derive_geometry


class NoRootError(ValueError):
    """Requested beam waist is below the diffraction limit at that distance."""


@dataclass(frozen=True)
class FsoParams:
    h_p: float
    a0: float
    q_g: float
    varpi: float
    t_g: float
    sigma_u1_sq: float
    sigma_u2_sq: float
    nu1: float
    nu2: float
    alpha_tilde: float
    beta_tilde: float
    alpha: float
    beta: float
    sigma_b_sq: float
    n_f: int
    r: int
    n_norm: float
    k_f: int

    @property
    def w(self) -> float:
        """Exponent (1+q^2) varpi / (2 q) of the misalignment law."""
        return (1 + self.q_g ** 2) * self.varpi / (2 * self.q_g)

    @property
    def b(self) -> float:
        return (1 - self.q_g ** 2) * self.varpi / (4 * self.q_g)

    def series(self) -> np.ndarray:
        """Weights Gamma(1+2k)/(k! Gamma(1+k)) * b^(2k), k = 0..K_F."""
        k = np.arange(self.k_f + 1)
        lw = _lgam(1 + 2 * k) - 2 * _lgam(1 + k)
        b = self.b
        if b == 0:
            return np.where(k == 0, 1.0, 0.0)
        return np.exp(lw + 2 * k * math.log(b))

    @property
    def prefactor(self) -> float:
        """varpi * N_F-normalisation / (Gamma(alpha) Gamma(beta))."""
        return self.varpi * self.n_norm * math.exp(-math.lgamma(self.alpha) - math.lgamma(self.beta))

    @property
    def gain_scale(self) -> float:
        """alpha*beta / (N_F A_0 h_p): maps h to the Meijer-G argument."""
        return self.alpha * self.beta / (self.n_f * self.a0 * self.h_p)

    def with_detection(self, r: int) -> "FsoParams":
        from dataclasses import replace
        if r not in (1, 2):
            raise ValueError("r must be 1 or 2")
        return replace(self, r=r)


def _lgam(x):
    from scipy.special import gammaln
    return gammaln(x)


# ---------------------------------------------------------------------------
# beam geometry

def beam_waist(d, w0, wavelength):
    d = np.asarray(d, dtype=float)
    out = w0 * np.sqrt(1.0 + (d * wavelength / (math.pi * w0 ** 2)) ** 2)
    return float(out) if out.ndim == 0 else out


def min_waist(d: float, wavelength: float) -> float:
    """Smallest w(d, w0) over all w0, reached at w0 = sqrt(d lambda / pi)."""
    return math.sqrt(2.0 * d * wavelength / math.pi)


def solve_waist(target: float, d: float, wavelength: float) -> float:
    """w0 with w(d, w0) = target on the near-field branch (w0 >= sqrt(d lambda/pi)).

    Raises NoRootError below the diffraction bound.
    """
    wmin = min_waist(d, wavelength)
    w_star = math.sqrt(d * wavelength / math.pi)
    if d == 0:
        return float(target)
    if target < wmin * (1 - 1e-14):
        raise NoRootError(
            f"waist {target:.6g} m unreachable at d={d:.6g} m; diffraction bound is {wmin:.6g} m")
    if target <= wmin:
        return w_star
    f = lambda w0: beam_waist(d, w0, wavelength) / target - 1.0
    return optimize.brentq(f, w_star, target, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)


def initial_waist(cfg: ScenarioConfig, geom: LinkGeometry) -> float:
    """w0 such that the beam at the HAP has the configured waist."""
    return solve_waist(cfg.waist_hap, geom.d_oh, cfg.wavelength)


def equivalent_waist(geom: LinkGeometry, cfg: ScenarioConfig) -> float:
    """Equivalent initial waist seen after the tilted reflection."""
    ci = math.cos(cfg.theta_i)
    if ci == 0:
        raise ValueError("cos(theta_i) = 0")
    target = math.cos(cfg.theta_r) * cfg.waist_hap / ci
    return solve_waist(target, geom.d_oh, cfg.wavelength)


def receiver_waists(cfg: ScenarioConfig, geom: LinkGeometry) -> tuple[float, float]:
    """(tilted, untilted) beam waists at the receive lens.

    ``direct`` mode reads the configured waist as the footprint at the lens
    and scales it by cos(theta_r)/cos(theta_i) for the tilted axis.
    ``propagate`` mode solves for the launch waists and propagates them over
    the full OGS-HAP-ES path.
    """
    if cfg.waist_mode == "direct":
        w = cfg.waist_hap
        return math.cos(cfg.theta_r) * w / math.cos(cfg.theta_i), w
    d = geom.d_oh + geom.d_he
    w0 = initial_waist(cfg, geom)
    w0_hat = equivalent_waist(geom, cfg)
    return beam_waist(d, w0_hat, cfg.wavelength), beam_waist(d, w0, cfg.wavelength)


# ---------------------------------------------------------------------------
# loss terms

def attenuation(cfg: ScenarioConfig, geom: LinkGeometry) -> float:
    return cfg.reflection_eff * 10.0 ** (-cfg.absorption * (geom.d_oh + geom.d_he) / 10.0)


def jitter_variances(cfg: ScenarioConfig) -> tuple[float, float]:
    ti, tr = cfg.theta_i, cfg.theta_r
    ci2 = math.cos(ti) ** 2
    s1 = (math.cos(tr) ** 2 / ci2 * cfg.jitter_source ** 2
          + math.sin(ti + tr) ** 2 / ci2 * cfg.jitter_oirs ** 2
          + cfg.jitter_lens ** 2)
    s2 = cfg.jitter_source ** 2 + cfg.jitter_lens ** 2
    return s1, s2


@dataclass(frozen=True)
class GmlParams:
    a0: float
    q_g: float
    varpi: float
    t_g: float
    sigma_u1_sq: float
    sigma_u2_sq: float
    nu1: float
    nu2: float


def gml_params(cfg: ScenarioConfig, geom: LinkGeometry) -> GmlParams:
    if abs(cfg.phi_r - math.pi) > 1e-12 or abs(cfg.theta_rl) > 1e-12:
        raise ValueError("misalignment model is only available for phi_r = pi and theta_rl = 0")
    s1, s2 = jitter_variances(cfg)
    if not s1 * s2 > 0:
        raise ValueError("degenerate jitter: both jitter variances must be positive")
    w_hat, w = receiver_waists(cfg, geom)
    nu1 = cfg.aperture / w_hat * math.sqrt(math.pi / 2)
    nu2 = cfg.aperture / w * math.sqrt(math.pi / 2)
    e1, e2 = math.erf(nu1), math.erf(nu2)
    a0 = e1 * e2
    q = math.sqrt(min(s1, s2) / max(s1, s2))
    t_g = (math.pi * cfg.aperture ** 2 / (4 * nu1 * nu2)
           * math.sqrt(math.pi * e1 * e2 / (nu1 * nu2 * math.exp(-(nu1 ** 2 + nu2 ** 2)))))
    omega = s1 + s2
    varpi = (1 + q ** 2) * t_g / (4 * q * omega)
    return GmlParams(a0, q, varpi, t_g, s1, s2, nu1, nu2)


# ---------------------------------------------------------------------------
# turbulence

def hufnagel_valley(l, wind_rms: float, a_nominal: float):
    l = np.asarray(l, dtype=float)
    return (0.00594 * (wind_rms / 27.0) ** 2 * (1e-5 * l) ** 10 * np.exp(-l / 1000.0)
            + 2.7e-16 * np.exp(-l / 1500.0) + a_nominal * np.exp(-l / 1000.0))


@dataclass(frozen=True)
class RytovTerms:
    uplink: float
    downlink: float

    @property
    def total(self) -> float:
        return self.uplink + self.downlink


def _beam_params(cfg: ScenarioConfig, geom: LinkGeometry):
    k = 2 * math.pi / cfg.wavelength
    lam0 = 2 * geom.d_oh / (k * cfg.beam_radius ** 2)
    th0 = 1.0 if cfg.focal_length is None else 1.0 - geom.d_oh / cfg.focal_length
    lam = lam0 / (lam0 ** 2 + th0 ** 2)
    th = th0 / (th0 ** 2 + lam0 ** 2)
    return k, lam, 1.0 - th


def _rytov_integrands(cfg: ScenarioConfig, geom: LinkGeometry, cn2: Callable | None):
    if cn2 is None:
        cn2 = lambda l: hufnagel_valley(l, cfg.wind_rms, cfg.hv_a)
    k, lam, th_bar = _beam_params(cfg, geom)
    ho, hh, he = cfg.h_ogs, cfg.h_hap, cfg.h_es

    def up(l):
        xi = (l - hh) / (ho - hh)
        z = (lam * xi ** 2 + 1j * xi * (1 - th_bar * xi)) ** (5 / 6) - lam ** (5 / 6) * xi ** (5 / 3)
        return np.real(cn2(l) * z)

    def down(l):
        return cn2(l) * ((l - he) / (hh - he)) ** (5 / 6)

    c_up = 8.7 * k ** (7 / 6) * (hh - ho) ** (5 / 6) / math.cos(cfg.theta_i) ** (11 / 6)
    c_down = 2.25 * k ** (7 / 6) * (hh - he) ** (5 / 6) / math.cos(cfg.theta_r) ** (11 / 6)
    return up, down, c_up, c_down


def _breaks(lo: float, hi: float) -> list[float]:
    # C_n^2 varies on km scales near the ground and peaks near 10 km
    pts = [lo + d for d in (10.0, 100.0, 1000.0, 3000.0, 6000.0, 10000.0, 15000.0)]
    return [p for p in pts if lo < p < hi]


def rytov_terms(cfg: ScenarioConfig, geom: LinkGeometry | None = None, cn2: Callable | None = None,
                rule: str = "quadpack") -> RytovTerms:
    """Uplink and downlink contributions to the Rytov variance.

    ``rule`` selects adaptive QUADPACK (``"quadpack"``) or fixed composite
    Gauss-Legendre (``"gauss"``) so the two can be checked against each other.
    ``cn2`` replaces the Hufnagel-Valley profile.
    """
    geom = geom or derive_geometry(cfg)
    up, down, c_up, c_down = _rytov_integrands(cfg, geom, cn2)
    ho, hh, he = cfg.h_ogs, cfg.h_hap, cfg.h_es
    if hh <= ho or hh <= he:
        raise ValueError("HAP must be above both ground terminals")
    if rule == "quadpack":
        def q(f, lo, hi):
            val, err = integrate.quad(f, lo, hi, points=_breaks(lo, hi), limit=500,
                                      epsabs=1e-30, epsrel=1e-13)
            if not np.isfinite(val):
                raise specfun.ConvergenceError("Rytov quadrature failed")
            return val
    elif rule == "gauss":
        x, wts = np.polynomial.legendre.leggauss(40)

        def q(f, lo, hi):
            edges = np.unique(np.concatenate([[lo, hi], _breaks(lo, hi),
                                              np.linspace(lo, hi, 181)]))
            total = 0.0
            for a, b in zip(edges[:-1], edges[1:]):
                total += 0.5 * (b - a) * float(np.dot(wts, f(0.5 * (b + a) + 0.5 * (b - a) * x)))
            return total
    else:
        raise ValueError(f"unknown rule {rule!r}")
    return RytovTerms(c_up * q(up, ho, hh), c_down * q(down, he, hh))


def rytov_variance(cfg: ScenarioConfig, geom: LinkGeometry | None = None,
                   cn2: Callable | None = None, rule: str = "quadpack") -> float:
    return rytov_terms(cfg, geom, cn2, rule).total


def gg_params(sigma_b_sq: float) -> tuple[float, float]:
    if not sigma_b_sq > 0:
        raise ValueError("Rytov variance must be positive")
    s125 = sigma_b_sq ** 1.2  # sigma_B^(12/5)
    a = 1.0 / math.expm1(0.49 * sigma_b_sq / (1 + 1.11 * s125) ** (7 / 6))
    b = 1.0 / math.expm1(0.51 * sigma_b_sq / (1 + 0.69 * s125) ** (5 / 6))
    return a, b


def gg_sum_params(alpha_t: float, beta_t: float, n_f: int) -> tuple[float, float]:
    if n_f < 1:
        raise ValueError("n_f must be >= 1")
    eps = (n_f - 1) * (-0.127 - 0.95 * alpha_t - 0.0058 * beta_t) / (1 + 0.00124 * alpha_t + 0.98 * beta_t)
    alpha = n_f * alpha_t + eps
    if not alpha > 0:
        raise ValueError(f"aggregated alpha is non-positive ({alpha:.6g}) for alpha~={alpha_t}, N_F={n_f}")
    return alpha, n_f * beta_t


def normalization_nf(q_g: float, k_f: int) -> float:
    if not 0 < q_g <= 1:
        raise ValueError("q_g must lie in (0, 1]")
    if k_f < 0:
        raise ValueError("K_F must be >= 0")
    k = np.arange(k_f + 1)
    ratio = (1 - q_g ** 2) / (2 * (1 + q_g ** 2))
    lw = _lgam(1 + 2 * k) - 2 * _lgam(1 + k)
    terms = 2 * q_g / (1 + q_g ** 2) * np.exp(lw) * np.where(k == 0, 1.0, ratio ** (2 * k))
    return float(1.0 / terms.sum())


def fso_params(cfg: ScenarioConfig, geom: LinkGeometry | None = None,
               sigma_b_sq: float | None = None) -> FsoParams:
    geom = geom or derive_geometry(cfg)
    g = gml_params(cfg, geom)
    sb = rytov_variance(cfg, geom) if sigma_b_sq is None else sigma_b_sq
    at, bt = gg_params(sb)
    a, b = gg_sum_params(at, bt, cfg.n_f)
    return FsoParams(
        h_p=attenuation(cfg, geom), a0=g.a0, q_g=g.q_g, varpi=g.varpi, t_g=g.t_g,
        sigma_u1_sq=g.sigma_u1_sq, sigma_u2_sq=g.sigma_u2_sq, nu1=g.nu1, nu2=g.nu2,
        alpha_tilde=at, beta_tilde=bt, alpha=a, beta=b, sigma_b_sq=sb, n_f=cfg.n_f,
        r=cfg.detection, n_norm=normalization_nf(g.q_g, cfg.series_terms), k_f=cfg.series_terms,
    )


# ---------------------------------------------------------------------------
# SNR law

def series_factor(p: FsoParams, s):
    """sum_k c_k (w + s)^-(2k+1) as a complex array."""
    s = np.asarray(s, dtype=complex)
    c = p.series()
    u = 1.0 / (p.w + s)
    u2 = u * u
    acc = np.zeros_like(s)
    for ck in c[::-1]:
        acc = acc * u2 + ck
    return acc * u


def gain_mellin_log(p: FsoParams, s):
    """log of Gamma(alpha+s) Gamma(beta+s) sum_k c_k (w+s)^-(2k+1)."""
    s = np.asarray(s, dtype=complex)
    return (specfun.ln_gamma(p.alpha + s) + specfun.ln_gamma(p.beta + s)
            + np.log(series_factor(p, s)))


def _z(gamma, gamma_bar, p: FsoParams):
    return p.gain_scale * (gamma / gamma_bar) ** (1.0 / p.r)


def fso_snr_cdf(gamma, gamma_bar: float, p: FsoParams, tol: float = 1e-10):
    """CDF of the FSO SNR (truncated misalignment series).

    Evaluated on a line left of the origin so small probabilities keep their
    relative accuracy.
    """
    if not gamma_bar > 0:
        raise ValueError("gamma_bar must be positive")
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    if np.any(g < 0):
        raise ValueError("gamma must be non-negative")
    out = np.zeros_like(g)
    lo = -min(p.alpha, p.beta, p.w)
    log_phi = lambda s: gain_mellin_log(p, s) - np.log(s)
    for i, gi in enumerate(g):
        if gi == 0:
            continue
        z = _z(gi, gamma_bar, p)
        c = specfun.strip_shift(log_phi, lo, 0.0, math.log(z))
        v, _, _ = specfun.mellin_barnes_1d(log_phi, c, z, tol=tol)
        out[i] = -p.prefactor * v[0]
    out = np.clip(out, 0.0, 1.0)
    return float(out[0]) if np.ndim(gamma) == 0 else out


def fso_snr_pdf(gamma, gamma_bar: float, p: FsoParams, tol: float = 1e-10):
    if not gamma_bar > 0:
        raise ValueError("gamma_bar must be positive")
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    if np.any(g < 0):
        raise ValueError("gamma must be non-negative")
    out = np.zeros_like(g)
    lo = -min(p.alpha, p.beta, p.w)
    log_phi = lambda s: gain_mellin_log(p, s)
    for i, gi in enumerate(g):
        if gi == 0:
            continue
        z = _z(gi, gamma_bar, p)
        c = specfun.strip_shift(log_phi, lo, 30.0, math.log(z))
        v, _, _ = specfun.mellin_barnes_1d(log_phi, c, z, tol=tol)
        out[i] = p.prefactor * v[0] / (p.r * gi)
    return float(out[0]) if np.ndim(gamma) == 0 else out


def fso_snr_cdf_meijer(gamma, gamma_bar: float, p: FsoParams):
    """Same CDF through the G^{2k+4,0}_{2k+2,2k+4} series, term by term."""
    z = _z(np.asarray(gamma, dtype=float), gamma_bar, p)
    total = 0.0
    w = p.w
    for k, ck in enumerate(p.series()):
        n = 2 * k + 1
        g = specfun.meijer_g(n + 3, 0, n + 1, n + 3, [1.0] + [w + 1] * n, [0.0, p.alpha, p.beta] + [w] * n, z)
        total = total + ck * g
    return 1.0 - p.prefactor * total
