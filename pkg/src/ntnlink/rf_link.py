"""RF hop through the STAR-IRS: cascaded Nakagami sum and its K_G fit."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special, stats

from . import specfun
from .scenario import LinkGeometry, ScenarioConfig, derive_geometry, rf_mean_snr

log = logging.getLogger(__name__)


class MomentMatchError(ValueError):
    def __init__(self, msg: str, moments):
        super().__init__(f"{msg}; moments E[R^2], E[R^4], E[R^6] = {tuple(moments)}")
        self.moments = tuple(moments)


@dataclass(frozen=True)
class RfParams:
    m_a: float
    m_l: float
    omega_a: float
    omega_l: float
    n_r: int
    k: float
    m: float
    psi: float
    gamma_bar: float
    rho: float
    fit_exact: bool = True

    @property
    def psi_tilde(self) -> float:
        return math.sqrt(self.m_a * self.m_l / (self.omega_a * self.omega_l))


def product_moments(m_a: float, m_l: float, psi_t: float, n) -> float:
    """E[R~^n] for the product of two Nakagami amplitudes."""
    return math.exp(-n * math.log(psi_t) + math.lgamma(m_a + n / 2) + math.lgamma(m_l + n / 2)
                    - math.lgamma(m_a) - math.lgamma(m_l))


def sum_moments(m_a: float, m_l: float, psi_t: float, n_r: int, n: int) -> float:
    """E[(R~_1 + ... + R~_N)^n] for i.i.d. terms, built one element at a time."""
    if n_r < 1:
        raise ValueError("n_r must be >= 1")
    if n < 0:
        raise ValueError("n must be >= 0")
    single = np.array([product_moments(m_a, m_l, psi_t, j) for j in range(n + 1)])
    binom = np.array([[math.comb(i, j) for j in range(n + 1)] for i in range(n + 1)], dtype=float)
    acc = single.copy()  # moments of S_1
    for _ in range(n_r - 1):
        nxt = np.empty_like(acc)
        for i in range(n + 1):
            j = np.arange(i + 1)
            nxt[i] = np.sum(binom[i, : i + 1] * acc[i - j] * single[j])
        acc = nxt
    return float(acc[n])


def moment_match(m2: float, m4: float, m6: float, policy: str = "strict") -> tuple[float, float, float]:
    """Fit K_G shapes (k >= m) and scale to the first three even moments.

    With ``policy="modulus"`` a negative discriminant does not raise: the two
    complex-conjugate roots are replaced by their common modulus
    sqrt(C/A), so k = m and only E[R^2] is matched exactly.
    """
    mom = (m2, m4, m6)
    if not all(np.isfinite(mom)) or min(mom) <= 0:
        raise MomentMatchError("moments must be finite and positive", mom)
    a = m6 * m2 + m2 ** 2 * m4 - 2 * m4 ** 2
    b = m6 * m2 - 4 * m4 ** 2 + 3 * m2 ** 2 * m4
    c = 2 * m2 ** 2 * m4
    disc = b * b - 4 * a * c
    if a == 0:
        raise MomentMatchError("degenerate moment system", mom)
    if -1e-10 * b * b <= disc < 0:
        disc = 0.0  # double root lost to rounding, e.g. a single element with equal shapes
    if disc < 0:
        if policy != "modulus" or not c / a > 0:
            raise MomentMatchError("no real K_G fit (negative discriminant)", mom)
        k = m = math.sqrt(c / a)
        return k, m, math.sqrt(k * m / m2)
    root = math.sqrt(disc)
    # numerically stable pair of roots
    qq = -0.5 * (b + math.copysign(root, b))
    r1, r2 = abs(qq / a), abs(c / qq)
    k, m = max(r1, r2), min(r1, r2)
    psi = math.sqrt(k * m / m2)
    return k, m, psi


def rf_params(cfg: ScenarioConfig, user: str, geom: LinkGeometry | None = None,
              n_r: int | None = None, gamma_bar: float | None = None) -> RfParams:
    geom = geom or derive_geometry(cfg)
    _, _, m_l, omega_l, rho = cfg.user_params(user)
    n_r = cfg.n_r if n_r is None else n_r
    psi_t = math.sqrt(cfg.m_a * m_l / (cfg.omega_a * omega_l))
    mom = [sum_moments(cfg.m_a, m_l, psi_t, n_r, n) for n in (2, 4, 6)]
    try:
        k, m, psi = moment_match(*mom)
        exact = True
    except MomentMatchError:
        if cfg.kg_fit != "modulus":
            raise
        k, m, psi = moment_match(*mom, policy="modulus")
        exact = False
        log.warning("K_G fit for user %s (N_R=%d) uses the root modulus; only E[R^2] is exact",
                    user, n_r)
    gbar = rf_mean_snr(cfg, geom, user).gamma_bar if gamma_bar is None else gamma_bar
    return RfParams(cfg.m_a, m_l, cfg.omega_a, omega_l, n_r, k, m, psi, gbar, rho, exact)


def with_gamma_bar(p: RfParams, gamma_bar: float) -> RfParams:
    return replace(p, gamma_bar=gamma_bar)


def _norm(p: RfParams) -> float:
    return math.exp(-math.lgamma(p.k) - math.lgamma(p.m))


def rf_snr_pdf(gamma, p: RfParams):
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("gamma must be non-negative")
    out = np.zeros(np.shape(g))
    pos = g > 0
    if np.any(pos):
        x = p.psi ** 2 * g[pos] / p.gamma_bar
        out[pos] = _norm(p) * specfun.meijer_g(2, 0, 0, 2, [], [p.k, p.m], x) / g[pos]
    return float(out) if out.ndim == 0 else out


def rf_snr_cdf(gamma, p: RfParams):
    """CDF of gamma_bar * R^2 under the fitted K_G law, as G^{2,1}_{1,3}[.|1; k, m, 0]."""
    g = np.asarray(gamma, dtype=float)
    if np.any(g < 0):
        raise ValueError("gamma must be non-negative")
    out = np.zeros(np.shape(g))
    pos = g > 0
    if np.any(pos):
        x = p.psi ** 2 * g[pos] / p.gamma_bar
        out[pos] = _norm(p) * specfun.meijer_g(2, 1, 1, 3, [1.0], [p.k, p.m, 0.0], x)
    out = np.clip(out, 0.0, 1.0)
    return float(out) if out.ndim == 0 else out


def rf_snr_pdf_bessel(gamma, p: RfParams):
    """Closed Bessel-K form of the RF SNR density."""
    g = np.asarray(gamma, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = g / p.gamma_bar
        z = 2 * p.psi * np.sqrt(u)
        lv = (math.log(2) + (p.k + p.m) * math.log(p.psi) - math.lgamma(p.k) - math.lgamma(p.m)
              - np.log(g) + 0.5 * (p.k + p.m) * np.log(u) + np.log(special.kve(p.k - p.m, z)) - z)
    return np.where(g > 0, np.exp(lv), 0.0)


def clt_baseline_cdf(gamma, p: RfParams):
    """Gaussian stand-in for R with the exact mean and variance of the cascade sum."""
    psi_t = p.psi_tilde
    mu = sum_moments(p.m_a, p.m_l, psi_t, p.n_r, 1)
    var = sum_moments(p.m_a, p.m_l, psi_t, p.n_r, 2) - mu ** 2
    sd = math.sqrt(var)
    x = np.sqrt(np.asarray(gamma, dtype=float) / p.gamma_bar)
    out = stats.norm.cdf((x - mu) / sd) - stats.norm.cdf((-x - mu) / sd)
    return float(out) if np.ndim(out) == 0 else out
