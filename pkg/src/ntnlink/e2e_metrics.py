"""End-to-end statistics of the fixed-gain relay and the derived metrics.

The end-to-end SNR is ``gamma = gamma_F * gamma_R / (gamma_R + C)``.

Every exact metric is a double Mellin-Barnes integral of the kernel::

    Gamma(alpha + r s) Gamma(beta + r s) sum_k c_k (w + r s)^-(2k+1)      (optical part, s)
    * Gamma(s - t)                                                       (relay coupling)
    * Gamma(t) Gamma(k_l + t) Gamma(m_l + t)                             (RF part, t)
    * X^-s Y^-t

with ``X = (alpha beta / (N_F A0 h_p))^r / gamma_bar_H`` (times the SNR
variable) and ``Y = Psi^2 C / gamma_bar_R``. The metric only changes the
extra s-factors (``1/Gamma(1+s)`` for the CDF, ``1/Gamma(s)`` for the PDF, ...).

For accuracy in the lower tail the CDF, PDF and BER are evaluated on lines
with ``Re(t) < Re(s) < 0``; the residue collected at ``t = 0`` is exactly
the FSO-only quantity, which is computed separately in one dimension.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy import special

from . import specfun
from .fso_link import FsoParams, fso_params, fso_snr_cdf, fso_snr_pdf, gain_mellin_log
from .rf_link import RfParams, rf_params
from .scenario import ScenarioConfig, db2lin, derive_geometry, rf_mean_snr
from .specfun import BivariateFoxHSpec, GammaTermList

_log = logging.getLogger(__name__)

BAND = 1e-6


class KernelError(ArithmeticError):
    """Raw metric value fell outside its admissible band."""


# ---------------------------------------------------------------------------
# modulation

@dataclass(frozen=True)
class ModulationScheme:
    name: str
    delta: float
    p: float
    q: tuple
    r: int

    @property
    def n_b(self) -> int:
        return len(self.q)


def psk(M: int) -> ModulationScheme:
    lm = math.log2(M)
    nb = max(M // 4, 1)
    q = tuple(math.sin((2 * k - 1) * math.pi / M) ** 2 * lm for k in range(1, nb + 1))
    return ModulationScheme(f"{M}-PSK" if M > 2 else "BPSK", 2 / max(lm, 2), 0.5, q, 1)


def qam(M: int) -> ModulationScheme:
    lm = math.log2(M)
    nb = int(round(math.sqrt(M) / 2))
    q = tuple(3 * (2 * k - 1) ** 2 / (2 * (M - 1)) * lm for k in range(1, nb + 1))
    return ModulationScheme(f"{M}-QAM", 4 / lm * (1 - 1 / math.sqrt(M)), 0.5, q, 1)


OOK = ModulationScheme("OOK", 1.0, 0.5, (0.5,), 2)


def modulation(name: str) -> ModulationScheme:
    key = name.strip().upper().replace("_", "-")
    if key == "OOK":
        return OOK
    if key in ("BPSK", "B-PSK"):
        return psk(2)
    if key.endswith("-PSK") or key.endswith("PSK"):
        return psk(int(key.split("-")[0].replace("PSK", "")))
    if key.endswith("QAM"):
        return qam(int(key.split("-")[0].replace("QAM", "")))
    raise ValueError(f"unknown modulation {name!r}")


# ---------------------------------------------------------------------------
# parameters

@dataclass(frozen=True)
class E2EParams:
    fso: FsoParams
    rf: RfParams
    c: float
    gamma_h: float
    user: str = "R"

    def __post_init__(self):
        if not self.c > 0:
            raise ValueError("relay constant C must be positive")
        if not self.gamma_h > 0:
            raise ValueError("gamma_bar_H must be positive")

    @property
    def r(self) -> int:
        return self.fso.r

    @property
    def x0(self) -> float:
        """X per unit SNR: (alpha beta/(N_F A0 h_p))^r / gamma_bar_H."""
        return self.fso.gain_scale ** self.r / self.gamma_h

    @property
    def y(self) -> float:
        return self.rf.psi ** 2 * self.c / self.rf.gamma_bar

    @property
    def q(self) -> float:
        """Overall prefactor P / (Gamma(k) Gamma(m))."""
        return self.fso.prefactor * math.exp(-math.lgamma(self.rf.k) - math.lgamma(self.rf.m))

    def at(self, gamma_h: float) -> "E2EParams":
        return replace(self, gamma_h=gamma_h)


def e2e_params(cfg: ScenarioConfig, user: str, gamma_h_db: float, *, fso: FsoParams | None = None,
               rf: RfParams | None = None) -> E2EParams:
    geom = derive_geometry(cfg)
    fso = fso or fso_params(cfg, geom)
    rf = rf or rf_params(cfg, user, geom)
    return E2EParams(fso, rf, cfg.relay_c, db2lin(gamma_h_db), user)


# ---------------------------------------------------------------------------
# kernels

def _series_terms(f: FsoParams) -> tuple:
    out = []
    for k, ck in enumerate(f.series()):
        n = 2 * k + 1
        out.append((float(ck), GammaTermList(((f.w, f.r),) * n, ((f.w + 1, f.r),) * n)))
    return tuple(out)


def kernel_spec(p: E2EParams, metric: str, arg_x: float, extra: dict | None = None) -> BivariateFoxHSpec:
    """Kernel of one metric. ``metric`` in {cdf, pdf, ber, capacity}."""
    f, rf = p.fso, p.rf
    num = [(f.alpha, f.r), (f.beta, f.r)]
    den = []
    if metric == "cdf":
        den.append((1.0, 1.0))
    elif metric == "pdf":
        den.append((0.0, 1.0))
    elif metric == "ber":
        num.append((extra["p"], -1.0))
        den.append((1.0, 1.0))
    elif metric == "capacity":
        num += [(1.0, -1.0), (0.0, 1.0)]
        den.append((1.0, 1.0))
    else:
        raise ValueError(metric)
    return BivariateFoxHSpec(
        joint_terms=GammaTermList(((0.0, 1.0, -1.0),)),
        x_terms=GammaTermList(tuple(num), tuple(den)),
        y_terms=GammaTermList(((0.0, 1.0), (rf.k, 1.0), (rf.m, 1.0))),
        arg_x=arg_x,
        arg_y=p.y,
        x_series=_series_terms(f),
    )


def shifted_constraints(p: E2EParams, extra_s: tuple = ()) -> list:
    """Strip -min(1,k,m) < Re t < Re s < 0 and Re s > -min(alpha,beta,w)/r."""
    f, rf = p.fso, p.rf
    cons = [(1.0, 0.0, 1.0), (rf.k, 0.0, 1.0), (rf.m, 0.0, 1.0),
            (0.0, 1.0, -1.0), (0.0, -1.0, 0.0), (0.0, 0.0, -1.0),
            (f.alpha, f.r, 0.0), (f.beta, f.r, 0.0), (f.w, f.r, 0.0)]
    return cons + list(extra_s)


def _fox(spec, constraints, xs, tol):
    xs = np.atleast_1d(np.asarray(xs, dtype=float))
    out = np.empty_like(xs)
    err = np.empty_like(xs)
    # one pair of lines per decade of the argument
    order = np.argsort(xs)
    lx = np.log(xs[order])
    start = 0
    while start < len(order):
        stop = start + 1
        while stop < len(order) and lx[stop] - lx[start] <= math.log(10.0):
            stop += 1
        idx = order[start:stop]
        mid = float(np.exp(np.median(np.log(xs[idx]))))
        sp = replace(spec, arg_x=mid)
        res = specfun.fox_h_bivariate(sp, tol=tol, constraints=constraints, arg_x=xs[idx])
        out[idx] = res.value
        err[idx] = res.error
        start = stop
    return out, err


def _as_out(v, like):
    return float(v[0]) if np.ndim(like) == 0 else v


def _check_band(raw, lo=0.0, hi=1.0, what="CDF"):
    if np.any(raw < lo - BAND) or np.any(raw > hi + BAND):
        raise KernelError(f"raw {what} value outside [{lo}, {hi}]: {raw}")
    return np.clip(raw, lo, hi)


# ---------------------------------------------------------------------------
# CDF / PDF / outage

def e2e_cdf(gamma, p: E2EParams, tol: float = 1e-9, form: str = "stable"):
    """CDF of the end-to-end SNR.

    ``form="direct"`` integrates the kernel on 0 < Re t < Re s as written
    (F = 1 - Q * H); ``"stable"`` uses the shifted lines and adds the FSO CDF.
    """
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    if np.any(g < 0):
        raise ValueError("gamma must be non-negative")
    out = np.zeros_like(g)
    pos = g > 0
    if np.any(pos):
        xs = p.x0 * g[pos]
        spec = kernel_spec(p, "cdf", float(xs[0]))
        if form == "direct":
            h, _ = _fox(spec, None, xs, tol)
            raw = 1.0 - p.q * h
        elif form == "stable":
            h, _ = _fox(spec, shifted_constraints(p), xs, tol)
            raw = fso_snr_cdf(g[pos], p.gamma_h, p.fso) - p.q * h
        else:
            raise ValueError(f"unknown form {form!r}")
        out[pos] = _check_band(raw)
    return _as_out(out, gamma)


def e2e_pdf(gamma, p: E2EParams, tol: float = 1e-9, form: str = "stable"):
    g = np.atleast_1d(np.asarray(gamma, dtype=float))
    if np.any(g < 0):
        raise ValueError("gamma must be non-negative")
    out = np.zeros_like(g)
    pos = g > 0
    if np.any(pos):
        xs = p.x0 * g[pos]
        spec = kernel_spec(p, "pdf", float(xs[0]))
        if form == "direct":
            h, _ = _fox(spec, None, xs, tol)
            raw = p.q * h / g[pos]
        elif form == "stable":
            h, _ = _fox(spec, shifted_constraints(p), xs, tol)
            raw = fso_snr_pdf(g[pos], p.gamma_h, p.fso) + p.q * h / g[pos]
        else:
            raise ValueError(f"unknown form {form!r}")
        if np.any(raw < -BAND * np.abs(raw).max()):
            raise KernelError(f"negative density {raw}")
        out[pos] = np.maximum(raw, 0.0)
    return _as_out(out, gamma)


def outage_probability(gamma_th: float, p: E2EParams, **kw) -> float:
    """P(gamma < gamma_th); ``gamma_th`` is linear."""
    if gamma_th <= 0:
        return 0.0
    return e2e_cdf(float(gamma_th), p, **kw)


# ---------------------------------------------------------------------------
# asymptotics

def _rf_ratio(h_over_r: float, p: E2EParams, log: list | None = None) -> float:
    """G^{3,1}_{1,3}[Y | 1+h/r; 0, k, m] / Gamma(-h/r), nudged off integer h/r."""
    a = h_over_r
    for attempt in range(4):
        try:
            g = specfun.meijer_g(3, 1, 1, 3, [1.0 + a], [0.0, p.rf.k, p.rf.m], p.y)
            return g / special.gamma(-a)
        except (specfun.ContourError, ZeroDivisionError):
            a = a + 1e-6 * max(1.0, abs(a))
            if log is not None:
                log.append(("h/r", h_over_r, a))
    raise specfun.ContourError(f"could not separate RF poles for h/r = {h_over_r}")


def asymptotic_terms(p: E2EParams, perturbations: list | None = None) -> list:
    """Leading terms ``(coefficient, exponent h)`` with F ~ sum coef * Z^h,
    Z = alpha beta/(N_F A0 h_p) (gamma/gamma_bar_H)^(1/r)."""
    f, rf = p.fso, p.rf
    alpha, beta, w, r = f.alpha, f.beta, f.w, f.r
    if abs(alpha - beta - round(alpha - beta)) < 1e-9:
        beta = beta + 1e-6
        if perturbations is not None:
            perturbations.append(("beta", f.beta, beta))
    c = f.series()
    n = 2 * np.arange(len(c)) + 1
    norm = f.varpi * f.n_norm * math.exp(-math.lgamma(alpha) - math.lgamma(beta)
                                         - math.lgamma(rf.k) - math.lgamma(rf.m))
    out = []
    for h, other in ((alpha, beta), (beta, alpha)):
        s = float(np.sum(c * (w - h) ** (-n.astype(float))))
        coef = norm * special.gamma(other - h) * s / h * _rf_ratio(h / r, p, perturbations)
        out.append((coef, h))
    coef = (norm * special.gamma(alpha - w) * special.gamma(beta - w) / w
            * _rf_ratio(w / r, p, perturbations))
    out.append((coef, w))
    return out


def e2e_cdf_asymptotic(gamma, p: E2EParams):
    g = np.asarray(gamma, dtype=float)
    z = p.fso.gain_scale * (g / p.gamma_h) ** (1.0 / p.r)
    total = sum(coef * z ** h for coef, h in asymptotic_terms(p))
    return float(total) if np.ndim(total) == 0 else total


def diversity_order(p: E2EParams | FsoParams) -> float:
    f = p.fso if isinstance(p, E2EParams) else p
    return min(f.alpha, f.beta, f.w) / f.r


# ---------------------------------------------------------------------------
# BER

def _fso_ber_term(p: E2EParams, pb: float, qb: float, tol: float) -> float:
    """int q^p/(2 Gamma(p)) g^(p-1) e^(-q g) F_F(g) dg on a line left of 0."""
    f, r = p.fso, p.r
    x = p.x0 / qb

    def log_phi(s):
        return gain_mellin_log(f, r * s) - np.log(s) + specfun.ln_gamma(pb - s)

    lo = -min(f.alpha, f.beta, f.w) / r
    c = specfun.strip_shift(log_phi, lo, 0.0, math.log(x))
    v, _, _ = specfun.mellin_barnes_1d(log_phi, c, x, tol=tol)
    return -f.prefactor * v[0] / (2 * math.gamma(pb))


def ber_term(p: E2EParams, pb: float, qb: float, tol: float = 1e-9, form: str = "stable") -> float:
    """I(p_B, q_B): Gaussian-Q style average of the end-to-end CDF."""
    x = p.x0 / qb
    spec = kernel_spec(p, "ber", x, {"p": pb})
    if form == "direct":
        h = specfun.fox_h_bivariate(spec, tol=tol).value
        raw = 0.5 - p.q * h / (2 * math.gamma(pb))
    else:
        h = specfun.fox_h_bivariate(spec, tol=tol, constraints=shifted_constraints(p)).value
        raw = _fso_ber_term(p, pb, qb, tol) - p.q * h / (2 * math.gamma(pb))
    return float(_check_band(np.array([raw]), 0.0, 0.5, "BER term")[0])


def avg_ber(scheme: ModulationScheme, p: E2EParams, tol: float = 1e-9, form: str = "stable") -> float:
    if scheme.r != p.r:
        raise ValueError(f"{scheme.name} needs detection r={scheme.r}, link has r={p.r}")
    return scheme.delta * sum(ber_term(p, scheme.p, qb, tol, form) for qb in scheme.q)


def avg_ber_asymptotic(scheme: ModulationScheme, p: E2EParams) -> float:
    if scheme.r != p.r:
        raise ValueError(f"{scheme.name} needs detection r={scheme.r}, link has r={p.r}")
    r, pb = p.r, scheme.p
    g = p.fso.gain_scale
    total = 0.0
    for qb in scheme.q:
        for coef, h in asymptotic_terms(p):
            total += (coef * g ** h * (qb * p.gamma_h) ** (-h / r)
                      * math.exp(math.lgamma(pb + h / r) - math.lgamma(pb)) / 2)
    return scheme.delta * total


# ---------------------------------------------------------------------------
# moments and capacity

def snr_moments(n: float, p: E2EParams) -> float:
    """E[gamma^n] for n > 0."""
    if not n > 0:
        raise ValueError("moment order must be positive")
    f, r = p.fso, p.r
    c = f.series()
    kk = 2 * np.arange(len(c)) + 1
    fs = float(np.sum(c * (f.w + r * n) ** (-kk.astype(float))))
    lg = math.lgamma(f.alpha + r * n) + math.lgamma(f.beta + r * n) - math.lgamma(n)
    g = specfun.meijer_g(3, 1, 1, 3, [1.0 - n], [0.0, p.rf.k, p.rf.m], p.y)
    return p.q * fs * math.exp(lg - n * math.log(p.x0)) * g


def capacity_c0(r: int) -> float:
    return 1.0 if r == 1 else math.e / (2 * math.pi)


def ergodic_capacity(p: E2EParams, c0: float | None = None, tol: float = 1e-9, bits: bool = False) -> float:
    """E[ln(1 + c0 gamma)] in nats/s/Hz (bits/s/Hz with ``bits=True``)."""
    c0 = capacity_c0(p.r) if c0 is None else c0
    spec = kernel_spec(p, "capacity", p.x0 / c0)
    val = p.q * specfun.fox_h_bivariate(spec, tol=tol).value
    if val < -BAND:
        raise KernelError(f"negative capacity {val}")
    val = max(val, 0.0)
    return val / math.log(2) if bits else val


def tdm_baseline_capacity(p: E2EParams, c0: float | None = None, **kw) -> float:
    """Half of the capacity the user would get with the full RF power (rho = 1)."""
    full = replace(p, rf=replace(p.rf, gamma_bar=p.rf.gamma_bar / p.rf.rho ** 2, rho=1.0))
    return 0.5 * ergodic_capacity(full, c0, **kw)


# ---------------------------------------------------------------------------
# calibration of the RF mean SNR

def calibrate_rf_snr(cfg: ScenarioConfig, user: str, target: float, gamma_h_db: float,
                     metric: str = "op", bracket=(-60.0, 0.0)) -> float:
    """RF mean SNR [dB] for ``user`` that makes one metric hit ``target``.

    ``metric`` is "op" (at the configured threshold) or "capacity". The
    result is meant for the per-user override fields of the config.
    """
    from scipy import optimize

    field_name = "gamma_r_override_db_t" if user == "T" else "gamma_r_override_db_r"
    geom = derive_geometry(cfg)
    fso = fso_params(cfg, geom)
    base = rf_params(cfg, user, geom)

    def value(db):
        p = e2e_params(cfg, user, gamma_h_db, fso=fso, rf=replace(base, gamma_bar=db2lin(db)))
        if metric == "op":
            return math.log(outage_probability(db2lin(cfg.gamma_th_db), p)) - math.log(target)
        if metric == "capacity":
            return ergodic_capacity(p) - target
        raise ValueError(metric)

    db = optimize.brentq(value, *bracket, xtol=1e-6)
    _log.info("calibrated %s = %.6f dB", field_name, db)
    return db
