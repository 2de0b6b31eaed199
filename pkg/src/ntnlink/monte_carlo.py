"""Monte Carlo simulation of the two-hop link with standard errors.

Every channel factor is drawn from its physical model, not from the
approximations used by the closed forms: the turbulence is the sum of
``N_F`` independent Gamma-Gamma paths and the RF gain is the exact cascaded
Nakagami sum.
"""

from __future__ import annotations

import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import interpolate, special

from .e2e_metrics import ModulationScheme, capacity_c0
from .fso_link import FsoParams, fso_params
from .rf_link import RfParams, rf_params
from .scenario import ScenarioConfig, db2lin, derive_geometry

log = logging.getLogger(__name__)

METRICS = ("op", "ber", "capacity", "moments")
WORKERS_ENV = "NTNLINK_WORKERS"
_BLOCK = 1 << 16
_GML_NODES = 4096


class UndersampledTailWarning(UserWarning):
    pass


# ---------------------------------------------------------------------------
# samplers

def sample_gg(alpha_t: float, beta_t: float, n: int, rng: np.random.Generator) -> np.ndarray:
    """Unit-mean Gamma-Gamma irradiance as a product of two unit-mean Gamma variates."""
    if not (alpha_t > 0 and beta_t > 0):
        raise ValueError("Gamma-Gamma shapes must be positive")
    return rng.gamma(alpha_t, 1.0 / alpha_t, n) * rng.gamma(beta_t, 1.0 / beta_t, n)


def gml_pdf(h, p: FsoParams):
    """Density of the misalignment loss on (0, A_0]."""
    h = np.asarray(h, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        u = -np.log(h / p.a0)
        val = p.varpi / p.a0 * np.exp(-(p.w - 1) * u) * special.i0(2 * p.b * u)
    return np.where((h > 0) & (h <= p.a0), val, 0.0)


class GmlSampler:
    """Inverse-transform sampler for the misalignment loss.

    With ``u = -ln(h/A_0)`` the density is ``varpi exp(-w u) I_0(2 b u)``.
    The log-survival of ``u`` is tabulated on 4096 nodes (log-spaced in
    ``h``) and inverted with a monotone cubic.
    """

    def __init__(self, p: FsoParams, nodes: int = _GML_NODES):
        decay = p.varpi * p.q_g  # w - 2b: exponential rate of the tail in u
        u_max = 45.0 / decay + 10.0 / p.varpi
        u = np.linspace(0.0, u_max, nodes)
        x, wts = np.polynomial.legendre.leggauss(8)
        mid = 0.5 * (u[1:] + u[:-1])
        half = 0.5 * (u[1:] - u[:-1])
        uu = mid[:, None] + half[:, None] * x[None, :]
        dens = p.varpi * np.exp(-decay * uu) * special.i0e(2 * p.b * uu)
        if not np.all(np.isfinite(dens)):
            raise ArithmeticError("misalignment density is not finite on the table")
        mass = (dens * wts[None, :]).sum(axis=1) * half
        tail = np.concatenate([np.cumsum(mass[::-1])[::-1], [0.0]])
        keep = tail > 0
        self.u = u[keep]
        self.neg_log_surv = -np.log(tail[keep] / tail[0])
        self._inv = interpolate.PchipInterpolator(self.neg_log_surv, self.u)
        self.a0 = p.a0

    def __call__(self, n: int, rng: np.random.Generator) -> np.ndarray:
        e = rng.standard_exponential(n)
        e = np.minimum(e, self.neg_log_surv[-1])
        return self.a0 * np.exp(-self._inv(e))


def sample_gml(p: FsoParams, n: int, rng: np.random.Generator) -> np.ndarray:
    return GmlSampler(p)(n, rng)


def sample_rf_gain(p: RfParams, n: int, rng: np.random.Generator) -> np.ndarray:
    """Cascaded gain R = sum_i a_i b_i with Nakagami a_i, b_i."""
    out = np.empty(n)
    step = max(1, (1 << 20) // p.n_r)
    for lo in range(0, n, step):
        m = min(step, n - lo)
        a = np.sqrt(rng.gamma(p.m_a, p.omega_a / p.m_a, (m, p.n_r)))
        b = np.sqrt(rng.gamma(p.m_l, p.omega_l / p.m_l, (m, p.n_r)))
        out[lo:lo + m] = np.einsum("ij,ij->i", a, b)
    return out


# ---------------------------------------------------------------------------
# plans and results

@dataclass(frozen=True)
class SimulationPlan:
    samples: int
    seed: int
    grid_db: tuple
    metric: str = "op"
    streams: int = 16

    def __post_init__(self):
        if self.samples < 10_000:
            raise ValueError("need at least 1e4 samples")
        if self.metric not in METRICS:
            raise ValueError(f"metric must be one of {METRICS}")
        if not self.grid_db:
            raise ValueError("empty grid")
        if self.streams < 1:
            raise ValueError("need at least one stream")
        if not 0 <= self.seed < 2 ** 64:
            raise ValueError("seed must fit in 64 bits")
        object.__setattr__(self, "grid_db", tuple(float(g) for g in self.grid_db))


@dataclass(frozen=True)
class MetricPoint:
    gamma_h_db: float
    estimate: float
    stderr: float
    samples: int
    warning: str = ""


@dataclass
class MetricCurve:
    metric: str
    points: list = field(default_factory=list)

    @property
    def estimates(self) -> np.ndarray:
        return np.array([pt.estimate for pt in self.points])

    @property
    def stderrs(self) -> np.ndarray:
        return np.array([pt.stderr for pt in self.points])


@dataclass(frozen=True)
class LinkModel:
    """Everything a sample of the end-to-end SNR depends on."""

    fso: FsoParams
    rf: RfParams
    alpha_t: float
    beta_t: float
    c: float
    gamma_th: float
    modulation: ModulationScheme | None = None
    c0: float | None = None
    moment_order: float = 1.0

    @classmethod
    def from_config(cls, cfg: ScenarioConfig, user: str, **kw) -> "LinkModel":
        geom = derive_geometry(cfg)
        fso = fso_params(cfg, geom)
        rf = rf_params(cfg, user, geom)
        return cls(fso, rf, fso.alpha_tilde, fso.beta_tilde, cfg.relay_c,
                   db2lin(cfg.gamma_th_db), **kw)


# ---------------------------------------------------------------------------
# simulation

def _stream(seed: int, grid_idx: int, block: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([seed, grid_idx, block])))


def draw_snr(model: LinkModel, gamma_h: float, n: int, rng: np.random.Generator,
             gml: GmlSampler | None = None) -> np.ndarray:
    """End-to-end SNR samples gamma_F gamma_R / (gamma_R + C)."""
    f = model.fso
    gml = gml or GmlSampler(f)
    turb = np.zeros(n)
    for _ in range(f.n_f):
        turb += sample_gg(model.alpha_t, model.beta_t, n, rng)
    h = f.h_p * gml(n, rng) * turb
    g_f = gamma_h * h ** f.r
    g_r = model.rf.gamma_bar * sample_rf_gain(model.rf, n, rng) ** 2
    return g_f * g_r / (g_r + model.c)


def _per_sample(metric: str, g: np.ndarray, model: LinkModel) -> np.ndarray:
    if metric == "op":
        return (g < model.gamma_th).astype(float)
    if metric == "ber":
        sch = model.modulation
        if sch is None:
            raise ValueError("BER needs a modulation scheme")
        if sch.r != model.fso.r:
            raise ValueError(f"{sch.name} needs detection r={sch.r}")
        return sch.delta * sum(0.5 * special.gammaincc(sch.p, qb * g) for qb in sch.q)
    if metric == "capacity":
        c0 = capacity_c0(model.fso.r) if model.c0 is None else model.c0
        return np.log1p(c0 * g)
    if metric == "moments":
        return g ** model.moment_order
    raise ValueError(metric)


def _block_sums(args):
    model, metrics, seed, grid_idx, block, n, gamma_h = args
    rng = _stream(seed, grid_idx, block)
    g = draw_snr(model, gamma_h, n, rng)
    out = []
    for m in metrics:
        v = _per_sample(m, g, model)
        out.append((float(np.sum(v)), float(np.sum(v * v))))
    return out


def _tasks(plan: SimulationPlan, model: LinkModel, metrics):
    per = [plan.samples // plan.streams + (1 if b < plan.samples % plan.streams else 0)
           for b in range(plan.streams)]
    for gi, gdb in enumerate(plan.grid_db):
        for b, n in enumerate(per):
            yield (model, tuple(metrics), plan.seed, gi, b, n, db2lin(gdb))


def workers_from_env(default: int = 1) -> int:
    try:
        return max(1, int(os.environ.get(WORKERS_ENV, default)))
    except ValueError:
        return default


def simulate_metrics(plan: SimulationPlan, model: LinkModel, metrics=None,
                     workers: int | None = None) -> dict:
    """Estimate several metrics from the same draws. Returns metric -> MetricCurve.

    The samples of grid point ``i`` come from ``plan.streams`` Philox streams
    keyed by ``(seed, i, stream)``, and sums are reduced in a fixed order,
    so results do not depend on ``workers``.
    """
    metrics = tuple(metrics or (plan.metric,))
    workers = workers_from_env() if workers is None else workers
    tasks = list(_tasks(plan, model, metrics))
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            sums = list(ex.map(_block_sums, tasks))
    else:
        sums = [_block_sums(t) for t in tasks]
    curves = {m: MetricCurve(m) for m in metrics}
    n = plan.samples
    for gi, gdb in enumerate(plan.grid_db):
        rows = sums[gi * plan.streams:(gi + 1) * plan.streams]
        for mi, m in enumerate(metrics):
            s1 = math.fsum(r[mi][0] for r in rows)
            s2 = math.fsum(r[mi][1] for r in rows)
            mean = s1 / n
            var = max(s2 / n - mean * mean, 0.0) * n / (n - 1)
            warn = ""
            if m == "op" and mean * n < 100:
                warn = f"undersampled tail: only {int(round(mean * n))} outage events"
                log.warning("%s at %.1f dB", warn, gdb)
            curves[m].points.append(MetricPoint(gdb, mean, math.sqrt(var / n), n, warn))
    return curves


def simulate_metric(plan: SimulationPlan, model: LinkModel, workers: int | None = None) -> MetricCurve:
    return simulate_metrics(plan, model, (plan.metric,), workers)[plan.metric]
