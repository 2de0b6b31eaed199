import math
from dataclasses import replace

import numpy as np
import pytest

from ntnlink import e2e_metrics as em
from ntnlink import monte_carlo as mc
from ntnlink import oracles
from ntnlink.fso_link import fso_snr_cdf
from ntnlink.scenario import db2lin

GTH = db2lin(2.0)


def fso_mean(p):
    f = p.fso
    return p.gamma_h * (f.n_f * f.a0 * f.h_p) ** p.r


def e2e_mean(p):
    return em.snr_moments(1, p)


def log_gl_nodes(lo, hi, panels=14, order=10):
    """Gauss-Legendre nodes and weights for int f(g) dg on [lo, hi] in log g."""
    x, w = np.polynomial.legendre.leggauss(order)
    edges = np.linspace(math.log(lo), math.log(hi), panels + 1)
    mid = 0.5 * (edges[1:] + edges[:-1])[:, None]
    half = 0.5 * (edges[1:] - edges[:-1])[:, None]
    u = (mid + half * x[None, :]).ravel()
    wt = (half * w[None, :]).ravel()
    g = np.exp(u)
    return g, wt * g


# ---------------------------------------------------------------------------
# modulation table

def test_modulation_rows():
    assert em.OOK == em.modulation("ook")
    assert (em.OOK.delta, em.OOK.p, em.OOK.q, em.OOK.n_b, em.OOK.r) == (1.0, 0.5, (0.5,), 1, 2)
    b = em.modulation("BPSK")
    assert (b.delta, b.n_b, b.r) == (1.0, 1, 1)
    assert b.q[0] == pytest.approx(1.0)
    p16 = em.psk(16)
    assert p16.n_b == 4 and p16.delta == pytest.approx(0.5)
    assert p16.q[1] == pytest.approx(math.sin(3 * math.pi / 16) ** 2 * 4)
    q64 = em.qam(64)
    assert q64.n_b == 4
    assert q64.delta == pytest.approx(4 / 6 * (1 - 1 / 8))
    assert q64.q[2] == pytest.approx(3 * 25 / (2 * 63) * 6)
    with pytest.raises(ValueError):
        em.modulation("FSK")


def test_params_validation(e2e_factory):
    p = e2e_factory()
    with pytest.raises(ValueError):
        replace(p, c=0.0)
    with pytest.raises(ValueError):
        em.avg_ber(em.OOK, p)


# ---------------------------------------------------------------------------
# CDF and PDF

def test_cdf_endpoints(e2e_factory):
    p = e2e_factory()
    assert em.e2e_cdf(0.0, p) == 0.0
    assert em.outage_probability(0.0, p) == 0.0
    assert em.e2e_cdf(1e4 * fso_mean(p), p) == pytest.approx(1.0, abs=1e-9)


@pytest.mark.parametrize("user,r,db", [("R", 1, 50.0), ("T", 1, 40.0), ("R", 2, 80.0)])
def test_cdf_matches_nested_oracle(e2e_factory, user, r, db):
    p = e2e_factory(user, db, r)
    grid = e2e_mean(p) * np.geomspace(1e-3, 3, 10)
    exact = em.e2e_cdf(grid, p)
    for g, v in zip(grid, exact):
        assert v == pytest.approx(oracles.cdf_nested(g, p), rel=1e-4, abs=0)


def test_stable_and_direct_forms_agree(e2e_factory):
    p = e2e_factory()
    grid = e2e_mean(p) * np.array([0.05, 0.5, 2.0])
    assert em.e2e_cdf(grid, p, form="direct") == pytest.approx(em.e2e_cdf(grid, p), rel=1e-7, abs=0)
    with pytest.raises(ValueError):
        em.e2e_cdf(1.0, p, form="other")


def test_pdf_matches_nested_oracle(e2e_factory):
    p = e2e_factory()
    grid = e2e_mean(p) * np.array([1e-2, 0.1, 0.6, 1.5, 3.0])
    for g, v in zip(grid, em.e2e_pdf(grid, p)):
        assert v == pytest.approx(oracles.pdf_nested(g, p), rel=1e-4, abs=0)


@pytest.mark.parametrize("r,db", [(1, 50.0), (2, 80.0)])
def test_cdf_derivative_is_pdf(e2e_factory, r, db):
    p = e2e_factory("R", db, r)
    for g in e2e_mean(p) * np.array([0.03, 0.3, 1.0, 2.0]):
        h = 1e-4 * g
        f = em.e2e_cdf(np.array([g - h, g + h]), p, tol=1e-12)
        fd = (f[1] - f[0]) / (2 * h)
        assert fd == pytest.approx(em.e2e_pdf(g, p, tol=1e-12), rel=1e-6, abs=0)


def test_pdf_normalisation(e2e_factory):
    p = e2e_factory()
    m = fso_mean(p)
    g, wt = log_gl_nodes(m * 1e-8, m * 1e3)
    total = float(np.dot(em.e2e_pdf(g, p), wt)) + em.e2e_cdf(m * 1e-8, p)
    assert total == pytest.approx(1.0, abs=1e-3)


def test_cdf_monotone_in_gamma(e2e_factory):
    p = e2e_factory()
    f = em.e2e_cdf(e2e_mean(p) * np.geomspace(1e-4, 1e3, 24), p)
    # non-decreasing up to rounding once F has reached 1
    assert np.all(np.diff(f) >= -1e-14) and f[0] >= 0 and f[-1] <= 1


def test_op_decreases_with_hap_snr(e2e_factory):
    ops = [em.outage_probability(GTH, e2e_factory("R", db)) for db in (30, 40, 50, 60)]
    assert all(a > b for a, b in zip(ops, ops[1:]))


@pytest.mark.parametrize("db", [30.0, 40.0, 50.0, 60.0])
def test_user_and_detection_ordering(e2e_factory, db):
    op_r = em.outage_probability(GTH, e2e_factory("R", db))
    assert em.outage_probability(GTH, e2e_factory("T", db)) <= op_r
    assert op_r <= em.outage_probability(GTH, e2e_factory("R", db, 2))


def test_reflection_user_anchor(e2e_factory):
    # the RF mean SNR of the packaged scenario is calibrated on this point
    assert em.outage_probability(GTH, e2e_factory("R", 50.0)) == pytest.approx(0.010, rel=1e-3)


def test_raw_band_violation_raises():
    with pytest.raises(em.KernelError):
        em._check_band(np.array([1.1]))
    assert em._check_band(np.array([1 + 1e-8]))[0] == 1.0


# ---------------------------------------------------------------------------
# asymptotics

def test_diversity_order_formula(e2e_factory):
    p = e2e_factory()
    f = p.fso
    assert em.diversity_order(p) == min(f.alpha, f.beta, f.w)
    assert em.diversity_order(f.with_detection(2)) == em.diversity_order(f) / 2
    fake = replace(f, alpha=10.7, beta=7.7, varpi=9.2, q_g=1.0)
    assert em.diversity_order(fake) == pytest.approx(7.7)


def test_asymptote_within_15_percent_at_60db(e2e_factory):
    p = e2e_factory("R", 60.0)
    ex = em.outage_probability(GTH, p)
    assert em.e2e_cdf_asymptotic(GTH, p) / ex == pytest.approx(1.0, rel=0.15)


@pytest.mark.parametrize("r,dbs", [(1, (80.0, 90.0)), (2, (150.0, 160.0))])
def test_asymptotic_slope_is_diversity_order(e2e_factory, r, dbs):
    p = e2e_factory("R", dbs[0], r)
    a = [em.e2e_cdf_asymptotic(GTH, p.at(db2lin(db))) for db in dbs]
    slope = -(math.log10(a[1]) - math.log10(a[0])) / ((dbs[1] - dbs[0]) / 10)
    assert slope == pytest.approx(em.diversity_order(p), rel=0.02)


def test_asymptotic_gap_shrinks_monotonically(e2e_factory):
    dbs = np.arange(60.0, 72.5, 2.5)
    gaps = []
    for db in dbs:
        p = e2e_factory("R", float(db))
        ex = em.outage_probability(GTH, p)
        gaps.append(abs(ex - em.e2e_cdf_asymptotic(GTH, p)) / ex)
    assert all(a > b for a, b in zip(gaps, gaps[1:]))


@pytest.mark.xfail(strict=True, reason="the asymptote approaches the exact OP only as O(Z); "
                                       "at OP ~ 1e-3 the gap is still ~40%")
def test_asymptote_within_5_percent_once_op_below_1e3(e2e_factory):
    p = e2e_factory("R", 54.0)
    ex = em.outage_probability(GTH, p)
    assert ex <= 1e-3
    assert em.e2e_cdf_asymptotic(GTH, p) / ex == pytest.approx(1.0, rel=0.05)


# ---------------------------------------------------------------------------
# BER

@pytest.fixture(scope="module")
def cdf_tables(e2e_factory):
    out = {}
    for key in (("R", 50.0, 1), ("R", 90.0, 2)):
        p = e2e_factory(*key)
        out[key] = oracles.CdfTable(p, *oracles._gamma_range(p))
    return out


@pytest.mark.parametrize("name,key", [("BPSK", ("R", 50.0, 1)), ("16-QAM", ("R", 50.0, 1)),
                                      ("OOK", ("R", 90.0, 2))])
def test_ber_matches_quadrature(e2e_factory, cdf_tables, name, key):
    p = e2e_factory(*key)
    sch = em.modulation(name)
    ref = oracles.ber_quadrature(sch, p, cdf_tables[key])
    assert em.avg_ber(sch, p) == pytest.approx(ref, rel=1e-4)


def test_ber_direct_form_agrees(e2e_factory):
    p = e2e_factory()
    assert em.ber_term(p, 0.5, 1.0, form="direct") == pytest.approx(em.ber_term(p, 0.5, 1.0), rel=1e-6)


@pytest.mark.parametrize("name,r", [("BPSK", 1), ("OOK", 2)])
def test_ber_at_vanishing_snr(e2e_factory, name, r):
    p = e2e_factory("R", -40.0, r)
    assert em.avg_ber(em.modulation(name), p) == pytest.approx(0.5, abs=1e-3)


@pytest.mark.parametrize("db", [40.0, 50.0, 60.0])
def test_ook_has_highest_ber(e2e_factory, db):
    ook = em.avg_ber(em.OOK, e2e_factory("R", db, 2))
    p = e2e_factory("R", db)
    for name in ("BPSK", "16-PSK", "16-QAM", "64-QAM"):
        assert em.avg_ber(em.modulation(name), p) < ook


@pytest.mark.parametrize("db", [40.0, 50.0])
def test_transmission_user_has_lower_ber(e2e_factory, db):
    b = em.modulation("BPSK")
    assert em.avg_ber(b, e2e_factory("T", db)) < em.avg_ber(b, e2e_factory("R", db))


def test_ber_asymptotic_slope(e2e_factory):
    b = em.modulation("BPSK")
    p = e2e_factory("R", 80.0)
    lo, hi = em.avg_ber_asymptotic(b, p), em.avg_ber_asymptotic(b, p.at(db2lin(90.0)))
    assert math.log10(lo / hi) == pytest.approx(em.diversity_order(p), rel=0.03)


def test_ber_asymptote_converges(e2e_factory):
    b = em.modulation("BPSK")
    ratios = []
    for db in (60.0, 70.0, 80.0):
        p = e2e_factory("R", db)
        ratios.append(em.avg_ber_asymptotic(b, p) / em.avg_ber(b, p))
    assert abs(ratios[-1] - 1) < 0.01
    assert abs(ratios[0] - 1) > abs(ratios[1] - 1) > abs(ratios[2] - 1)


@pytest.mark.xfail(strict=True, reason="the BER asymptote is off by O(1/gamma_H); at BER ~ 3e-6 the "
                                       "gap is still 17% for the reflection user")
def test_ber_asymptote_within_10_percent_once_ber_below_1e4(e2e_factory):
    b = em.modulation("BPSK")
    p = e2e_factory("R", 60.0)
    ex = em.avg_ber(b, p)
    assert ex <= 1e-4
    assert em.avg_ber_asymptotic(b, p) / ex == pytest.approx(1.0, rel=0.10)


# ---------------------------------------------------------------------------
# moments and capacity

@pytest.mark.parametrize("user,r,db", [("R", 1, 50.0), ("T", 1, 40.0), ("R", 2, 80.0)])
@pytest.mark.parametrize("n", [1, 2, 3])
def test_moments_match_factorised_oracle(e2e_factory, user, r, db, n):
    p = e2e_factory(user, db, r)
    assert em.snr_moments(n, p) == pytest.approx(oracles.moment_factorised(n, p), rel=1e-9)


def test_first_moment_by_density_quadrature(e2e_factory):
    p = e2e_factory()
    m = fso_mean(p)
    g, wt = log_gl_nodes(m * 1e-6, m * 1e3)
    assert em.snr_moments(1, p) == pytest.approx(float(np.dot(g * em.e2e_pdf(g, p), wt)), rel=1e-3)


def test_relay_only_attenuates(e2e_factory):
    p = e2e_factory()
    f = p.fso
    k = 2 * np.arange(f.k_f + 1) + 1
    series = float(np.sum(f.series() * (f.w + 1.0) ** (-k.astype(float))))
    e_f = p.gamma_h * f.prefactor * series * math.gamma(f.alpha + 1) * math.gamma(f.beta + 1) / f.gain_scale
    assert em.snr_moments(1, p) <= e_f


def test_second_moment_against_mc(e2e_factory):
    p = e2e_factory("T", 40.0)
    model = mc.LinkModel(p.fso, p.rf, p.fso.alpha_tilde, p.fso.beta_tilde, p.c, GTH, moment_order=2.0)
    plan = mc.SimulationPlan(1_000_000, 5, (40.0,), "moments")
    pt = mc.simulate_metric(plan, model, workers=1).points[0]
    assert abs(pt.estimate - em.snr_moments(2, p)) <= 3 * pt.stderr + 0.02 * pt.estimate


def test_moment_order_must_be_positive(e2e_factory):
    with pytest.raises(ValueError):
        em.snr_moments(0, e2e_factory())


@pytest.mark.parametrize("user,r,db", [("R", 1, 50.0), ("T", 1, 40.0), ("T", 2, 70.0)])
def test_capacity_matches_quadrature(e2e_factory, user, r, db):
    p = e2e_factory(user, db, r)
    assert em.ergodic_capacity(p) == pytest.approx(oracles.capacity_quadrature(p), rel=1e-3)


@pytest.mark.parametrize("user,db", [("R", 30.0), ("R", 50.0), ("T", 40.0)])
def test_capacity_jensen_bound(e2e_factory, user, db):
    p = e2e_factory(user, db)
    assert em.ergodic_capacity(p) <= math.log1p(em.snr_moments(1, p))


def test_capacity_units_and_constant(e2e_factory):
    p = e2e_factory("T", 40.0)
    assert em.ergodic_capacity(p, bits=True) == pytest.approx(em.ergodic_capacity(p) / math.log(2))
    assert em.capacity_c0(1) == 1.0
    assert em.capacity_c0(2) == pytest.approx(math.e / (2 * math.pi))


def test_tdm_is_half_of_full_power_capacity(e2e_factory):
    p = e2e_factory("T", 40.0)
    full = replace(p, rf=replace(p.rf, gamma_bar=p.rf.gamma_bar / p.rf.rho ** 2, rho=1.0))
    assert em.tdm_baseline_capacity(p) == pytest.approx(0.5 * em.ergodic_capacity(full), rel=1e-12)


@pytest.mark.parametrize("db", [20.0, 30.0, 40.0, 50.0, 60.0])
def test_star_sum_capacity_beats_tdm(e2e_factory, db):
    star = sum(em.ergodic_capacity(e2e_factory(u, db)) for u in "TR")
    tdm = sum(em.tdm_baseline_capacity(e2e_factory(u, db)) for u in "TR")
    assert star > tdm


def test_calibration_round_trip(raw_cfg):
    db = em.calibrate_rf_snr(raw_cfg, "R", 0.010, 50.0)
    p = em.e2e_params(raw_cfg.replace(gamma_r_override_db_r=db), "R", 50.0)
    assert em.outage_probability(GTH, p) == pytest.approx(0.010, rel=1e-4)


def test_stable_cdf_uses_fso_cdf(e2e_factory):
    # far above the RF bottleneck the end-to-end CDF sits just above the FSO CDF
    p = e2e_factory()
    g = fso_mean(p) * 0.05
    assert em.e2e_cdf(g, p) >= fso_snr_cdf(g, p.gamma_h, p.fso)
