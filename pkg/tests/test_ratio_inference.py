import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qratio.distributions import Exponential, Lognormal, replication_rng
from qratio.errors import DegenerateDensity, EqualProbabilities, NonPositiveDenominator
from qratio.income_ingest import ReconstructionPolicy, load_shipped_table, reconstruct
from qratio.quantile_core import sort_sample
from qratio.ratio_inference import (
    OK,
    BatchPlugins,
    QuantilePair,
    VarianceQuadratic,
    asymptotic_correlation,
    asymptotic_width,
    batch_intervals,
    bias_from_plugins,
    critical_value,
    estimate_ratio,
    infer_ratio,
    interval_width,
    log_ratio_bias,
    log_standard_error,
    quadratic_coefficients,
    standard_error,
    stud_bounds,
    studentized_interval,
    variance_quadratic,
    vst_bounds,
    vst_interval,
)
from qratio.robustness import AnalyticDistribution, asv_ratio
from qratio.sim_harness import CoverageConfig, run_coverage

PQ = QuantilePair(0.9, 0.1)

# Exp(1), p=0.2, q=0.8 with analytic plug-ins, 40-digit mpmath
EXP_A0 = 0.096514275226049272814
EXP_A1 = -0.19302855045209854563
EXP_A2 = 1.544228403616788365
EXP_N_BIAS = -1.7382765821348955264
Z975 = 1.95996398454005423552


def exp_plugins(p, q):
    d = Exponential(1.0)
    return d.quantile(p), d.quantile(q), d.quantile_density(p), d.quantile_density(q)


def test_quantile_pair_validation():
    with pytest.raises(EqualProbabilities):
        QuantilePair(0.3, 0.3).require_distinct()
    assert QuantilePair(0.9, 0.1).m == pytest.approx(0.01)


def test_critical_value():
    assert critical_value(0.95) == pytest.approx(Z975, abs=1e-12)
    assert critical_value(0.0) == 0.0


def test_asymptotic_correlation():
    assert asymptotic_correlation(QuantilePair(0.1, 0.9)) == pytest.approx(1 / 9)
    assert asymptotic_correlation(QuantilePair(0.45, 0.55)) == pytest.approx(9 / 11)
    assert asymptotic_correlation(QuantilePair(0.3, 0.6)) == asymptotic_correlation(QuantilePair(0.6, 0.3))


def test_quadratic_exponential_oracle():
    xp, xq, gp, gq = exp_plugins(0.2, 0.8)
    a0, a1, a2 = quadratic_coefficients(0.2, 0.8, xq, gp, gq)
    assert a0 == pytest.approx(EXP_A0, rel=1e-12)
    assert a1 == pytest.approx(EXP_A1, rel=1e-12)
    assert a2 == pytest.approx(EXP_A2, rel=1e-12)
    assert a1 < 0
    VarianceQuadratic(a0, a1, a2).check()


def test_bias_exponential_oracle():
    xp, xq, gp, gq = exp_plugins(0.2, 0.8)
    pq = QuantilePair(0.2, 0.8)
    assert 250 * bias_from_plugins(pq, xp, xq, gp, gq, 250) == pytest.approx(EXP_N_BIAS, rel=1e-12)
    assert bias_from_plugins(pq, xp, xq, gp, gq, 1000) == pytest.approx(
        bias_from_plugins(pq, xp, xq, gp, gq, 100) / 10, rel=1e-12)


def test_bias_vanishes_for_lognormal_symmetric_pair():
    d = Lognormal(0, 1)
    p, q = 0.85, 0.15
    b = bias_from_plugins(QuantilePair(p, q), d.quantile(p), d.quantile(q),
                          d.quantile_density(p), d.quantile_density(q), 500)
    assert abs(b) < 1e-15


def test_asv_matches_variance_quadratic():
    for dist, (p, q) in ((Exponential(1.0), (0.2, 0.8)), (Lognormal(0, 1), (0.9, 0.1)),
                         (Lognormal(0, 1), (0.35, 0.6))):
        xp, xq = dist.quantile(p), dist.quantile(q)
        a0, a1, a2 = quadratic_coefficients(p, q, xq, dist.quantile_density(p), dist.quantile_density(q))
        rho = xp / xq
        asv = asv_ratio(AnalyticDistribution.from_spec(dist), QuantilePair(p, q))
        assert a0 + a1 * rho + a2 * rho**2 == pytest.approx(asv, rel=1e-10)


def test_vst_zero_z_recovers_rho():
    xp, xq, gp, gq = exp_plugins(0.2, 0.8)
    a0, a1, a2 = quadratic_coefficients(0.2, 0.8, xq, gp, gq)
    for rho in (0.1, xp / xq, 3.0):
        lo, hi = vst_bounds(a0, a1, a2, rho, 0.0, 100)
        assert lo == pytest.approx(rho, rel=1e-12)
        assert hi == pytest.approx(rho, rel=1e-12)


def test_conf_zero_collapses(ln_sample):
    rho = estimate_ratio(ln_sample, PQ)
    for iv in (vst_interval(ln_sample, PQ, 0.0), studentized_interval(ln_sample, PQ, 0.0)):
        assert iv[0] == pytest.approx(rho, rel=1e-12)
        assert iv[1] == pytest.approx(rho, rel=1e-12)


def test_studentized_geometric_symmetry(ln_sample):
    rho = estimate_ratio(ln_sample, PQ)
    lo, hi = studentized_interval(ln_sample, PQ)
    assert math.sqrt(lo * hi) == pytest.approx(rho, rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.floats(0.01, 0.98), st.floats(0.01, 0.98))
def test_nesting(c1, c2):
    s = sort_sample(Lognormal(0, 1).draw(replication_rng(1, 0, 0), 300))
    lo_c, hi_c = sorted((c1, c2))
    for fn in (vst_interval, studentized_interval):
        a = fn(s, PQ, lo_c)
        b = fn(s, PQ, hi_c)
        assert b[0] <= a[0] + 1e-12 and a[1] <= b[1] + 1e-12


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 0.95), st.floats(0.05, 0.95),
       st.sampled_from([0.5, 3.0, 1e3]))
def test_scale_invariance(seed, p, q, c):
    if abs(p - q) < 0.02:
        return
    pq = QuantilePair(p, q)
    s = sort_sample(Lognormal(0, 1).draw(replication_rng(seed, 0, 0), 400))
    sc = s.scaled(c)
    assert estimate_ratio(sc, pq) == pytest.approx(estimate_ratio(s, pq), rel=1e-10)
    assert standard_error(sc, pq) == pytest.approx(standard_error(s, pq), rel=1e-10)
    for fn in (vst_interval, studentized_interval):
        assert fn(sc, pq) == pytest.approx(fn(s, pq), rel=1e-10)
    qa, qb = variance_quadratic(s, pq), variance_quadratic(sc, pq)
    assert (qb.a0, qb.a1, qb.a2) == pytest.approx((qa.a0, qa.a1, qa.a2), rel=1e-10)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 10_000), st.floats(0.05, 0.95), st.floats(0.05, 0.95))
def test_endpoints_positive(seed, p, q):
    if abs(p - q) < 0.02:
        return
    s = sort_sample(Exponential(1.0).draw(replication_rng(seed, 0, 0), 200))
    pq = QuantilePair(p, q)
    for fn in (vst_interval, studentized_interval):
        lo, hi = fn(s, pq)
        assert 0 < lo <= hi
    assert standard_error(s, pq) > 0


def test_estimate_ratio_diagnostic_equal_probabilities(ln_sample):
    assert estimate_ratio(ln_sample, QuantilePair(0.4, 0.4)) == 1.0


def test_large_sample_ratios():
    x = sort_sample(Lognormal(0, 1).draw(replication_rng(8, 0, 0), 200_000))
    assert estimate_ratio(x, PQ) == pytest.approx(12.98, rel=0.03)


def test_errors():
    zeros = sort_sample([0.0] * 30 + list(np.linspace(1, 2, 70)))
    with pytest.raises(NonPositiveDenominator):
        infer_ratio(zeros, QuantilePair(0.9, 0.1))
    with pytest.raises(DegenerateDensity):
        infer_ratio(sort_sample([2.0] * 50), PQ)
    with pytest.raises(EqualProbabilities):
        infer_ratio(sort_sample(np.arange(1.0, 50.0)), QuantilePair(0.5, 0.5))


def test_infer_ratio_report(ln_sample):
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        res = infer_ratio(ln_sample, PQ)
    d = res.as_dict()
    assert d["rho_hat"] == estimate_ratio(ln_sample, PQ)
    assert d["se"] == standard_error(ln_sample, PQ)
    assert d["se_log"] == log_standard_error(ln_sample, PQ)
    assert tuple(d["interval_vst"]) == vst_interval(ln_sample, PQ)
    assert set(d["diagnostics"]) >= {"x_p", "x_q", "g_p", "g_q", "bandwidth_p", "bandwidth_q"}


def test_batch_path_matches_single_sample_api():
    x = np.sort(np.stack([Lognormal(0, 1).draw(replication_rng(4, 0, r), 250) for r in range(5)]), axis=1)
    pairs = [QuantilePair(0.9, 0.1), QuantilePair(0.2, 0.8), QuantilePair(0.95, 0.05)]
    plug = BatchPlugins.compute(x, [v for pq in pairs for v in (pq.p, pq.q)])
    for pq in pairs:
        res = batch_intervals(plug, pq)
        assert np.all(res["status_vst"] == OK)
        for r in range(5):
            s = sort_sample(x[r])
            assert res["vst"][0][r] == pytest.approx(vst_interval(s, pq)[0], rel=1e-12)
            assert res["vst"][1][r] == pytest.approx(vst_interval(s, pq)[1], rel=1e-12)
            assert res["stud"][0][r] == pytest.approx(studentized_interval(s, pq)[0], rel=1e-12)
            assert res["stud"][1][r] == pytest.approx(studentized_interval(s, pq)[1], rel=1e-12)


def test_batch_flags_degenerate_rows():
    x = np.vstack([np.zeros(40), np.linspace(1, 2, 40), np.full(40, 3.0)])
    plug = BatchPlugins.compute(x, [0.1, 0.9])
    res = batch_intervals(plug, QuantilePair(0.9, 0.1))
    assert list(res["status_vst"]) == [1, 0, 2]
    assert np.isnan(res["vst"][0][0]) and np.isnan(res["stud"][1][2])


def test_widths():
    assert interval_width((3.81, 3.97)) == pytest.approx(0.16)
    xp, xq, gp, gq = exp_plugins(0.2, 0.8)
    quad = VarianceQuadratic(*quadratic_coefficients(0.2, 0.8, xq, gp, gq))
    pq = QuantilePair(0.2, 0.8)
    w1 = asymptotic_width(pq, xp / xq, quad, 100)
    assert asymptotic_width(pq, xp / xq, quad, 400) == pytest.approx(w1 / 2, rel=1e-12)


def test_se_halves_when_n_quadruples():
    def mean_se(n):
        return np.mean([standard_error(sort_sample(Lognormal(0, 1).draw(replication_rng(31, n, r), n)), PQ)
                        for r in range(200)])
    assert mean_se(4000) / mean_se(1000) == pytest.approx(0.5, rel=0.10)


def test_abs_2005_standard_error_and_intervals():
    table = load_shipped_table(2005)
    for seed in range(5):
        s = reconstruct(table, ReconstructionPolicy(seed=seed))
        assert log_standard_error(s, PQ) == pytest.approx(0.0105, rel=0.15)
        vst, stud = vst_interval(s, PQ), studentized_interval(s, PQ)
        for iv in (vst, stud):
            assert iv[0] == pytest.approx(3.81, abs=0.03)
            assert iv[1] == pytest.approx(3.97, abs=0.03)
        # the two intervals agree to two decimal places
        assert abs(vst[0] - stud[0]) < 0.005 and abs(vst[1] - stud[1]) < 0.005


def _widths(n, reps, seed):
    cfg = CoverageConfig(distribution=Lognormal(0, 1), n=n, pairs=[PQ], reps=reps, master_seed=seed)
    res = run_coverage(cfg)
    return res.row("vst", 0.9, 0.1).mean_width, res.row("stud", 0.9, 0.1).mean_width


def test_lognormal_n500_mean_vst_width():
    vst, _ = _widths(500, 10_000, 41)
    assert vst == pytest.approx(5.739, rel=0.05)


def test_vst_and_studentized_widths_converge():
    gaps = []
    for n, reps in ((1000, 400), (10_000, 200), (100_000, 50)):
        v, s = _widths(n, reps, 43)
        gaps.append(abs(s - v) / s)
    assert gaps[-1] < 0.01
    assert gaps[0] > gaps[-1]
