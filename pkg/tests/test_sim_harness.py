import json

import numpy as np
import pytest

from qratio.distributions import Exponential, Lognormal, ParetoII, ZeroSpikeMixture
from qratio.errors import ConfigError
from qratio.ratio_inference import QuantilePair
from qratio.sim_harness import (
    CSV_COLUMNS,
    CoverageConfig,
    grid_pairs,
    run,
    run_contour_grid,
    run_coverage,
    run_coverage_mixture,
    run_two_sample_coverage,
)

PAIRS = [(0.9, 0.1), (0.2, 0.8)]


def _cfg(**kw):
    base = dict(distribution=Lognormal(0, 1), n=200, pairs=PAIRS, reps=120, master_seed=7, chunk_size=25)
    base.update(kw)
    return CoverageConfig(**base)


def test_deterministic_across_workers():
    serial = run_coverage(_cfg(workers=1))
    parallel = run_coverage(_cfg(workers=3))
    assert serial.to_csv() == parallel.to_csv()
    # chunking does not matter either
    assert run_coverage(_cfg(chunk_size=120)).to_csv() == serial.to_csv()


def test_csv_byte_identical_and_columns():
    a, b = run_coverage(_cfg()).to_csv(), run_coverage(_cfg()).to_csv()
    assert a == b
    header, first = a.splitlines()[:2]
    assert tuple(header.split(",")) == CSV_COLUMNS
    row = dict(zip(CSV_COLUMNS, first.split(",")))
    assert row["family"] == "lognormal" and row["params"] == "mu=0;sigma=1"
    assert row["m"] == "" and row["seed"] == "7" and row["method"] == "vst"


def test_single_replication():
    res = run_coverage(_cfg(pairs=[(0.9, 0.1)], reps=1, methods=["vst"]))
    assert len(res.rows) == 1
    assert res.rows[0].cp in (0.0, 1.0)
    assert res.runtime < 1.0


def test_seed_changes_results():
    assert run_coverage(_cfg()).to_csv() != run_coverage(_cfg(master_seed=8)).to_csv()


def test_grid_pairs():
    pairs = grid_pairs(0.05, 0.95, 0.05)
    assert len(pairs) == 19 * 18
    assert all(pq.p != pq.q for pq in pairs)
    with pytest.raises(ConfigError):
        grid_pairs(0.05, 0.95, 0.07)


def test_grid_cell_matches_standalone_run():
    cfg = _cfg(pairs=[(0.9, 0.1)], reps=60)
    grid = run_contour_grid(cfg, 0.1, 0.9, 0.1)
    alone = run_coverage(cfg)
    for method in ("vst", "stud"):
        g, a = grid.row(method, 0.9, 0.1), alone.row(method, 0.9, 0.1)
        assert (g.cp, g.mean_width, g.median_width) == (a.cp, a.mean_width, a.median_width)
    assert len(grid.rows) == 2 * 9 * 8


def test_width_decreases_with_n():
    widths = [run_coverage(_cfg(n=n, reps=400, pairs=[(0.9, 0.1)])).row("vst", 0.9, 0.1).mean_width
              for n in (100, 250, 500, 1000)]
    assert all(b < a for a, b in zip(widths, widths[1:]))


def test_coverage_within_monte_carlo_band():
    reps = 2000
    res = run_coverage(_cfg(n=500, reps=reps, pairs=[(0.9, 0.1)], master_seed=3, chunk_size=500))
    c = 0.963  # reference coverage at this configuration
    for method in ("vst", "stud"):
        assert abs(res.row(method, 0.9, 0.1).cp - c) < 4 * np.sqrt(c * (1 - c) / reps)


def test_truth_and_metadata():
    res = run_coverage(_cfg(distribution=Exponential(1.0), reps=10))
    r = res.row("stud", 0.2, 0.8)
    assert r.true_rho == pytest.approx(np.log(0.8) / np.log(0.2))
    assert r.reps == 10 and r.degenerate_count == 0 and r.epsilon == 0.0


def test_mixture_limit_matches_uncontaminated():
    plain = run_coverage(_cfg(reps=40))
    mixed = run_coverage_mixture(_cfg(reps=40, distribution=ZeroSpikeMixture(Lognormal(0, 1), 1e-12)))
    for a, b in zip(plain.rows, mixed.rows):
        assert (a.cp, a.mean_width) == (b.cp, b.mean_width)
        assert b.true_rho == pytest.approx(a.true_rho, rel=1e-9)


def test_mixture_skips_pairs_at_the_spike(caplog):
    cfg = _cfg(distribution=ZeroSpikeMixture(ParetoII(2), 0.05), pairs=[(0.9, 0.1), (0.9, 0.05)], reps=20)
    res = run_coverage_mixture(cfg)
    assert {(r.p, r.q) for r in res.rows} == {(0.9, 0.1)}
    assert "skipping 1 pair" in caplog.text
    with pytest.raises(ConfigError):
        run_coverage_mixture(_cfg())


def test_degenerate_replications_are_counted():
    cfg = _cfg(distribution=ZeroSpikeMixture(ParetoII(2), 0.3), n=20, pairs=[(0.9, 0.35)], reps=300)
    r = run_coverage(cfg).row("vst", 0.9, 0.35)
    assert r.degenerate_count > 0
    assert sum(r.degenerate_reasons.values()) == r.degenerate_count
    assert "nonpositive_denominator" in r.degenerate_reasons
    assert 0.0 <= r.cp <= 1.0


def test_two_sample_identical_specs():
    cfg = _cfg(m=150, distribution_y=Lognormal(0, 1), reps=400, pairs=[(0.9, 0.1)])
    res = run_two_sample_coverage(cfg)
    (row,) = res.rows
    assert row.method == "logdiff" and row.true_rho == 1.0 and row.m == 150
    assert row.params == "mu=0;sigma=1|lognormal(mu=0;sigma=1)"
    assert row.cp > 0.9
    assert run(cfg).to_csv() == res.to_csv()


def test_two_sample_determinism_across_workers():
    cfg = _cfg(m=100, distribution_y=Lognormal(0.2, 1.5), reps=60)
    assert run_two_sample_coverage(cfg).to_csv() == run_two_sample_coverage(_cfg(
        m=100, distribution_y=Lognormal(0.2, 1.5), reps=60, workers=2)).to_csv()


def test_config_from_json():
    text = json.dumps({
        "distribution": {"family": "lognormal", "mu": 0, "sigma": 1, "epsilon": 0.01},
        "n": 300, "grid": {"step": 0.3}, "reps": 5, "methods": ["vst"],
        "bandwidth": {"upper_clamp": True},
    })
    cfg = CoverageConfig.from_json(text)
    assert cfg.epsilon == 0.01 and cfg.methods == ("vst",)
    assert cfg.bandwidth.upper_clamp
    assert {(pq.p, pq.q) for pq in cfg.pairs} == {(0.05, 0.35), (0.05, 0.65), (0.05, 0.95), (0.35, 0.05),
                                                  (0.35, 0.65), (0.35, 0.95), (0.65, 0.05), (0.65, 0.35),
                                                  (0.65, 0.95), (0.95, 0.05), (0.95, 0.35), (0.95, 0.65)}


@pytest.mark.parametrize("bad", [
    {"n": 100, "pairs": [[0.9, 0.1]]},
    {"distribution": "lognormal", "n": 1, "pairs": [[0.9, 0.1]]},
    {"distribution": "lognormal", "n": 100, "pairs": [[0.9, 0.1]], "extra": 1},
    {"distribution": "lognormal", "n": 100, "pairs": [[0.9, 0.1]], "m": 50},
    {"distribution": "lognormal", "n": 100, "pairs": [[0.9, 1.1]]},
    {"distribution": "lognormal", "n": 100, "pairs": [[0.9, 0.1]], "methods": ["wald"]},
    {"distribution": "lognormal", "n": 100},
])
def test_config_rejects(bad):
    with pytest.raises((ConfigError, ValueError)):
        CoverageConfig.from_dict(bad)


def test_config_rejects_bad_json():
    with pytest.raises(ConfigError):
        CoverageConfig.from_json("{not json")


def test_equal_pair_rejected():
    with pytest.raises(ValueError):
        run_coverage(_cfg(pairs=[(0.4, 0.4)]))


def test_config_accepts_distribution_string():
    cfg = CoverageConfig.from_dict({"distribution": "pareto2:a=2", "n": 100, "pairs": [[0.9, 0.1]]})
    assert cfg.distribution == ParetoII(2.0)
