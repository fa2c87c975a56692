import csv
import io
import math

import numpy as np
import pytest

from wmstat.errors import InvalidParameterError, TraceError
from wmstat.experiments import (
    CURVE_COLUMNS,
    ExperimentConfig,
    run_efficiency_sweep,
    run_tradeoff,
    run_type1,
    run_type2,
    simulate_pivots,
    write_curve_csv,
)
from wmstat.ntp import NtpTrace, make_power_law
from wmstat.pivots import Family

SMALL = dict(vocab_size=50, n_grid=(20, 40), replicates=60, mc_replicates=200, mc_batches=2)


class TestConfig:
    def test_validation(self):
        with pytest.raises(InvalidParameterError):
            ExperimentConfig(replicates=0)
        with pytest.raises(InvalidParameterError):
            ExperimentConfig(null_law="zipf")
        with pytest.raises(InvalidParameterError):
            ExperimentConfig(scores=("what",))

    def test_families(self):
        cfg = ExperimentConfig(scores=("ars", "dif_neg"))
        assert cfg.families == [Family.DIF, Family.GUM]


class TestCurves:
    def test_bit_reproducible(self):
        cfg = ExperimentConfig(scores=("ars", "dif_neg", "gum_opt(delta=0.001)"), **SMALL)
        a, b = io.StringIO(), io.StringIO()
        write_curve_csv(a, run_type1(cfg))
        write_curve_csv(b, run_type1(cfg))
        assert a.getvalue() == b.getvalue()

    def test_frequencies_and_errors(self):
        cfg = ExperimentConfig(scores=("ars", "dif_neg"), **SMALL)
        for p in run_type2(cfg):
            assert 0.0 <= p.value <= 1.0
            assert p.stderr == pytest.approx(math.sqrt(p.value * (1 - p.value) / cfg.replicates))

    def test_pivots_are_uniform_under_null(self):
        cfg = ExperimentConfig(scores=("ars",), **SMALL)
        y = simulate_pivots(cfg, watermarked=False)[Family.GUM]
        assert y.shape == (60, 40)
        assert abs(y.mean() - 0.5) < 0.03

    def test_spike_null_keeps_pivotality(self):
        from scipy.stats import kstest

        cfg = ExperimentConfig(scores=("ars",), null_law="spike", **SMALL)
        y = simulate_pivots(cfg, watermarked=False)[Family.GUM]
        assert kstest(y.ravel(), "uniform").pvalue > 0.001

    def test_watermark_is_detected(self):
        cfg = ExperimentConfig(scores=("ars", "dif_neg"), **{**SMALL, "n_grid": (200,), "delta_low": 0.3,
                                                                 "delta_high": 0.5, "replicates": 20})
        for p in run_type2(cfg):
            assert p.value < 0.1

    def test_type2_ordering_at_short_length(self):
        # at n=400 every Type II error is 0; short sequences show the ordering
        gum = ("gum_opt(delta=0.001)", "ars", "log", "ind")
        dif = ("dif_opt(delta=0.001, M=10)", "dif_neg")
        cfg = ExperimentConfig(scores=gum + dif, vocab_size=1000, n_grid=(10,), replicates=400, master_seed=21)
        by = {p.score: p for p in run_type2(cfg)}
        assert 0.0 < by["ars"].value < by["log"].value < 1.0
        for chain in (gum, dif):
            for better, worse in zip(chain, chain[1:]):
                a, b = by[better], by[worse]
                assert a.value - b.value <= 2.0 * math.hypot(a.stderr, b.stderr), (better, worse)

    def test_csv_columns(self, tmp_path):
        cfg = ExperimentConfig(scores=("log",), **SMALL)
        path = tmp_path / "curve.csv"
        run_type1(cfg, path)
        rows = list(csv.reader(path.open()))
        assert tuple(rows[0]) == CURVE_COLUMNS and len(rows) == 3


class TestSweeps:
    def test_efficiency_sweep(self, tmp_path):
        path = tmp_path / "rates.csv"
        res = run_efficiency_sweep(["ars", "log", "gum_opt"], [0.1, 0.3, 0.6], path)
        assert res.crossover == pytest.approx(0.17756, abs=1e-3)
        by = {(s, d): r for s, d, r, _ in res.rows}
        for d in (0.1, 0.3, 0.6):
            assert by["gum_opt", d] >= max(by["ars", d], by["log", d]) - 1e-9
        assert path.read_text().startswith("score,delta,rate,theta_star")

    def test_tradeoff_columns(self):
        rng = np.random.default_rng(0)
        top = rng.beta(5, 1, size=400)
        trace = NtpTrace("top1", tuple(top.tolist()))
        grid = [0.0, 0.05, 0.1, 0.2, 0.3, 0.5]
        res = run_tradeoff(trace, ["ars", "gum_opt"], grid)
        rows = [r for r in res.rows if r[0] == "ars"]
        assert rows[0][2] == 1.0
        gammas = [r[2] for r in rows]
        rates = [r[3] for r in rows]
        assert np.all(np.diff(gammas) <= 0) and np.all(np.diff(rates) >= 0)
        assert res.argmax["ars"] in grid

    def test_tradeoff_with_full_trace(self):
        trace = NtpTrace("full", (make_power_law(1.0, 0.5, 20),) * 3)
        assert run_tradeoff(trace, ["log"], [0.1, 0.4]).argmax["log"] in (0.1, 0.4)

    def test_empty_trace(self):
        with pytest.raises(TraceError):
            run_tradeoff(NtpTrace("top1", ()), ["ars"], [0.1])
