import json
import math

import numpy as np
import pytest

from wmstat.codecs import generate_sequence, rederive_bundles
from wmstat.detection import (
    DetectionConfig,
    critical_gaussian,
    critical_monte_carlo,
    critical_monte_carlo_batches,
    detect,
    sum_statistic,
)
from wmstat.errors import InvalidParameterError, MustUseMonteCarloError
from wmstat.keyed_randomness import PrngConfig, SecretKey
from wmstat.ntp import make_spike
from wmstat.pivots import Family, PivotSeries, pivot_series
from wmstat.scores import ScoreSpec


class TestCriticalValues:
    def test_gaussian_frozen(self):
        # n E0 h + z_0.95 sqrt(n Var0 h) with z_0.95 = 1.6448536269514722
        assert critical_gaussian(ScoreSpec("ars"), 400, 0.05) == pytest.approx(432.897072539029, abs=1e-9)
        assert critical_gaussian(ScoreSpec("log"), 400, 0.05) == pytest.approx(-367.102927460971, abs=1e-9)

    def test_untruncated_needs_monte_carlo(self):
        with pytest.raises(MustUseMonteCarloError):
            critical_gaussian(ScoreSpec("dif_opt", 0.1, math.inf), 100, 0.05)

    def test_alpha_validation(self):
        with pytest.raises(InvalidParameterError):
            critical_gaussian(ScoreSpec("ars"), 10, 1.0)
        with pytest.raises(InvalidParameterError):
            DetectionConfig(mc_replicates=10)

    def test_monte_carlo_exact_for_gamma_sum(self):
        # ars sums of n exponentials follow Gamma(n, 1)
        from scipy.stats import gamma

        cfg = DetectionConfig(0.05, "monte_carlo", 2000, 10, seed=3)
        batches = critical_monte_carlo_batches(ScoreSpec("ars"), 50, 0.05, cfg)
        se = batches.std(ddof=1) / math.sqrt(batches.size)
        assert abs(batches.mean() - gamma.ppf(0.95, 50)) < 4 * se

    def test_monte_carlo_reproducible(self):
        cfg = DetectionConfig(0.05, "monte_carlo", 200, 3, seed=1)
        a = critical_monte_carlo(ScoreSpec("log"), 20, 0.05, cfg)
        assert a == critical_monte_carlo(ScoreSpec("log"), 20, 0.05, cfg)


class TestDetect:
    def _record(self, scheme, n=200):
        ntps = [make_spike(0.4, 100)] * n
        return generate_sequence(SecretKey.from_int(5), PrngConfig(window_size=None), ntps, n, scheme)

    @pytest.mark.parametrize("scheme,score", [("gumbel", ScoreSpec("ars")), ("inverse", ScoreSpec("dif_neg"))])
    def test_right_key_rejects_wrong_key_does_not(self, scheme, score):
        rec = self._record(scheme)
        good = pivot_series(rec.tokens, rec.bundles, 100)
        assert detect(good, score).reject
        wrong = rederive_bundles(SecretKey.from_int(6), rec.cfg, rec.tokens, scheme, 100)
        report = detect(pivot_series(rec.tokens, wrong, 100), score)
        assert report.approx_p > 1e-4

    def test_report_json(self):
        series = PivotSeries(np.full(10, 0.5), Family.GUM)
        rep = detect(series, ScoreSpec("ars"))
        assert json.loads(rep.to_json())["n"] == 10
        assert sum_statistic(series, ScoreSpec("ars")) == pytest.approx(10 * math.log(2))

    def test_prefix_override(self):
        series = PivotSeries(np.full(10, 0.99), Family.GUM)
        assert detect(series, ScoreSpec("ars"), n_override=4).n == 4
        with pytest.raises(InvalidParameterError):
            detect(series, ScoreSpec("ars"), n_override=11)

    def test_monte_carlo_p_value_for_untruncated(self):
        series = PivotSeries(np.full(30, 0.01), Family.DIF, 1000)
        cfg = DetectionConfig(0.05, "monte_carlo", 200, 2)
        rep = detect(series, ScoreSpec("dif_opt", 0.1, math.inf), cfg)
        assert rep.reject and 0.0 <= rep.approx_p <= 0.05
