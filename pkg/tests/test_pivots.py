import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wmstat.codecs import decode
from wmstat.errors import DomainError, EnumerationTooLargeError, FamilyMismatchError
from wmstat.keyed_randomness import (
    BabyUniform,
    GumbelUniforms,
    InverseTransform,
    Permutation,
    Scheme,
    bundle_from_generator,
)
from wmstat.ntp import NtpDistribution, make_spike
from wmstat.pivots import (
    Family,
    PivotSeries,
    PivotValue,
    cdf_baby_alt,
    cdf_dif_alt_exact,
    cdf_dif_asymptotic,
    cdf_dif_null_exact,
    cdf_gum_alt,
    pivot_baby,
    pivot_dif,
    pivot_gumbel,
    pivot_series,
    sample_null_pivots,
)


class TestPivotValues:
    def test_gumbel(self):
        assert pivot_gumbel(2, GumbelUniforms(np.array([0.1, 0.7]))).y == 0.7

    def test_dif(self):
        xi = InverseTransform(Permutation(np.array([3, 1, 2])), 0.8)
        # token 1 has rank 3, eta = 1
        assert pivot_dif(1, xi, 3).y == pytest.approx(0.2)
        assert pivot_dif(2, xi, 3).y == pytest.approx(0.8)

    def test_baby(self):
        assert pivot_baby(1, BabyUniform(0.75)).y == pytest.approx(0.5)
        assert pivot_baby(0, BabyUniform(0.75)).y == pytest.approx(-0.5)

    def test_series_is_homogeneous(self):
        with pytest.raises(FamilyMismatchError):
            PivotSeries.from_values([PivotValue(0.1, Family.GUM), PivotValue(0.1, Family.DIF, 5)])

    def test_series_builder(self):
        bundles = [GumbelUniforms(np.array([0.2, 0.3])), GumbelUniforms(np.array([0.6, 0.4]))]
        s = pivot_series([1, 2], bundles, 2)
        assert s.family is Family.GUM and s.values.tolist() == [0.2, 0.4]
        assert len(s.prefix(1)) == 1


class TestCdfs:
    def test_gum_alt_degenerate_is_uniform(self):
        p = NtpDistribution(np.array([1.0, 0.0]))
        r = np.linspace(0, 1, 11)
        assert np.allclose(cdf_gum_alt(p, r), r)

    def test_dif_null_exact_tends_to_limit(self):
        r = np.linspace(0, 1, 21)
        exact = cdf_dif_null_exact(2000, r)
        assert np.max(np.abs(exact - cdf_dif_asymptotic(0.0, r, "H0"))) < 1e-3

    def test_dif_null_exact_two_tokens(self):
        # eta in {0, 1}: F(r) = r on [0, 1]
        r = np.linspace(0, 1, 9)
        assert np.allclose(cdf_dif_null_exact(2, r), r)

    def test_enumeration_limit(self):
        with pytest.raises(EnumerationTooLargeError):
            cdf_dif_alt_exact(NtpDistribution(np.full(9, 1 / 9)), 0.5)

    def test_domain(self):
        with pytest.raises(DomainError):
            cdf_dif_null_exact(4, 1.5)

    @given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=5))
    @settings(max_examples=40, deadline=None)
    def test_exact_alt_cdf_is_a_cdf(self, w):
        p = NtpDistribution(np.array(w) / np.sum(w))
        r = np.linspace(0, 1, 33)
        F = cdf_dif_alt_exact(p, r)
        assert F[0] == pytest.approx(0.0, abs=1e-12) and F[-1] == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(F) >= -1e-12)

    def test_exact_alt_matches_simulation(self):
        p = NtpDistribution(np.array([0.1, 0.6, 0.3]))
        gen = np.random.default_rng(3)
        ys = []
        for _ in range(20000):
            xi = bundle_from_generator(gen, Scheme.INVERSE, 3)
            ys.append(pivot_dif(decode(p, xi), xi, 3).y)
        r = np.linspace(0, 1, 41)
        emp = np.searchsorted(np.sort(ys), r, side="right") / len(ys)
        assert np.max(np.abs(emp - cdf_dif_alt_exact(p, r))) < 0.02

    def test_baby_alt(self):
        assert cdf_baby_alt(0.3, -1.5) == 0.0 and cdf_baby_alt(0.3, 1.0) == 1.0
        assert cdf_baby_alt(0.5, 0.0) == pytest.approx(0.0)


class TestNullSampling:
    def test_dif_finite_vocab_matches_exact(self, rng):
        y = sample_null_pivots(Family.DIF, 50000, rng, vocab_size=7)
        r = np.linspace(0, 1, 41)
        emp = np.searchsorted(np.sort(y), r, side="right") / y.size
        assert np.max(np.abs(emp - cdf_dif_null_exact(7, r))) < 0.01

    def test_dif_limit(self, rng):
        y = sample_null_pivots(Family.DIF, 50000, rng)
        r = np.linspace(0, 1, 41)
        emp = np.searchsorted(np.sort(y), r, side="right") / y.size
        assert np.max(np.abs(emp - cdf_dif_asymptotic(0.0, r, "H0"))) < 0.01

    def test_spike_alt_limit(self):
        # H1 large-vocab CDF against direct simulation at |W| = 500
        p = make_spike(0.4, 500)
        gen = np.random.default_rng(8)
        ys = []
        for _ in range(4000):
            xi = bundle_from_generator(gen, Scheme.INVERSE, 500)
            ys.append(pivot_dif(decode(p, xi), xi, 500).y)
        r = np.linspace(0, 1, 21)
        emp = np.searchsorted(np.sort(ys), r, side="right") / len(ys)
        assert np.max(np.abs(emp - cdf_dif_asymptotic(0.4, r))) < 0.04
