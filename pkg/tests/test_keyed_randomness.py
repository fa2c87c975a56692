import hashlib

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from wmstat.errors import InvalidParameterError, InvalidVocabularyError
from wmstat.keyed_randomness import (
    GumbelUniforms,
    InverseTransform,
    Permutation,
    PrngConfig,
    Scheme,
    SecretKey,
    SeedStream,
    bundle_at,
    bundle_for_step,
    derive_seed,
    pack_tokens,
    replicate_rng,
    sample_permutation,
)


class TestSeedDerivation:
    def test_digest_matches_manual_sha256(self):
        key = SecretKey.from_text("k")
        cfg = PrngConfig(window_size=3)
        want = hashlib.sha256(b"k" + (0).to_bytes(4, "big") + (7).to_bytes(4, "big") + (9).to_bytes(4, "big")).digest()
        assert derive_seed(key, [7, 9], cfg) == want

    def test_window_uses_only_recent_tokens(self):
        key = SecretKey.from_int(3)
        cfg = PrngConfig(window_size=2)
        assert derive_seed(key, [1, 2, 3, 4], cfg) == derive_seed(key, [9, 9, 3, 4], cfg)
        assert derive_seed(key, [1, 2, 3, 4], cfg) != derive_seed(key, [1, 2, 4, 3], cfg)

    def test_full_prefix_distinguishes_histories(self):
        key = SecretKey.from_int(3)
        cfg = PrngConfig(window_size=None)
        assert derive_seed(key, [1, 2, 3], cfg) != derive_seed(key, [9, 2, 3], cfg)

    def test_keys_separate_streams(self):
        cfg = PrngConfig()
        assert derive_seed(SecretKey.from_int(1), [5], cfg) != derive_seed(SecretKey.from_int(2), [5], cfg)

    @pytest.mark.parametrize("window", [None, 1, 4])
    def test_seed_stream_matches_rehashing(self, window):
        key = SecretKey.from_hex("00ff10")
        cfg = PrngConfig(window_size=window)
        stream = SeedStream(key, cfg, [4, 5])
        history = [4, 5]
        for w in [1, 2, 3, 2, 1, 7]:
            assert stream.digest() == derive_seed(key, history, cfg)
            stream.push(w)
            history.append(w)

    def test_pack_rejects_out_of_range(self):
        with pytest.raises(InvalidParameterError):
            pack_tokens([-1])
        with pytest.raises(InvalidParameterError):
            pack_tokens([2**32])

    def test_config_validation(self):
        with pytest.raises(InvalidParameterError):
            PrngConfig(window_size=0)
        assert PrngConfig(window_size=3).window([]) == [0, 0, 0]


class TestPermutation:
    @given(st.integers(1, 40), st.integers(0, 2**32 - 1))
    @settings(max_examples=50, deadline=None)
    def test_is_bijection_with_inverse(self, n, seed):
        perm = sample_permutation(np.random.default_rng(seed), n)
        assert sorted(perm.mapping.tolist()) == list(range(1, n + 1))
        for w in range(1, n + 1):
            assert perm.token_at(perm.rank(w)) == w

    def test_rejects_non_bijection(self):
        with pytest.raises(InvalidParameterError):
            Permutation(np.array([1, 1, 3]))

    def test_all_orders_equally_likely(self):
        from scipy.stats import chisquare

        gen = np.random.default_rng(5)
        counts = {}
        for _ in range(24000):
            key = tuple(sample_permutation(gen, 4).mapping.tolist())
            counts[key] = counts.get(key, 0) + 1
        assert len(counts) == 24
        assert chisquare(list(counts.values())).pvalue > 0.001


class TestBundles:
    def test_deterministic(self):
        key = SecretKey.from_int(11)
        cfg = PrngConfig()
        for scheme in Scheme:
            assert bundle_at(key, [1, 2], cfg, scheme, 6) == bundle_at(key, [1, 2], cfg, scheme, 6)

    def test_shapes(self):
        digest = bytes(32)
        g = bundle_for_step(digest, Scheme.GUMBEL, 9)
        assert isinstance(g, GumbelUniforms) and g.u.shape == (9,)
        assert np.all((g.u >= 0) & (g.u < 1))
        inv = bundle_for_step(digest, "inverse", 9)
        assert isinstance(inv, InverseTransform) and len(inv.pi) == 9 and 0 <= inv.u < 1

    def test_bundle_is_immutable(self):
        g = bundle_for_step(bytes(32), Scheme.GUMBEL, 4)
        with pytest.raises(ValueError):
            g.u[0] = 0.5

    def test_rejects_tiny_vocab(self):
        with pytest.raises(InvalidVocabularyError):
            bundle_for_step(bytes(32), Scheme.GUMBEL, 1)

    def test_scheme_parse(self):
        assert Scheme.parse("Gumbel") is Scheme.GUMBEL
        with pytest.raises(InvalidParameterError):
            Scheme.parse("kgw")


class TestReplicateStreams:
    def test_order_independent(self):
        a = [replicate_rng(7, i).random() for i in range(5)]
        b = [replicate_rng(7, i).random() for i in reversed(range(5))][::-1]
        assert a == b

    def test_distinct_indices_differ(self):
        assert replicate_rng(7, 1, 0).random() != replicate_rng(7, 2, 0).random()
