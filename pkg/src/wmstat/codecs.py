"""Unbiased watermark decoders and the keyed sequence generator."""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .errors import DegenerateRandomnessError, InvalidParameterError, InvalidVocabularyError
from .keyed_randomness import (
    BabyUniform,
    GumbelUniforms,
    InverseTransform,
    PrngConfig,
    RandomnessBundle,
    Scheme,
    SecretKey,
    SeedStream,
    bundle_for_step,
)
from .ntp import NtpDistribution

U_MIN = 2.0**-53
U_MAX = 1.0 - 2.0**-53


def decode_gumbel(p: NtpDistribution, xi: GumbelUniforms) -> int:
    """``argmax_w log(U_w) / P_w`` over tokens with positive probability."""
    probs = p.probs
    if xi.u.size != probs.size:
        raise InvalidVocabularyError("uniform vector and distribution have different lengths")
    if xi.u.max() <= 0:
        raise DegenerateRandomnessError("all uniforms are zero")
    u = np.minimum(np.maximum(xi.u, U_MIN), U_MAX)
    # log(u) < 0, so zero-probability tokens score -inf
    with np.errstate(divide="ignore"):
        scores = np.log(u) / probs
    return int(np.argmax(scores)) + 1


def decode_inverse(p: NtpDistribution, xi: InverseTransform) -> int:
    """``π^{-1}(min{i : F(i; π) >= U})``, smallest rank on exact ties."""
    probs = p.probs
    if len(xi.pi) != probs.size:
        raise InvalidVocabularyError("permutation and distribution have different lengths")
    ranked = probs[xi.pi.inverse - 1]
    cdf = np.cumsum(ranked)
    i = int(np.searchsorted(cdf, xi.u, side="left"))
    # cumulative rounding can leave cdf[-1] a hair below U; a zero-width rank is
    # never selectable, so step to the nearest rank with positive mass
    if i >= ranked.size or ranked[i] == 0:
        positive = np.flatnonzero(ranked > 0)
        later = positive[positive >= min(i, ranked.size - 1)]
        i = int(later[0]) if later.size else int(positive[-1])
    return xi.pi.token_at(i + 1)


def decode_baby(p: NtpDistribution, xi: BabyUniform) -> int:
    """Two-token decoder: token 0 iff ``U <= P_0``."""
    if p.vocab_size != 2:
        raise InvalidVocabularyError("the baby watermark needs exactly two tokens")
    return 0 if xi.u <= p.probs[0] else 1


def decode(p: NtpDistribution, xi: RandomnessBundle) -> int:
    if isinstance(xi, GumbelUniforms):
        return decode_gumbel(p, xi)
    if isinstance(xi, InverseTransform):
        return decode_inverse(p, xi)
    if isinstance(xi, BabyUniform):
        return decode_baby(p, xi)
    raise TypeError(f"unknown randomness bundle {type(xi).__name__}")


NtpSource = Union[Callable[[int, Sequence[int]], NtpDistribution], Sequence[NtpDistribution]]


@dataclass
class GenerationRecord:
    """Watermarked tokens plus everything the detection oracles need.

    ``ntp_used`` is kept for tests only; serialization stores token ids and
    the hashing configuration, and bundles are re-derived from the key.
    """

    scheme: Scheme
    vocab_size: int
    tokens: list[int]
    bundles: list[RandomnessBundle] = field(repr=False)
    ntp_used: list[NtpDistribution] = field(repr=False)
    prompt: list[int] = field(default_factory=list)
    cfg: PrngConfig = field(default_factory=PrngConfig)

    def __len__(self):
        return len(self.tokens)

    def to_dict(self) -> dict:
        return {
            "scheme": self.scheme.value,
            "vocab_size": self.vocab_size,
            "window_size": self.cfg.window_size,
            "pad_token": self.cfg.pad_token,
            "prompt": list(self.prompt),
            "tokens": list(self.tokens),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict())


def _ntp_at(source: NtpSource, t: int, history: Sequence[int]) -> NtpDistribution:
    if callable(source):
        return source(t, history)
    return source[t]


def generate_sequence(
    key: SecretKey,
    cfg: PrngConfig,
    ntp_source: NtpSource,
    n: int,
    scheme,
    prompt: Sequence[int] = (),
) -> GenerationRecord:
    """Generate ``n`` watermarked tokens.

    ``ntp_source`` is either a sequence of distributions indexed by step or a
    callable ``(t, history) -> NtpDistribution`` with 0-based ``t``. Each
    step's randomness is hashed from ``prompt + tokens`` so far.
    """
    if n < 1:
        raise InvalidParameterError("sequence length must be >= 1")
    scheme = Scheme.parse(scheme)
    seeds = SeedStream(key, cfg, prompt)
    tokens, bundles, used = [], [], []
    vocab_size = None
    for t in range(n):
        p = _ntp_at(ntp_source, t, seeds.history)
        if vocab_size is None:
            vocab_size = p.vocab_size
        elif p.vocab_size != vocab_size:
            raise InvalidVocabularyError("vocabulary size changed mid-sequence")
        xi = bundle_for_step(seeds.digest(), scheme, vocab_size)
        w = decode(p, xi)
        tokens.append(w)
        bundles.append(xi)
        used.append(p)
        seeds.push(w)
    return GenerationRecord(scheme, vocab_size, tokens, bundles, used, list(prompt), cfg)


def rederive_bundles(
    key: SecretKey,
    cfg: PrngConfig,
    tokens: Sequence[int],
    scheme,
    vocab_size: int,
    prompt: Sequence[int] = (),
) -> list[RandomnessBundle]:
    """Recompute the per-step randomness a verifier sees for ``tokens``."""
    seeds = SeedStream(key, cfg, prompt)
    out = []
    for w in tokens:
        out.append(bundle_for_step(seeds.digest(), scheme, vocab_size))
        seeds.push(w)
    return out
