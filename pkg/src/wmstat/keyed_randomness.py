"""Per-step pseudorandomness derived from a secret key and the preceding tokens.

The seed layout is normative: SHA-256 over the key bytes followed by the
``m`` window token ids, each encoded as a 4-byte big-endian unsigned integer,
with no separators. Windows shorter than ``m`` are left-padded with the pad
token. The first 16 digest bytes seed a PCG64 generator, whose stream is
consumed in a fixed order per scheme (see :func:`bundle_for_step`).
"""
from __future__ import annotations

import enum
import hashlib
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np
from numba import njit

from .errors import InvalidParameterError, InvalidVocabularyError


class Scheme(str, enum.Enum):
    GUMBEL = "gumbel"
    INVERSE = "inverse"
    BABY = "baby"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise InvalidParameterError(f"unknown watermark scheme {value!r}") from None


@dataclass(frozen=True)
class SecretKey:
    bytes: bytes

    def __post_init__(self):
        if not isinstance(self.bytes, (bytes, bytearray)) or len(self.bytes) < 1:
            raise InvalidParameterError("secret key must be a non-empty byte string")
        object.__setattr__(self, "bytes", bytes(self.bytes))

    @classmethod
    def from_text(cls, text: str) -> "SecretKey":
        return cls(text.encode("utf-8"))

    @classmethod
    def from_int(cls, value: int) -> "SecretKey":
        return cls(int(value).to_bytes(8, "big", signed=False))

    @classmethod
    def from_hex(cls, value: str) -> "SecretKey":
        return cls(bytes.fromhex(value))


@dataclass(frozen=True)
class PrngConfig:
    """Hashing configuration.

    ``window_size=None`` hashes the full prefix (no padding); otherwise the
    last ``window_size`` tokens are hashed after left-padding with
    ``pad_token``.
    """

    window_size: int | None = 5
    pad_token: int = 0
    master_seed: int = 0

    def __post_init__(self):
        if self.window_size is not None and self.window_size < 1:
            raise InvalidParameterError("window_size must be >= 1 (or None for the full prefix)")
        if not 0 <= self.pad_token < 2**32:
            raise InvalidParameterError("pad_token must fit in 4 unsigned bytes")
        if not 0 <= self.master_seed < 2**64:
            raise InvalidParameterError("master_seed must be a 64-bit unsigned integer")

    def window(self, history: Sequence[int]) -> list[int]:
        """The (padded) hashing window for the step following ``history``."""
        history = [int(w) for w in history]
        if self.window_size is None:
            return history
        recent = history[-self.window_size:] if history else []
        return [self.pad_token] * (self.window_size - len(recent)) + recent


@dataclass(frozen=True)
class Permutation:
    """A bijection of tokens ``1..n`` onto ranks ``1..n``.

    ``mapping[w - 1]`` is the rank of token ``w``; ``inverse[i - 1]`` is the
    token holding rank ``i``.
    """

    mapping: np.ndarray
    inverse: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        mapping = np.asarray(self.mapping, dtype=np.int64)
        n = mapping.size
        inverse = np.zeros(n, dtype=np.int64)
        inverse[mapping - 1] = np.arange(1, n + 1)
        if n == 0 or mapping.min() != 1 or mapping.max() != n or np.any(inverse == 0):
            raise InvalidParameterError("permutation mapping is not a bijection of 1..n")
        mapping.flags.writeable = False
        inverse.flags.writeable = False
        object.__setattr__(self, "mapping", mapping)
        object.__setattr__(self, "inverse", inverse)

    @classmethod
    def _unchecked(cls, mapping: np.ndarray) -> "Permutation":
        """Wrap a mapping already known to be a bijection (skips validation)."""
        perm = object.__new__(cls)
        inverse = np.empty_like(mapping)
        inverse[mapping - 1] = np.arange(1, mapping.size + 1)
        mapping.flags.writeable = False
        inverse.flags.writeable = False
        object.__setattr__(perm, "mapping", mapping)
        object.__setattr__(perm, "inverse", inverse)
        return perm

    def __len__(self):
        return self.mapping.size

    def rank(self, token: int) -> int:
        return int(self.mapping[token - 1])

    def token_at(self, rank: int) -> int:
        return int(self.inverse[rank - 1])

    def __eq__(self, other):
        return isinstance(other, Permutation) and np.array_equal(self.mapping, other.mapping)

    def __hash__(self):
        return hash(self.mapping.tobytes())


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=np.float64)
    a.flags.writeable = False
    return a


@dataclass(frozen=True, eq=False)
class GumbelUniforms:
    u: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "u", _frozen(self.u))

    def __eq__(self, other):
        return isinstance(other, GumbelUniforms) and np.array_equal(self.u, other.u)


@dataclass(frozen=True)
class InverseTransform:
    pi: Permutation
    u: float


@dataclass(frozen=True)
class BabyUniform:
    u: float


RandomnessBundle = Union[GumbelUniforms, InverseTransform, BabyUniform]


def derive_seed(key: SecretKey, window: Sequence[int], cfg: PrngConfig) -> bytes:
    """SHA-256 digest of ``key || window`` after padding to ``cfg.window_size``.

    ``window`` may be the whole history; only its last ``window_size`` tokens
    are used.
    """
    return hashlib.sha256(key.bytes + pack_tokens(cfg.window(window))).digest()


def pack_tokens(tokens: Sequence[int]) -> bytes:
    """Token ids as consecutive 4-byte big-endian unsigned integers."""
    arr = np.asarray(tokens, dtype=np.int64)
    if arr.size and (arr.min() < 0 or arr.max() >= 2**32):
        raise InvalidParameterError("token ids must fit in 4 unsigned bytes")
    return arr.astype(">u4").tobytes()


class SeedStream:
    """Digests for successive steps of one sequence.

    Equivalent to calling :func:`derive_seed` on the growing history, but
    with a full-prefix window the hash state is extended one token at a time
    instead of rehashing the whole prefix.
    """

    def __init__(self, key: SecretKey, cfg: PrngConfig, prompt: Sequence[int] = ()):
        self.key = key
        self.cfg = cfg
        self.history = [int(w) for w in prompt]
        if cfg.window_size is None:
            self._state = hashlib.sha256(key.bytes + pack_tokens(self.history))

    def digest(self) -> bytes:
        if self.cfg.window_size is None:
            return self._state.digest()
        return derive_seed(self.key, self.history, self.cfg)

    def push(self, token: int) -> None:
        token = int(token)
        self.history.append(token)
        if self.cfg.window_size is None:
            self._state.update(pack_tokens([token]))


def generator_from_digest(digest: bytes) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest[:16], "big")))


@njit(cache=True)
def _swap_pass(values, draws):
    n = values.size
    for k in range(n - 1):
        i = n - 1 - k
        j = draws[k]
        tmp = values[i]
        values[i] = values[j]
        values[j] = tmp
    return values


def sample_permutation(gen: np.random.Generator, n: int) -> Permutation:
    """Fisher-Yates shuffle of ``1..n``.

    For ``i = n-1, ..., 1`` (0-based) position ``i`` is swapped with a
    position drawn uniformly from ``0..i``; the ``n - 1`` draws are taken from
    ``gen`` in that order.
    """
    if n < 1:
        raise InvalidParameterError("permutation size must be >= 1")
    values = np.arange(1, n + 1, dtype=np.int64)
    if n > 1:
        draws = gen.integers(0, np.arange(n, 1, -1, dtype=np.int64)).astype(np.int64)
        _swap_pass(values, draws)
    return Permutation._unchecked(values)


def bundle_from_generator(gen: np.random.Generator, scheme, vocab_size: int) -> RandomnessBundle:
    scheme = Scheme.parse(scheme)
    if vocab_size < 2:
        raise InvalidVocabularyError(f"vocabulary size must be >= 2, got {vocab_size}")
    if scheme is Scheme.GUMBEL:
        return GumbelUniforms(gen.random(vocab_size))
    if scheme is Scheme.INVERSE:
        u = float(gen.random())
        return InverseTransform(sample_permutation(gen, vocab_size), u)
    return BabyUniform(float(gen.random()))


def bundle_for_step(digest: bytes, scheme, vocab_size: int) -> RandomnessBundle:
    """Expand a seed digest into the pseudorandom object for one step.

    Gumbel draws ``vocab_size`` uniforms; inverse transform draws one uniform
    and then a permutation; baby draws one uniform. Uniforms use the top 53
    bits of each 64-bit output, so they lie in [0, 1).
    """
    return bundle_from_generator(generator_from_digest(digest), scheme, vocab_size)


def bundle_at(key: SecretKey, history: Sequence[int], cfg: PrngConfig, scheme, vocab_size: int) -> RandomnessBundle:
    return bundle_for_step(derive_seed(key, history, cfg), scheme, vocab_size)


def replicate_rng(master_seed: int, *index: int) -> np.random.Generator:
    """Independent substream for replicate ``index`` under ``master_seed``.

    Streams depend only on (master_seed, index), never on execution order.
    """
    return np.random.default_rng([int(master_seed), *map(int, index)])
