"""Pivotal statistics and their null / alternative distributions.

Three families:

* ``gum``  -- ``Y = U_{w}``, the selected token's uniform (Gumbel-max).
* ``dif``  -- ``Y = |U - (π(w)-1)/(|W|-1)|`` (inverse transform).
* ``baby`` -- ``Y = (2w-1)(2U-1)`` (two-token watermark).
"""
from __future__ import annotations

import csv
import enum
import itertools
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
from scipy.special import logsumexp

from .errors import (
    DomainError,
    EnumerationTooLargeError,
    FamilyMismatchError,
    InvalidParameterError,
    InvalidVocabularyError,
)
from .keyed_randomness import BabyUniform, GumbelUniforms, InverseTransform, Scheme
from .ntp import NtpDistribution

MAX_ENUMERATION_VOCAB = 8
# cap on temporaries when evaluating CDFs at many points
_CHUNK_CELLS = 2_000_000


class Family(str, enum.Enum):
    GUM = "gum"
    DIF = "dif"
    BABY = "baby"

    @classmethod
    def for_scheme(cls, scheme) -> "Family":
        return {Scheme.GUMBEL: cls.GUM, Scheme.INVERSE: cls.DIF, Scheme.BABY: cls.BABY}[Scheme.parse(scheme)]


@dataclass(frozen=True)
class PivotValue:
    y: float
    family: Family
    vocab_size: int | None = None


@dataclass(frozen=True, eq=False)
class PivotSeries:
    """Pivots ``y_1..y_n`` of one family.

    ``vocab_size`` matters only for ``dif`` pivots, whose exact null law
    depends on it; ``None`` means the large-vocabulary limit.
    """

    values: np.ndarray
    family: Family
    vocab_size: int | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        v.flags.writeable = False
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "family", Family(self.family))

    def __len__(self):
        return self.values.size

    def prefix(self, n: int) -> "PivotSeries":
        return PivotSeries(self.values[:n], self.family, self.vocab_size)

    @classmethod
    def from_values(cls, values: Iterable[PivotValue]) -> "PivotSeries":
        values = list(values)
        families = {v.family for v in values}
        if len(families) > 1:
            raise FamilyMismatchError("pivot series must be homogeneous")
        family = families.pop() if families else Family.GUM
        vocab = values[0].vocab_size if values else None
        return cls(np.array([v.y for v in values]), family, vocab)


def eta(rank, vocab_size: int):
    """Normalized rank ``(i - 1) / (|W| - 1)``."""
    return (np.asarray(rank, dtype=np.float64) - 1.0) / (vocab_size - 1)


def pivot_gumbel(token: int, xi: GumbelUniforms) -> PivotValue:
    if not 1 <= token <= xi.u.size:
        raise InvalidParameterError(f"token {token} outside 1..{xi.u.size}")
    return PivotValue(float(xi.u[token - 1]), Family.GUM)


def pivot_dif(token: int, xi: InverseTransform, vocab_size: int) -> PivotValue:
    if vocab_size < 2:
        raise InvalidVocabularyError("dif pivot needs |W| >= 2")
    rank = xi.pi.rank(token)
    return PivotValue(abs(xi.u - float(eta(rank, vocab_size))), Family.DIF, vocab_size)


def pivot_baby(token: int, xi: BabyUniform) -> PivotValue:
    if token not in (0, 1):
        raise InvalidParameterError("baby tokens are 0 or 1")
    return PivotValue((2 * token - 1) * (2 * xi.u - 1), Family.BABY)


def pivot_for(token: int, xi, vocab_size: int) -> PivotValue:
    if isinstance(xi, GumbelUniforms):
        return pivot_gumbel(token, xi)
    if isinstance(xi, InverseTransform):
        return pivot_dif(token, xi, vocab_size)
    if isinstance(xi, BabyUniform):
        return pivot_baby(token, xi)
    raise TypeError(f"unknown randomness bundle {type(xi).__name__}")


def pivot_series(tokens: Sequence[int], bundles: Sequence, vocab_size: int) -> PivotSeries:
    if len(tokens) != len(bundles):
        raise InvalidParameterError("tokens and bundles differ in length")
    values = [pivot_for(w, xi, vocab_size) for w, xi in zip(tokens, bundles)]
    series = PivotSeries.from_values(values)
    if series.family is Family.DIF:
        series = PivotSeries(series.values, Family.DIF, vocab_size)
    return series


def _check_r(r):
    r = np.asarray(r, dtype=np.float64)
    if np.any(r < 0) or np.any(r > 1) or np.any(np.isnan(r)):
        raise DomainError("r must lie in [0, 1]")
    return r


def _scalar_or_array(x, like):
    return float(x) if np.ndim(like) == 0 else x


def cdf_gum_alt(p: NtpDistribution, r):
    """``P_1(Y <= r) = Σ_w P_w r^{1/P_w}`` under the watermark."""
    r = _check_r(r)
    q = p.support
    rr = np.atleast_1d(r)[:, None]
    with np.errstate(divide="ignore"):
        terms = q * np.where(rr > 0, np.exp(np.log(np.where(rr > 0, rr, 1.0)) / q), 0.0)
    out = terms.sum(axis=1)
    return _scalar_or_array(out[0] if np.ndim(r) == 0 else out, r)


def log_density_gum_alt(p: NtpDistribution, r):
    """``log Σ_w r^{1/P_w - 1}`` over the support of ``P`` (``r`` in (0, 1])."""
    r = np.atleast_1d(np.asarray(r, dtype=np.float64))
    q = p.support
    logr = np.log(r)[:, None]
    return logsumexp(logr * (1.0 / q - 1.0), axis=1)


def cdf_dif_null_exact(vocab_size: int, r):
    """Exact null CDF of the dif pivot at finite vocabulary size."""
    if vocab_size < 2:
        raise InvalidVocabularyError("dif pivot needs |W| >= 2")
    r = _check_r(r)
    e = eta(np.arange(1, vocab_size + 1), vocab_size)
    flat = np.atleast_1d(r).ravel()
    out = np.empty(flat.size)
    step = max(1, _CHUNK_CELLS // vocab_size)
    for start in range(0, flat.size, step):
        ri = flat[start:start + step, None]
        lengths = np.minimum(e + ri, 1.0) - np.maximum(e - ri, 0.0)
        out[start:start + step] = lengths.sum(axis=1) / vocab_size
    return float(out[0]) if np.ndim(r) == 0 else out.reshape(np.shape(r))


def null_dif_interval_lengths(vocab_size: int) -> np.ndarray:
    return eta(np.arange(1, vocab_size + 1), vocab_size)


def cdf_dif_alt_exact(p: NtpDistribution, r):
    """Exact watermarked CDF of the dif pivot, by enumerating all ``|W|!`` rank orders.

    The token at rank ``i`` owns the U-interval ``(a_{i-1}, a_i]`` and then
    ``Y = |U - η(i)|``; the CDF averages the length of each interval inside
    the ball ``B(η(i), r)``.
    """
    n = p.vocab_size
    if n > MAX_ENUMERATION_VOCAB:
        raise EnumerationTooLargeError(f"|W|={n} > {MAX_ENUMERATION_VOCAB}; use the Monte Carlo oracle")
    r = _check_r(r)
    perms = np.array(list(itertools.permutations(range(n))), dtype=np.int64)
    masses = p.probs[perms]
    hi = np.cumsum(masses, axis=1)
    lo = hi - masses
    centers = eta(np.arange(1, n + 1), n)
    flat = np.atleast_1d(r).ravel()
    out = np.empty(flat.size)
    step = max(1, _CHUNK_CELLS // perms.size)
    for start in range(0, flat.size, step):
        ri = flat[start:start + step, None, None]
        left = np.maximum(lo, np.maximum(centers - ri, 0.0))
        right = np.minimum(hi, np.minimum(centers + ri, 1.0))
        out[start:start + step] = np.clip(right - left, 0.0, None).sum(axis=2).mean(axis=1)
    out = np.minimum(out, 1.0)
    return float(out[0]) if np.ndim(r) == 0 else out.reshape(np.shape(r))


def cdf_dif_asymptotic(delta: float, r, hypothesis: str = "H1"):
    """Large-vocabulary CDFs: ``1-(1-r)^2`` under H0, ``1-max(1-r/(1-Δ),0)^2`` under H1."""
    r = _check_r(r)
    if hypothesis.upper() == "H0":
        out = 1.0 - (1.0 - r) ** 2
    elif hypothesis.upper() == "H1":
        if not 0 <= delta < 1:
            raise DomainError("delta must lie in [0, 1)")
        out = 1.0 - np.maximum(1.0 - r / (1.0 - delta), 0.0) ** 2
    else:
        raise InvalidParameterError("hypothesis must be 'H0' or 'H1'")
    return _scalar_or_array(out, r)


def density_dif_asymptotic(delta: float, r):
    """``f_{dif,Δ}(r) = 2/(1-Δ) · max(1 - r/(1-Δ), 0)``; ``Δ = 0`` is the null density."""
    r = np.asarray(r, dtype=np.float64)
    return 2.0 / (1.0 - delta) * np.maximum(1.0 - r / (1.0 - delta), 0.0)


def cdf_baby_alt(p0: float, y):
    """Watermarked CDF of the baby pivot when token 0 has probability ``p0``."""
    y = np.asarray(y, dtype=np.float64)
    out = np.maximum(0.0, (y + 1) / 2 - p0) + np.maximum(0.0, (y - 1) / 2 + p0)
    out = np.where(y < -1, 0.0, np.where(y >= 1, 1.0, out))
    return _scalar_or_array(out, y)


def sample_null_pivots(family, size, rng: np.random.Generator, vocab_size: int | None = None) -> np.ndarray:
    """Draw pivots from their closed-form null law (no token generation)."""
    family = Family(family)
    if family is Family.GUM:
        return rng.random(size)
    if family is Family.BABY:
        return 2.0 * rng.random(size) - 1.0
    if vocab_size is None:
        # inverse of F_0(r) = 1 - (1 - r)^2
        return 1.0 - np.sqrt(1.0 - rng.random(size))
    u = rng.random(size)
    ranks = rng.integers(1, vocab_size + 1, size=size)
    return np.abs(u - eta(ranks, vocab_size))


def write_cdf_csv(path, rows: Iterable[tuple]) -> None:
    """Rows of ``(family, hypothesis, delta_or_vocab, r, F)``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["family", "hypothesis", "delta_or_vocab", "r", "F"])
        for row in rows:
            writer.writerow(row)
