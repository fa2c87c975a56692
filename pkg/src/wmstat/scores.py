"""Score functions applied to pivots, their text form, and their null moments."""
from __future__ import annotations

import functools
import math
import re
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import logsumexp

from .errors import FamilyMismatchError, InvalidParameterError
from .ntp import NtpDistribution, least_favorable, vertex_counts
from .pivots import Family, PivotSeries, PivotValue, eta, sample_null_pivots

R_MIN = 2.0**-53
R_MAX = 1.0 - 2.0**-53
DEFAULT_TRUNCATION = 10.0

KINDS = ("ars", "log", "ind", "gum_opt", "llr", "dif_opt", "dif_neg", "baby_id")
FAMILY_OF = {
    "ars": Family.GUM,
    "log": Family.GUM,
    "ind": Family.GUM,
    "gum_opt": Family.GUM,
    "llr": Family.GUM,
    "dif_opt": Family.DIF,
    "dif_neg": Family.DIF,
    "baby_id": Family.BABY,
}
_QUAD = dict(epsabs=1e-10, epsrel=1e-10, limit=400)


@dataclass(frozen=True)
class ScoreSpec:
    """An immutable score description.

    ``delta`` is the threshold for ``ind`` and the regularity level for
    ``gum_opt``, ``dif_opt`` and ``llr`` (whose reference law defaults to the
    least-favorable vertex at that level). ``M`` truncates ``dif_opt`` to
    ``[-M, M]``; ``M = inf`` means untruncated. ``ref`` is an explicit
    reference probability vector for ``llr``.
    """

    kind: str
    delta: float | None = None
    M: float | None = None
    ref: tuple | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameterError(f"unknown score kind {self.kind!r}")
        k = self.kind
        if k == "ind" and not (self.delta is not None and 0 < self.delta < 1):
            raise InvalidParameterError("ind needs delta in (0, 1)")
        if k in ("gum_opt", "dif_opt") and not (self.delta is not None and 0 <= self.delta < 1):
            raise InvalidParameterError(f"{k} needs delta in [0, 1)")
        if k == "dif_opt":
            m = DEFAULT_TRUNCATION if self.M is None else float(self.M)
            if not m > 0:
                raise InvalidParameterError("truncation bound M must be > 0")
            object.__setattr__(self, "M", m)
        elif self.M is not None:
            raise InvalidParameterError(f"{k} takes no truncation bound")
        if k == "llr":
            if self.ref is None:
                if self.delta is None or not 0 <= self.delta < 1:
                    raise InvalidParameterError("llr needs a reference law or delta in [0, 1)")
            else:
                object.__setattr__(self, "ref", tuple(float(x) for x in NtpDistribution(self.ref).probs))
        elif self.ref is not None:
            raise InvalidParameterError(f"{k} takes no reference law")
        if k in ("ars", "log", "dif_neg", "baby_id") and self.delta is not None:
            raise InvalidParameterError(f"{k} takes no delta")

    @property
    def family(self) -> Family:
        return FAMILY_OF[self.kind]

    @property
    def nondecreasing(self) -> bool:
        """True for scores nondecreasing in the pivot; the dif scores are nonincreasing."""
        return self.kind not in ("dif_opt", "dif_neg")

    @property
    def truncated(self) -> bool:
        return self.kind != "dif_opt" or math.isfinite(self.M)

    def reference(self) -> NtpDistribution:
        if self.kind != "llr":
            raise InvalidParameterError("only llr has a reference law")
        if self.ref is not None:
            return NtpDistribution(np.array(self.ref))
        return least_favorable(self.delta)

    def __str__(self) -> str:
        return format_score(self)


_TEXT = re.compile(r"^\s*([a-z_]+)\s*(?:\((.*)\))?\s*$")


def format_score(spec: ScoreSpec) -> str:
    args = []
    if spec.delta is not None:
        args.append(f"delta={spec.delta!r}")
    if spec.kind == "dif_opt":
        args.append(f"M={spec.M!r}")
    if spec.ref is not None:
        args.append("p=" + ";".join(repr(x) for x in spec.ref))
    return spec.kind + (f"({', '.join(args)})" if args else "")


def parse_score(text: str) -> ScoreSpec:
    """Parse ``kind`` or ``kind(key=value, ...)``.

    Keys: ``delta``, ``M`` and ``p`` (semicolon-separated reference law for
    ``llr``). ``ind`` alone means ``ind(delta=1/e)``.
    """
    m = _TEXT.match(text)
    if not m:
        raise InvalidParameterError(f"cannot parse score {text!r}")
    kind, body = m.group(1), m.group(2)
    kw = {}
    if body and body.strip():
        for part in body.split(","):
            if "=" not in part:
                raise InvalidParameterError(f"malformed argument {part!r} in {text!r}")
            key, value = (s.strip() for s in part.split("=", 1))
            try:
                if key == "delta":
                    kw["delta"] = float(value)
                elif key == "M":
                    kw["M"] = float(value)
                elif key == "p":
                    kw["ref"] = tuple(float(x) for x in value.split(";"))
                else:
                    raise InvalidParameterError(f"unknown argument {key!r} in {text!r}")
            except ValueError as exc:
                raise InvalidParameterError(f"bad value in {text!r}: {exc}") from None
    if kind == "ind" and "delta" not in kw:
        kw["delta"] = math.exp(-1.0)
    return ScoreSpec(kind, **kw)


def _dif_log_ratio(delta: float, r: np.ndarray) -> np.ndarray:
    """``log(f_{dif,Δ}(r) / f_{dif,0}(r))`` with ``0/0 := 1`` at ``r = 1``."""
    top = 1.0 - delta
    with np.errstate(divide="ignore", invalid="ignore"):
        num = np.log(np.maximum(1.0 - r / top, 0.0)) - math.log(top)
        den = np.log1p(-r)
        out = num - den
    both_zero = (r >= 1.0) & (delta == 0.0)
    # beyond 1 - Δ only the alternative density vanishes
    out = np.where((r >= top) & (delta > 0.0), -np.inf, out)
    return np.where(both_zero, 0.0, out)


def score_kinks(spec: ScoreSpec) -> list[float]:
    """Breakpoints in (0, 1) for integrating a dif_opt score.

    The log density ratio falls strictly from ``-log(1-Δ)`` at 0 to ``-inf`` at
    ``1-Δ``, so each clamp level ``±M`` is crossed at most once. Below the
    lower crossing the score has a logarithmic edge, so geometric points
    approaching ``1-Δ`` are added as well.
    """
    if spec.kind != "dif_opt":
        return []
    top = 1.0 - spec.delta
    g = lambda r: float(_dif_log_ratio(spec.delta, np.array(r)))
    out = [top] if 0.0 < top < 1.0 else []
    edge = top
    for level in (-spec.M, spec.M):
        hi = top * (1.0 - 1e-15)
        if math.isfinite(level) and g(0.0) > level and g(hi) < level:
            root = optimize.brentq(lambda r: g(r) - level, 0.0, hi, xtol=1e-15)
            out.append(root)
            if level < 0:
                edge = root
    out.extend(top - top * 10.0**-j for j in range(1, 16) if top - top * 10.0**-j < edge)
    return sorted(x for x in set(out) if 0.0 < x < 1.0)


def score_values(spec: ScoreSpec, y) -> np.ndarray:
    """Vectorized score of raw pivot values (no family check)."""
    y = np.asarray(y, dtype=np.float64)
    k = spec.kind
    if k in ("ars", "log", "gum_opt", "llr"):
        r = np.clip(y, R_MIN, R_MAX)
        if k == "ars":
            return -np.log1p(-r)
        if k == "log":
            return np.log(r)
        logr = np.log(r)
        if k == "gum_opt":
            kk, q = vertex_counts(spec.delta)
            out = math.log(kk) + logr * (spec.delta / (1.0 - spec.delta))
            if q > 0:
                out = np.logaddexp(out, logr * (1.0 / q - 1.0))
            return out
        support = spec.reference().support
        flat = np.atleast_1d(logr).ravel()
        vals = logsumexp(flat[:, None] * (1.0 / support - 1.0), axis=1)
        return vals.reshape(logr.shape) if logr.ndim else vals[0]
    if k == "ind":
        return (y >= spec.delta).astype(np.float64)
    if k == "dif_opt":
        return np.clip(_dif_log_ratio(spec.delta, y), -spec.M, spec.M)
    if k == "dif_neg":
        return -y
    return y.copy()


def score_eval(spec: ScoreSpec, y):
    """Score a :class:`PivotValue` or :class:`PivotSeries` after a family check."""
    if not isinstance(y, (PivotValue, PivotSeries)):
        raise TypeError("score_eval expects a PivotValue or PivotSeries")
    if y.family is not spec.family:
        raise FamilyMismatchError(f"score {spec.kind} needs {spec.family.value} pivots, got {y.family.value}")
    if isinstance(y, PivotValue):
        return float(score_values(spec, y.y))
    return score_values(spec, y.values)


@dataclass(frozen=True)
class NullMoments:
    """``E_0 h`` and ``Var_0 h``; ``mean = -inf`` with ``variance = None`` flags an untruncated dif score."""

    mean: float
    variance: float | None

    @property
    def finite(self) -> bool:
        return math.isfinite(self.mean) and self.variance is not None and math.isfinite(self.variance)


_SLIVER = 1e-9


def piecewise_quad(f, a: float, b: float, points=(), **opts) -> float:
    """``∫_a^b f`` split at the interior ``points`` (kinks of the integrand)."""
    opts = {**_QUAD, **opts}
    edges = [a, *sorted(p for p in points if a < p < b), b]
    parts = []
    for lo, hi in zip(edges, edges[1:]):
        if hi - lo <= _SLIVER * (b - a):
            # bounded integrand on a sliver: the midpoint rule is exact to far below tolerance
            parts.append(f(0.5 * (lo + hi)) * (hi - lo))
        elif hi > lo:
            parts.append(integrate.quad(f, lo, hi, **opts)[0])
    return math.fsum(parts)


def _quad(f, a, b, points=()):
    return piecewise_quad(f, a, b, points)


def _scalar_score(spec):
    return lambda r: float(score_values(spec, r))


def _dif_cumulative(spec: ScoreSpec, power: int, xs: np.ndarray) -> np.ndarray:
    """``H(x) = ∫_0^x h(s)^power ds`` at sorted points ``xs``."""
    f = _scalar_score(spec)
    g = lambda s: f(s) ** power
    kinks = score_kinks(spec)
    out = np.empty(xs.size)
    acc, prev = 0.0, 0.0
    for i, x in enumerate(xs):
        if x > prev:
            acc += _quad(g, prev, x, kinks)
            prev = x
        out[i] = acc
    return out


def _dif_moments(spec: ScoreSpec, vocab_size: int | None) -> tuple[float, float]:
    if vocab_size is None:
        density = lambda r: 2.0 * (1.0 - r)
        f = _scalar_score(spec)
        kinks = score_kinks(spec)
        m1 = _quad(lambda r: f(r) * density(r), 0.0, 1.0, kinks)
        m2 = _quad(lambda r: f(r) ** 2 * density(r), 0.0, 1.0, kinks)
        return m1, m2
    e = eta(np.arange(1, vocab_size + 1), vocab_size)
    if spec.kind == "dif_neg":
        m1 = -math.fsum((e**2 + (1 - e) ** 2) / 2) / vocab_size
        m2 = math.fsum((e**3 + (1 - e) ** 3) / 3) / vocab_size
        return m1, m2
    # the lattice is symmetric, so H(η) + H(1 - η) only needs H on the lattice
    h1 = _dif_cumulative(spec, 1, e)
    h2 = _dif_cumulative(spec, 2, e)
    m1 = math.fsum(h1 + h1[::-1]) / vocab_size
    m2 = math.fsum(h2 + h2[::-1]) / vocab_size
    return m1, m2


@functools.lru_cache(maxsize=256)
def null_moments(spec: ScoreSpec, vocab_size: int | None = None) -> NullMoments:
    """Null mean and variance of ``h(Y)``.

    ``vocab_size`` selects the exact finite-vocabulary null law for dif
    scores; ``None`` uses the large-vocabulary limit. Gum and baby pivots
    are exactly uniform under the null, so ``vocab_size`` is ignored there.
    """
    k = spec.kind
    if k == "ars":
        return NullMoments(1.0, 1.0)
    if k == "log":
        return NullMoments(-1.0, 1.0)
    if k == "ind":
        d = spec.delta
        return NullMoments(1.0 - d, d * (1.0 - d))
    if k == "baby_id":
        return NullMoments(0.0, 1.0 / 3.0)
    if k == "dif_opt" and not spec.truncated:
        return NullMoments(-math.inf, None)
    if k in ("gum_opt", "llr"):
        f = _scalar_score(spec)
        m1 = _quad(f, 0.0, 1.0)
        m2 = _quad(lambda r: f(r) ** 2, 0.0, 1.0)
    else:
        m1, m2 = _dif_moments(spec, vocab_size)
    return NullMoments(m1, max(m2 - m1 * m1, 0.0))


def sample_null_scores(spec: ScoreSpec, size, rng: np.random.Generator, vocab_size: int | None = None) -> np.ndarray:
    return score_values(spec, sample_null_pivots(spec.family, size, rng, vocab_size))
