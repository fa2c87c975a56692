"""Next-token prediction distributions, regularity classes, and traces."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
import numpy as np

from .errors import (
    InvalidParameterError,
    InvalidRegularityError,
    InvalidVocabularyError,
    TraceError,
)

SIMPLEX_TOL = 1e-12
# tolerance for floor(1/(1-delta)) at delta = k/(k+1), where the division is inexact
_FLOOR_EPS = 1e-12


@dataclass(frozen=True, eq=False)
class NtpDistribution:
    """A probability vector over a vocabulary of size ``len(probs)``.

    Index ``i`` holds the probability of token id ``i + 1``. Inputs that are
    off the simplex are rejected, never renormalized.
    """

    probs: np.ndarray

    def __post_init__(self):
        p = np.array(self.probs, dtype=np.float64).ravel()
        _check_simplex(p)
        p.flags.writeable = False
        object.__setattr__(self, "probs", p)

    def __len__(self):
        return self.probs.size

    def __eq__(self, other):
        return isinstance(other, NtpDistribution) and np.array_equal(self.probs, other.probs)

    @property
    def vocab_size(self) -> int:
        return self.probs.size

    @property
    def top1(self) -> float:
        return float(self.probs.max())

    @property
    def support(self) -> np.ndarray:
        return self.probs[self.probs > 0]


def _check_simplex(p: np.ndarray, row=None) -> None:
    where = "" if row is None else f" (row {row})"
    if p.size < 2:
        raise InvalidVocabularyError(f"distribution needs at least 2 coordinates{where}")
    if not np.all(np.isfinite(p)) or np.any(p < 0):
        raise InvalidParameterError(f"probabilities must be finite and nonnegative{where}")
    total = math.fsum(p)
    if abs(total - 1.0) > SIMPLEX_TOL:
        raise InvalidParameterError(f"probabilities sum to {total!r}, not 1{where}")


def _fill_to_unit(head: list[float], vocab_size: int) -> np.ndarray:
    p = np.zeros(vocab_size)
    p[: len(head)] = head
    return p


def make_spike(delta: float, vocab_size: int) -> NtpDistribution:
    """Top token gets ``1 - delta``; the rest share ``delta`` evenly."""
    if vocab_size < 2:
        raise InvalidVocabularyError("vocabulary size must be >= 2")
    if not 0 <= delta <= 1 - 1 / vocab_size + 1e-15:
        raise InvalidRegularityError(f"delta={delta} outside [0, 1 - 1/|W|]")
    p = np.full(vocab_size, delta / (vocab_size - 1))
    p[0] = 1.0 - delta
    return NtpDistribution(p)


def make_power_law(a: float, b: float, vocab_size: int) -> NtpDistribution:
    """``P_w ∝ (w + b)^(-a)`` for ``w = 1..|W|``."""
    if vocab_size < 2:
        raise InvalidVocabularyError("vocabulary size must be >= 2")
    if a < 0 or b <= -1:
        raise InvalidParameterError("power law needs a >= 0 and b > -1")
    w = np.arange(1, vocab_size + 1, dtype=np.float64)
    logs = -a * np.log(w + b)
    weights = np.exp(logs - logs.max())
    if not np.all(np.isfinite(weights)) or weights.sum() <= 0:
        raise InvalidParameterError("power law weights are not normalizable")
    return NtpDistribution(weights / weights.sum())


def vertex_counts(delta: float) -> tuple[int, float]:
    """``(k, q)`` with ``k = floor(1/(1-delta))`` full coordinates and residual ``q``."""
    if not 0 <= delta < 1:
        raise InvalidRegularityError(f"delta={delta} outside [0, 1)")
    top = 1.0 - delta
    k = int(math.floor(1.0 / top + _FLOOR_EPS))
    q = 1.0 - k * top
    if q < _FLOOR_EPS:
        q = 0.0
    return k, q


def least_favorable(delta: float, vocab_size: int | None = None) -> NtpDistribution:
    """The vertex of the delta-regular class: ``(1-Δ, ..., 1-Δ, q, 0, ...)``.

    ``vocab_size=None`` returns the shortest vector holding the support.
    """
    k, q = vertex_counts(delta)
    head = [1.0 - delta] * k + ([q] if q > 0 else [])
    return _vertex(head, vocab_size)


def least_favorable_general(delta1: float, delta2: float, vocab_size: int | None = None) -> NtpDistribution:
    """Vertex of ``{P : P_(1) <= 1-Δ1, P_(2) <= 1-Δ2}``."""
    if not 0 <= delta2 < delta1 < 1:
        raise InvalidRegularityError("need 0 <= delta2 < delta1 < 1")
    second = 1.0 - delta2
    k = int(math.floor(delta1 / second + _FLOOR_EPS))
    q = delta1 - k * second
    if q < _FLOOR_EPS:
        q = 0.0
    head = [1.0 - delta1] + [second] * k + ([q] if q > 0 else [])
    return _vertex(head, vocab_size)


def _vertex(head: list[float], vocab_size: int | None) -> NtpDistribution:
    need = max(len(head), 2)
    if vocab_size is None:
        vocab_size = need
    if vocab_size < need:
        raise InvalidVocabularyError(f"vocabulary of size {vocab_size} cannot hold {len(head)} support points")
    p = _fill_to_unit(head, vocab_size)
    # absorb the last-bit rounding of k * (1 - delta) into the largest coordinate
    p[0] += 1.0 - math.fsum(p)
    return NtpDistribution(p)


def is_delta_regular(p: NtpDistribution, delta: float) -> bool:
    return p.top1 <= 1.0 - delta + SIMPLEX_TOL


def belief_epsilon(vocab_size: int) -> float:
    """Default second-largest-probability bound ``1/(log|W| · log log|W|)``."""
    if vocab_size < 16:
        raise InvalidVocabularyError("belief epsilon needs log log |W| > 1, i.e. |W| >= 16")
    lw = math.log(vocab_size)
    return 1.0 / (lw * math.log(lw))


def delta_grid(vocab_size: int = 1000, n_log: int = 200, n_lin: int = 100, lo: float = 1e-3) -> np.ndarray:
    """Default sweep grid: log-spaced on ``[lo, 0.5)``, linear on ``[0.5, 1-1/|W|]``."""
    hi = 1.0 - 1.0 / vocab_size
    low = np.geomspace(lo, 0.5, n_log, endpoint=False)
    high = np.linspace(0.5, hi, n_lin)
    return np.concatenate([low, high])


@dataclass(frozen=True)
class NtpTrace:
    """Either full distributions (``kind='full'``) or top-1 probabilities (``kind='top1'``)."""

    kind: str
    rows: tuple

    def __len__(self):
        return len(self.rows)

    def top1_values(self) -> np.ndarray:
        if self.kind == "full":
            return np.array([r.top1 for r in self.rows])
        return np.asarray(self.rows, dtype=np.float64)


def trace_from_obj(obj) -> NtpTrace:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise TraceError("trace must be a JSON object with a 'kind' field")
    kind = obj["kind"]
    if kind == "full":
        rows = obj.get("rows")
        if not isinstance(rows, list):
            raise TraceError("'full' trace needs a 'rows' list")
        out = []
        for i, row in enumerate(rows):
            try:
                out.append(NtpDistribution(np.asarray(row, dtype=np.float64)))
            except (ValueError, TypeError) as exc:
                raise TraceError(f"row {i}: {exc}", row=i) from exc
        return NtpTrace("full", tuple(out))
    if kind == "top1":
        values = obj.get("values")
        if not isinstance(values, list):
            raise TraceError("'top1' trace needs a 'values' list")
        out = []
        for i, v in enumerate(values):
            if not isinstance(v, (int, float)) or isinstance(v, bool) or not 0 <= v <= 1:
                raise TraceError(f"row {i}: top-1 probability {v!r} is not in [0, 1]", row=i)
            out.append(float(v))
        return NtpTrace("top1", tuple(out))
    raise TraceError(f"unknown trace kind {kind!r}")


def ingest_trace(path) -> NtpTrace:
    try:
        obj = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise TraceError(f"cannot parse {path}: {exc}") from exc
    return trace_from_obj(obj)


def gamma_fraction(trace: NtpTrace, delta: float) -> float:
    """Fraction of trace elements whose top-1 probability is at most ``1 - delta``."""
    if len(trace) == 0:
        raise TraceError("empty trace")
    top = trace.top1_values()
    return float(np.mean(top <= 1.0 - delta + SIMPLEX_TOL))
