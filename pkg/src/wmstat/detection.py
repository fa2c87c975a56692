"""Sum-of-scores test statistic, critical values, and detection decisions."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.stats import norm

from .errors import InvalidParameterError, MustUseMonteCarloError
from .keyed_randomness import replicate_rng
from .pivots import PivotSeries
from .scores import ScoreSpec, null_moments, sample_null_scores, score_eval

GAUSSIAN = "gaussian"
MONTE_CARLO = "monte_carlo"
# substream index for Monte Carlo p-values, disjoint from the batch indices
_TAIL_STREAM = 2**32 - 1


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise InvalidParameterError(f"alpha must lie strictly inside (0, 1), got {alpha}")
    return alpha


@dataclass(frozen=True)
class DetectionConfig:
    alpha: float = 0.05
    critical_mode: str = GAUSSIAN
    mc_replicates: int = 500
    mc_batches: int = 10
    seed: int = 0

    def __post_init__(self):
        _check_alpha(self.alpha)
        if self.critical_mode not in (GAUSSIAN, MONTE_CARLO):
            raise InvalidParameterError(f"critical_mode must be {GAUSSIAN!r} or {MONTE_CARLO!r}")
        if self.mc_replicates < 100:
            raise InvalidParameterError("mc_replicates must be >= 100")
        if self.mc_batches < 1:
            raise InvalidParameterError("mc_batches must be >= 1")


@dataclass(frozen=True)
class DetectionReport:
    statistic: float
    critical_value: float
    mode: str
    alpha: float
    n: int
    reject: bool
    approx_p: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def sum_statistic(series: PivotSeries, spec: ScoreSpec) -> float:
    """Compensated sum of ``h(Y_t)``."""
    if len(series) == 0:
        raise InvalidParameterError("cannot test an empty pivot series")
    return math.fsum(score_eval(spec, series))


def critical_gaussian(spec: ScoreSpec, n: int, alpha: float, vocab_size: int | None = None) -> float:
    """``n E_0 h + z_{1-α} sqrt(n Var_0 h)``."""
    alpha = _check_alpha(alpha)
    if n < 1:
        raise InvalidParameterError("n must be >= 1")
    mom = null_moments(spec, vocab_size)
    if not mom.finite:
        raise MustUseMonteCarloError(f"{spec} has no finite null moments; use Monte Carlo critical values")
    return n * mom.mean + float(norm.ppf(1.0 - alpha)) * math.sqrt(n * mom.variance)


def null_sums(spec: ScoreSpec, n: int, replicates: int, rng: np.random.Generator, vocab_size: int | None = None) -> np.ndarray:
    """``replicates`` independent null sums of ``n`` scored pivots."""
    scores = sample_null_scores(spec, (replicates, n), rng, vocab_size)
    return scores.sum(axis=1)


def critical_monte_carlo_batches(
    spec: ScoreSpec, n: int, alpha: float, cfg: DetectionConfig | None = None, seed: int | None = None,
    vocab_size: int | None = None,
) -> np.ndarray:
    """Per-batch empirical ``(1 - α)`` quantiles, each batch on fresh pivots."""
    cfg = cfg or DetectionConfig(alpha=alpha, critical_mode=MONTE_CARLO)
    alpha = _check_alpha(alpha)
    seed = cfg.seed if seed is None else seed
    out = np.empty(cfg.mc_batches)
    for b in range(cfg.mc_batches):
        sums = null_sums(spec, n, cfg.mc_replicates, replicate_rng(seed, n, b), vocab_size)
        out[b] = np.quantile(sums, 1.0 - alpha)
    return out


def critical_monte_carlo(
    spec: ScoreSpec, n: int, alpha: float, cfg: DetectionConfig | None = None, seed: int | None = None,
    vocab_size: int | None = None,
) -> float:
    """Mean over batches of the empirical ``(1 - α)`` quantile of null sums."""
    return float(np.mean(critical_monte_carlo_batches(spec, n, alpha, cfg, seed, vocab_size)))


def critical_value(spec: ScoreSpec, n: int, cfg: DetectionConfig, vocab_size: int | None = None) -> float:
    if cfg.critical_mode == GAUSSIAN:
        return critical_gaussian(spec, n, cfg.alpha, vocab_size)
    return critical_monte_carlo(spec, n, cfg.alpha, cfg, vocab_size=vocab_size)


def detect(series: PivotSeries, spec: ScoreSpec, cfg: DetectionConfig | None = None, n_override: int | None = None) -> DetectionReport:
    """Test the first ``n_override`` (default all) pivots of ``series``."""
    cfg = cfg or DetectionConfig()
    n = len(series) if n_override is None else int(n_override)
    if not 1 <= n <= len(series):
        raise InvalidParameterError(f"n={n} outside 1..{len(series)}")
    series = series.prefix(n)
    vocab = series.vocab_size
    stat = sum_statistic(series, spec)
    crit = critical_value(spec, n, cfg, vocab)
    mom = null_moments(spec, vocab)
    if mom.finite and mom.variance > 0:
        p = float(norm.sf((stat - n * mom.mean) / math.sqrt(n * mom.variance)))
    else:
        sums = null_sums(spec, n, cfg.mc_replicates * cfg.mc_batches, replicate_rng(cfg.seed, n, _TAIL_STREAM), vocab)
        p = float(np.mean(sums >= stat))
    return DetectionReport(stat, crit, cfg.critical_mode, cfg.alpha, n, bool(stat >= crit), p)
