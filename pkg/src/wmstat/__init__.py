"""Statistical detection of keyed watermarks in generated token sequences."""
from .codecs import decode, decode_baby, decode_gumbel, decode_inverse, generate_sequence, rederive_bundles
from .detection import DetectionConfig, DetectionReport, critical_gaussian, critical_monte_carlo, detect, sum_statistic
from .efficiency import (
    EfficiencyReport,
    baby_rate,
    class_rate,
    crossover_delta,
    dif_rate_lower_bound,
    ind_delta_optimum,
    kl_null_to_alt,
    log_mgf,
    mgf,
    mixture_rate,
    rate,
)
from .keyed_randomness import PrngConfig, Scheme, SecretKey, bundle_at
from .ntp import NtpDistribution, least_favorable, make_power_law, make_spike
from .pivots import Family, PivotSeries, PivotValue, pivot_baby, pivot_dif, pivot_gumbel
from .scores import NullMoments, ScoreSpec, null_moments, parse_score, score_eval

__version__ = "0.1.0"

__all__ = [
    "DetectionConfig", "DetectionReport", "EfficiencyReport", "Family", "NtpDistribution", "NullMoments",
    "PivotSeries", "PivotValue", "PrngConfig", "Scheme", "ScoreSpec", "SecretKey", "baby_rate", "bundle_at",
    "class_rate", "critical_gaussian", "critical_monte_carlo", "crossover_delta", "decode", "decode_baby",
    "decode_gumbel", "decode_inverse", "detect", "dif_rate_lower_bound", "generate_sequence",
    "ind_delta_optimum", "kl_null_to_alt", "least_favorable", "log_mgf", "make_power_law", "make_spike",
    "mgf", "mixture_rate", "null_moments", "parse_score", "pivot_baby", "pivot_dif", "pivot_gumbel", "rate",
    "rederive_bundles", "score_eval", "sum_statistic",
]
