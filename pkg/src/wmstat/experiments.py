"""Synthetic Type I / Type II studies, efficiency sweeps, and Δ-selection trade-offs."""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from .detection import DetectionConfig, MONTE_CARLO, critical_gaussian, critical_monte_carlo
from .efficiency import class_rate, crossover_delta, write_rate_csv
from .errors import InvalidParameterError, TraceError
from .keyed_randomness import PrngConfig, Scheme, SecretKey, SeedStream, bundle_for_step, replicate_rng
from .ntp import NtpTrace, gamma_fraction, make_spike
from .codecs import decode
from .pivots import Family, eta
from .scores import ScoreSpec, parse_score, score_values

DEFAULT_SCORES = ("ars", "log", "ind", "gum_opt(delta=0.001)", "dif_neg", "dif_opt(delta=0.001, M=10)")
SKEWED_KINDS = ("gum_opt", "llr", "dif_opt")
CURVE_COLUMNS = ("experiment", "score", "n_or_delta", "value", "stderr")


@dataclass(frozen=True)
class ExperimentConfig:
    """Settings shared by the Type I and Type II studies.

    ``window_size=None`` hashes the full prefix, so distinct steps never
    share pseudorandomness. ``critical`` is ``auto`` (Monte Carlo for the
    likelihood-ratio scores, whose null laws are heavily skewed; Gaussian
    otherwise), ``gaussian`` or ``monte_carlo``.
    """

    scores: tuple = DEFAULT_SCORES
    vocab_size: int = 1000
    n_grid: tuple = (100, 200, 300, 400, 500)
    replicates: int = 5000
    alpha: float = 0.05
    delta_low: float = 1e-3
    delta_high: float = 0.5
    master_seed: int = 0
    key: int = 0
    window_size: int | None = None
    prompt_length: int = 5
    null_law: str = "uniform"
    critical: str = "auto"
    mc_replicates: int = 500
    mc_batches: int = 10
    workers: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scores", tuple(str(s) for s in self.scores))
        object.__setattr__(self, "n_grid", tuple(sorted(int(n) for n in self.n_grid)))
        if self.replicates < 1:
            raise InvalidParameterError("replicates must be >= 1")
        if not self.n_grid or self.n_grid[0] < 1:
            raise InvalidParameterError("n grid must be nonempty and positive")
        if not 0 < self.delta_low <= self.delta_high < 1:
            raise InvalidParameterError("need 0 < delta_low <= delta_high < 1")
        if self.null_law not in ("uniform", "spike"):
            raise InvalidParameterError("null_law must be 'uniform' or 'spike'")
        if self.critical not in ("auto", "gaussian", MONTE_CARLO):
            raise InvalidParameterError("critical must be 'auto', 'gaussian' or 'monte_carlo'")
        DetectionConfig(self.alpha, MONTE_CARLO, self.mc_replicates, self.mc_batches)
        [parse_score(s) for s in self.scores]

    @property
    def specs(self) -> list[ScoreSpec]:
        return [parse_score(s) for s in self.scores]

    @property
    def prng(self) -> PrngConfig:
        return PrngConfig(self.window_size, 0, self.master_seed)

    @property
    def families(self) -> list[Family]:
        return sorted({s.family for s in self.specs}, key=lambda f: f.value)


@dataclass(frozen=True)
class CurvePoint:
    experiment: str
    score: str
    n_or_delta: float
    value: float
    stderr: float

    def row(self) -> tuple:
        return (self.experiment, self.score, self.n_or_delta, self.value, self.stderr)


_SCHEME_OF = {Family.GUM: Scheme.GUMBEL, Family.DIF: Scheme.INVERSE}


def _pivot(family: Family, token: int, xi, vocab_size: int) -> float:
    if family is Family.GUM:
        return float(xi.u[token - 1])
    return abs(xi.u - float(eta(xi.pi.rank(token), vocab_size)))


def _null_replicate(cfg: ExperimentConfig, index: int) -> dict:
    """Pivots of one unwatermarked sequence, for every family in use."""
    rng = replicate_rng(cfg.master_seed, 1, index)
    V, n = cfg.vocab_size, cfg.n_grid[-1]
    prompt = rng.integers(1, V + 1, size=cfg.prompt_length).tolist()
    if cfg.null_law == "uniform":
        tokens = rng.integers(1, V + 1, size=n)
    else:
        # spike-shaped human text: top token with mass 1 - Δ_t, rest uniform
        deltas = rng.uniform(cfg.delta_low, cfg.delta_high, size=n)
        top = rng.random(n) < 1.0 - deltas
        tokens = np.where(top, 1, rng.integers(2, V + 1, size=n))
    key = SecretKey.from_int(cfg.key)
    out = {}
    for family in cfg.families:
        seeds = SeedStream(key, cfg.prng, prompt)
        ys = np.empty(n)
        for t, w in enumerate(tokens.tolist()):
            ys[t] = _pivot(family, w, bundle_for_step(seeds.digest(), _SCHEME_OF[family], V), V)
            seeds.push(w)
        out[family] = ys
    return out


def _alt_replicate(cfg: ExperimentConfig, index: int) -> dict:
    """Pivots of one watermarked sequence per family; both families share the Δ_t draws."""
    rng = replicate_rng(cfg.master_seed, 2, index)
    V, n = cfg.vocab_size, cfg.n_grid[-1]
    prompt = rng.integers(1, V + 1, size=cfg.prompt_length).tolist()
    deltas = rng.uniform(cfg.delta_low, cfg.delta_high, size=n)
    ntps = [make_spike(d, V) for d in deltas]
    key = SecretKey.from_int(cfg.key)
    out = {}
    for family in cfg.families:
        seeds = SeedStream(key, cfg.prng, prompt)
        ys = np.empty(n)
        for t in range(n):
            xi = bundle_for_step(seeds.digest(), _SCHEME_OF[family], V)
            w = decode(ntps[t], xi)
            ys[t] = _pivot(family, w, xi, V)
            seeds.push(w)
        out[family] = ys
    return out


def simulate_pivots(cfg: ExperimentConfig, watermarked: bool) -> dict:
    """``{family: (replicates, n_max) pivot matrix}``, rows in replicate order."""
    worker = _alt_replicate if watermarked else _null_replicate
    indices = range(cfg.replicates)
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            rows = list(pool.map(worker, [cfg] * cfg.replicates, indices, chunksize=16))
    else:
        rows = [worker(cfg, i) for i in indices]
    return {f: np.vstack([r[f] for r in rows]) for f in cfg.families}


def critical_for(spec: ScoreSpec, n: int, cfg: ExperimentConfig) -> float:
    vocab = cfg.vocab_size if spec.family is Family.DIF else None
    use_mc = cfg.critical == MONTE_CARLO or (cfg.critical == "auto" and spec.kind in SKEWED_KINDS)
    if use_mc:
        dcfg = DetectionConfig(cfg.alpha, MONTE_CARLO, cfg.mc_replicates, cfg.mc_batches, cfg.master_seed)
        return critical_monte_carlo(spec, n, cfg.alpha, dcfg, vocab_size=vocab)
    return critical_gaussian(spec, n, cfg.alpha, vocab)


def rejection_curves(pivots: dict, cfg: ExperimentConfig, experiment: str) -> list[CurvePoint]:
    """Rejection frequency (``typeI``) or acceptance frequency (``typeII``) per score and n."""
    points = []
    for text, spec in zip(cfg.scores, cfg.specs):
        sums = np.cumsum(score_values(spec, pivots[spec.family]), axis=1)
        for n in cfg.n_grid:
            reject = sums[:, n - 1] >= critical_for(spec, n, cfg)
            value = float(reject.mean()) if experiment == "typeI" else float(1.0 - reject.mean())
            se = math.sqrt(value * (1.0 - value) / cfg.replicates)
            points.append(CurvePoint(experiment, text, n, value, se))
    return points


def run_type1(cfg: ExperimentConfig, output=None) -> list[CurvePoint]:
    """Empirical Type I error on unwatermarked sequences."""
    points = rejection_curves(simulate_pivots(cfg, watermarked=False), cfg, "typeI")
    if output is not None:
        write_curve_csv(output, points)
    return points


def run_type2(cfg: ExperimentConfig, output=None) -> list[CurvePoint]:
    """Empirical Type II error on watermarked spike-law sequences."""
    points = rejection_curves(simulate_pivots(cfg, watermarked=True), cfg, "typeII")
    if output is not None:
        write_curve_csv(output, points)
    return points


def write_curve_csv(target, points) -> None:
    """Write curve points to a path or an open text stream."""
    if hasattr(target, "write"):
        writer = csv.writer(target)
        writer.writerow(CURVE_COLUMNS)
        writer.writerows(p.row() for p in points)
        return
    with open(target, "w", newline="") as fh:
        write_curve_csv(fh, points)


def _spec_at(text: str, delta: float) -> ScoreSpec:
    """Bare ``gum_opt`` / ``llr`` track the grid Δ; everything else is fixed."""
    bare = text.strip()
    if bare in ("gum_opt", "llr"):
        return ScoreSpec(bare, delta=float(delta))
    return parse_score(text)


@dataclass
class SweepResult:
    rows: list = field(default_factory=list)  # (score, delta, rate, theta_star)
    crossover: float | None = None


def run_efficiency_sweep(scores, grid, output=None, with_crossover: bool = True) -> SweepResult:
    """Class rates on a Δ grid; bare ``gum_opt`` means the optimal score at each Δ."""
    result = SweepResult()
    for text in scores:
        for d in grid:
            rep = class_rate(_spec_at(text, d), float(d))
            result.rows.append((text, float(d), rep.rate, rep.theta_star))
    if with_crossover:
        result.crossover = crossover_delta(ScoreSpec("ars"), ScoreSpec("log"))
    if output is not None:
        write_rate_csv(output, result.rows)
    return result


@dataclass
class TradeoffResult:
    rows: list = field(default_factory=list)  # (score, delta, gamma, rate, product)
    argmax: dict = field(default_factory=dict)


def run_tradeoff(trace: NtpTrace, scores, grid, output=None) -> TradeoffResult:
    """``γ(Δ)``, ``R_Δ(h)`` and their product, with the maximizing Δ per score.

    ``γ(Δ)`` is the fraction of trace steps lying in the Δ-regular class.
    """
    if len(trace) == 0:
        raise TraceError("empty trace")
    grid = sorted(float(d) for d in grid)
    gammas = [gamma_fraction(trace, d) for d in grid]
    result = TradeoffResult()
    for text in scores:
        best = (-math.inf, None)
        for d, g in zip(grid, gammas):
            r = 0.0 if d == 0 else class_rate(_spec_at(text, d), d).rate
            result.rows.append((text, d, g, r, g * r))
            if g * r > best[0]:
                best = (g * r, d)
        result.argmax[text] = best[1]
    if output is not None:
        with open(output, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["score", "delta", "gamma", "rate", "product"])
            writer.writerows(result.rows)
    return result


def with_overrides(cfg: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(cfg, **{k: v for k, v in kw.items() if v is not None})
