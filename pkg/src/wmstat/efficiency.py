"""Large-deviation efficiency rates of score-based detection rules.

For a score ``h`` and a token law ``P`` the rate is

    R_P(h) = max(0, -inf_{θ >= 0} [θ E_0 h(Y) + log E_{1,P} e^{-θ h(Y)}]).

Closed-form log-MGFs cover ``ars``, ``log``, ``ind`` and ``baby_id``; the
likelihood-ratio scores (``gum_opt``, ``llr``) are integrated after the
substitution ``r = e^{-s}``, which turns the endpoint singularity at 0 into
exponential decay.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize
from scipy.special import betaln, logsumexp

from .errors import BracketError, DomainError, InvalidParameterError, PreconditionError
from .ntp import NtpDistribution, least_favorable
from .pivots import Family, cdf_gum_alt, density_dif_asymptotic
from .scores import ScoreSpec, null_moments, piecewise_quad, score_kinks, score_values

GOLDEN_TOL = 1e-8
_LOG_CEILING_GAP = 1e-10
_DOUBLING_LIMIT = 2.0**40
_QUAD = dict(epsabs=1e-12, epsrel=1e-10, limit=400)
_LR_KNEE = 50.0
_LR_CEILING_GAP = 1e-7


def _reference_support(spec: ScoreSpec) -> np.ndarray:
    if spec.kind == "gum_opt":
        return least_favorable(spec.delta).support
    return spec.reference().support


def _log_density(support: np.ndarray, s):
    """``log f_P(e^{-s}) = log Σ e^{-s (1/P_w - 1)}``."""
    s = np.atleast_1d(np.asarray(s, dtype=np.float64))
    return logsumexp(-s[:, None] * (1.0 / support - 1.0), axis=1)


def theta_ceiling(spec: ScoreSpec, p: NtpDistribution) -> float:
    """Supremum of θ with a finite MGF (``inf`` when unbounded)."""
    if spec.kind == "log":
        return 1.0 / p.top1
    if spec.kind in ("gum_opt", "llr"):
        ref_max = float(_reference_support(spec).max())
        slope = 1.0 / ref_max - 1.0
        return math.inf if slope <= 0 else (1.0 / p.top1) / slope
    return math.inf


def _compress(support: np.ndarray) -> tuple[list[float], list[float]]:
    """Distinct exponents ``1/P_w - 1`` with log multiplicities."""
    expo, counts = np.unique(1.0 / support - 1.0, return_counts=True)
    return expo.tolist(), np.log(counts).tolist()


def _scalar_log_density(expo, logc):
    """Pure-math ``s ↦ log Σ_j c_j e^{-s a_j}``; cheap for short exponent lists."""
    if len(expo) > 8:
        a = np.array(expo)
        lc = np.array(logc)
        return lambda s: float(logsumexp(lc - s * a))

    def f(s):
        terms = [c - s * a for a, c in zip(expo, logc)]
        m = max(terms)
        return m + math.log(sum(math.exp(t - m) for t in terms))

    return f


def _log_mgf_lr(spec: ScoreSpec, p: NtpDistribution, theta: float) -> float:
    ref = _reference_support(spec)
    log_fp = _scalar_log_density(*_compress(p.support))
    log_fq = _scalar_log_density(*_compress(ref))

    def log_integrand(s):
        return log_fp(s) - theta * log_fq(s) - s

    # asymptotic decay rate of the integrand in s; it vanishes at the MGF ceiling
    decay = 1.0 / p.top1 - theta * (1.0 / float(ref.max()) - 1.0)
    knee = min(10.0 / decay, _LR_KNEE)
    c = max(log_integrand(x) for x in np.concatenate([[0.0], np.geomspace(1e-6, knee, 60)]))
    f = lambda s: math.exp(log_integrand(s) - c)
    head = integrate.quad(f, 0.0, knee, **_QUAD)[0]
    # beyond the knee, integrate in t = decay * (s - knee) so the tail is O(1) wide
    g = lambda t: f(knee + t / decay) / decay
    tail = integrate.quad(g, 0.0, math.inf, **_QUAD)[0]
    return c + math.log(head + tail)


def log_mgf(spec: ScoreSpec, p: NtpDistribution, theta: float) -> float:
    """``log E_{1,P} exp(-θ h(Y))`` for Gumbel-family and baby scores."""
    theta = float(theta)
    if not theta >= 0 or math.isnan(theta):
        raise DomainError(f"theta must be >= 0, got {theta}")
    if spec.family is Family.DIF:
        raise PreconditionError("dif scores have no closed-form alternative law; use dif_rate_lower_bound")
    k = spec.kind
    if k == "baby_id":
        if p.vocab_size != 2:
            raise InvalidParameterError("baby scores need a two-token law")
        a = 1.0 - 2.0 * float(p.probs[0])
        if theta == 0.0:
            return 0.0
        # (cosh(θa) - e^{-θ}) / θ, written to avoid overflow
        big = theta * abs(a)
        val = 0.5 * (1.0 + math.exp(-2.0 * big)) - math.exp(-theta - big)
        return big + math.log(val) - math.log(theta) if val > 0 else -math.inf
    ceiling = theta_ceiling(spec, p)
    if theta >= ceiling:
        raise DomainError(f"theta={theta} is outside the MGF domain [0, {ceiling})")
    sup = p.support
    if k == "ars":
        return float(logsumexp(betaln(1.0 / sup, theta + 1.0)))
    if k == "log":
        return float(logsumexp(np.log(sup) - np.log1p(-sup * theta)))
    if k == "ind":
        F = float(cdf_gum_alt(p, spec.delta))
        if F >= 1.0:
            return 0.0
        return float(np.logaddexp(math.log(F) if F > 0 else -np.inf, -theta + math.log1p(-F)))
    return _log_mgf_lr(spec, p, theta)


def mgf(spec: ScoreSpec, p: NtpDistribution, theta: float) -> float:
    return math.exp(log_mgf(spec, p, theta))


def log_mgf_quadrature(spec: ScoreSpec, p: NtpDistribution, theta: float) -> float:
    """Direct quadrature of ``e^{-θ h(r)} f_P(r)`` using :func:`score_values`; an independent cross-check.

    Pivots are clipped at ``2^-53`` by :func:`score_values`, so the result is
    only trustworthy when the integrand has decayed by ``s = 53 log 2``, i.e.
    for θ well inside the MGF domain.
    """
    if spec.family is not Family.GUM:
        raise PreconditionError("quadrature cross-check covers Gumbel-family scores")
    sup = p.support

    def f(s):
        r = math.exp(-s)
        return math.exp(float(_log_density(sup, s)[0]) - theta * float(score_values(spec, r)) - s)

    pts = [-math.log(spec.delta)] if spec.kind == "ind" else None
    head = integrate.quad(f, 0.0, 40.0, points=pts, **_QUAD)[0]
    tail = integrate.quad(f, 40.0, math.inf, **_QUAD)[0]
    return math.log(head + tail)


def golden_section(f, lo: float, hi: float, tol: float = GOLDEN_TOL) -> tuple[float, float]:
    """Minimize a unimodal ``f`` on ``[lo, hi]``; returns ``(x, f(x))``."""
    invphi = (math.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - invphi * (b - a)
    d = a + invphi * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = f(d)
    best = min(((lo, f(lo)), (c, fc), (d, fd), (hi, f(hi))) if math.isfinite(hi) else ((c, fc), (d, fd)),
               key=lambda t: t[1])
    return best


def minimize_convex(f, ceiling: float = math.inf, tol: float = GOLDEN_TOL) -> tuple[float, float]:
    """Bracket by doubling from ``[0, 1]``, then golden-section search.

    ``ceiling`` is an open upper limit on the domain. Returns ``(θ*, f(θ*))``;
    ``f(θ*) = -inf`` signals an objective that keeps decreasing.
    """
    top = ceiling if math.isfinite(ceiling) else math.inf
    f0 = f(0.0)
    lo, x = 0.0, min(1.0, top)
    fx = f(x)
    if fx >= f0:
        return golden_section(f, 0.0, x, tol) if x > tol else (0.0, f0)
    while True:
        x2 = min(2.0 * x, top)
        if x2 <= x:
            hi = x
            break
        f2 = f(x2)
        if f2 >= fx:
            hi = x2
            break
        lo, x, fx = x, x2, f2
        if x >= _DOUBLING_LIMIT:
            return x, -math.inf
    return golden_section(f, lo, hi, tol)


@dataclass(frozen=True)
class EfficiencyReport:
    rate: float
    theta_star: float
    least_favorable: NtpDistribution | None
    score: ScoreSpec

    @property
    def infinite(self) -> bool:
        return math.isinf(self.rate)


def rate(spec: ScoreSpec, p: NtpDistribution, least_fav: NtpDistribution | None = None) -> EfficiencyReport:
    """``R_P(h)`` by minimizing ``θ E_0 h + log MGF(θ)`` over ``θ >= 0``."""
    mom = null_moments(spec)
    if not math.isfinite(mom.mean):
        raise PreconditionError(f"{spec} has an infinite null mean")
    ceiling = theta_ceiling(spec, p)
    if math.isfinite(ceiling):
        # stay inside the open domain; the log-MGF diverges at the ceiling, so
        # the excluded sliver never holds the minimizer
        gap = _LOG_CEILING_GAP if spec.kind == "log" else _LR_CEILING_GAP * ceiling
        ceiling = ceiling - gap
    objective = lambda t: t * mom.mean + log_mgf(spec, p, t)
    theta, value = minimize_convex(objective, ceiling)
    return EfficiencyReport(max(0.0, -value), theta, least_fav, spec)


def class_rate(spec: ScoreSpec, delta: float) -> EfficiencyReport:
    """Worst-case rate over the Δ-regular class, attained at its vertex."""
    if spec.family is not Family.GUM or not spec.nondecreasing:
        raise PreconditionError(f"{spec} is not a nondecreasing Gumbel-family score")
    vertex = least_favorable(delta)
    return rate(spec, vertex, vertex)


def crossover_delta(a: ScoreSpec, b: ScoreSpec, bracket=(0.001, 0.99), tol: float = 1e-6) -> float:
    """Root of ``Δ ↦ R_Δ(a) - R_Δ(b)`` by bisection."""
    gap = lambda d: class_rate(a, d).rate - class_rate(b, d).rate
    lo, hi = bracket
    g_lo, g_hi = gap(lo), gap(hi)
    if not (g_lo * g_hi < 0):
        raise BracketError(f"rate difference does not change sign on [{lo}, {hi}]")
    return float(optimize.bisect(gap, lo, hi, xtol=tol))


def mixture_rate(spec: ScoreSpec, delta1: float, delta2: float, gamma: float) -> float:
    """``γ R_{Δ1} + (1 - γ) R_{Δ2}``; ``Δ2 = 0`` is the full simplex, whose rate is 0."""
    if not 0.0 <= gamma <= 1.0:
        raise InvalidParameterError("gamma must lie in [0, 1]")
    if delta1 < delta2:
        raise InvalidParameterError("need delta1 >= delta2 (nested classes)")
    first = class_rate(spec, delta1).rate if gamma > 0 else 0.0
    second = 0.0 if delta2 == 0 or gamma == 1 else class_rate(spec, delta2).rate
    return gamma * first + (1.0 - gamma) * second


def baby_rate(delta: float) -> float:
    """Rate of the identity score for two-token laws whose smaller mass is at least Δ."""
    if not 0.0 < delta <= 0.5:
        raise InvalidParameterError("delta must lie in (0, 0.5]")
    spec = ScoreSpec("baby_id")
    return rate(spec, NtpDistribution(np.array([delta, 1.0 - delta]))).rate


def kl_null_to_alt(p: NtpDistribution) -> float:
    """``D_KL(μ_0, μ_{1,P}) = -∫_0^1 log f_P(r) dr``."""
    sup = p.support
    f = lambda s: float(_log_density(sup, s)[0]) * math.exp(-s)
    knee = 10.0 * p.top1
    head = integrate.quad(f, 0.0, knee, **_QUAD)[0]
    tail = integrate.quad(f, knee, math.inf, **_QUAD)[0]
    return -(head + tail)


def dif_rate_lower_bound(spec: ScoreSpec, delta: float) -> float:
    """``max(0, -[∫ h f_{dif,0} + log ∫ e^{-h} f_{dif,Δ}])`` with large-vocabulary densities."""
    if spec.family is not Family.DIF:
        raise PreconditionError("dif_rate_lower_bound needs a dif-family score")
    if not spec.truncated:
        raise PreconditionError("the score must be bounded (set a finite truncation M)")
    if not 0.0 <= delta < 1.0:
        raise InvalidParameterError("delta must lie in [0, 1)")
    h = lambda r: float(score_values(spec, r))
    kinks = score_kinks(spec)
    null_mean = piecewise_quad(lambda r: h(r) * 2.0 * (1.0 - r), 0.0, 1.0, kinks)
    top = 1.0 - delta
    density = lambda r: float(density_dif_asymptotic(delta, r))
    alt = piecewise_quad(lambda r: math.exp(-h(r)) * density(r), 0.0, top, kinks)
    return max(0.0, -(null_mean + math.log(alt)))


def ind_delta_optimum() -> float:
    """Maximizer of ``-δ log δ`` on ``(0, 1)``."""
    res = optimize.minimize_scalar(lambda d: d * math.log(d), bounds=(1e-12, 1.0 - 1e-12), method="bounded",
                                   options={"xatol": 1e-10})
    return float(res.x)


def write_rate_csv(path, rows) -> None:
    """Rows of ``(score, delta, rate, theta_star)``."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["score", "delta", "rate", "theta_star"])
        for row in rows:
            writer.writerow(row)
