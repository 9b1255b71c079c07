"""Analytic and statistical oracles for the simulation schemes.

Closed-form moments of the classical square-root process, a series
implementation of the noncentral chi-squared CDF (transition law of the
classical process), the skew Brownian transition density, and the
goodness-of-fit machinery used by the verification experiments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, special, stats

from .errors import SeriesNotConverged, TooFewSamples
from .model import ModelParams

__all__ = [
    "TestResult",
    "cir_moments",
    "noncentral_chisq_cdf",
    "cir_terminal_cdf",
    "besq_terminal_cdf",
    "skew_bm_transition",
    "ks_test",
    "stationary_test",
    "StationaryTestResult",
]


@dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n: int
    passed: bool
    level: float


def cir_moments(params: ModelParams, z0: float, t: float) -> tuple[float, float]:
    """Mean and variance of the classical (p = 1/2, no barrier) process.

    Drift (sigma^2/4)(delta - b z): rate kappa = sigma^2*b/4 toward delta/b;
    for b = 0 the mean grows linearly.
    """
    sig2 = params.sigma ** 2
    if params.b == 0:
        mean = z0 + sig2 * params.delta / 4.0 * t
        var = z0 * sig2 * t + params.delta * sig2 ** 2 * t * t / 8.0
        return mean, var
    kappa = sig2 * params.b / 4.0
    theta = params.delta / params.b
    e1 = math.exp(-kappa * t)
    mean = theta + (z0 - theta) * e1
    var = (z0 * sig2 / kappa * (e1 - e1 * e1)
           + theta * sig2 / (2.0 * kappa) * (1.0 - e1) ** 2)
    return mean, var


def noncentral_chisq_cdf(dof: float, noncentrality: float, x,
                         tol: float = 1e-10, max_terms: int = 100000):
    """Poisson mixture of central chi-squared CDFs, to absolute tolerance.

    The remaining Poisson mass bounds the truncation error because the
    central CDF terms are decreasing in the mixing index.
    """
    if dof <= 0:
        raise ValueError("dof must be positive")
    if noncentrality < 0:
        raise ValueError("noncentrality must be nonnegative")
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise ValueError("x must be nonnegative")
    half_nc = noncentrality / 2.0
    if half_nc == 0:
        out = special.chdtr(dof, x)
        return float(out) if out.ndim == 0 else out
    # enough terms that the Poisson tail is below tol
    jmax = int(half_nc + 10.0 * math.sqrt(half_nc) + 50.0)
    if jmax > max_terms:
        raise SeriesNotConverged(f"needs ~{jmax} terms, cap is {max_terms}")
    js = np.arange(jmax + 1)
    weights = stats.poisson.pmf(js, half_nc)
    tail = float(stats.poisson.sf(jmax, half_nc))
    if tail > tol:
        raise SeriesNotConverged(f"poisson tail {tail:.3e} above tolerance")
    terms = special.chdtr(dof + 2.0 * js[:, None], x[None, ...].reshape(1, -1))
    out = (weights @ terms).reshape(x.shape)
    if out.ndim == 0:
        return float(out)
    return out


def cir_terminal_cdf(params: ModelParams, z0: float, t: float):
    """CDF of the exact classical transition (b > 0) as a callable."""
    kappa = params.sigma ** 2 * params.b / 4.0
    decay = math.exp(-kappa * t)
    two_c = params.b / -math.expm1(-kappa * t)
    nc = two_c * z0 * decay

    def cdf(x):
        return noncentral_chisq_cdf(params.delta, nc, two_c * np.maximum(x, 0.0))

    return cdf


def besq_terminal_cdf(params: ModelParams, z0: float, t: float):
    """CDF of the squared-Bessel-type transition (b = 0) as a callable."""
    scale = params.sigma ** 2 * t / 4.0

    def cdf(x):
        return noncentral_chisq_cdf(params.delta, z0 / scale,
                                    np.maximum(x, 0.0) / scale)

    return cdf


def skew_bm_transition(p: float, t: float, x0: float, x):
    """Transition density of skew Brownian motion with barrier at 0."""
    if t <= 0:
        raise ValueError("t must be positive")
    x = np.asarray(x, dtype=float)
    phi = lambda u: np.exp(-u * u / (2.0 * t)) / math.sqrt(2.0 * math.pi * t)
    out = phi(x - x0) + (2.0 * p - 1.0) * np.sign(x) * phi(np.abs(x) + abs(x0))
    if out.ndim == 0:
        return float(out)
    return out


def ks_test(samples, cdf, level: float = 0.01) -> TestResult:
    """Two-sided Kolmogorov-Smirnov test against a callable CDF."""
    samples = np.asarray(samples, dtype=float)
    if samples.size < 10:
        raise TooFewSamples(f"need >= 10 samples, got {samples.size}")
    res = stats.kstest(samples, cdf)
    return TestResult(statistic=float(res.statistic), p_value=float(res.pvalue),
                      n=samples.size, passed=bool(res.pvalue > level),
                      level=level)


def _gamma_mass(delta: float, b: float, lo: float, hi: float) -> float:
    """int_lo^hi x^(delta/2-1) e^(-b x/2) dx (b > 0), via gammainc."""
    a = delta / 2.0
    scale = (2.0 / b) ** a * special.gamma(a)
    return scale * (special.gammainc(a, b * hi / 2.0)
                    - special.gammainc(a, b * lo / 2.0))


def _stationary_cdf_factory(params: ModelParams, c: float):
    p = params.p
    g_c = _gamma_mass(params.delta, params.b, 0.0, c)
    g_inf = _gamma_mass(params.delta, params.b, 0.0, np.inf)
    z = (1.0 - p) * g_c + p * (g_inf - g_c)

    def cdf(x):
        x = np.asarray(x, dtype=float)
        below = (1.0 - p) * np.vectorize(
            lambda v: _gamma_mass(params.delta, params.b, 0.0, min(v, c)))(np.maximum(x, 0.0))
        above = np.where(
            x > c,
            p * np.vectorize(
                lambda v: _gamma_mass(params.delta, params.b, c, v))(np.maximum(x, c)),
            0.0)
        return (below + above) / z

    return cdf


def _integrated_autocorr(x: np.ndarray, max_lag: int = 200) -> float:
    """Integrated autocorrelation time with positive-sequence truncation."""
    x = np.asarray(x, dtype=float)
    n = x.size
    x = x - x.mean()
    denom = float(np.dot(x, x))
    if denom == 0:
        return 1.0
    tau = 1.0
    for k in range(1, min(max_lag, n // 3)):
        rho = float(np.dot(x[:-k], x[k:])) / denom
        if rho < 0.05:
            break
        tau += 2.0 * rho
    return tau


@dataclass
class StationaryTestResult:
    gof: TestResult
    jump_ratio: float
    target_ratio: float
    autocorr_time: float


def stationary_test(samples, params: ModelParams, c: float,
                    level: float = 0.01, bins: int = 40,
                    jump_window: float = 0.5) -> StationaryTestResult:
    """Goodness-of-fit of thinned samples against the invariant density.

    Chi-squared on equal-probability bins; the statistic is rescaled by the
    estimated integrated autocorrelation time since thinned samples from a
    single path stay correlated.  The jump ratio at the barrier compares
    shape-corrected window counts on both sides of c against p/(1-p).
    """
    samples = np.asarray(samples, dtype=float)
    if samples.size < max(10 * bins, 100):
        raise TooFewSamples(f"need >= {max(10 * bins, 100)} samples")
    cdf = _stationary_cdf_factory(params, c)

    probs = np.linspace(0.0, 1.0, bins + 1)[1:-1]
    edges = [optimize.brentq(lambda v, q=q: cdf(v) - q, 1e-12, 1e3)
             for q in probs]
    counts = np.histogram(samples, bins=[0.0] + edges + [np.inf])[0]
    expected = samples.size / bins
    statistic = float(np.sum((counts - expected) ** 2 / expected))
    tau = _integrated_autocorr(samples)
    adj = statistic / tau
    p_value = float(stats.chi2.sf(adj, bins - 1))
    gof = TestResult(statistic=adj, p_value=p_value, n=samples.size,
                     passed=bool(p_value > level), level=level)

    h = jump_window
    n_below = int(np.sum((samples >= c - h) & (samples < c)))
    n_above = int(np.sum((samples >= c) & (samples < c + h)))
    m_below = _gamma_mass(params.delta, params.b, max(c - h, 0.0), c)
    m_above = _gamma_mass(params.delta, params.b, c, c + h)
    if n_below == 0:
        ratio = math.inf
    else:
        ratio = (n_above / m_above) / (n_below / m_below)
    return StationaryTestResult(gof=gof, jump_ratio=float(ratio),
                                target_ratio=params.p / (1.0 - params.p),
                                autocorr_time=tau)
