"""Change of measure turning the moving-frame process X into Y = X + gamma.

The density removes the deterministic drift h(s) = (8*gamma'(s) +
sigma^2*b*gamma(s)) / (4*sigma):  log dQ/dP = -int h dB - (1/2) int h^2 ds.
The stochastic integral uses left-endpoint (Ito) sums over the retained
Gaussian draws; the compensator uses the trapezoid rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateWeights, MissingDraws, WrongFrame
from .model import Curve, ModelParams
from .paths import Frame, Path

__all__ = [
    "GirsanovWeight",
    "girsanov_weight",
    "girsanov_log_weights",
    "shifted_brownian",
    "reweighted_expectation",
    "ReweightedEstimate",
]


@dataclass(frozen=True)
class GirsanovWeight:
    log_weight: float
    stochastic_term: float
    compensator_term: float

    @property
    def weight(self) -> float:
        return math.exp(self.log_weight)


def drift_integrand(curve: Curve, params: ModelParams, t,
                    dsr_c: float | None = None) -> np.ndarray:
    """h(t) = (8*gamma'(t) + sigma^2*b*gamma(t)) / (4*sigma).

    With ``dsr_c`` set, the b*gamma term is replaced by the constant c
    (the double-square-root drift variant).
    """
    t = np.asarray(t, dtype=float)
    gp = np.asarray(curve.gamma_deriv(t), dtype=float)
    if dsr_c is not None:
        extra = params.sigma ** 2 * dsr_c * np.ones_like(t)
    else:
        extra = params.sigma ** 2 * params.b * np.asarray(curve.gamma(t), dtype=float)
    return (8.0 * gp + extra) / (4.0 * params.sigma)


def _check_path(path: Path):
    if path.frame is not Frame.X:
        raise WrongFrame(f"expected frame X, got {path.frame.name}")
    if path.gauss is None:
        raise MissingDraws("path does not retain its Gaussian draws")


def girsanov_log_weights(gauss: np.ndarray, curve: Curve, params: ModelParams,
                         grid, dsr_c: float | None = None):
    """Vectorized log-weights for a (n_paths, n_steps) matrix of draws.

    Returns (log_weight, stochastic_term, compensator_term) arrays.
    """
    times = grid.times()
    dt = grid.dt
    h_left = drift_integrand(curve, params, times[:-1], dsr_c)
    h_all = drift_integrand(curve, params, times, dsr_c)
    # dB_j = sqrt(dt) * g_j, left-endpoint evaluation of h
    stoch = -math.sqrt(dt) * (gauss @ h_left)
    comp = -0.5 * float(np.trapezoid(h_all ** 2, dx=dt))
    return stoch + comp, stoch, np.full_like(stoch, comp)


def girsanov_weight(x_path: Path, curve: Curve, params: ModelParams,
                    T: float | None = None) -> GirsanovWeight:
    """Density dQ/dP along one X-frame path up to its horizon."""
    _check_path(x_path)
    logs, stoch, comp = girsanov_log_weights(x_path.gauss[None, :], curve,
                                             params, x_path.grid)
    return GirsanovWeight(log_weight=float(logs[0]),
                          stochastic_term=float(stoch[0]),
                          compensator_term=float(comp[0]))


def shifted_brownian(x_path: Path, curve: Curve, params: ModelParams) -> np.ndarray:
    """W on the grid: the path's Brownian motion plus the removed drift."""
    _check_path(x_path)
    times = x_path.grid.times()
    dt = x_path.grid.dt
    b_increments = math.sqrt(dt) * x_path.gauss
    b = np.concatenate([[0.0], np.cumsum(b_increments)])
    h = drift_integrand(curve, params, times)
    # cumulative trapezoid of h
    drift = np.concatenate([[0.0], np.cumsum(0.5 * (h[:-1] + h[1:]) * dt)])
    return b + drift


@dataclass
class ReweightedEstimate:
    estimate: float          # self-normalized
    std_error: float
    unnormalized_mean: float
    unnormalized_se: float
    mean_weight: float
    mean_weight_se: float
    ess: float
    n: int


def reweighted_expectation(payoff, x_paths: list[Path], curve: Curve,
                           T: float | None = None) -> ReweightedEstimate:
    """Importance-sampling estimate of E[f(Y_T)] from X-frame paths.

    Self-normalized mean with delta-method standard error, plus the
    unnormalized mean (whose expectation-one weight doubles as the
    martingale diagnostic).
    """
    if not x_paths:
        raise ValueError("empty path batch")
    params = x_paths[0].params
    grid = x_paths[0].grid
    horizon = grid.T if T is None else T
    gam_T = float(curve.gamma(horizon))

    gauss = np.stack([p.gauss for p in x_paths])
    for p in x_paths:
        _check_path(p)
    logs, _, _ = girsanov_log_weights(gauss, curve, params, grid)
    w = np.exp(logs)
    terminals = np.array([p.values[-1] for p in x_paths]) + gam_T
    f = np.asarray(payoff(terminals), dtype=float)
    if not np.all(np.isfinite(f * w)):
        raise ValueError("payoff * weight overflowed")

    n = w.size
    ess = float(np.sum(w)) ** 2 / float(np.sum(w * w))
    if ess < 10:
        raise DegenerateWeights(f"effective sample size {ess:.2f} < 10")

    wbar = float(np.mean(w))
    est = float(np.sum(w * f) / np.sum(w))
    # delta method for the ratio estimator
    resid = w * (f - est)
    se = float(np.std(resid, ddof=1) / math.sqrt(n) / wbar)
    un_mean = float(np.mean(w * f))
    un_se = float(np.std(w * f, ddof=1) / math.sqrt(n))
    return ReweightedEstimate(estimate=est, std_error=se,
                              unnormalized_mean=un_mean, unnormalized_se=un_se,
                              mean_weight=wbar,
                              mean_weight_se=float(np.std(w, ddof=1) / math.sqrt(n)),
                              ess=ess, n=n)
