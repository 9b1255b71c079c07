"""Semimartingale local-time estimators along discretized paths.

Two routes: occupation-band estimators (upper / lower / symmetric, using the
quadratic variation rate (sigma^2/4) of the square-root frame) and the
residual of Tanaka's formula with the point-symmetric sign (sgn(0) = 0).
The symmetric local time is always (upper + lower)/2.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import FrameMismatch, ZeroLocalTime
from .model import Curve
from .paths import Frame, Path

__all__ = [
    "LocalTimeEstimate",
    "occupation_upper",
    "occupation_lower",
    "occupation_estimate",
    "tanaka_residual",
    "check_relloc",
    "RellocReport",
    "relation_ratios",
    "markovian_from_symmetric",
    "export_localtime_csv",
]


@dataclass
class LocalTimeEstimate:
    """Accumulated local-time trajectories on the path's grid."""

    times: np.ndarray
    upper: np.ndarray | None
    lower: np.ndarray | None
    symmetric: np.ndarray
    eps: float
    method: str  # "occupation" or "tanaka_residual"


def _barrier_on_grid(path: Path, barrier) -> np.ndarray:
    t = path.grid.times()
    if callable(barrier):
        return np.asarray(barrier(t), dtype=float) * np.ones_like(t)
    return np.full_like(t, float(barrier))


def _check_frame(path: Path):
    if path.frame not in (Frame.Y, Frame.X):
        raise FrameMismatch(f"occupation estimators expect frame Y or X, "
                            f"got {path.frame.name}")


def _occupation(path: Path, barrier, eps: float):
    """Upper and lower occupation-band increments for a Y/X-frame path."""
    _check_frame(path)
    if eps <= 0:
        raise ValueError("eps must be positive")
    kappa = _barrier_on_grid(path, barrier)
    diff = path.values[:-1] - kappa[:-1]  # left-endpoint evaluation
    rate = path.params.sigma ** 2 / 4.0 * path.grid.dt / eps
    d_up = np.where((diff >= 0.0) & (diff < eps), rate, 0.0)
    d_lo = np.where((diff > -eps) & (diff <= 0.0), rate, 0.0)
    zero = np.zeros(1)
    upper = np.concatenate([zero, np.cumsum(d_up)])
    lower = np.concatenate([zero, np.cumsum(d_lo)])
    return upper, lower


def occupation_upper(path: Path, barrier, eps: float) -> LocalTimeEstimate:
    """Occupation estimate of the upper local time at the barrier."""
    upper, _ = _occupation(path, barrier, eps)
    zero = np.zeros_like(upper)
    return LocalTimeEstimate(times=path.grid.times(), upper=upper, lower=zero,
                             symmetric=(upper + zero) / 2.0, eps=eps,
                             method="occupation")


def occupation_lower(path: Path, barrier, eps: float) -> LocalTimeEstimate:
    """Occupation estimate of the lower local time at the barrier."""
    _, lower = _occupation(path, barrier, eps)
    zero = np.zeros_like(lower)
    return LocalTimeEstimate(times=path.grid.times(), upper=zero, lower=lower,
                             symmetric=(zero + lower) / 2.0, eps=eps,
                             method="occupation")


def occupation_estimate(path: Path, barrier, eps: float) -> LocalTimeEstimate:
    """Upper, lower and symmetric occupation estimates in one pass."""
    upper, lower = _occupation(path, barrier, eps)
    return LocalTimeEstimate(times=path.grid.times(), upper=upper, lower=lower,
                             symmetric=(upper + lower) / 2.0, eps=eps,
                             method="occupation")


def default_band(path: Path) -> float:
    """One one-step diffusion standard deviation, (sigma/2)*sqrt(dt)."""
    return path.params.sigma / 2.0 * np.sqrt(path.grid.dt)


def tanaka_residual(path: Path, barrier) -> LocalTimeEstimate:
    """Symmetric local time as the residual of Tanaka's formula.

    ``sym[k] = |X_k - kappa_k| - |X_0 - kappa_0|
    - sum_{j<k} sgn(X_j - kappa_j) * d(X - kappa)_j`` with the
    point-symmetric sign and left-endpoint (non-anticipating) sums.
    """
    _check_frame(path)
    kappa = _barrier_on_grid(path, barrier)
    diff = path.values - kappa
    signs = np.sign(diff[:-1])  # sgn(0) = 0
    increments = np.diff(diff)
    zero = np.zeros(1)
    integral = np.concatenate([zero, np.cumsum(signs * increments)])
    sym = np.abs(diff) - abs(diff[0]) - integral
    return LocalTimeEstimate(times=path.grid.times(), upper=None, lower=None,
                             symmetric=sym, eps=0.0, method="tanaka_residual")


@dataclass
class RellocReport:
    """Residual of the local-time product identity 2*sqrt(R) dl(Y) = dl(R)."""

    r_terminal: float   # symmetric local time of R at lambda^2
    y_weighted: float   # sum of 2*sqrt(R) * dl(Y - lambda)
    residual: float


def check_relloc(r_path: Path, y_path: Path, curve: Curve,
                 eps: float) -> RellocReport:
    """Compare the R-frame local time with the 2*sqrt(R)-weighted Y-frame one.

    The R-frame band is position dependent, eps_R(t) = max(2*lambda(t)*eps,
    eps^2), so both accumulations target the same barrier neighborhood.
    """
    if r_path.frame is not Frame.R or y_path.frame is not Frame.Y:
        raise FrameMismatch("check_relloc expects (frame R, frame Y)")
    if r_path.grid != y_path.grid:
        raise FrameMismatch("paths must share the time grid")
    if not np.allclose(r_path.values, y_path.values ** 2, rtol=1e-10, atol=1e-12):
        raise FrameMismatch("r_path is not the elementwise square of y_path")

    t = y_path.grid.times()[:-1]
    dt = y_path.grid.dt
    sig = y_path.params.sigma
    lam = np.asarray(curve.lam(t), dtype=float) * np.ones_like(t)

    r = r_path.values[:-1]
    eps_r = np.maximum(2.0 * lam * eps, eps * eps)
    ind_r = np.abs(r - lam ** 2) < eps_r
    # d<R> = sigma^2 * R dt; symmetric band of half-width eps_r
    a_increments = np.where(ind_r, sig ** 2 * r * dt / (2.0 * eps_r), 0.0)
    a_total = float(np.sum(a_increments))

    y = y_path.values[:-1]
    diff = y - lam
    rate = sig ** 2 / 4.0 * dt / eps
    d_up = np.where((diff >= 0.0) & (diff < eps), rate, 0.0)
    d_lo = np.where((diff > -eps) & (diff <= 0.0), rate, 0.0)
    d_sym = (d_up + d_lo) / 2.0
    b_total = float(np.sum(2.0 * np.sqrt(r) * d_sym))

    residual = abs(a_total - b_total) / max(a_total, 1e-300)
    return RellocReport(r_terminal=a_total, y_weighted=b_total,
                        residual=residual)


def relation_ratios(est: LocalTimeEstimate, p: float) -> tuple[float, float]:
    """Terminal upper/symmetric and lower/symmetric ratios (targets 2p, 2(1-p))."""
    if est.upper is None or est.lower is None:
        raise ZeroLocalTime("estimate lacks upper/lower components")
    sym_t = float(est.symmetric[-1])
    if sym_t <= 0.0:
        raise ZeroLocalTime("no barrier interaction; ratios undefined")
    return float(est.upper[-1]) / sym_t, float(est.lower[-1]) / sym_t


def markovian_from_symmetric(est: LocalTimeEstimate, p: float,
                             region_indicator) -> np.ndarray:
    """Markovian local time from the symmetric one.

    On steps where the barrier sits strictly above the domain edge
    (indicator true) the increments coincide; where it sits on the edge the
    symmetric increment carries only the upper weight p.
    """
    ind = np.asarray(region_indicator, dtype=bool)
    d_sym = np.diff(est.symmetric)
    if ind.size != d_sym.size:
        raise ValueError("region_indicator must have one entry per step")
    d_markov = np.where(ind, d_sym, d_sym / p)
    return np.concatenate([[0.0], np.cumsum(d_markov)])


def export_localtime_csv(est: LocalTimeEstimate, fileobj) -> None:
    """Columns t, upper, lower, symmetric (empty string when not estimated)."""
    writer = csv.writer(fileobj)
    writer.writerow(["t", "upper", "lower", "symmetric"])
    n = est.times.size
    upper = est.upper if est.upper is not None else [""] * n
    lower = est.lower if est.lower is not None else [""] * n
    for row in zip(est.times, upper, lower, est.symmetric):
        writer.writerow([repr(v) if v != "" else "" for v in row])
