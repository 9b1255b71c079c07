"""Finite-difference oracle for the backward Kolmogorov problem.

Generator of the squared process, (sigma^2/2) x u_xx + (sigma^2/4)(delta -
b x) u_x, with a transmission condition at the barrier x = lambda^2(t):
continuity of u and the weighted flux matching p * u_x(+) = (1-p) * u_x(-),
discretized with one-sided second-order differences.  Time stepping is
Crank-Nicolson with Rannacher (fully implicit) startup steps, which keeps the
refinement study second order; interior convection switches to upwind where
centered differences would break the discrete maximum principle.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse import csr_matrix, lil_matrix
from scipy.sparse.linalg import spsolve

from .errors import GridTooCoarse, UnstableSolve
from .model import Curve, ModelParams
from .paths import Frame, GridSpec, SchemeConfig, simulate_terminals

__all__ = ["PdeGrid", "PdeSolution", "solve_backward", "compare_mc_pde",
           "CrossCheckRow"]

_RANNACHER_STEPS = 4


@dataclass(frozen=True)
class PdeGrid:
    x_max: float
    n_x: int
    n_t: int

    def __post_init__(self):
        if self.n_x < 200:
            raise ValueError("n_x must be >= 200")

    @property
    def dx(self) -> float:
        return self.x_max / (self.n_x - 1)

    def refined(self) -> "PdeGrid":
        """Halve dx (nested nodes) and dt."""
        return PdeGrid(self.x_max, 2 * self.n_x - 1, 2 * self.n_t)


@dataclass
class PdeSolution:
    x: np.ndarray
    t: np.ndarray
    u: np.ndarray  # shape (n_t + 1, n_x); u[0] is the time-0 value function

    def at(self, x0: float) -> float:
        return float(np.interp(x0, self.x, self.u[0]))


def _operator_rows(params: ModelParams, x: np.ndarray):
    """Tridiagonal coefficients of L with hybrid centered/upwind convection."""
    sig2 = params.sigma ** 2
    n = x.size
    dx = x[1] - x[0]
    lower = np.zeros(n)
    diag = np.zeros(n)
    upper = np.zeros(n)
    a = sig2 / 2.0 * x / dx ** 2                 # diffusion
    conv = sig2 / 4.0 * (params.delta - params.b * x)
    for i in range(1, n - 1):
        lo = a[i] - conv[i] / (2.0 * dx)
        hi = a[i] + conv[i] / (2.0 * dx)
        if lo < 0.0 or hi < 0.0:
            # upwind the convection to keep off-diagonals nonnegative
            cp = max(conv[i], 0.0) / dx
            cm = max(-conv[i], 0.0) / dx
            lo = a[i] + cm
            hi = a[i] + cp
            diag[i] = -(2.0 * a[i] + cp + cm)
        else:
            diag[i] = -2.0 * a[i]
        lower[i] = lo
        upper[i] = hi
    return lower, diag, upper


def _interface_index(barrier_sq, t: float, dx: float) -> int:
    return int(round(float(barrier_sq(t)) / dx))


def _build_matrices(params: ModelParams, x: np.ndarray, m_iface: int | None,
                    theta: float, dt: float):
    """(A, B) with A u_new = B u_old; algebraic rows carry constraints."""
    n = x.size
    dx = x[1] - x[0]
    lower, diag, upper = _operator_rows(params, x)
    A = lil_matrix((n, n))
    B = lil_matrix((n, n))

    for i in range(1, n - 1):
        A[i, i - 1] = -theta * dt * lower[i]
        A[i, i] = 1.0 - theta * dt * diag[i]
        A[i, i + 1] = -theta * dt * upper[i]
        B[i, i - 1] = (1.0 - theta) * dt * lower[i]
        B[i, i] = 1.0 + (1.0 - theta) * dt * diag[i]
        B[i, i + 1] = (1.0 - theta) * dt * upper[i]

    # x = 0 boundary
    if params.delta >= 2.0:
        # natural: degenerate diffusion, inflow convection (upwind)
        c0 = params.sigma ** 2 / 4.0 * params.delta / dx
        A[0, 0] = 1.0 + theta * dt * c0
        A[0, 1] = -theta * dt * c0
        B[0, 0] = 1.0 - (1.0 - theta) * dt * c0
        B[0, 1] = (1.0 - theta) * dt * c0
    else:
        # reflecting: zero one-sided derivative, second order
        A[0, 0] = 3.0
        A[0, 1] = -4.0
        A[0, 2] = 1.0
    # x = x_max: zero second derivative (linear extrapolation)
    A[n - 1, n - 1] = 1.0
    A[n - 1, n - 2] = -2.0
    A[n - 1, n - 3] = 1.0

    if m_iface is not None:
        i = m_iface
        A.rows[i] = []
        A.data[i] = []
        B.rows[i] = []
        B.data[i] = []
        p = params.p
        # (1-p) * d-(u) = p * d+(u), one-sided second order
        A[i, i - 2] = (1.0 - p)
        A[i, i - 1] = -4.0 * (1.0 - p)
        A[i, i] = 3.0
        A[i, i + 1] = -4.0 * p
        A[i, i + 2] = p
    return csr_matrix(A), csr_matrix(B)


def solve_backward(params: ModelParams, barrier_sq, payoff, T: float,
                   grid: PdeGrid) -> PdeSolution:
    """Value function u(t, x) = E[f(R_T) | R_t = x] on [0, T] x [0, x_max]."""
    x = np.linspace(0.0, grid.x_max, grid.n_x)
    dx = grid.dx
    dt = T / grid.n_t
    t = np.linspace(0.0, T, grid.n_t + 1)

    bmax = max(float(barrier_sq(s)) for s in t)
    if not bmax < 0.8 * grid.x_max:
        raise ValueError("barrier too close to the truncation level")
    indices = [_interface_index(barrier_sq, s, dx) for s in t]
    if max(abs(a - b) for a, b in zip(indices[:-1], indices[1:])) > 1:
        raise GridTooCoarse("interface moves more than one cell per time step")

    use_iface = params.p != 0.5

    u = np.empty((grid.n_t + 1, grid.n_x))
    u[grid.n_t] = np.asarray(payoff(x), dtype=float)
    cache: dict = {}
    for j in range(grid.n_t - 1, -1, -1):
        theta = 1.0 if (grid.n_t - 1 - j) < _RANNACHER_STEPS else 0.5
        m = indices[j] if use_iface else None
        if m is not None and not (2 <= m <= grid.n_x - 3):
            m = None
        key = (theta, m)
        if key not in cache:
            cache[key] = _build_matrices(params, x, m, theta, dt)
        A, B = cache[key]
        rhs = B @ u[j + 1]
        sol = spsolve(A, rhs)
        resid = np.abs(A @ sol - rhs).max()
        if resid > 1e-8 * max(1.0, np.abs(rhs).max()):
            raise UnstableSolve(f"linear solve residual {resid:.3e}")
        u[j] = sol
    return PdeSolution(x=x, t=t, u=u)


@dataclass
class CrossCheckRow:
    x0: float
    pde_value: float
    mc_value: float
    mc_se: float
    grid_bias: float
    tolerance: float
    passed: bool


def compare_mc_pde(params: ModelParams, barrier_sq, payoff, T: float,
                   x0_list, curve: Curve, grid: PdeGrid, n_paths: int,
                   n_steps_mc: int, seed: int, extra_tol: float = 0.0,
                   scheme: SchemeConfig | None = None) -> list[CrossCheckRow]:
    """PDE value vs skew-scheme Monte Carlo at each starting point.

    Pass criterion per x0: |diff| <= 3*SE + Richardson grid-bias estimate
    + extra_tol.  The Monte Carlo side simulates square-root-frame paths
    started at sqrt(x0) and squares the terminals.
    """
    sol_c = solve_backward(params, barrier_sq, payoff, T, grid)
    sol_f = solve_backward(params, barrier_sq, payoff, T, grid.refined())
    mc_grid = GridSpec(T=T, n_steps=n_steps_mc)
    rows = []
    for k, x0 in enumerate(x0_list):
        pde_f = sol_f.at(x0)
        bias = abs(pde_f - sol_c.at(x0))
        y_term = simulate_terminals(params, curve, Frame.Y, math.sqrt(x0),
                                    mc_grid, n_paths, seed + k, scheme)
        f_vals = np.asarray(payoff(y_term ** 2), dtype=float)
        mc = float(np.mean(f_vals))
        se = float(np.std(f_vals, ddof=1) / math.sqrt(n_paths))
        tol = 3.0 * se + bias + extra_tol
        rows.append(CrossCheckRow(x0=float(x0), pde_value=pde_f, mc_value=mc,
                                  mc_se=se, grid_bias=bias, tolerance=tol,
                                  passed=bool(abs(pde_f - mc) <= tol)))
    return rows
