"""Closed-form reference solutions for the single-eigenmode experiments.

For constant diffusion a and forcing c0 * sin(pi t) * phi_mode, the
exact solution is c0 * T(t) * phi_mode with a scalar profile T solving
T' + a * lam * T = sin(pi t), T(0) = 0. This module provides the closed
form of T, a validation gate against an independent high-order time
integrator, exact space-time error norms against discrete solutions,
and a refined-in-time surrogate for the spatially semidiscrete
solution.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp

from .fem import mode_load_vector
from .solver import (
    Discretization,
    ProblemData,
    SpaceTimeSolution,
    TimeGrid,
    solve_pathwise,
)

__all__ = [
    "ModeSolution",
    "exact_mode_profile",
    "validate_mode_profile",
    "exact_error",
    "semidiscrete_reference",
    "nested_grid_error",
]

_GAUSS5 = np.polynomial.legendre.leggauss(5)


def exact_mode_profile(a: float, lam: float, t) -> np.ndarray:
    """Temporal profile T(t) of the exact single-mode solution.

        T(t) = (a lam sin(pi t) - pi cos(pi t) + pi exp(-a lam t))
               / ((a lam)^2 + pi^2)
    """
    if a <= 0:
        raise ValueError("diffusion value must be positive")
    t = np.asarray(t, dtype=float)
    al = a * lam
    den = al * al + np.pi ** 2
    return (al * np.sin(np.pi * t) - np.pi * np.cos(np.pi * t)
            + np.pi * np.exp(-al * t)) / den


def _profile_derivative(a: float, lam: float, t) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    al = a * lam
    den = al * al + np.pi ** 2
    return (al * np.pi * np.cos(np.pi * t) + np.pi ** 2 * np.sin(np.pi * t)
            - al * np.pi * np.exp(-al * t)) / den


def validate_mode_profile(a: float, lam: float, n_times: int = 100,
                          rtol: float = 1e-12) -> tuple:
    """Cross-check the closed form against the ODE and a DOP853 integration.

    Returns (max residual of T' + a lam T - sin(pi t), max deviation
    from the integrator at n_times sample times). The closed form is
    only trusted once this gate has been run.
    """
    times = np.linspace(0.0, 1.0, n_times)
    prof = exact_mode_profile(a, lam, times)
    residual = np.max(np.abs(
        _profile_derivative(a, lam, times) + a * lam * prof - np.sin(np.pi * times)))
    sol = solve_ivp(lambda t, y: np.sin(np.pi * t) - a * lam * y, (0.0, 1.0),
                    [0.0], method="DOP853", t_eval=times, rtol=rtol, atol=1e-14)
    deviation = np.max(np.abs(prof - sol.y[0]))
    return float(residual), float(deviation)


@dataclass(frozen=True)
class ModeSolution:
    """Exact solution c0 * T(t) * phi_mode for one diffusion value.

    lam is the first Dirichlet eigenvalue of the domain, pi^2 on the
    interval and 2 pi^2 on the square.
    """

    a: float
    c0: float
    lam: float

    def __post_init__(self):
        if self.a <= 0 or not math.isfinite(self.a):
            raise ValueError("diffusion value must be positive and finite")

    @classmethod
    def for_dim(cls, a: float, c0: float, dim: int) -> "ModeSolution":
        if dim not in (1, 2):
            raise ValueError("dim must be 1 or 2")
        return cls(a=a, c0=c0, lam=dim * np.pi ** 2)

    def time_profile(self, t) -> np.ndarray:
        return exact_mode_profile(self.a, self.lam, t)

    def time_profile_derivative(self, t) -> np.ndarray:
        return _profile_derivative(self.a, self.lam, t)

    @property
    def mode_energy_sq(self) -> float:
        """Squared energy norm of the spatial mode, pi^2 / 2 in both dims."""
        return float(np.pi ** 2 / 2.0)


def _profile_integrals(mode: ModeSolution, grid: TimeGrid):
    """Per-interval integrals of T and T^2 by 5-point Gauss."""
    gx, gw = _GAUSS5
    n = grid.n_intervals
    int_t = np.empty(n)
    int_t2 = np.empty(n)
    for i in range(n):
        t0, t1 = grid.nodes[i], grid.nodes[i + 1]
        k = t1 - t0
        t = 0.5 * (t0 + t1) + 0.5 * k * gx
        prof = mode.time_profile(t)
        int_t[i] = 0.5 * k * np.sum(gw * prof)
        int_t2[i] = 0.5 * k * np.sum(gw * prof ** 2)
    return int_t, int_t2


def exact_error(mode: ModeSolution, disc: Discretization,
                solution: SpaceTimeSolution) -> tuple:
    """Energy-norm errors (solver error, best-approximation error).

    Both are measured in the space-time trial norm. Cross terms between
    the mode and the basis are exact because the mode is an
    eigenfunction, so its energy pairing is lam times the mass pairing;
    time integrals of the profile use 5-point Gauss per interval.
    """
    if disc.q != 0:
        raise NotImplementedError("only q = 0 solutions are supported")
    pair = disc.pair
    grid = disc.grid
    values = solution.values
    if values.shape != (grid.n_intervals, disc.n_dof):
        raise ValueError("solution shape does not match discretization")

    cross_v = mode.lam * mode_load_vector(pair.mesh)
    int_t, int_t2 = _profile_integrals(mode, grid)
    widths = grid.widths
    phi_v2 = mode.mode_energy_sq
    c0 = mode.c0

    err_sq = 0.0
    for i in range(grid.n_intervals):
        u_i = values[i]
        err_sq += (c0 ** 2 * int_t2[i] * phi_v2
                   - 2.0 * c0 * int_t[i] * (cross_v @ u_i)
                   + widths[i] * (u_i @ pair.stiffness @ u_i))

    # best approximation: energy projection of the mode, interval means of T
    spatial = pair.stiffness_solve(cross_v)
    proj_energy = float(cross_v @ spatial)
    best_sq = c0 ** 2 * float(
        np.sum(int_t2 * phi_v2 - int_t ** 2 / widths * proj_energy))
    return float(np.sqrt(max(err_sq, 0.0))), float(np.sqrt(max(best_sq, 0.0)))


def semidiscrete_reference(data: ProblemData, disc: Discretization, omega: float,
                           refinement: int = 16) -> tuple:
    """Surrogate for the spatially semidiscrete solution.

    Runs the same scheme on the time grid refined by the given factor
    and returns (solution, refined discretization). The result is a
    surrogate, exact in space but still carrying a small temporal error
    of order k / refinement.
    """
    if refinement < 16:
        raise ValueError("refinement factor must be at least 16")
    fine_nodes = np.empty(disc.grid.n_intervals * refinement + 1)
    fine_nodes[0] = 0.0
    nodes = disc.grid.nodes
    for i in range(disc.grid.n_intervals):
        local = np.linspace(nodes[i], nodes[i + 1], refinement + 1)
        fine_nodes[i * refinement + 1:(i + 1) * refinement + 1] = local[1:]
    fine_disc = Discretization(pair=disc.pair, grid=TimeGrid(fine_nodes), q=disc.q)
    return solve_pathwise(data, fine_disc, omega), fine_disc


def nested_grid_error(coarse: SpaceTimeSolution, disc: Discretization,
                      fine: SpaceTimeSolution, fine_disc: Discretization) -> float:
    """Energy-norm distance between solutions on nested time grids."""
    ratio = fine_disc.grid.n_intervals // disc.grid.n_intervals
    if ratio * disc.grid.n_intervals != fine_disc.grid.n_intervals:
        raise ValueError("time grids are not nested")
    stiff = disc.pair.stiffness
    widths = fine_disc.grid.widths
    total = 0.0
    for i in range(fine_disc.grid.n_intervals):
        diff = fine.values[i] - coarse.values[i // ratio]
        total += widths[i] * (diff @ stiff @ diff)
    return float(np.sqrt(max(total, 0.0)))


def quasi_static_limit(mode: ModeSolution, t) -> np.ndarray:
    """Leading-order profile sin(pi t) / (a lam) for strong diffusion."""
    return np.sin(np.pi * np.asarray(t, dtype=float)) / (mode.a * mode.lam)
