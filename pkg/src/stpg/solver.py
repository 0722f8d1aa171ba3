"""Space-time Petrov-Galerkin discretization of the parabolic problem.

Trial functions are piecewise constant in time with values in the
spatial space (lowest order, q = 0); test functions are continuous and
piecewise linear in time, vanish at the final time, and share the
spatial space. For the operator a * (-Laplacian) the resulting square
system is block lower bidiagonal and the forward solve is a modified
Crank-Nicolson sweep.

The module also evaluates the space-time norms attached to the pair:
the trial energy norm, its weighted variant, and the weighted test
norms with and without the interval-mean projection of the test
function.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .fem import SpatialPair, mode_load_vector

__all__ = [
    "TimeGrid",
    "Discretization",
    "ProblemData",
    "SpaceTimeSolution",
    "PathwiseSolveError",
    "mode_problem",
    "time_weights",
    "assemble_load",
    "solve_pathwise",
    "assemble_full_system",
    "legendre_project",
    "build_grams",
    "evaluate_norm",
    "trial_energy_norm",
    "forcing_dual_norm_sq",
    "energy_bound_report",
    "best_approximation",
]

_GAUSS4 = np.polynomial.legendre.leggauss(4)


class PathwiseSolveError(RuntimeError):
    """A single-parameter solve failed for a controlled reason.

    Raised when the diffusion value is non-finite or not positive.
    Parameter sweeps catch this and record a flagged value instead of
    aborting the whole sweep.
    """


@dataclass(frozen=True)
class TimeGrid:
    """Partition 0 = t_0 < t_1 < ... < t_N = T of the time interval."""

    nodes: np.ndarray

    def __post_init__(self):
        nodes = np.asarray(self.nodes, dtype=float)
        object.__setattr__(self, "nodes", nodes)
        if nodes.ndim != 1 or len(nodes) < 2:
            raise ValueError("need at least two time nodes")
        if nodes[0] != 0.0:
            raise ValueError("time grid must start at 0")
        if np.any(np.diff(nodes) <= 0):
            raise ValueError("time nodes must be strictly increasing")

    @classmethod
    def uniform(cls, final_time: float, n_intervals: int) -> "TimeGrid":
        if n_intervals < 1:
            raise ValueError("need at least one time interval")
        return cls(np.linspace(0.0, final_time, n_intervals + 1))

    @property
    def final_time(self) -> float:
        return float(self.nodes[-1])

    @property
    def n_intervals(self) -> int:
        return len(self.nodes) - 1

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.nodes)

    @property
    def k_max(self) -> float:
        return float(np.max(self.widths))


@dataclass(frozen=True)
class Discretization:
    """Spatial pair and time grid making up one space-time discretization.

    The trial degree q is carried for forward compatibility; all solve
    and norm paths currently require q = 0 and reject anything else.
    """

    pair: SpatialPair
    grid: TimeGrid
    q: int = 0

    def __post_init__(self):
        if self.q < 0:
            raise ValueError("q must be nonnegative")

    @property
    def n_dof(self) -> int:
        return self.pair.n_dof

    @property
    def trial_size(self) -> int:
        return self.grid.n_intervals * (self.q + 1) * self.n_dof

    @property
    def test_size(self) -> int:
        # continuous piecewise polynomials of degree q+1 vanishing at T
        return self.grid.n_intervals * (self.q + 1) * self.n_dof


def _require_lowest_order(disc: Discretization):
    if disc.q != 0:
        raise NotImplementedError("only q = 0 trial spaces are implemented")


@dataclass
class ProblemData:
    """Separable forcing c0(w) * g(t) * phi_mode(x) and initial datum.

    coeffs is any object with scalar methods a(w) and c0(w); g is the
    temporal profile (sin(pi t) in all stock experiments); load_vector
    holds the spatial inner products of phi_mode with the basis.
    """

    coeffs: object
    load_vector: np.ndarray
    g: callable = None
    u0: np.ndarray = None

    def __post_init__(self):
        if self.g is None:
            self.g = lambda t: np.sin(np.pi * t)

    def initial_vector(self, n_dof: int) -> np.ndarray:
        if self.u0 is None:
            return np.zeros(n_dof)
        u0 = np.asarray(self.u0, dtype=float)
        if u0.shape != (n_dof,):
            raise ValueError("initial datum has wrong length")
        return u0


def mode_problem(coeffs, disc: Discretization, u0: np.ndarray = None,
                 g=None) -> ProblemData:
    """Problem data for first-eigenmode forcing on the given mesh."""
    return ProblemData(coeffs=coeffs, load_vector=mode_load_vector(disc.pair.mesh),
                       g=g, u0=u0)


@dataclass
class SpaceTimeSolution:
    """Per-interval polynomial coefficients in the spatial basis.

    coeffs[i, j, :] holds the degree-j local Legendre coefficient on
    interval i+1; for q = 0 this is just the interval value.
    """

    coeffs: np.ndarray

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=float)
        if self.coeffs.ndim != 3:
            raise ValueError("solution array must have shape (N, q+1, n_dof)")

    @property
    def values(self) -> np.ndarray:
        """Interval values for q = 0 solutions, shape (N, n_dof)."""
        return self.coeffs[:, 0, :]

    def flat(self) -> np.ndarray:
        return self.coeffs.reshape(-1)


def _check_a(a: float) -> float:
    a = float(a)
    if not math.isfinite(a):
        raise PathwiseSolveError(f"diffusion value is not finite: {a}")
    if a <= 0.0:
        raise PathwiseSolveError(f"diffusion value must be positive: {a}")
    return a


def time_weights(grid: TimeGrid, g) -> np.ndarray:
    """Integrals of g against the temporal test hats at nodes t_0..t_{N-1}.

    Evaluated with 4-point Gauss per interval, which resolves the stock
    profile sin(pi t) to machine precision on the grids in use.
    """
    n = grid.n_intervals
    weights = np.zeros(n)
    gx, gw = _GAUSS4
    nodes = grid.nodes
    for i in range(n):
        t0, t1 = nodes[i], nodes[i + 1]
        k = t1 - t0
        t = 0.5 * (t0 + t1) + 0.5 * k * gx
        w = 0.5 * k * gw
        gv = np.asarray(g(t), dtype=float)
        # hat at the left node falls from 1 to 0 across the interval
        weights[i] += np.sum(w * gv * (t1 - t) / k)
        if i + 1 < n:
            weights[i + 1] += np.sum(w * gv * (t - t0) / k)
    return weights


def assemble_load(data: ProblemData, disc: Discretization, omega: float) -> np.ndarray:
    """Load vector of the space-time system for one parameter value.

    Block j collects c0(w) * integral(g * hat_j) * b; block 0 also
    receives M u0 from the initial pairing with the test value at t = 0.
    """
    _require_lowest_order(disc)
    n = disc.n_dof
    c0 = float(data.coeffs.c0(omega))
    tw = time_weights(disc.grid, data.g)
    load = np.kron(tw, c0 * data.load_vector)
    u0 = data.initial_vector(n)
    load[:n] += disc.pair.mass @ u0
    return load


def solve_pathwise(data: ProblemData, disc: Discretization, omega: float) -> SpaceTimeSolution:
    """Solve the lowest-order space-time system by forward substitution.

    Step equations with A = a(w) S and k_j = t_j - t_{j-1}:

        (M + (k_1/2) A) U_1     = M u0 + F_0
        (M + (k_{j+1}/2) A) U_{j+1} = (M - (k_j/2) A) U_j + F_j

    On a uniform grid one SPD factorization is reused for every step.
    """
    _require_lowest_order(disc)
    a = _check_a(data.coeffs.a(omega))
    pair = disc.pair
    grid = disc.grid
    n = disc.n_dof
    n_steps = grid.n_intervals
    widths = grid.widths
    uniform = np.allclose(widths, widths[0], rtol=1e-14, atol=0.0)

    c0 = float(data.coeffs.c0(omega))
    if not math.isfinite(c0):
        raise PathwiseSolveError(f"forcing amplitude is not finite: {c0}")
    tw = time_weights(grid, data.g)
    stiff_a = a * pair.stiffness

    factor = None
    if uniform:
        factor = cho_factor(pair.mass + 0.5 * widths[0] * stiff_a)

    out = np.empty((n_steps, 1, n))
    u_prev = data.initial_vector(n)
    rhs = pair.mass @ u_prev + c0 * tw[0] * data.load_vector
    for j in range(n_steps):
        if factor is not None:
            u_new = cho_solve(factor, rhs)
        else:
            u_new = cho_solve(cho_factor(pair.mass + 0.5 * widths[j] * stiff_a), rhs)
        if not np.all(np.isfinite(u_new)):
            raise PathwiseSolveError("non-finite values in time step")
        out[j, 0, :] = u_new
        if j + 1 < n_steps:
            rhs = (pair.mass - 0.5 * widths[j] * stiff_a) @ u_new \
                + c0 * tw[j + 1] * data.load_vector
    return SpaceTimeSolution(out)


def assemble_full_system(disc: Discretization, a: float) -> np.ndarray:
    """Dense matrix of the space-time bilinear form for diffusion value a.

    Rows follow the temporal test nodes t_0..t_{N-1}, columns the trial
    intervals I_1..I_N; the block structure is lower bidiagonal with
    blocks -M + (k_j/2) a S below and M + (k_{j+1}/2) a S on the
    diagonal.
    """
    _require_lowest_order(disc)
    a = _check_a(a)
    pair = disc.pair
    n = disc.n_dof
    widths = disc.grid.widths
    n_steps = disc.grid.n_intervals
    size = n_steps * n
    mat = np.zeros((size, size))
    stiff_a = a * pair.stiffness
    for j in range(n_steps):
        rows = slice(j * n, (j + 1) * n)
        mat[rows, rows] = pair.mass + 0.5 * widths[j] * stiff_a
        if j >= 1:
            cols = slice((j - 1) * n, j * n)
            mat[rows, cols] = -pair.mass + 0.5 * widths[j] * stiff_a
    return mat


def legendre_project(f, interval, q: int) -> np.ndarray:
    """Coefficients of the L2 projection of f onto degree-q polynomials.

    The coefficients refer to the Legendre polynomials shifted to the
    interval; for q = 0 the single coefficient is the interval mean.
    """
    if q < 0:
        raise ValueError("q must be nonnegative")
    t0, t1 = float(interval[0]), float(interval[1])
    if t1 <= t0:
        raise ValueError("empty interval")
    gx, gw = np.polynomial.legendre.leggauss(q + 3)
    t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * gx
    fv = np.asarray(f(t), dtype=float)
    coeffs = np.empty(q + 1)
    for j in range(q + 1):
        leg = np.polynomial.legendre.Legendre.basis(j)(gx)
        # orthogonality: int_-1^1 P_j^2 = 2 / (2j + 1)
        coeffs[j] = (2 * j + 1) / 2.0 * np.sum(gw * fv * leg)
    return coeffs


_GRAM_KINDS = ("Y", "Y_omega", "X_omega_hk", "X_omega", "X")


def build_grams(disc: Discretization, a: float, kind: str) -> np.ndarray:
    """Gram matrix of one of the space-time norms.

    kind selects the norm evaluated as coeffs' G coeffs:

    * ``Y``          trial energy norm, blocks k_i S
    * ``Y_omega``    weighted trial norm, a times the above
    * ``X_omega_hk`` weighted test norm with interval means of the test
      function in the energy term and the discrete dual norm on the
      time derivative
    * ``X_omega``    same but with the full test function in the energy
      term
    * ``X``          unweighted variant of ``X_omega``

    Test-space matrices act on nodal values at t_0..t_{N-1}; the value
    at the final time is the built-in zero of the test space.
    """
    _require_lowest_order(disc)
    if kind not in _GRAM_KINDS:
        raise ValueError(f"unknown gram kind {kind!r}")
    if kind != "X":
        a = _check_a(a)
    pair = disc.pair
    n = disc.n_dof
    widths = disc.grid.widths
    n_steps = disc.grid.n_intervals
    size = n_steps * n

    if kind in ("Y", "Y_omega"):
        weight = 1.0 if kind == "Y" else a
        gram = np.zeros((size, size))
        for i in range(n_steps):
            sl = slice(i * n, (i + 1) * n)
            gram[sl, sl] = weight * widths[i] * pair.stiffness
        return gram

    a_eff = 1.0 if kind == "X" else a
    stiff = pair.stiffness
    dual = pair.mass @ pair.stiffness_solve(pair.mass)
    gram = np.zeros((size, size))

    def add(row, col, block):
        gram[row * n:(row + 1) * n, col * n:(col + 1) * n] += block

    for i in range(1, n_steps + 1):
        k = widths[i - 1]
        left, right = i - 1, i  # node indices; node n_steps is the zero at T
        d_block = dual / (a_eff * k)
        if kind == "X_omega_hk":
            s_block = 0.25 * a_eff * k * stiff
            s_cross = s_block
        else:
            s_block = a_eff * k / 3.0 * stiff
            s_cross = a_eff * k / 6.0 * stiff
        add(left, left, d_block + s_block)
        if right < n_steps:
            add(right, right, d_block + s_block)
            add(left, right, -d_block + s_cross)
            add(right, left, -d_block + s_cross)
    gram[:n, :n] += pair.mass
    return gram


def trial_energy_norm(solution: SpaceTimeSolution, disc: Discretization,
                      weight: float = 1.0) -> float:
    """Space-time energy norm sqrt(weight * sum_i k_i |U_i|_V^2).

    Direct evaluation of the block-diagonal trial Gram, cheap enough
    for parameter sweeps.
    """
    _require_lowest_order(disc)
    values = solution.values
    widths = disc.grid.widths
    stiff = disc.pair.stiffness
    total = float(np.sum(widths * np.einsum("id,de,ie->i", values, stiff, values)))
    return float(np.sqrt(max(weight * total, 0.0)))


def forcing_dual_norm_sq(data: ProblemData, disc: Discretization, omega: float) -> float:
    """Squared discrete dual norm of the forcing over the time interval.

    The spatial profile acts on the discrete space through the load
    vector b, so the squared norm is c0(w)^2 * int g^2 * b' S^-1 b.
    """
    c0 = float(data.coeffs.c0(omega))
    gx, gw = _GAUSS4
    grid = disc.grid
    time_part = 0.0
    for i in range(grid.n_intervals):
        t0, t1 = grid.nodes[i], grid.nodes[i + 1]
        t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * gx
        gv = np.asarray(data.g(t), dtype=float)
        time_part += 0.5 * (t1 - t0) * np.sum(gw * gv ** 2)
    b = data.load_vector
    return float(c0 ** 2 * time_part * (b @ disc.pair.stiffness_solve(b)))


def energy_bound_report(data: ProblemData, disc: Discretization, omega: float,
                        c_s_omega: float) -> tuple:
    """Observed sides of the weighted stability bound for one parameter.

    Returns (lhs, rhs, lhs / rhs) for

        a |U|_Y^2 <= (1 + c_S_omega^2) a^-1 |f|^2 + |u0|_H^2

    with the computable discrete dual norm of the forcing. The ratio is
    the observed stability constant; the bound guarantees it stays at
    or below one.
    """
    a = _check_a(data.coeffs.a(omega))
    sol = solve_pathwise(data, disc, omega)
    lhs = a * trial_energy_norm(sol, disc) ** 2
    u0 = data.initial_vector(disc.n_dof)
    rhs = (1.0 + c_s_omega ** 2) / a * forcing_dual_norm_sq(data, disc, omega) \
        + float(u0 @ disc.pair.mass @ u0)
    return lhs, rhs, lhs / rhs if rhs > 0 else math.inf


def evaluate_norm(solution, gram: np.ndarray) -> float:
    """Norm sqrt(c' G c) of a solution or plain coefficient vector."""
    if isinstance(solution, SpaceTimeSolution):
        c = solution.flat()
    else:
        c = np.asarray(solution, dtype=float).reshape(-1)
    if c.shape[0] != gram.shape[0]:
        raise ValueError(
            f"coefficient length {c.shape[0]} does not match gram size {gram.shape[0]}")
    return float(np.sqrt(max(c @ gram @ c, 0.0)))


def best_approximation(mode, disc: Discretization) -> SpaceTimeSolution:
    """Orthogonal projection of a separable exact solution onto the trial space.

    In the trial energy norm the projection factorizes into the
    energy-orthogonal spatial projection of the mode and interval means
    of the temporal profile. mode provides c0, lam and time_profile.
    """
    _require_lowest_order(disc)
    pair = disc.pair
    grid = disc.grid
    # (phi_mode, v)_V = lam * (phi_mode, v)_H for the eigenmode
    cross_v = mode.lam * mode_load_vector(pair.mesh)
    spatial = pair.stiffness_solve(cross_v)
    means = np.empty(grid.n_intervals)
    gx, gw = np.polynomial.legendre.leggauss(5)
    for i in range(grid.n_intervals):
        t0, t1 = grid.nodes[i], grid.nodes[i + 1]
        t = 0.5 * (t0 + t1) + 0.5 * (t1 - t0) * gx
        means[i] = 0.5 * np.sum(gw * mode.time_profile(t))
    coeffs = mode.c0 * means[:, None, None] * spatial[None, None, :]
    return SpaceTimeSolution(coeffs)
