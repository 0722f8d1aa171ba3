"""Numerical evaluation of the stability constants of the discretization.

Inf-sup and continuity constants are computed as extreme singular
values of the bilinear-form matrix sandwiched between inverse square
roots of the trial and test Gram matrices. The module also evaluates
the CFL constant of the spatial pair, its diffusion-weighted variant, a
two-grid estimate of the dual-norm equivalence constant of the
orthogonal projection, and the closed-form bounds the constants are
checked against.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, eigh, solve_triangular, svdvals

from .fem import Mesh, SpatialPair, assemble

__all__ = [
    "ConstantsReport",
    "MomentExponents",
    "discrete_infsup",
    "cfl_constant",
    "cfl_omega",
    "projection_stability",
    "cfl_adjusted_infsup_bound",
    "theoretical_constants",
    "quasi_opt_ratio",
]

DEFAULT_DOF_CAP = 5000


@dataclass
class ConstantsReport:
    """Computed and theoretical constants for one configuration."""

    sigma_min: float = math.nan
    sigma_max: float = math.nan
    c_s: float = math.nan
    c_s_omega: float = math.nan
    c_h: float = math.nan
    q_s_bound: float = math.nan
    c_b_bound: float = math.nan
    C_b_bound: float = math.nan
    rho: float = math.nan
    norm_bound_factor: float = math.nan

    def __post_init__(self):
        for name in ("sigma_min", "sigma_max"):
            value = getattr(self, name)
            if not math.isnan(value) and value < 0:
                raise ValueError(f"{name} must be nonnegative")
        if (not math.isnan(self.sigma_min) and not math.isnan(self.sigma_max)
                and self.sigma_min > self.sigma_max * (1 + 1e-12)):
            raise ValueError("sigma_min cannot exceed sigma_max")


@dataclass(frozen=True)
class MomentExponents:
    """Integrability exponents of the data and the derived solution moments.

    alpha: forcing, beta: initial datum, gamma: inverse coercivity,
    theta: boundedness; p is the guaranteed solution moment and p_bar
    the moment surviving the fully discrete quasi-optimality transfer.
    Infinite exponents are represented by math.inf.
    """

    alpha: float
    beta: float
    gamma: float
    theta: float = math.inf
    p: float = math.nan
    p_bar: float = math.nan


def _gram_half_inverse(gram: np.ndarray, name: str) -> np.ndarray:
    try:
        return cholesky(gram, lower=True)
    except np.linalg.LinAlgError as exc:
        raise ValueError(f"{name} gram matrix is not positive definite") from exc


def discrete_infsup(bilinear: np.ndarray, gram_trial: np.ndarray,
                    gram_test: np.ndarray, dof_cap: int = DEFAULT_DOF_CAP) -> tuple:
    """Inf-sup and continuity constants in the chosen norms.

    Returns the smallest and largest singular values of
    G_test^{-1/2} B G_trial^{-1/2} computed by a dense SVD; sizes are
    capped to keep the computation at desk scale.
    """
    bilinear = np.asarray(bilinear, dtype=float)
    if bilinear.shape[0] != gram_test.shape[0] or bilinear.shape[1] != gram_trial.shape[0]:
        raise ValueError("bilinear form and gram matrices have mismatched sizes")
    if max(bilinear.shape) > dof_cap:
        raise ValueError(
            f"system size {max(bilinear.shape)} exceeds the dense-SVD cap {dof_cap}")
    l_test = _gram_half_inverse(gram_test, "test")
    l_trial = _gram_half_inverse(gram_trial, "trial")
    # L_test^-1 B L_trial^-T has the same singular values as the
    # symmetric-root sandwich
    tmp = solve_triangular(l_test, bilinear, lower=True)
    mat = solve_triangular(l_trial, tmp.T, lower=True).T
    sig = svdvals(mat)
    return float(sig[-1]), float(sig[0])


def _dual_gram(pair: SpatialPair) -> np.ndarray:
    return pair.mass @ pair.stiffness_solve(pair.mass)


def cfl_constant(pair: SpatialPair, k: float) -> float:
    """CFL constant k * sup ||v||_V / ||v||_{V*} over the discrete space.

    The supremum is the square root of the largest eigenvalue of
    S v = lambda (M S^-1 M) v.
    """
    if k <= 0:
        raise ValueError("time step must be positive")
    lam_max = eigh(pair.stiffness, _dual_gram(pair), eigvals_only=True)[-1]
    return float(k * np.sqrt(lam_max))


def cfl_omega(pair: SpatialPair, k: float, omega: float, coeffs) -> float:
    """Diffusion-weighted CFL constant for one parameter value.

    c^2 = (k^2 / 12) * a(w)^2 * lambda_max(S, M S^-1 M); for the scalar
    diffusion operator the weighted ratio collapses to a(w)^2 times the
    unweighted one.
    """
    a = float(coeffs.a(omega))
    if not (a > 0) or not math.isfinite(a):
        raise ValueError(f"diffusion value must be positive and finite, got {a}")
    c_s = cfl_constant(pair, k)
    return float(a * c_s / np.sqrt(12.0))


def _prolongation_1d(coarse: Mesh, fine: Mesh) -> np.ndarray:
    ratio = fine.n_cells // coarse.n_cells
    if ratio * coarse.n_cells != fine.n_cells:
        raise ValueError("meshes are not nested")
    h_c = coarse.h
    fine_nodes = np.arange(1, fine.n_cells) * fine.h
    out = np.zeros((fine.n_dof_1d, coarse.n_dof_1d))
    for j in range(coarse.n_dof_1d):
        center = (j + 1) * h_c
        out[:, j] = np.clip(1.0 - np.abs(fine_nodes - center) / h_c, 0.0, None)
    return out


def projection_stability(coarse: Mesh, fine: Mesh) -> float:
    """Two-grid estimate of the energy-norm bound of the L2 projection.

    The projection onto the coarse space is realized on the fine space
    and its energy operator norm is computed by a generalized
    eigenproblem. The fine space stands in for the full space, so the
    value is a lower bound that stabilizes under refinement.
    """
    if coarse.degree != 1 or fine.degree != 1:
        raise NotImplementedError("projection stability is implemented for degree 1")
    if coarse.dim != fine.dim:
        raise ValueError("meshes must share the dimension")
    prol_1d = _prolongation_1d(coarse, fine)
    prol = prol_1d if coarse.dim == 1 else np.kron(prol_1d, prol_1d)
    fine_pair = assemble(fine)
    mass_c = prol.T @ fine_pair.mass @ prol
    # H-orthogonal projection onto the coarse space, as a fine-space map
    proj = prol @ np.linalg.solve(mass_c, prol.T @ fine_pair.mass)
    quad = proj.T @ fine_pair.stiffness @ proj
    quad = 0.5 * (quad + quad.T)
    lam_max = eigh(quad, fine_pair.stiffness, eigvals_only=True)[-1]
    return float(np.sqrt(lam_max))


def cfl_adjusted_infsup_bound(a: float, c_s: float) -> float:
    """Lower bound on the unweighted inf-sup constant of the discrete pair.

    The weighted constants equal one exactly, and translating the
    weighted norms back into the unweighted ones costs the norm
    equivalence factors, giving

        sigma_min >= sqrt(a) / sqrt(max(1, a (1 + c_S^2 / 12), 1 / a))

    for the scalar diffusion family. Unlike the continuous-space
    bound, this one degrades with the CFL constant; the continuous
    bound is only recovered in the time-resolved regime.
    """
    if a <= 0 or c_s < 0:
        raise ValueError("need a > 0 and c_s >= 0")
    return math.sqrt(a) / math.sqrt(max(1.0, a * (1.0 + c_s ** 2 / 12.0), 1.0 / a))


def theoretical_constants(a_min: float, a_max: float) -> ConstantsReport:
    """Closed-form continuity and inf-sup bounds in the unweighted norms.

    For coercivity a_min and boundedness a_max with ratio
    rho = a_max / a_min:

        continuity  <= sqrt(2) * max(1, a_max)
        inf-sup     >= min(a_min, 1 / rho) / sqrt(2)

    and the induced bound on the solution norm carries the factor
    sqrt(2) * max(1 / a_min, rho).
    """
    if not (0 < a_min <= a_max) or not math.isfinite(a_max):
        raise ValueError("need 0 < a_min <= a_max < inf")
    rho = a_max / a_min
    return ConstantsReport(
        c_b_bound=min(a_min, 1.0 / rho) / math.sqrt(2.0),
        C_b_bound=math.sqrt(2.0) * max(1.0, a_max),
        rho=rho,
        norm_bound_factor=math.sqrt(2.0) * max(1.0 / a_min, rho),
    )


def quasi_opt_ratio(err: float, best_err: float) -> float:
    """Ratio of the solver error to the best-approximation error."""
    if err < 0 or best_err < 0:
        raise ValueError("errors must be nonnegative")
    if best_err == 0:
        if err > 0:
            raise ValueError("positive error with zero best approximation error")
        return 1.0
    return float(err / best_err)
