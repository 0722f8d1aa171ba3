"""Spatial finite element spaces on the unit interval and unit square.

Provides conforming subspaces of H^1_0 with homogeneous Dirichlet
conditions, their mass and stiffness Gram matrices, and the three
discrete norms built from them: the H norm (mass), the V norm
(stiffness energy) and the discrete dual norm induced by restricting
functionals to the subspace.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import BSpline
from scipy.linalg import cho_factor, cho_solve

__all__ = [
    "Mesh",
    "SpatialPair",
    "build_mesh",
    "assemble",
    "dual_norm",
    "v_norm",
    "h_norm",
    "mode_load_vector",
]

# 3-point Gauss is exact for the quartic integrands of the quadratic
# spline mass matrix; 5 points are used for the trigonometric loads.
_GAUSS3 = np.polynomial.legendre.leggauss(3)
_GAUSS5 = np.polynomial.legendre.leggauss(5)


@dataclass(frozen=True)
class Mesh:
    """Uniform mesh of the unit interval (dim 1) or unit square (dim 2).

    degree 1 uses continuous piecewise-linear hat functions, degree 2
    uses quadratic B-splines on a clamped uniform knot vector with the
    first and last spline removed. All basis functions vanish on the
    boundary; dofs are ordered lexicographically.
    """

    dim: int
    n_cells: int
    degree: int

    @property
    def h(self) -> float:
        return 1.0 / self.n_cells

    @property
    def n_dof_1d(self) -> int:
        return self.n_cells - 1 if self.degree == 1 else self.n_cells

    @property
    def n_dof(self) -> int:
        return self.n_dof_1d ** self.dim

    def knots(self) -> np.ndarray:
        """Clamped knot vector of the quadratic spline space."""
        if self.degree != 2:
            raise ValueError("knot vector only defined for degree 2")
        interior = np.arange(1, self.n_cells) * self.h
        return np.concatenate(([0.0] * 3, interior, [1.0] * 3))


@dataclass
class SpatialPair:
    """Mass and stiffness Gram matrices of a mesh.

    mass[i, j]      = integral of phi_i * phi_j
    stiffness[i, j] = integral of grad(phi_i) . grad(phi_j)
    """

    mesh: Mesh
    mass: np.ndarray
    stiffness: np.ndarray
    _stiff_chol: tuple = field(default=None, repr=False, compare=False)

    def stiffness_solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve S x = rhs, reusing a cached Cholesky factorization."""
        if self._stiff_chol is None:
            self._stiff_chol = cho_factor(self.stiffness)
        return cho_solve(self._stiff_chol, rhs)

    @property
    def n_dof(self) -> int:
        return self.mass.shape[0]


def build_mesh(dim: int, n_cells: int, degree: int) -> Mesh:
    """Create a mesh, validating the supported (dim, degree) range."""
    if dim not in (1, 2):
        raise ValueError(f"dim must be 1 or 2, got {dim}")
    if degree not in (1, 2):
        raise ValueError(f"degree must be 1 or 2, got {degree}")
    if n_cells < 2:
        raise ValueError(f"n_cells must be at least 2, got {n_cells}")
    if dim == 2 and degree == 2:
        raise ValueError("quadratic splines are supported in dim 1 only")
    return Mesh(dim=dim, n_cells=n_cells, degree=degree)


def _assemble_1d_linear(n_cells: int):
    n = n_cells - 1
    h = 1.0 / n_cells
    main_m = np.full(n, 2.0 * h / 3.0)
    off_m = np.full(n - 1, h / 6.0)
    mass = np.diag(main_m) + np.diag(off_m, 1) + np.diag(off_m, -1)
    main_s = np.full(n, 2.0 / h)
    off_s = np.full(n - 1, -1.0 / h)
    stiff = np.diag(main_s) + np.diag(off_s, 1) + np.diag(off_s, -1)
    return mass, stiff


def _spline_basis(mesh: Mesh):
    """All clamped quadratic splines on the mesh, boundary ones included."""
    t = mesh.knots()
    n_all = len(t) - 3
    return [BSpline(t, np.eye(n_all)[j], 2) for j in range(n_all)]


def _assemble_1d_spline(mesh: Mesh):
    n_cells = mesh.n_cells
    h = mesh.h
    splines = _spline_basis(mesh)
    n_all = len(splines)
    gx, gw = _GAUSS3
    mass = np.zeros((n_all, n_all))
    stiff = np.zeros((n_all, n_all))
    for c in range(n_cells):
        x = (c + 0.5) * h + 0.5 * h * gx
        w = 0.5 * h * gw
        vals = np.array([s(x) for s in splines])
        ders = np.array([s(x, 1) for s in splines])
        mass += (vals * w) @ vals.T
        stiff += (ders * w) @ ders.T
    # drop the two boundary splines; interior splines keep the standard
    # B-spline normalization
    keep = slice(1, n_all - 1)
    return mass[keep, keep], stiff[keep, keep]


def assemble(mesh: Mesh) -> SpatialPair:
    """Assemble the mass and stiffness Gram matrices of a mesh.

    Element integrals are exact: closed form for hat functions, 3-point
    Gauss per cell for the quartic quadratic-spline integrands. In dim 2
    the matrices are tensorized, M2 = M (x) M and S2 = S (x) M + M (x) S.
    """
    if mesh.degree == 1:
        mass1, stiff1 = _assemble_1d_linear(mesh.n_cells)
    else:
        mass1, stiff1 = _assemble_1d_spline(mesh)
    if mesh.dim == 1:
        return SpatialPair(mesh=mesh, mass=mass1, stiffness=stiff1)
    mass2 = np.kron(mass1, mass1)
    stiff2 = np.kron(stiff1, mass1) + np.kron(mass1, stiff1)
    return SpatialPair(mesh=mesh, mass=mass2, stiffness=stiff2)


def h_norm(coeffs: np.ndarray, pair: SpatialPair) -> float:
    """L2 norm of the function with the given coefficients."""
    v = np.asarray(coeffs, dtype=float)
    return float(np.sqrt(v @ pair.mass @ v))


def v_norm(coeffs: np.ndarray, pair: SpatialPair) -> float:
    """Energy (H^1_0 seminorm) of the function with the given coefficients."""
    v = np.asarray(coeffs, dtype=float)
    return float(np.sqrt(v @ pair.stiffness @ v))


def dual_norm(coeffs: np.ndarray, pair: SpatialPair) -> float:
    """Discrete dual norm sqrt(v' M S^-1 M v).

    This is the norm of the functional w -> (v, w) in H, taken over the
    discrete space equipped with the energy norm.
    """
    v = np.asarray(coeffs, dtype=float)
    if v.shape != (pair.n_dof,):
        raise ValueError(f"expected {pair.n_dof} coefficients, got {v.shape}")
    mv = pair.mass @ v
    return float(np.sqrt(mv @ pair.stiffness_solve(mv)))


def _hat_mode_vector(n_cells: int) -> np.ndarray:
    # integral of sin(pi x) against each hat, closed form
    h = 1.0 / n_cells
    nodes = np.arange(1, n_cells) * h
    return 2.0 * (1.0 - np.cos(np.pi * h)) / (np.pi ** 2 * h) * np.sin(np.pi * nodes)


def _spline_mode_vector(mesh: Mesh) -> np.ndarray:
    splines = _spline_basis(mesh)
    gx, gw = _GAUSS5
    h = mesh.h
    out = np.zeros(len(splines))
    for c in range(mesh.n_cells):
        x = (c + 0.5) * h + 0.5 * h * gx
        w = 0.5 * h * gw
        sx = np.sin(np.pi * x)
        for j, s in enumerate(splines):
            out[j] += np.sum(w * s(x) * sx)
    return out[1:-1]


def mode_load_vector(mesh: Mesh) -> np.ndarray:
    """Inner products of the first Dirichlet eigenmode with the basis.

    Returns b with b_i = (phi_mode, phi_i) in L2, where phi_mode is
    sin(pi x) in dim 1 and sin(pi x) sin(pi y) in dim 2.
    """
    if mesh.degree == 1:
        b1 = _hat_mode_vector(mesh.n_cells)
    else:
        b1 = _spline_mode_vector(mesh)
    if mesh.dim == 1:
        return b1
    return np.kron(b1, b1)
