import numpy as np
import pytest

from conftest import ConstantCoeffs, make_disc
from stpg import solver
from stpg.stochastic import CoefficientModel, default_domain, quadrature


def _sin_hat_integral(t_prev, t_node, t_next):
    """Closed form of int sin(pi t) * hat(t) dt for a temporal hat."""
    total = 0.0
    if t_node > t_prev:  # rising piece
        k = t_node - t_prev
        total += (-k * np.cos(np.pi * t_node) / np.pi
                  + (np.sin(np.pi * t_node) - np.sin(np.pi * t_prev)) / np.pi ** 2) / k
    k = t_next - t_node  # falling piece
    total += (k * np.cos(np.pi * t_node) / np.pi
              + (np.sin(np.pi * t_node) - np.sin(np.pi * t_next)) / np.pi ** 2) / k
    return total


def test_time_weights_match_closed_form():
    grid = solver.TimeGrid.uniform(1.0, 8)
    weights = solver.time_weights(grid, lambda t: np.sin(np.pi * t))
    nodes = grid.nodes
    for j in range(8):
        t_prev = nodes[j - 1] if j > 0 else nodes[0]
        ref = _sin_hat_integral(t_prev, nodes[j], nodes[j + 1])
        assert weights[j] == pytest.approx(ref, abs=1e-12)


def test_time_grid_guards():
    with pytest.raises(ValueError):
        solver.TimeGrid(np.array([0.0, 0.5, 0.5, 1.0]))
    with pytest.raises(ValueError):
        solver.TimeGrid(np.array([0.1, 0.5]))
    grid = solver.TimeGrid.uniform(2.0, 4)
    assert grid.final_time == 2.0
    assert np.allclose(grid.widths, 0.5)


def test_assemble_load_zero_forcing_zero_initial():
    disc = make_disc(n_cells=4, n_steps=4)
    data = solver.mode_problem(ConstantCoeffs(c0=0.0), disc)
    load = solver.assemble_load(data, disc, 0.0)
    assert np.all(load == 0.0)


def test_assemble_load_initial_datum_only():
    disc = make_disc(n_cells=4, n_steps=4)
    u0 = np.arange(1.0, disc.n_dof + 1)
    data = solver.mode_problem(ConstantCoeffs(c0=1.0), disc, u0=u0,
                               g=lambda t: np.zeros_like(np.asarray(t, float)))
    load = solver.assemble_load(data, disc, 0.0)
    n = disc.n_dof
    assert np.allclose(load[:n], disc.pair.mass @ u0, atol=1e-15)
    assert np.all(load[n:] == 0.0)


def test_solve_zero_data_is_zero():
    disc = make_disc(n_cells=4, n_steps=6)
    data = solver.mode_problem(ConstantCoeffs(c0=0.0), disc)
    sol = solver.solve_pathwise(data, disc, 0.0)
    assert np.all(sol.coeffs == 0.0)


def test_scalar_crank_nicolson_by_hand():
    # single spatial dof: M = 1/3, S = 4, step equations become scalar
    disc = make_disc(n_cells=2, n_steps=4)
    data = solver.mode_problem(ConstantCoeffs(), disc)
    sol = solver.solve_pathwise(data, disc, 0.0)
    k = 0.25
    tw = solver.time_weights(disc.grid, data.g)
    b = data.load_vector[0]
    m, s = 1.0 / 3.0, 4.0
    u = 0.0
    for j in range(4):
        rhs = (m - 0.5 * k * s) * u + tw[j] * b
        u = rhs / (m + 0.5 * k * s)
        assert sol.values[j, 0] == pytest.approx(u, rel=1e-14)
    # first step matches the closed form F0 / (1/3 + 2k)
    assert sol.values[0, 0] == pytest.approx(tw[0] * b / (m + 2 * k), rel=1e-14)


@pytest.mark.parametrize("a,n_cells,n_steps", [
    (1.0, 4, 4), (0.3, 8, 8), (5.0, 4, 16),
])
def test_time_stepping_agrees_with_full_system(a, n_cells, n_steps):
    disc = make_disc(n_cells=n_cells, n_steps=n_steps)
    data = solver.mode_problem(ConstantCoeffs(a=a), disc)
    sol = solver.solve_pathwise(data, disc, 0.0)
    full = solver.assemble_full_system(disc, a)
    load = solver.assemble_load(data, disc, 0.0)
    direct = np.linalg.solve(full, load)
    residual = np.linalg.norm(full @ sol.flat() - load) / np.linalg.norm(load)
    assert residual < 1e-10
    gram = solver.build_grams(disc, a, "Y")
    diff = solver.evaluate_norm(sol.flat() - direct, gram)
    scale = solver.evaluate_norm(direct, gram)
    assert diff <= 1e-10 * scale


def test_full_system_block_structure():
    disc = make_disc(n_cells=4, n_steps=3)
    a = 1.7
    mat = solver.assemble_full_system(disc, a)
    n = disc.n_dof
    k = disc.grid.widths[0]
    mass, stiff = disc.pair.mass, disc.pair.stiffness
    diag = mass + 0.5 * k * a * stiff
    sub = -mass + 0.5 * k * a * stiff
    for j in range(3):
        assert np.allclose(mat[j * n:(j + 1) * n, j * n:(j + 1) * n], diag, atol=1e-14)
        if j >= 1:
            assert np.allclose(mat[j * n:(j + 1) * n, (j - 1) * n:j * n], sub, atol=1e-14)
    # strict upper blocks vanish
    assert np.all(mat[:n, n:] == 0.0)


def test_full_system_rejects_degenerate_diffusion():
    disc = make_disc(n_cells=4, n_steps=3)
    with pytest.raises(solver.PathwiseSolveError):
        solver.assemble_full_system(disc, 0.0)


def test_steady_state_consistency():
    # constant-in-time forcing: embedding the steady state reproduces the
    # load away from the initial block
    disc = make_disc(n_cells=8, n_steps=8)
    ones = lambda t: np.ones_like(np.asarray(t, dtype=float))
    data = solver.mode_problem(ConstantCoeffs(), disc, g=ones)
    u_inf = disc.pair.stiffness_solve(data.load_vector)
    embedded = np.tile(u_inf, disc.grid.n_intervals)
    diff = solver.assemble_full_system(disc, 1.0) @ embedded \
        - solver.assemble_load(data, disc, 0.0)
    n = disc.n_dof
    assert np.max(np.abs(diff[n:])) < 1e-14
    assert np.allclose(diff[:n], disc.pair.mass @ u_inf, atol=1e-14)


def test_pathwise_failures_are_controlled():
    disc = make_disc(n_cells=4, n_steps=4)
    model = CoefficientModel(case="b")
    data = solver.mode_problem(model, disc)
    with pytest.raises(solver.PathwiseSolveError):
        solver.solve_pathwise(data, disc, 0.0)  # a(0) = 0
    model_a = CoefficientModel(case="a")
    data_a = solver.mode_problem(model_a, disc)
    with pytest.raises(solver.PathwiseSolveError):
        solver.solve_pathwise(data_a, disc, 0.0)  # a(0) = inf


def test_higher_degree_rejected():
    disc = make_disc(n_cells=4, n_steps=4)
    disc_q1 = solver.Discretization(pair=disc.pair, grid=disc.grid, q=1)
    data = solver.mode_problem(ConstantCoeffs(), disc_q1)
    with pytest.raises(NotImplementedError):
        solver.solve_pathwise(data, disc_q1, 0.0)
    with pytest.raises(NotImplementedError):
        solver.build_grams(disc_q1, 1.0, "Y")


def test_galerkin_orthogonality_on_nested_time_grids():
    disc_c = make_disc(n_cells=8, n_steps=8)
    disc_f = solver.Discretization(pair=disc_c.pair,
                                   grid=solver.TimeGrid.uniform(1.0, 16))
    data_c = solver.mode_problem(ConstantCoeffs(), disc_c)
    data_f = solver.mode_problem(ConstantCoeffs(), disc_f)
    sol_c = solver.solve_pathwise(data_c, disc_c, 0.0)
    n = disc_c.n_dof
    embedded = np.repeat(sol_c.values, 2, axis=0).reshape(-1)
    residual = solver.assemble_load(data_f, disc_f, 0.0) \
        - solver.assemble_full_system(disc_f, 1.0) @ embedded
    # coarse temporal hats expressed in the fine nodal basis
    embed = np.zeros((16 * n, 8 * n))
    for j in range(8):
        embed[2 * j * n:(2 * j + 1) * n, j * n:(j + 1) * n] = np.eye(n)
        if 2 * j + 1 < 16:
            embed[(2 * j + 1) * n:(2 * j + 2) * n, j * n:(j + 1) * n] = 0.5 * np.eye(n)
        if 2 * j - 1 >= 0:
            embed[(2 * j - 1) * n:(2 * j) * n, j * n:(j + 1) * n] = 0.5 * np.eye(n)
    assert np.max(np.abs(embed.T @ residual)) < 1e-12


def test_legendre_project_examples():
    k = 0.3
    coeffs = solver.legendre_project(lambda t: t, (0.0, k), 0)
    assert coeffs[0] == pytest.approx(k / 2, abs=1e-15)
    coeffs = solver.legendre_project(lambda t: 2.5 * np.ones_like(t), (1.0, 1.5), 3)
    assert coeffs[0] == pytest.approx(2.5, abs=1e-13)
    assert np.max(np.abs(coeffs[1:])) < 1e-13
    # degree q+1 Legendre polynomial projects to zero for any q
    for q in (0, 1, 2):
        target = np.polynomial.legendre.Legendre.basis(q + 1)

        def shifted(t, t0=2.0, t1=2.5):
            return target(2 * (np.asarray(t) - t0) / (t1 - t0) - 1)

        coeffs = solver.legendre_project(shifted, (2.0, 2.5), q)
        assert np.max(np.abs(coeffs)) < 1e-13


def test_gram_trial_blocks_and_scaling(rng):
    disc = make_disc(n_cells=4, n_steps=5)
    gram = solver.build_grams(disc, 1.0, "Y")
    n = disc.n_dof
    for i in range(5):
        sl = slice(i * n, (i + 1) * n)
        assert np.allclose(gram[sl, sl], disc.grid.widths[i] * disc.pair.stiffness,
                           atol=1e-15)
    assert np.count_nonzero(gram) == 5 * np.count_nonzero(disc.pair.stiffness)
    a = 3.7
    assert np.allclose(solver.build_grams(disc, a, "Y_omega"), a * gram, atol=1e-14)


@pytest.mark.parametrize("case", ["a", "b", "c", "d"])
@pytest.mark.parametrize("kind", ["Y", "Y_omega", "X_omega_hk", "X_omega", "X"])
def test_grams_positive_definite_across_cases(case, kind):
    disc = make_disc(n_cells=4, n_steps=4)
    model = CoefficientModel(case=case)
    domain = default_domain(case)
    omega = quadrature(domain, 8, avoid=model.singular_points)[0][2]
    gram = solver.build_grams(disc, model.a(omega), kind)
    np.linalg.cholesky(gram)  # raises if not positive definite


def test_gram_unknown_kind_rejected():
    disc = make_disc(n_cells=4, n_steps=4)
    with pytest.raises(ValueError):
        solver.build_grams(disc, 1.0, "Z")


def test_evaluate_norm_basics(rng):
    disc = make_disc(n_cells=4, n_steps=4)
    gram = solver.build_grams(disc, 1.0, "Y")
    assert solver.evaluate_norm(np.zeros(disc.trial_size), gram) == 0.0
    v = rng.standard_normal(disc.trial_size)
    base = solver.evaluate_norm(v, gram)
    assert solver.evaluate_norm(-2.0 * v, gram) == pytest.approx(2 * base, rel=1e-13)
    with pytest.raises(ValueError):
        solver.evaluate_norm(v[:-1], gram)


def test_evaluate_norm_matches_time_quadrature(rng):
    # independent evaluation of int |U(t)|_V^2 dt by Gauss points in time
    disc = make_disc(n_cells=6, n_steps=7)
    values = rng.standard_normal((7, disc.n_dof))
    sol = solver.SpaceTimeSolution(values[:, None, :])
    gram = solver.build_grams(disc, 1.0, "Y")
    via_gram = solver.evaluate_norm(sol, gram)
    gx, gw = np.polynomial.legendre.leggauss(3)
    total = 0.0
    for i in range(7):
        k = disc.grid.widths[i]
        u = values[i]
        energy = u @ disc.pair.stiffness @ u
        total += np.sum(0.5 * k * gw * energy)
    assert via_gram == pytest.approx(np.sqrt(total), rel=1e-10)
    assert solver.trial_energy_norm(sol, disc) == pytest.approx(via_gram, rel=1e-12)


def test_test_gram_matches_independent_quadrature(rng):
    # X_omega gram versus direct quadrature of the weighted test norm
    disc = make_disc(n_cells=5, n_steps=6)
    a = 2.3
    gram = solver.build_grams(disc, a, "X_omega")
    x = rng.standard_normal(disc.test_size)
    nodal = np.vstack([x.reshape(6, -1), np.zeros(disc.n_dof)])
    pair = disc.pair
    dual = pair.mass @ pair.stiffness_solve(pair.mass)
    gx, gw = np.polynomial.legendre.leggauss(4)
    total = float(nodal[0] @ pair.mass @ nodal[0])
    for i in range(6):
        k = disc.grid.widths[i]
        xd = (nodal[i + 1] - nodal[i]) / k
        total += k / a * float(xd @ dual @ xd)
        for g, w in zip(gx, gw):
            s = 0.5 * (g + 1.0)
            xt = (1 - s) * nodal[i] + s * nodal[i + 1]
            total += 0.5 * k * w * a * float(xt @ pair.stiffness @ xt)
    assert solver.evaluate_norm(x, gram) == pytest.approx(np.sqrt(total), rel=1e-10)


def test_projected_test_gram_uses_interval_means(rng):
    disc = make_disc(n_cells=5, n_steps=6)
    a = 0.8
    gram = solver.build_grams(disc, a, "X_omega_hk")
    x = rng.standard_normal(disc.test_size)
    nodal = np.vstack([x.reshape(6, -1), np.zeros(disc.n_dof)])
    pair = disc.pair
    dual = pair.mass @ pair.stiffness_solve(pair.mass)
    total = float(nodal[0] @ pair.mass @ nodal[0])
    for i in range(6):
        k = disc.grid.widths[i]
        xd = (nodal[i + 1] - nodal[i]) / k
        mean = 0.5 * (nodal[i] + nodal[i + 1])
        total += k / a * float(xd @ dual @ xd) + k * a * float(mean @ pair.stiffness @ mean)
    assert solver.evaluate_norm(x, gram) == pytest.approx(np.sqrt(total), rel=1e-10)


def test_energy_bound_samples():
    # weighted energy bound with the computable forcing norm
    from stpg import constants as consts
    disc = make_disc(n_cells=8, n_steps=16)
    k = disc.grid.k_max
    for case, omega in (("a", 0.31), ("b", -0.17), ("c", 0.23), ("d", 0.11)):
        model = CoefficientModel(case=case)
        data = solver.mode_problem(model, disc)
        c_sw = consts.cfl_omega(disc.pair, k, omega, model)
        lhs, rhs, observed = solver.energy_bound_report(data, disc, omega, c_sw)
        assert lhs <= rhs * (1 + 1e-12)
        assert observed <= 1.0 + 1e-12


def test_best_approximation_is_optimal_projection(rng):
    from stpg.oracle import ModeSolution
    disc = make_disc(n_cells=8, n_steps=8)
    mode = ModeSolution.for_dim(1.3, 0.7, 1)
    best = solver.best_approximation(mode, disc)
    data = solver.mode_problem(ConstantCoeffs(a=1.3, c0=0.7), disc)
    sol = solver.solve_pathwise(data, disc, 0.0)
    from stpg.oracle import exact_error
    err_solver, err_best = exact_error(mode, disc, sol)
    assert err_best <= err_solver
    # projection property: perturbing the best approximation in the trial
    # space only increases the distance (Pythagoras in the energy norm)
    gram = solver.build_grams(disc, 1.0, "Y")
    for _ in range(10):
        pert = rng.standard_normal(best.coeffs.shape)
        pert_sol = solver.SpaceTimeSolution(best.coeffs + 0.05 * pert)
        err_pert = exact_error(mode, disc, pert_sol)[0]
        dist = solver.evaluate_norm(pert_sol.flat() - best.flat(), gram)
        expected = np.sqrt(err_best ** 2 + dist ** 2)
        assert err_pert == pytest.approx(expected, rel=1e-9)
