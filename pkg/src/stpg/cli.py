"""Experiment driver with CSV reports.

Subcommands reproduce the stock experiments at desk scale:

* ``moments``      quadrature ladders of L^p estimates of the pathwise
  solution norms for the named coefficient cases, with a mechanical
  convergence classification per moment order
* ``convergence``  mean energy-norm error against the exact mode
  solution on the ladder h = 2^-j, k = 2^-2j
* ``infsup``       computed inf-sup and continuity constants next to
  the CFL constants and the closed-form bounds
* ``solve``        one pathwise solve dumped as interval-indexed nodal
  values

Every report is a CSV file with a fixed header, floats printed with 17
significant digits, and content that is byte-identical across reruns
and across worker counts.
"""

import argparse
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import constants as consts
from . import fem, oracle, solver, stochastic

__all__ = [
    "ExperimentConfig",
    "run_moments",
    "run_convergence",
    "run_infsup",
    "run_solve",
    "main",
]

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NUMERICAL = 2
EXIT_RESOURCE = 3

MOMENTS_HEADER = ["case", "N", "p", "estimate", "flagged"]
CONVERGENCE_HEADER = ["case", "j", "h", "k", "n_quad", "mean_error", "observed_rate"]
INFSUP_HEADER = ["case", "n_cells", "n_steps", "omega", "a_omega", "sigma_min",
                 "sigma_max", "c_S", "c_S_omega", "cB_theory", "CB_theory"]
SOLVE_HEADER = ["interval", "t", "dof", "value"]


class ResourceCapError(RuntimeError):
    """A requested computation exceeds the configured size cap."""


@dataclass
class ExperimentConfig:
    """Resolved experiment parameters; fully determines the output."""

    subcommand: str
    case: str = "a"
    dim: int = 2
    degree: int = 1
    n_cells: tuple = (8,)
    n_steps: tuple = (32,)
    j_min: int = 2
    j_max: int = 5
    p_values: tuple = (1.0, 2.0)
    quad_ladder: tuple = (8, 16, 32, 64, 128, 256)
    seed: int = 0
    omega: float = 0.25
    jobs: int = 0
    out: str = ""
    max_dofs: int = consts.DEFAULT_DOF_CAP

    def worker_count(self) -> int:
        if self.jobs > 0:
            return self.jobs
        return os.cpu_count() or 1


def _parallel_map(fn, items, jobs: int):
    """Ordered map over work items; results are independent of jobs."""
    items = list(items)
    if jobs <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items))


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, str):
        return value
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    return format(float(value), ".17g")


def write_csv(path: str, header, rows, trailer=()):
    with open(path, "w", encoding="ascii", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")
        for line in trailer:
            fh.write("# " + line + "\n")


def _setup(case: str, seed: int):
    model = stochastic.CoefficientModel(case=case)
    domain = stochastic.default_domain(case, seed=seed)
    return model, domain


def _discretization(dim: int, degree: int, n_cells: int, n_steps: int):
    mesh = fem.build_mesh(dim, n_cells, degree)
    pair = fem.assemble(mesh)
    grid = solver.TimeGrid.uniform(1.0, n_steps)
    return solver.Discretization(pair=pair, grid=grid)


def scaled_solution_norm(data, disc, omega: float) -> float:
    """Pathwise indicator a(w)^(-1/2) ||U||_Y tracked by the moment ladders.

    The plain energy norm of the solution stays bounded when the
    coercivity degenerates, because the smooth mode forcing is not
    amplified by 1/a. Scaling by a^(-1/2) restores the sensitivity of
    the estimates to the coercivity law, which is what the moment
    experiments are designed to expose; flagged (failed) paths come
    back as nan.
    """
    try:
        a = data.coeffs.a(omega)
        sol = solver.solve_pathwise(data, disc, omega)
    except solver.PathwiseSolveError:
        return math.nan
    return solver.trial_energy_norm(sol, disc) / math.sqrt(a)


def run_moments(config: ExperimentConfig):
    """Moment-ladder experiment; returns (rows, classifications)."""
    model, domain = _setup(config.case, config.seed)
    if config.case not in ("a", "b", "c", "d"):
        raise ValueError(f"moments experiment needs a named case, got {config.case!r}")
    if len(config.quad_ladder) < 4:
        raise ValueError("quadrature ladder needs at least 4 sizes")
    disc = _discretization(config.dim, config.degree, config.n_cells[0],
                           config.n_steps[0])
    if disc.n_dof > config.max_dofs:
        raise ResourceCapError(f"spatial size {disc.n_dof} exceeds cap")
    data = solver.mode_problem(model, disc)

    estimates = {p: [] for p in config.p_values}
    flags = {p: [] for p in config.p_values}
    for n_quad in config.quad_ladder:
        nodes, weights = stochastic.quadrature(domain, n_quad,
                                               avoid=model.singular_points)
        values = _parallel_map(lambda w: scaled_solution_norm(data, disc, w),
                               nodes, config.worker_count())
        for p in config.p_values:
            est, flagged = stochastic.lp_norm(p, values, weights)
            estimates[p].append(est)
            flags[p].append(flagged)

    rows = []
    classifications = {}
    for p in config.p_values:
        for n_quad, est, flagged in zip(config.quad_ladder, estimates[p], flags[p]):
            rows.append((config.case, n_quad, p, est, flagged))
        classifications[p] = stochastic.classify_trend(estimates[p])
    trailer = [f"classification,p={_fmt(p)},{classifications[p]}"
               for p in config.p_values]
    return rows, classifications, trailer


def _pathwise_mode_error(model, disc, data, omega: float) -> float:
    a = model.a(omega)
    c0 = model.c0(omega)
    if not (math.isfinite(a) and a > 0 and math.isfinite(c0)):
        return math.nan
    try:
        sol = solver.solve_pathwise(data, disc, omega)
    except solver.PathwiseSolveError:
        return math.nan
    mode = oracle.ModeSolution.for_dim(a, c0, disc.pair.mesh.dim)
    err, _ = oracle.exact_error(mode, disc, sol)
    return err


def run_convergence(config: ExperimentConfig):
    """Mean-error convergence table over the ladder h = 2^-j, k = 2^-2j."""
    model, domain = _setup(config.case, config.seed)
    if not 2 <= config.j_min <= config.j_max <= 7:
        raise ValueError("j range must satisfy 2 <= j_min <= j_max <= 7")
    n_quad = config.quad_ladder[0]
    nodes, weights = stochastic.quadrature(domain, n_quad,
                                           avoid=model.singular_points)
    rows = []
    truncated = False
    prev = None
    for j in range(config.j_min, config.j_max + 1):
        n_cells = 2 ** j
        n_steps = 4 ** j
        disc = _discretization(config.dim, config.degree, n_cells, n_steps)
        if disc.n_dof > config.max_dofs:
            truncated = True
            break
        data = solver.mode_problem(model, disc)
        errors = _parallel_map(
            lambda w: _pathwise_mode_error(model, disc, data, w),
            nodes, config.worker_count())
        errors = np.asarray(errors)
        mean_error = float(np.sum(weights * errors)) if np.all(np.isfinite(errors)) \
            else math.nan
        h = disc.pair.mesh.h
        k = disc.grid.k_max
        if prev is None:
            rate = math.nan
        else:
            rate = math.log(prev[1] / mean_error) / math.log(prev[0] / h)
        rows.append((config.case, j, h, k, n_quad, mean_error, rate))
        prev = (h, mean_error)
    trailer = ["truncated,resource cap exceeded"] if truncated else []
    return rows, truncated, trailer


def run_infsup(config: ExperimentConfig):
    """Stability-constant grid over (n_cells, n_steps, parameter node)."""
    model, domain = _setup(config.case, config.seed)
    n_quad = config.quad_ladder[0]
    nodes, _ = stochastic.quadrature(domain, n_quad, avoid=model.singular_points)
    rows = []
    for n_cells in config.n_cells:
        for n_steps in config.n_steps:
            disc = _discretization(config.dim, config.degree, n_cells, n_steps)
            if disc.trial_size > config.max_dofs:
                raise ResourceCapError(
                    f"trial size {disc.trial_size} exceeds cap {config.max_dofs}")
            k = disc.grid.k_max
            c_s = consts.cfl_constant(disc.pair, k)
            for omega in nodes:
                a = model.a(omega)
                if not (math.isfinite(a) and a > 0):
                    rows.append((config.case, n_cells, n_steps, omega, a,
                                 math.nan, math.nan, c_s, math.nan,
                                 math.nan, math.nan))
                    continue
                bilinear = solver.assemble_full_system(disc, a)
                gram_trial = solver.build_grams(disc, a, "Y_omega")
                gram_test = solver.build_grams(disc, a, "X_omega_hk")
                sig_min, sig_max = consts.discrete_infsup(
                    bilinear, gram_trial, gram_test, dof_cap=config.max_dofs)
                c_s_omega = consts.cfl_omega(disc.pair, k, omega, model)
                bounds = consts.theoretical_constants(a, a)
                rows.append((config.case, n_cells, n_steps, omega, a,
                             sig_min, sig_max, c_s, c_s_omega,
                             bounds.c_b_bound, bounds.C_b_bound))
    return rows


def run_solve(config: ExperimentConfig):
    """One pathwise solve, dumped as interval-indexed nodal values."""
    model, _ = _setup(config.case, config.seed)
    disc = _discretization(config.dim, config.degree, config.n_cells[0],
                           config.n_steps[0])
    if disc.n_dof > config.max_dofs:
        raise ResourceCapError(f"spatial size {disc.n_dof} exceeds cap")
    data = solver.mode_problem(model, disc)
    sol = solver.solve_pathwise(data, disc, config.omega)
    rows = []
    for i in range(disc.grid.n_intervals):
        t_right = disc.grid.nodes[i + 1]
        for dof in range(disc.n_dof):
            rows.append((i + 1, t_right, dof, sol.values[i, dof]))
    return rows


def _int_list(text: str):
    return tuple(int(part) for part in text.split(","))


def _float_list(text: str):
    return tuple(float(part) for part in text.split(","))


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> _Parser:
    parser = _Parser(prog="stpg", description=__doc__,
                     formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = parser.add_subparsers(dest="subcommand", required=True)
    defaults = {
        "moments": dict(case="a", dim=2, cells="8", steps="32"),
        "convergence": dict(case="lognormal", dim=1, cells="8", steps="32"),
        "infsup": dict(case="a", dim=1, cells="4,8", steps="4,16"),
        "solve": dict(case="constant", dim=1, cells="8", steps="32"),
    }
    for name in ("moments", "convergence", "infsup", "solve"):
        cmd = sub.add_parser(name)
        d = defaults[name]
        cmd.add_argument("--case", default=d["case"],
                         help="coefficient case: a, b, c, d, lognormal, constant, zero")
        cmd.add_argument("--dim", type=int, default=d["dim"], choices=(1, 2))
        cmd.add_argument("--degree", type=int, default=1, choices=(1, 2))
        cmd.add_argument("--cells", type=_int_list, default=_int_list(d["cells"]),
                         help="spatial cells per axis (comma list for infsup grids)")
        cmd.add_argument("--steps", type=_int_list, default=_int_list(d["steps"]),
                         help="time steps (comma list for infsup grids)")
        cmd.add_argument("--j-min", type=int, default=2)
        cmd.add_argument("--j-max", type=int, default=5)
        cmd.add_argument("--p", type=_float_list, default=(1.0, 2.0),
                         help="comma list of moment orders")
        cmd.add_argument("--n-quad-ladder", type=_int_list,
                         default=(8, 16, 32, 64, 128, 256),
                         help="quadrature sizes; single value for a fixed rule")
        cmd.add_argument("--seed", type=int, default=0)
        cmd.add_argument("--omega", type=float, default=0.25,
                         help="parameter value for single-path solves")
        cmd.add_argument("--jobs", type=int, default=0,
                         help="worker threads, 0 = available cores")
        cmd.add_argument("--max-dofs", type=int, default=consts.DEFAULT_DOF_CAP)
        cmd.add_argument("--out", required=True, help="output CSV path")
    return parser


def config_from_args(args) -> ExperimentConfig:
    return ExperimentConfig(
        subcommand=args.subcommand,
        case=args.case,
        dim=args.dim,
        degree=args.degree,
        n_cells=args.cells,
        n_steps=args.steps,
        j_min=args.j_min,
        j_max=args.j_max,
        p_values=args.p,
        quad_ladder=args.n_quad_ladder,
        seed=args.seed,
        omega=args.omega,
        jobs=args.jobs,
        out=args.out,
        max_dofs=args.max_dofs,
    )


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    config = config_from_args(args)
    try:
        if config.subcommand == "moments":
            rows, _, trailer = run_moments(config)
            write_csv(config.out, MOMENTS_HEADER, rows, trailer)
        elif config.subcommand == "convergence":
            rows, truncated, trailer = run_convergence(config)
            write_csv(config.out, CONVERGENCE_HEADER, rows, trailer)
            if truncated:
                return EXIT_RESOURCE
        elif config.subcommand == "infsup":
            rows = run_infsup(config)
            write_csv(config.out, INFSUP_HEADER, rows)
        else:
            rows = run_solve(config)
            write_csv(config.out, SOLVE_HEADER, rows)
    except ValueError as exc:
        print(f"stpg: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ResourceCapError as exc:
        print(f"stpg: resource cap: {exc}", file=sys.stderr)
        return EXIT_RESOURCE
    except (solver.PathwiseSolveError, np.linalg.LinAlgError) as exc:
        print(f"stpg: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
