"""Orchestration: build a problem from a RunConfig, march it to t_final,
and sample results for CSV emission."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .boundary import InflowData
from .config import (
    RunConfig,
    make_g_function,
    make_v_function,
    make_x_function,
)
from .core import (
    KineticState,
    MaterialCoefficients,
    Mesh1D,
    VelocityQuadrature,
    field_values,
    gauss_rule,
    project_initial,
)
from .dg_ops import DGOperatorSet, assemble_operators, velocity_average
from .imex import source_weak_vector, step, tableau_for_order
from .schur import prepare
from .stability import cfl_dt, energy, theorem_stable_dt


@dataclass
class Problem:
    """Assembled ingredients of one run."""

    config: RunConfig
    mesh: Mesh1D
    quad: VelocityQuadrature
    coefficients: MaterialCoefficients
    ops: DGOperatorSet
    inflow: InflowData | None
    degree: int

    def initial_state(self) -> KineticState:
        rho0 = make_x_function(self.config.initial_rho)
        g0 = make_g_function(self.config.initial_g)
        return project_initial(rho0, g0, self.mesh, self.degree, self.quad)


def build_problem(config: RunConfig) -> Problem:
    if config.segments is not None:
        mesh = Mesh1D.from_segments(config.segments, config.boundary)
    else:
        mesh = Mesh1D.uniform(config.x_left, config.x_right, config.n,
                              config.boundary)
    quad = (VelocityQuadrature.slab() if config.model == "slab16"
            else VelocityQuadrature.telegraph())
    coefficients = MaterialCoefficients(
        sigma_s=make_x_function(config.sigma_s),
        sigma_a=make_x_function(config.sigma_a),
        source=make_x_function(config.source),
        epsilon=config.epsilon,
        sigma_m=config.sigma_m,
    )
    degree = config.scheme - 1
    ops = assemble_operators(mesh, degree, coefficients)
    inflow = None
    if config.boundary == "inflow":
        inflow = InflowData(f_left=make_v_function(config.f_left),
                            f_right=make_v_function(config.f_right),
                            penalty=config.penalty)
    return Problem(config, mesh, quad, coefficients, ops, inflow, degree)


def choose_dt(problem: Problem) -> float:
    cfg = problem.config
    if cfg.dt_policy == "fixed":
        return cfg.dt
    return cfl_dt(cfg.scheme, cfg.epsilon, problem.mesh.h_min, cfg.boundary)


@dataclass
class RunResult:
    problem: Problem
    state: KineticState
    dt: float
    n_steps: int
    energies: np.ndarray | None = None       # (n_steps + 1,) when recorded
    equilibrium: np.ndarray | None = None    # per-step residuals when recorded


def run(config: RunConfig, record_energy: bool = False, mu: float = 0.0,
        record_equilibrium: bool = False,
        state: KineticState | None = None) -> RunResult:
    """March the configured problem from t=0 to t_final with uniform steps."""
    from .imex import local_equilibrium_residual

    problem = build_problem(config)
    tableau = tableau_for_order(config.scheme)
    dt_target = choose_dt(problem)
    n_steps = max(1, int(np.ceil(config.t_final / dt_target - 1e-12)))
    dt = config.t_final / n_steps

    schur = prepare(tableau.implicit_diagonal * dt, config.epsilon,
                    problem.ops, problem.quad)
    src = source_weak_vector(problem.coefficients, problem.ops)
    if state is None:
        state = problem.initial_state()

    energies = [] if record_energy else None
    resid = [] if record_equilibrium else None
    if record_energy:
        energies.append(energy(state, mu, dt, problem.ops, problem.quad,
                               config.epsilon))
    for _ in range(n_steps):
        state = step(state, dt, tableau, problem.ops, problem.quad,
                     problem.coefficients, problem.inflow, schur,
                     source_weak=src)
        if record_energy:
            energies.append(energy(state, mu, dt, problem.ops, problem.quad,
                                   config.epsilon))
        if record_equilibrium:
            resid.append(local_equilibrium_residual(
                state, problem.ops, problem.quad, problem.coefficients,
                problem.inflow))

    return RunResult(problem, state, dt, n_steps,
                     None if energies is None else np.asarray(energies),
                     None if resid is None else np.asarray(resid))


def sample_solution(result: RunResult, n_points: int | None = None):
    """Sample (x, rho, j) at Gauss points of every cell; j = <v g>_h."""
    problem = result.problem
    deg = problem.degree
    npts = n_points if n_points is not None else deg + 1
    xi, _ = gauss_rule(npts)
    x = problem.mesh.cell_points(xi).ravel()
    rho = field_values(result.state.rho, problem.mesh, deg, xi).ravel()
    j_field = velocity_average(
        problem.quad.nodes[:, None] * result.state.g, problem.quad)
    j = field_values(j_field, problem.mesh, deg, xi).ravel()
    return x, rho, j


def evaluate_rho_at(result: RunResult, x: np.ndarray) -> np.ndarray:
    """Evaluate the DG density at arbitrary points (for reference comparisons)."""
    from .core import legendre_vals

    problem = result.problem
    mesh, deg = problem.mesh, problem.degree
    d = deg + 1
    x = np.asarray(x, dtype=float)
    idx = np.clip(np.searchsorted(mesh.edges, x, side="right") - 1,
                  0, mesh.n_cells - 1)
    centers = mesh.centers[idx]
    halfw = 0.5 * mesh.widths[idx]
    xi = (x - centers) / halfw
    phi = legendre_vals(xi, deg)
    coefs = result.state.rho.reshape(mesh.n_cells, d)
    return np.einsum("pd,pd->p", coefs[idx], phi)


def evaluate_j_at(result: RunResult, x: np.ndarray) -> np.ndarray:
    """Evaluate the current <v g>_h at arbitrary points."""
    from .core import legendre_vals

    problem = result.problem
    mesh, deg = problem.mesh, problem.degree
    d = deg + 1
    j_field = velocity_average(
        problem.quad.nodes[:, None] * result.state.g, problem.quad)
    x = np.asarray(x, dtype=float)
    idx = np.clip(np.searchsorted(mesh.edges, x, side="right") - 1,
                  0, mesh.n_cells - 1)
    xi = (x - mesh.centers[idx]) / (0.5 * mesh.widths[idx])
    phi = legendre_vals(xi, deg)
    coefs = j_field.reshape(mesh.n_cells, d)
    return np.einsum("pd,pd->p", coefs[idx], phi)


def energy_monitor_dt(problem: Problem) -> float:
    """0.99 x the energy-theorem bound (first order scheme), or the CFL dt
    when the bound is unconditional."""
    cfg = problem.config
    sigma_m = (cfg.sigma_m if cfg.sigma_m is not None
               else problem.ops.sigma_m_sampled)
    bound = theorem_stable_dt(cfg.epsilon, sigma_m, problem.mesh.h_min,
                              problem.quad.v_inf)
    if np.isinf(bound):
        return cfl_dt(1, cfg.epsilon, problem.mesh.h_min, cfg.boundary)
    return 0.99 * bound
