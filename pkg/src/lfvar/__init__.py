"""Lax-Friedrichs solver for periodic scalar conservation laws with a
stochastic-variational layer: backward random-walk cones, discrete action
minimization, exact oracles, and a convergence-study harness."""

from .config import StudyConfig, load_config
from .grid import EVEN, ODD, GridField, MeshSpec, PiecewiseConstant, build_v0, discretize_u0, interpolate_v, locate
from .harness import ErrorTable, fit_rate, run_study
from .model import (
    CflEstimate,
    HamiltonianSpec,
    LagrangianSpec,
    Model,
    cfl_estimate,
    hamiltonian_p,
    legendre,
    make_hamiltonian,
    make_lagrangian,
    make_model,
    verify_assumptions,
)
from .oracle import (
    ExactSolution,
    exact_u_at_regular_point,
    hopf_lax_solution,
    hopf_lax_value,
    riemann_burgers_u,
    riemann_torus_solution,
)
from .scheme import InitialData, RunState, lf_step_u, lf_step_v, run, u_from_v, v_from_u
from .variational import (
    ValueTable,
    action,
    brute_force_infimum,
    characteristic,
    minimizing_field,
    u_bounds,
    value_table,
)
from .walk import (
    Cone,
    ConeVelocityField,
    WalkEnsemble,
    WalkPath,
    dispersion_stats,
    eta_process,
    expectation,
    occupation_probs,
    path_density,
    transition_probs,
)

__version__ = "0.1.0"
