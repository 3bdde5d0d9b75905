"""Convergence studies, rate fitting, and table emission.

A study runs the scheme down a mesh ladder with lambda held fixed
(hyperbolic scaling, lambda = lambda_frac * cfl_limit), measures one
error metric per rung against an exact reference, and fits the rate as
the least-squares slope of log(error) against log(dx).
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass, field as dc_field
from typing import Optional

import numpy as np

from .config import StudyConfig, config_hash
from .errors import ConfigError, DegenerateFit, OracleUnavailable
from .grid import GridField, MeshSpec, PiecewiseConstant, interpolate_v
from .model import Model, cfl_estimate, make_model
from .oracle import (
    ExactSolution,
    characteristics_solution,
    hopf_lax_solution,
    hopf_lax_value,
    hopf_lax_values_batch,
    riemann_torus_solution,
)
from .scheme import InitialData, RunState, run, u_from_v
from .variational import ValueTable, characteristic
from .walk import Cone, ConeVelocityField, WalkEnsemble, dispersion_stats

TWO_PI = 2.0 * np.pi


# ---------------------------------------------------------------------------
# models and data


def build_model(cfg: StudyConfig) -> Model:
    params = {}
    if cfg.model == "quadratic-forced":
        params = {"amplitude": cfg.amplitude, "omega": cfg.omega}
    return make_model(cfg.model, c=cfg.c, h=cfg.h, **params)


@dataclass(frozen=True)
class DataSpec:
    """Initial data plus the exact ingredients oracles need."""

    initial: InitialData
    v0_exact: Optional[callable]
    r_bound: float
    riemann: Optional[tuple] = None  # (u_left, u_right) when applicable


def build_data(cfg: StudyConfig) -> DataSpec:
    a = cfg.initial_amplitude
    if cfg.initial == "cosine":
        u0 = lambda y: -a * np.sin(TWO_PI * np.asarray(y, float))
        v0 = lambda y: a * np.cos(TWO_PI * np.asarray(y, float)) / TWO_PI
        return DataSpec(InitialData(u0=u0, v0_at_0=a / TWO_PI, v0=v0, label="cosine"),
                        v0, max(a, a / TWO_PI))
    if cfg.initial == "sine":
        u0 = lambda y: a * np.cos(TWO_PI * np.asarray(y, float))
        v0 = lambda y: a * np.sin(TWO_PI * np.asarray(y, float)) / TWO_PI
        return DataSpec(InitialData(u0=u0, v0_at_0=0.0, v0=v0, label="sine"),
                        v0, max(a, a / TWO_PI))
    if cfg.initial in ("riemann-shock", "riemann-rarefaction"):
        sgn = 1.0 if cfg.initial == "riemann-shock" else -1.0
        ul, ur = sgn * a, -sgn * a
        u0 = PiecewiseConstant([0.0, 0.5], [ul, ur])

        def v0(y, _ul=ul):
            yr = np.mod(np.asarray(y, float), 1.0)
            return _ul * np.where(yr < 0.5, yr, 1.0 - yr)

        return DataSpec(InitialData(u0=u0, v0_at_0=0.0, v0=v0, label=cfg.initial),
                        v0, max(a, a / 2.0), riemann=(ul, ur))
    if cfg.initial == "zero":
        z = lambda y: np.zeros_like(np.asarray(y, float))
        return DataSpec(InitialData(u0=z, v0_at_0=0.0, v0=z, label="zero"), z, 0.0)
    raise ConfigError(f"unknown initial data {cfg.initial!r}", key="initial")


def build_oracle(cfg: StudyConfig, model: Model, data: DataSpec, slope_bound: float) -> ExactSolution:
    if data.riemann is not None:
        if cfg.model != "burgers":
            raise OracleUnavailable("Riemann references exist for the quadratic flux only")
        return riemann_torus_solution(*data.riemann, c=cfg.c)
    if cfg.model in ("burgers", "quartic"):
        return hopf_lax_solution(data.v0_exact, model, slope_bound)
    # x,t-dependent flux: short-time characteristics
    return characteristics_solution(data.initial.u0, data.v0_exact, model)


def mesh_for(cfg: StudyConfig, N: int, cfl_limit: float) -> MeshSpec:
    lam_target = cfg.lambda_frac * cfl_limit
    K = int(math.ceil(N / lam_target - 1e-12))
    mesh = MeshSpec(N, K)
    if not cfg.lambda0 <= mesh.lam < cfl_limit:
        raise ConfigError(
            f"lambda {mesh.lam:.4g} leaves the scaling band [{cfg.lambda0}, {cfl_limit:.4g})",
            key="lambda0")
    return mesh


# ---------------------------------------------------------------------------
# tables and rate fits


@dataclass(frozen=True)
class ErrorRow:
    N: int
    dx: float
    error: float
    runtime: float


@dataclass
class ErrorTable:
    kind: str
    rows: list = dc_field(default_factory=list)
    metadata: dict = dc_field(default_factory=dict)
    rate: Optional[float] = None
    rate_stderr: Optional[float] = None
    note: str = ""

    def errors(self):
        return np.array([r.error for r in self.rows])

    def dxs(self):
        return np.array([r.dx for r in self.rows])

    def to_csv(self, path, include_runtime=False):
        meta_keys = sorted(self.metadata)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
            header = ["N", "dx", "error"]
            if include_runtime:
                header.append("runtime_s")
            header += meta_keys + ["rate", "rate_stderr", "note"]
            writer.writerow(header)
            for row in self.rows:
                out = [row.N, repr(row.dx), repr(row.error)]
                if include_runtime:
                    out.append(repr(row.runtime))
                out += [str(self.metadata[k]) for k in meta_keys]
                out += ["" if self.rate is None else repr(self.rate),
                        "" if self.rate_stderr is None else repr(self.rate_stderr),
                        self.note]
                writer.writerow(out)


@dataclass(frozen=True)
class RateFit:
    slope: float
    stderr: float


def fit_rate(table: ErrorTable) -> RateFit:
    """Least-squares slope of log(error) against log(dx), with its standard
    error.  Zero errors cannot be fitted and raise DegenerateFit."""
    errors, dxs = table.errors(), table.dxs()
    if len(errors) < 3:
        raise ValueError("rate fitting needs at least 3 rows")
    if np.any(errors <= 0.0):
        raise DegenerateFit("exact")
    lx, ly = np.log(dxs), np.log(errors)
    A = np.column_stack([lx, np.ones_like(lx)])
    coef, res, *_ = np.linalg.lstsq(A, ly, rcond=None)
    slope = float(coef[0])
    n = len(lx)
    if n > 2:
        ss = float(res[0]) if res.size else float(np.sum((ly - A @ coef) ** 2))
        var = ss / (n - 2) / float(np.sum((lx - lx.mean()) ** 2))
        stderr = math.sqrt(max(var, 0.0))
    else:
        stderr = float("inf")
    return RateFit(slope=slope, stderr=stderr)


# ---------------------------------------------------------------------------
# the study driver


def _v_error_metric(cfg, model, data, sol, state: RunState, mesh: MeshSpec) -> float:
    xs = np.linspace(0.0, 1.0, cfg.sample_nx, endpoint=False)
    ts = np.linspace(0.0, cfg.T, cfg.sample_nt + 1)
    worst = 0.0
    slope_bound = state.cfl.slope_bound
    for t in ts:
        approx = interpolate_v(mesh, state.v_history, xs, np.full_like(xs, t))
        if sol.kind == "hopf-lax":
            exact = (hopf_lax_values_batch(data.v0_exact, model, xs, float(t), slope_bound)
                     if t > 0 else np.asarray(data.v0_exact(xs), float))
        else:
            exact = np.asarray(sol.v(xs, float(t)), dtype=float)
        worst = max(worst, float(np.max(np.abs(approx - exact))))
    # lattice nodes reproduce the raw table values; take their maxima too
    for k, f in enumerate(state.v_history):
        t = mesh.t(k)
        if t > cfg.T + 1e-12:
            break
        nxs = f.xs()
        if sol.kind == "hopf-lax":
            exact = (hopf_lax_values_batch(data.v0_exact, model, nxs, float(t), slope_bound)
                     if t > 0 else np.asarray(data.v0_exact(nxs), float))
        else:
            exact = np.asarray(sol.v(nxs, float(t)), dtype=float)
        worst = max(worst, float(np.max(np.abs(f.values - exact))))
    return worst


def _u_step_values(field: GridField, mesh: MeshSpec, xs):
    """Step-function evaluation of an even field: the value of the cell
    [x_m - dx, x_m + dx) containing each x."""
    p = field.m0
    m = p + 2 * np.round((np.mod(xs, 1.0) / mesh.dx - p) / 2.0).astype(int)
    return field.value(m)


def _torus_distance(a, b):
    d = np.abs(np.mod(a - b, 1.0))
    return np.minimum(d, 1.0 - d)


def _u_pointwise_metric(cfg, sol, state: RunState, mesh: MeshSpec, exclusion: float) -> float:
    k_star = int(round(cfg.T / mesh.dt))
    k_star = min(k_star, len(state.u_history) - 1)
    t_star = mesh.t(k_star)
    xs = np.linspace(0.0, 1.0, cfg.u_samples, endpoint=False)
    keep = np.ones_like(xs, dtype=bool)
    for locus in (sol.shock_loci(t_star) if sol.shock_loci else []):
        keep &= _torus_distance(xs, locus) >= exclusion
    xs = xs[keep]
    approx = _u_step_values(state.u_history[k_star], mesh, xs)
    if sol.kind == "riemann":
        exact = sol.u(xs, t_star)
    elif sol.kind == "characteristics":
        exact = np.asarray(sol.u(xs, t_star), dtype=float)
    else:
        exact = np.array([sol.u(float(x), t_star) for x in xs])
    return float(np.max(np.abs(approx - exact)))


def characteristic_origin(mesh: MeshSpec, x_q: float, t_q: float):
    """Odd-grid node nearest the query point (within dx and dt of it)."""
    l1 = max(1, int(math.floor(t_q / mesh.dt + 1e-12)))
    parity = (l1 + 1) % 2  # origin m parity so that m + l1 is odd
    m_near = int(round((x_q / mesh.dx - parity) / 2.0)) * 2 + parity
    return m_near, l1


def _characteristic_metric(cfg, model, data, state: RunState, mesh: MeshSpec) -> float:
    # The exact straight line is anchored at the walk's own origin node so
    # the metric measures path-shape convergence, not the lattice snap of
    # the origin toward the query point.
    m_near, l1 = characteristic_origin(mesh, *cfg.point)
    table = ValueTable(mesh=mesh, model=model, fields=tuple(state.v_history[: l1 + 1]))
    char = characteristic(table, (m_near, l1), mode=cfg.walk_mode,
                          n_samples=cfg.n_samples, seed=cfg.seed,
                          slope_cap=state.cfl.slope_bound)
    x_o, t_o = float(mesh.x(m_near)), float(mesh.t(l1))
    ref = hopf_lax_value(data.v0_exact, model, x_o, t_o, state.cfl.slope_bound)
    line = ref.minimizer(char.times, x_o, t_o)
    return float(np.max(np.abs(char.expected_xs - line)))


def _dispersion_metric(cfg, state: RunState, mesh: MeshSpec, N: int) -> float:
    depth = min(cfg.depth, 2 * mesh.K)
    parity = (depth + 1) % 2
    origin_m = mesh.N + ((mesh.N + parity) % 2)  # node near x = 1/2 with m + depth odd
    if (origin_m + depth) % 2 != 1:
        origin_m += 1
    cone = Cone(mesh, origin_m, depth)
    if cfg.xi_field == "zero":
        fieldv = ConeVelocityField.zeros(cone)
    else:
        rng = np.random.default_rng(cfg.seed + N)
        fieldv = ConeVelocityField.random(cone, rng)
    mode = cfg.walk_mode if cfg.walk_mode != "recursion" else "enumerated"
    stats = dispersion_stats(cone, fieldv, mode=mode,
                             n_samples=cfg.n_samples, seed=cfg.seed, check=False)
    return float(np.max(stats.mean_sq_gap - stats.bound))


def _equivalence_metric(state: RunState, mesh: MeshSpec) -> float:
    worst = 0.0
    for uf, vf in zip(state.u_history, state.v_history):
        worst = max(worst, float(np.max(np.abs(u_from_v(vf, mesh).values - uf.values))))
    return worst


def run_study(cfg: StudyConfig) -> ErrorTable:
    """Run the configured study down the mesh ladder and fit the rate."""
    model = build_model(cfg)
    data = build_data(cfg)
    r = cfg.r if cfg.r is not None else max(data.r_bound, 1e-6)
    cfl = cfl_estimate(model.hamiltonian, (cfg.c, cfg.c), r, cfg.T)
    needs_oracle = cfg.study in ("v-error", "u-pointwise", "characteristic")
    sol = build_oracle(cfg, model, data, cfl.slope_bound) if needs_oracle else None

    scheme = {"v-error": "v", "u-pointwise": "u", "characteristic": "v",
              "dispersion": "v", "equivalence": "both"}[cfg.study]
    exclusion = cfg.exclusion_radius
    if exclusion is None:
        exclusion = 10.0 / (2.0 * min(cfg.mesh_ladder))

    table = ErrorTable(kind=cfg.study)
    for N in cfg.mesh_ladder:
        start = time.perf_counter()
        mesh = mesh_for(cfg, N, cfl.cfl_limit)
        state = run(model, mesh, data.initial, cfg.T, scheme=scheme, cfl=cfl)
        if cfg.study == "v-error":
            err = _v_error_metric(cfg, model, data, sol, state, mesh)
        elif cfg.study == "u-pointwise":
            err = _u_pointwise_metric(cfg, sol, state, mesh, exclusion)
        elif cfg.study == "characteristic":
            err = _characteristic_metric(cfg, model, data, state, mesh)
        elif cfg.study == "dispersion":
            err = _dispersion_metric(cfg, state, mesh, N)
        else:
            err = _equivalence_metric(state, mesh)
        table.rows.append(ErrorRow(N=N, dx=mesh.dx, error=err,
                                   runtime=time.perf_counter() - start))

    table.metadata = {
        "study": cfg.study,
        "model": cfg.model,
        "amplitude": repr(cfg.amplitude),
        "omega": repr(cfg.omega),
        "c": repr(cfg.c),
        "h": repr(cfg.h),
        "initial": cfg.initial,
        "initial_amplitude": repr(cfg.initial_amplitude),
        "lambda_frac": repr(cfg.lambda_frac),
        "T": repr(cfg.T),
        "r": repr(r),
        "seed": cfg.seed,
        "walk_mode": cfg.walk_mode,
        "config_hash": config_hash(cfg),
    }
    try:
        fit = fit_rate(table)
        table.rate, table.rate_stderr = fit.slope, fit.stderr
    except DegenerateFit:
        table.note = "exact"
    except ValueError:
        table.note = "too few rows for a rate"
    return table
