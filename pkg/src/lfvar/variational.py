"""Discrete action functionals, value tables, and minimizing walks.

The value of the potential scheme at an odd-grid node equals the infimum,
over velocity fields on the node's backward cone, of the expected running
cost plus initial potential (plus the offset term h*t).  The infimum is
attained at the nodewise slope field xi* = H_p(x, t_{k-1}, c + D_x v) and
the value table solves the same difference equation as the direct scheme,
so both are computed with identical arithmetic.  An exhaustive grid
minimizer over small cones provides the independent cross-check.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CflViolation, DepthTooLarge, TooLarge
from .grid import GridField, MeshSpec
from .model import Model, hamiltonian_p, lagrangian_c
from .scheme import _odd_neighbors, lf_step_v, u_from_v
from .walk import (
    ENUM_DEPTH_MAX,
    Cone,
    ConeVelocityField,
    _enumerate_chunks,
    _eta_matrix,
    _sample_paths,
    occupation_probs,
    transition_probs,
)

BRUTE_NODES_MAX = 6


# ---------------------------------------------------------------------------
# action functional


@dataclass(frozen=True)
class ActionEvaluation:
    origin: tuple
    value: float
    stderr: float
    mode: str
    n_paths: int

    def __float__(self):
        return self.value


def _stage_costs(cone: Cone, field: ConeVelocityField, model: Model):
    """Per-level arrays of L^c(x_m, t_{k-1}, xi_m^k) * dt over cone slots."""
    mesh = cone.mesh
    costs = [None]
    for k in range(1, cone.depth + 1):
        xs = mesh.x(cone.level_ms(k))
        costs.append(lagrangian_c(model, xs, mesh.t(k - 1), field.level(k)) * mesh.dt)
    return costs


def _path_action_values(cone, field, model, v0_field, pos):
    """Action integrand per path for a (n, depth+1) position matrix."""
    mesh = cone.mesh
    vals = np.zeros(pos.shape[0])
    for k in range(1, cone.depth + 1):
        base = cone.origin_m - (cone.depth - k)
        slots = (pos[:, k] - base) // 2
        xi = field.at_slots(k, slots)
        vals += lagrangian_c(model, mesh.x(pos[:, k]), mesh.t(k - 1), xi) * mesh.dt
    vals += v0_field.value(pos[:, 0])
    return vals


def action(field: ConeVelocityField, model: Model, v0_field: GridField,
           mode: str = "enumerated", n_samples: Optional[int] = None,
           seed: Optional[int] = None) -> ActionEvaluation:
    """Expected running cost plus initial potential plus h * t_origin.

    Modes: "enumerated" (exact weighted sum over all paths), "sampled"
    (Monte Carlo with standard error), "recursion" (exact, via the
    occupation probabilities; the integrand is a per-level sum so the
    recursion loses nothing).
    """
    cone = field.cone
    mesh = cone.mesh
    offset = model.h * mesh.t(cone.depth)
    origin = (cone.origin_m, cone.origin_k)
    if mode == "recursion":
        probs = occupation_probs(cone, field)
        costs = _stage_costs(cone, field, model)
        total = sum(float(probs[k] @ costs[k]) for k in range(1, cone.depth + 1))
        total += float(probs[0] @ v0_field.value(cone.level_ms(0)))
        return ActionEvaluation(origin, total + offset, 0.0, "recursion", 1 << cone.depth)
    if mode == "enumerated":
        if cone.depth > ENUM_DEPTH_MAX:
            raise DepthTooLarge(f"depth {cone.depth} exceeds enumeration cap {ENUM_DEPTH_MAX}")
        acc = 0.0
        for pos, mu in _enumerate_chunks(cone, field):
            acc += float(mu @ _path_action_values(cone, field, model, v0_field, pos))
        return ActionEvaluation(origin, acc + offset, 0.0, "enumerated", 1 << cone.depth)
    if mode == "sampled":
        if not n_samples or n_samples < 2:
            raise ValueError("sampled mode needs n_samples >= 2")
        rng = np.random.default_rng(seed)
        pos = _sample_paths(cone, field, n_samples, rng)
        vals = _path_action_values(cone, field, model, v0_field, pos)
        return ActionEvaluation(origin, float(np.mean(vals)) + offset,
                                float(np.std(vals, ddof=1) / np.sqrt(n_samples)),
                                "sampled", n_samples)
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# value table (forward dynamic programming; same arithmetic as the scheme)


@dataclass(frozen=True)
class ValueTable:
    """Potential values per level, built by the scheme update itself."""

    mesh: MeshSpec
    model: Model
    fields: tuple

    @property
    def n_levels(self):
        return len(self.fields)

    def field(self, k) -> GridField:
        return self.fields[k]

    def u_field(self, k) -> GridField:
        return u_from_v(self.fields[k], self.mesh)

    def value(self, m, k):
        return float(self.fields[k].value(m))


def value_table(model: Model, mesh: MeshSpec, v0_field: GridField, T: float,
                slope_cap: Optional[float] = None) -> ValueTable:
    """Dynamic-programming values on the odd grid up to the level covering T.

    The interior minimizer of each one-step problem exists because the
    slope stays below 1/lambda; the step monitor enforces that and raises
    CflViolation otherwise.
    """
    fields = [v0_field]
    for _ in range(mesh.steps_for(T)):
        fields.append(lf_step_v(fields[-1], mesh, model, slope_cap))
    return ValueTable(mesh=mesh, model=model, fields=tuple(fields))


def minimizing_slopes(table: ValueTable):
    """Global nodewise minimizing velocities: per level k >= 1 an array over
    the odd nodes m of H_p(x_m, t_{k-1}, c + D_x v at level k-1)."""
    mesh, model = table.mesh, table.model
    slopes = [None]
    for k in range(1, table.n_levels):
        u = table.u_field(k - 1)
        slopes.append(np.asarray(hamiltonian_p(
            model.hamiltonian, u.xs(), mesh.t(k - 1), model.c + u.values), dtype=float))
    return slopes


def minimizing_field(table: ValueTable, cone: Cone, slope_cap: Optional[float] = None,
                     _slopes=None) -> ConeVelocityField:
    """Minimizing velocity field on a cone, read off the value table."""
    mesh, model = table.mesh, table.model
    if cone.depth >= table.n_levels:
        raise ValueError("value table does not cover the cone")
    levels = {}
    for k in range(1, cone.depth + 1):
        ms = cone.level_ms(k)  # even parity relative to level k-1, where u lives
        if _slopes is not None:
            m0 = (k - 1) % 2
            vals = _slopes[k][(mesh.wrap(ms) - m0) // 2]
        else:
            u = table.u_field(k - 1)
            vals = hamiltonian_p(model.hamiltonian, mesh.x(ms), mesh.t(k - 1),
                                 model.c + u.value(ms))
        levels[k] = np.asarray(vals, dtype=float)
        worst = float(np.max(np.abs(levels[k])))
        cap = slope_cap if slope_cap is not None else 1.0 / mesh.lam
        if worst > cap * (1.0 + 1e-9):
            raise CflViolation(int(ms[np.argmax(np.abs(levels[k]))]), k, worst, cap)
    return ConeVelocityField(cone, levels)


# ---------------------------------------------------------------------------
# exhaustive grid minimization (independent oracle)


def brute_force_infimum(model: Model, mesh: MeshSpec, v0_field: GridField,
                        origin: tuple, resolution: int = 201, refine_passes: int = 1,
                        nodes_max: int = BRUTE_NODES_MAX) -> float:
    """Minimum of the action over velocity fields drawn from a uniform grid
    of ``resolution`` values per cone node in [-1/lambda, 1/lambda].

    The minimum over the product of per-node grids is computed exactly by
    backward induction on the cone (the cost of a node decomposes into its
    own stage cost plus the probability-weighted costs-to-go of its two
    children, so a nodewise greedy choice minimizes every sub-cone
    simultaneously).  No slope formula or conjugate identity is used, which
    keeps this an independent check of the value table.  One refinement
    pass re-grids between the neighbors of the best grid point.  Ties take
    the smallest grid index (np.argmin).
    """
    cone = Cone(mesh, *origin)
    if cone.n_field_nodes > nodes_max:
        raise TooLarge(f"cone has {cone.n_field_nodes} nodes, budget is {nodes_max}")
    lam, dt = mesh.lam, mesh.dt
    bound = 1.0 / lam

    def node_min(x, t_prev, w_left, w_right):
        lo, hi = -bound, bound
        best = np.inf
        for _ in range(refine_passes + 1):
            cand = np.linspace(lo, hi, resolution)
            p_plus, p_minus = transition_probs(cand, lam)
            vals = lagrangian_c(model, x, t_prev, cand) * dt + p_plus * w_right + p_minus * w_left
            j = int(np.argmin(vals))
            best = min(best, float(vals[j]))
            lo, hi = cand[max(j - 1, 0)], cand[min(j + 1, resolution - 1)]
        return best

    w = v0_field.value(cone.level_ms(0)).astype(float)
    for k in range(1, cone.depth + 1):
        ms = cone.level_ms(k)
        t_prev = mesh.t(k - 1)
        w = np.array([
            node_min(mesh.x(m), t_prev, w[i], w[i + 1])
            for i, m in enumerate(ms)
        ])
    return float(w[0]) + model.h * mesh.t(cone.depth)


# ---------------------------------------------------------------------------
# characteristics


@dataclass(frozen=True)
class CharacteristicPath:
    """Expected minimizing walk of one cone, with its linear interpolation."""

    origin: tuple
    times: np.ndarray
    expected_xs: np.ndarray
    stderr: np.ndarray
    mode: str
    sample_positions: Optional[np.ndarray] = None
    sample_eta: Optional[np.ndarray] = None

    def gamma_bar(self, s):
        return np.interp(s, self.times, self.expected_xs)


def characteristic(table: ValueTable, origin: tuple, mode: str = "recursion",
                   n_samples: Optional[int] = None, seed: Optional[int] = None,
                   slope_cap: Optional[float] = None, _slopes=None) -> CharacteristicPath:
    """Expected positions per level of the walk driven by the minimizing field."""
    mesh = table.mesh
    cone = Cone(mesh, *origin)
    field = minimizing_field(table, cone, slope_cap=slope_cap, _slopes=_slopes)
    times = mesh.t(np.arange(cone.depth + 1))
    if mode == "recursion":
        probs = occupation_probs(cone, field)
        exp_xs = np.array([float(probs[k] @ mesh.x(cone.level_ms(k))) for k in range(cone.depth + 1)])
        err = np.zeros_like(exp_xs)
        return CharacteristicPath((cone.origin_m, cone.origin_k), times, exp_xs, err, mode)
    if mode == "enumerated":
        acc = np.zeros(cone.depth + 1)
        for pos, mu in _enumerate_chunks(cone, field):
            acc += mu @ mesh.x(pos)
        return CharacteristicPath((cone.origin_m, cone.origin_k), times, acc,
                                  np.zeros_like(acc), mode)
    if mode == "sampled":
        if not n_samples or n_samples < 2:
            raise ValueError("sampled mode needs n_samples >= 2")
        rng = np.random.default_rng(seed)
        pos = _sample_paths(cone, field, n_samples, rng)
        xs = mesh.x(pos)
        eta = _eta_matrix(cone, field, pos)
        return CharacteristicPath(
            (cone.origin_m, cone.origin_k), times,
            np.mean(xs, axis=0), np.std(xs, axis=0, ddof=1) / np.sqrt(n_samples),
            mode, sample_positions=pos, sample_eta=eta,
        )
    raise ValueError(f"unknown mode {mode!r}")


# ---------------------------------------------------------------------------
# derivative representation bounds


@dataclass(frozen=True)
class UBounds:
    """Expected-derivative estimates bracketing u at an even node, with the
    O(dx) slack theta*dx."""

    lower: float
    upper: float
    slack: float


def _lx_expectation(table: ValueTable, cone: Cone, u0_field: GridField,
                    shift: int, model: Model, _slopes=None) -> float:
    """E[ sum_k L^c_x(gamma^k, t_{k-1}, xi*^k) dt + u0(gamma^0 + shift*dx) ]
    along the minimizing ensemble of the cone (occupation recursion)."""
    mesh = table.mesh
    field = minimizing_field(table, cone, slope_cap=None, _slopes=_slopes)
    probs = occupation_probs(cone, field)
    total = 0.0
    for k in range(1, cone.depth + 1):
        xs = mesh.x(cone.level_ms(k))
        lx = model.lagrangian.deriv_x(xs, mesh.t(k - 1), field.level(k))
        total += float(probs[k] @ (np.asarray(lx, dtype=float) * mesh.dt))
    total += float(probs[0] @ u0_field.value(cone.level_ms(0) + shift))
    return total


def u_bounds(table: ValueTable, u0_field: GridField, n: int, k: int,
             theta: float, _slopes=None) -> UBounds:
    """Bracket for u at the even node (n+1, k): the upper estimate runs the
    minimizing ensemble of the cone at (n, k) with u0 sampled one step
    right of the endpoint, the lower estimate the cone at (n+2, k) with u0
    one step left; both carry the slack theta*dx."""
    model, mesh = table.model, table.mesh
    upper = _lx_expectation(table, Cone(mesh, n, k), u0_field, +1, model, _slopes=_slopes)
    lower = _lx_expectation(table, Cone(mesh, n + 2, k), u0_field, -1, model, _slopes=_slopes)
    return UBounds(lower=lower, upper=upper, slack=theta * mesh.dx)


def u_bounds_sweep(table: ValueTable, u0_field: GridField):
    """Expected-derivative estimates at every odd node of every level.

    The per-cone expectation satisfies a one-step recursion in the cost-to-go
    (the minimizing field is the same nodewise formula for every cone), so a
    single periodic sweep per endpoint shift computes all cones at once.
    Returns (lower_fields, upper_fields): per level k, odd-parity GridFields
    whose value at node n is the estimate for the cone with apex (n, k).
    """
    mesh, model = table.mesh, table.model
    lam, dt = mesh.lam, mesh.dt
    slopes = minimizing_slopes(table)
    out = []
    for shift in (-1, +1):
        g = GridField(mesh, "odd", 0, u0_field.value(
            np.arange(1, 2 * mesh.N, 2) + shift))
        fields = [g]
        for j in range(1, table.n_levels):
            left, right, ms = _odd_neighbors(fields[-1])
            xi = slopes[j]
            p_plus, p_minus = transition_probs(xi, lam)
            lx = np.asarray(model.lagrangian.deriv_x(mesh.x(ms), mesh.t(j - 1), xi), dtype=float)
            fields.append(GridField(mesh, "odd", j, lx * dt + p_plus * right + p_minus * left))
        out.append(fields)
    return out[0], out[1]


def u_sandwich_scan(table: ValueTable, u_history: Sequence[GridField],
                    u0_field: GridField, theta: float, levels=None):
    """Check lower - slack <= u <= upper + slack at every interior node.

    Returns (max_low_defect, max_high_defect): positive entries measure by
    how much the corresponding inequality failed; values <= 0 mean the
    sandwich holds everywhere scanned.
    """
    mesh = table.mesh
    lower_fields, upper_fields = u_bounds_sweep(table, u0_field)
    slack = theta * mesh.dx
    low_defect = -np.inf
    high_defect = -np.inf
    levels = range(1, table.n_levels) if levels is None else levels
    for k in levels:
        u = u_history[k]
        ms = u.ms()
        upper = upper_fields[k].value(ms - 1)   # cone apex one step left
        lower = lower_fields[k].value(ms + 1)   # cone apex one step right
        low_defect = max(low_defect, float(np.max((lower - slack) - u.values)))
        high_defect = max(high_defect, float(np.max(u.values - (upper + slack))))
    return low_defect, high_defect
