"""Staggered explicit updates for the conservative and potential forms.

One step of the conservative form averages the two even-grid neighbors and
differences the flux; the potential form averages the odd-grid neighbors
and subtracts dt*(H - h) evaluated at the centered difference.  The two
are equivalent: the centered difference of the potential solves the
conservative scheme and vice versa, which ``u_from_v``/``v_from_u``
realize exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field
from typing import Callable, Optional, Sequence

import numpy as np

from .errors import CflViolation, NotPeriodic, ParityError
from .grid import EVEN, ODD, GridField, MeshSpec, PiecewiseConstant, build_v0, discretize_u0
from .model import CflEstimate, Model, cfl_estimate, hamiltonian_p


def _check_parity(f: GridField, parity, k=None):
    if f.parity != parity:
        raise ParityError(f"expected {parity} field, got {f.parity}")
    if k is not None and f.k != k:
        raise ParityError(f"expected level {k}, got {f.k}")


def _monitor(max_slope_arr, ms, k, slope_cap):
    """Raise CflViolation with the offending node when the cap is exceeded."""
    i = int(np.argmax(max_slope_arr))
    worst = float(max_slope_arr[i])
    if worst > slope_cap * (1.0 + 1e-9):
        raise CflViolation(int(ms[i]), k, worst, slope_cap)
    return worst


def lf_step_u(u: GridField, mesh: MeshSpec, model: Model, slope_cap: Optional[float] = None) -> GridField:
    """One conservative step from level k to k+1 (periodic wrap).

    slope_cap defaults to the hard stability limit 1/lambda.
    """
    _check_parity(u, EVEN)
    k = u.k
    cap = slope_cap if slope_cap is not None else 1.0 / mesh.lam
    xs, tk = u.xs(), mesh.t(k)
    p = model.c + u.values
    _monitor(np.abs(hamiltonian_p(model.hamiltonian, xs, tk, p)), u.ms(), k, cap)

    Hv = model.hamiltonian.eval(xs, tk, p)
    left, right = u.values, np.roll(u.values, -1)
    Hl, Hr = Hv, np.roll(Hv, -1)
    new = 0.5 * (left + right) - 0.5 * mesh.lam * (Hr - Hl)
    if u.m0 == 1:
        new = np.roll(new, 1)  # targets wrap past m = 2N back to 0
    return GridField(mesh, EVEN, k + 1, new)


def _odd_neighbors(v: GridField):
    """Values (left, right) = (v_{m'-1}, v_{m'+1}) at the opposite-offset
    node pattern m' of the same level, plus the m' array."""
    mesh = v.mesh
    targets_m0 = 1 - v.m0
    ms = np.arange(targets_m0, 2 * mesh.N, 2)
    if v.m0 == 1:
        left, right = np.roll(v.values, 1), v.values
    else:
        left, right = v.values, np.roll(v.values, -1)
    return left, right, ms


def lf_step_v(v: GridField, mesh: MeshSpec, model: Model, slope_cap: Optional[float] = None) -> GridField:
    """One potential-form step from level k to k+1."""
    _check_parity(v, ODD)
    k = v.k
    cap = slope_cap if slope_cap is not None else 1.0 / mesh.lam
    left, right, ms = _odd_neighbors(v)
    xs, tk = mesh.x(ms), mesh.t(k)
    dv = (right - left) / (2.0 * mesh.dx)
    p = model.c + dv
    _monitor(np.abs(hamiltonian_p(model.hamiltonian, xs, tk, p)), ms, k, cap)
    new = 0.5 * (left + right) - mesh.dt * model.hamiltonian.eval(xs, tk, p) + mesh.dt * model.h
    return GridField(mesh, ODD, k + 1, new)


def u_from_v(v: GridField, mesh: Optional[MeshSpec] = None) -> GridField:
    """Centered difference of the potential: u_m = (v_{m+1} - v_{m-1})/(2 dx)."""
    mesh = mesh or v.mesh
    _check_parity(v, ODD)
    left, right, _ = _odd_neighbors(v)
    return GridField(mesh, EVEN, v.k, (right - left) / (2.0 * mesh.dx))


def v_from_u(u_history: Sequence[GridField], v0_at_0: float, model: Model, mesh: MeshSpec) -> list:
    """Reconstruct the potential history from a conservative history.

    Per level, a raw potential is built by spatial summation anchored at
    u_0^k * dx (even k) or 0 (odd k); the level offsets come from the
    anchored residual of the potential update, accumulated in time and
    shifted by v0_at_0.  The output solves the potential scheme and its
    centered difference returns the input history exactly.
    """
    mesh = mesh or u_history[0].mesh
    dx, dt = mesh.dx, mesh.dt
    raw = []
    for f in u_history:
        _check_parity(f, EVEN)
        u = f.values
        if abs(float(np.sum(u) * 2 * dx)) > 1e-9:
            raise NotPeriodic("conserved data does not sum to zero; summation cannot close")
        k = f.k
        if k % 2 == 0:
            # odd nodes 1, 3, ...: anchor at node 1
            vals = u[0] * dx + np.concatenate(([0.0], np.cumsum(u[1:] * 2 * dx)))
        else:
            # even nodes 0, 2, ...: anchor 0 at node 0; u lives on odd m
            vals = np.concatenate(([0.0], np.cumsum(u[:-1] * 2 * dx)))
        raw.append(GridField(mesh, ODD, k, vals))

    out = [GridField(mesh, ODD, 0, raw[0].values + v0_at_0)]
    offset = 0.0
    for k in range(len(raw) - 1):
        cur, nxt = raw[k], raw[k + 1]
        if k % 2 == 0:
            anchor_m = 0
        else:
            anchor_m = 1
        dtv = (nxt.value(anchor_m) - 0.5 * (cur.value(anchor_m - 1) + cur.value(anchor_m + 1))) / dt
        dxv = (cur.value(anchor_m + 1) - cur.value(anchor_m - 1)) / (2.0 * dx)
        p_k = dtv + model.hamiltonian.eval(mesh.x(anchor_m), mesh.t(k), model.c + dxv)
        offset += (float(p_k) - model.h) * dt
        out.append(GridField(mesh, ODD, k + 1, nxt.values + v0_at_0 - offset))
    return out


@dataclass(frozen=True)
class MonitorRecord:
    k: int
    t: float
    mass: float
    max_slope: float


@dataclass(frozen=True)
class InitialData:
    """Initial data bundle: the conserved profile u0 (callable or declared
    piecewise-constant), the potential value at x = 0, and an optional
    exact potential for oracles."""

    u0: Callable | PiecewiseConstant
    v0_at_0: float = 0.0
    v0: Optional[Callable] = None
    label: str = "custom"


@dataclass
class RunState:
    """History and monitors of one run of either (or both) schemes."""

    mesh: MeshSpec
    model: Model
    cfl: CflEstimate
    u_history: list = dc_field(default_factory=list)
    v_history: list = dc_field(default_factory=list)
    monitors: list = dc_field(default_factory=list)

    @property
    def n_levels(self):
        return max(len(self.u_history), len(self.v_history))

    def u_at(self, k) -> GridField:
        if self.u_history:
            return self.u_history[k]
        return u_from_v(self.v_history[k], self.mesh)

    def monitor_rows(self):
        return [(r.k, r.t, r.mass, r.max_slope) for r in self.monitors]


def _record(state: RunState, k):
    u = state.u_at(k)
    mass = float(np.sum(u.values) * 2 * state.mesh.dx)
    slope = float(np.max(np.abs(hamiltonian_p(
        state.model.hamiltonian, u.xs(), state.mesh.t(k), state.model.c + u.values))))
    state.monitors.append(MonitorRecord(k, state.mesh.t(k), mass, slope))


def run(model: Model, mesh: MeshSpec, initial: InitialData, T: float,
        scheme: str = "both", cfl: Optional[CflEstimate] = None) -> RunState:
    """Advance to the first level at or past T, monitoring slope and mass.

    The mesh must satisfy lambda < cfl_limit or the run is rejected before
    stepping; each step then has to keep max |H_p| within slope_bound.
    """
    if scheme not in ("u", "v", "both"):
        raise ValueError("scheme must be 'u', 'v', or 'both'")
    u0_field = discretize_u0(mesh, initial.u0)
    if cfl is None:
        r_eff = max(float(np.max(np.abs(u0_field.values))), abs(initial.v0_at_0)) + 1e-9
        v0_field = build_v0(mesh, initial.v0_at_0, u0_field)
        r_eff = max(r_eff, float(np.max(np.abs(v0_field.values))))
        cfl = cfl_estimate(model.hamiltonian, (model.c, model.c), r_eff, T)
    if not mesh.lam < cfl.cfl_limit:
        raise CflViolation(-1, -1, cfl.slope_bound, 1.0 / mesh.lam,
                           f"mesh lambda {mesh.lam:.4g} >= cfl_limit {cfl.cfl_limit:.4g}")

    state = RunState(mesh=mesh, model=model, cfl=cfl)
    if scheme in ("u", "both"):
        state.u_history.append(u0_field)
    if scheme in ("v", "both"):
        state.v_history.append(build_v0(mesh, initial.v0_at_0, u0_field))
    _record(state, 0)

    for k in range(mesh.steps_for(T)):
        if state.u_history:
            state.u_history.append(lf_step_u(state.u_history[-1], mesh, model, cfl.slope_bound))
        if state.v_history:
            state.v_history.append(lf_step_v(state.v_history[-1], mesh, model, cfl.slope_bound))
        _record(state, k + 1)
    return state
