"""Exact continuum solutions used to verify the scheme.

For fluxes independent of x and t the potential solves a one-shot
minimization over straight lines,

    v(x, t) = min_y { t * L^c((x - y)/t) + v0(y) } + h*t,

located here by a dense candidate grid plus golden-section polish.  At
regular points the conserved variable is the velocity-derivative of the
running cost at the minimizing slope.  Riemann data for the quadratic
flux has the classical single-wave solutions (shock with the mean jump
speed, linear fan), composed on the torus with the companion wave of the
wrap-around jump.  For x,t-dependent fluxes a short-time method of
characteristics (midpoint integration plus bisection shooting) stands in
while the solution stays smooth.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import NotRegular, OracleUnavailable
from .model import Model, hamiltonian_p, lagrangian_c, lagrangian_c_xi

HOPF_LAX_GRID = 4096
GOLDEN_TOL = 1e-12
REGULARITY_GRID_FACTOR = 10.0  # multiples of the grid spacing separating distinct argmins
DT_ODE = 1e-4

_INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class HopfLaxResult:
    value: float
    y_star: float
    velocity: float
    argmin_count: int
    window: tuple

    def minimizer(self, s, x, t):
        """Straight line from (y_star, 0) to (x, t)."""
        return self.y_star + np.asarray(s) * (x - self.y_star) / t


def _objective(v0, model, x, t):
    def f(y):
        return t * lagrangian_c(model, 0.0, 0.0, (x - np.asarray(y, float)) / t) + v0(y)
    return f


def _golden(f, a, b, tol=GOLDEN_TOL):
    """Golden-section minimum of a scalar unimodal function on [a, b]."""
    lo, hi = float(a), float(b)
    c = hi - _INV_PHI * (hi - lo)
    d = lo + _INV_PHI * (hi - lo)
    fc, fd = f(c), f(d)
    while hi - lo > tol:
        if fc < fd:
            hi, d, fd = d, c, fc
            c = hi - _INV_PHI * (hi - lo)
            fc = f(c)
        else:
            lo, c, fc = c, d, fd
            d = lo + _INV_PHI * (hi - lo)
            fd = f(d)
    y = 0.5 * (lo + hi)
    return y, f(y)


def hopf_lax_value(v0: Callable, model: Model, x: float, t: float,
                   slope_bound: Optional[float] = None, n_grid: int = HOPF_LAX_GRID,
                   check_regular: bool = False) -> HopfLaxResult:
    """One-shot minimization for an x,t-independent flux at a single point.

    The candidate window is [x - w, x + w] with w = slope_bound * t
    (expanded until the argmin is interior when no bound is given or the
    bound proves too small).  With ``check_regular`` the grid is scanned
    for well-separated near-minimal local minima and NotRegular is raised
    when more than one survives polishing.
    """
    if t <= 0.0:
        raise ValueError("hopf_lax_value needs t > 0")
    f = _objective(v0, model, x, t)
    w = (slope_bound if slope_bound is not None else 2.0) * t
    for _ in range(12):
        ys = np.linspace(x - w, x + w, n_grid)
        vals = f(ys)
        j = int(np.argmin(vals))
        if 0 < j < n_grid - 1:
            break
        w *= 2.0
    else:
        raise OracleUnavailable("minimizer kept escaping the search window")

    y_star, v_min = _golden(f, ys[j - 1], ys[j + 1])
    argmin_count = 1
    if check_regular:
        dy = ys[1] - ys[0]
        interior = (vals[1:-1] <= vals[:-2]) & (vals[1:-1] <= vals[2:])
        cand = np.where(interior)[0] + 1
        minima = []
        for i in cand:
            yi, vi = _golden(f, ys[i - 1], ys[i + 1])
            minima.append((yi, vi))
        tol_v = 1e-8 * (1.0 + abs(v_min))
        good = [yi for yi, vi in minima if vi <= v_min + tol_v]
        good.sort()
        clusters = 1
        for a, b in zip(good[:-1], good[1:]):
            if b - a > REGULARITY_GRID_FACTOR * dy:
                clusters += 1
        argmin_count = clusters
        if clusters > 1:
            raise NotRegular(f"{clusters} separated minimizers at (x={x}, t={t})")

    return HopfLaxResult(
        value=float(v_min) + model.h * t,
        y_star=float(y_star),
        velocity=float((x - y_star) / t),
        argmin_count=argmin_count,
        window=(x - w, x + w),
    )


def hopf_lax_values_batch(v0: Callable, model: Model, xs, t: float,
                          slope_bound: float, n_grid: int = HOPF_LAX_GRID,
                          polish_iters: int = 60):
    """Vectorized Hopf-Lax values at many x for one t.

    The per-query windows share the same offsets, so the running-cost row
    is computed once; the golden polish runs a fixed number of section
    steps on all queries at once.
    """
    xs = np.asarray(xs, dtype=float)
    if t <= 0.0:
        return np.asarray(v0(xs), dtype=float)
    w = slope_bound * t
    offs = np.linspace(-w, w, n_grid)
    cost_row = t * lagrangian_c(model, 0.0, 0.0, -offs / t)
    vals = cost_row[None, :] + np.asarray(v0(xs[:, None] + offs[None, :]), dtype=float)
    j = np.argmin(vals, axis=1)
    j = np.clip(j, 1, n_grid - 2)
    lo = xs + offs[j - 1]
    hi = xs + offs[j + 1]

    def f(y):
        return t * lagrangian_c(model, 0.0, 0.0, (xs - y) / t) + np.asarray(v0(y), dtype=float)

    for _ in range(polish_iters):
        c = hi - _INV_PHI * (hi - lo)
        d = lo + _INV_PHI * (hi - lo)
        take = f(c) < f(d)
        hi = np.where(take, d, hi)
        lo = np.where(take, lo, c)
    y = 0.5 * (lo + hi)
    return f(y) + model.h * t


def exact_u_at_regular_point(v0: Callable, model: Model, x: float, t: float,
                             slope_bound: Optional[float] = None) -> float:
    """u(x, t) at a regular point of an x,t-independent flux.

    Equals the drift-shifted velocity derivative of the running cost at
    the minimizing slope; NotRegular when the minimizer is not unique.
    """
    res = hopf_lax_value(v0, model, x, t, slope_bound=slope_bound, check_regular=True)
    return float(lagrangian_c_xi(model, 0.0, 0.0, res.velocity))


# ---------------------------------------------------------------------------
# Riemann data for the quadratic flux


def riemann_burgers_u(u_left: float, u_right: float, x, t: float, c: float = 0.0,
                      jump: float = 0.5):
    """Single-jump entropy solution of the quadratic flux (no wrap).

    Shock when u_left > u_right, moving at c plus the mean state;
    otherwise the linear fan between the edge speeds.
    """
    if t <= 0.0:
        raise ValueError("riemann_burgers_u needs t > 0")
    x = np.asarray(x, dtype=float)
    if u_left > u_right:
        xs = jump + (c + 0.5 * (u_left + u_right)) * t
        return np.where(x < xs, u_left, u_right)
    if u_left == u_right:
        return np.full_like(x, u_left)
    lo = jump + (c + u_left) * t
    hi = jump + (c + u_right) * t
    fan = (x - jump) / t - c
    return np.where(x <= lo, u_left, np.where(x >= hi, u_right, fan))


@dataclass(frozen=True)
class ExactSolution:
    """Exact reference solution: kind tag, u and/or v evaluators, shock loci."""

    kind: str
    u: Optional[Callable] = None          # (x, t) -> u
    v: Optional[Callable] = None          # (x, t) -> v
    minimizer: Optional[Callable] = None  # (x, t) -> HopfLaxResult
    shock_loci: Optional[Callable] = None  # t -> list of shock positions in [0, 1)
    meta: Optional[dict] = None


def riemann_torus_solution(u_left: float, u_right: float, c: float = 0.0) -> ExactSolution:
    """Periodic zero-mean Riemann pair: the given jump at 1/2 plus the
    companion (u_right -> u_left) jump at 0.  Valid until the waves meet."""
    if abs(u_left + u_right) > 1e-12:
        raise OracleUnavailable("periodic Riemann data needs u_left = -u_right")

    def edges(ul, ur, jump, t):
        if ul >= ur:
            s = jump + (c + 0.5 * (ul + ur)) * t
            return s, s
        return jump + (c + ul) * t, jump + (c + ur) * t

    def u(x, t):
        if t <= 0.0:
            raise ValueError("needs t > 0")
        e0 = edges(u_right, u_left, 0.0, t)   # companion wave at the wrap
        eh = edges(u_left, u_right, 0.5, t)   # primary wave at the half point
        e1 = (e0[0] + 1.0, e0[1] + 1.0)
        if not (e0[1] <= eh[0] and eh[1] <= e1[0]):
            raise OracleUnavailable(f"waves interact by t = {t}")
        xr = np.mod(np.asarray(x, dtype=float), 1.0)
        out = np.where(
            xr <= e0[1], riemann_burgers_u(u_right, u_left, xr, t, c=c, jump=0.0),
            np.where(
                xr < eh[0], u_left,
                np.where(
                    xr <= eh[1], riemann_burgers_u(u_left, u_right, xr, t, c=c, jump=0.5),
                    np.where(
                        xr < e1[0], u_right,
                        riemann_burgers_u(u_right, u_left, xr, t, c=c, jump=1.0),
                    ),
                ),
            ),
        )
        return out

    def shock_loci(t):
        loci = []
        if u_left > u_right:
            loci.append(np.mod(0.5 + (c + 0.5 * (u_left + u_right)) * t, 1.0))
        if u_right > u_left:
            loci.append(np.mod((c + 0.5 * (u_left + u_right)) * t, 1.0))
        return loci

    return ExactSolution(kind="riemann", u=u, shock_loci=shock_loci,
                         meta={"u_left": u_left, "u_right": u_right, "c": c})


def hopf_lax_solution(v0: Callable, model: Model, slope_bound: float) -> ExactSolution:
    """Exact solution wrapper for an x,t-independent flux."""

    def v(x, t):
        return hopf_lax_values_batch(v0, model, np.atleast_1d(x), float(t), slope_bound)

    def u(x, t):
        return exact_u_at_regular_point(v0, model, float(x), float(t), slope_bound)

    def minimizer(x, t):
        return hopf_lax_value(v0, model, float(x), float(t), slope_bound)

    return ExactSolution(kind="hopf-lax", u=u, v=v, minimizer=minimizer,
                         shock_loci=lambda t: [])


# ---------------------------------------------------------------------------
# short-time method of characteristics (x,t-dependent fluxes, smooth regime)


def _integrate_characteristics(model: Model, y0, p0, t: float, dt_ode: float):
    """Midpoint integration of dy = H_p, dp = -H_x, vectorized over curves.

    Also accumulates the potential rate p*H_p - H + h along each curve.
    """
    H = model.hamiltonian
    n = max(1, int(math.ceil(t / dt_ode)))
    hstep = t / n
    y = np.array(y0, dtype=float, copy=True)
    p = np.array(p0, dtype=float, copy=True)
    v_acc = np.zeros_like(y)
    s = 0.0
    has_hx = H.deriv_x is not None
    for _ in range(n):
        k1y = hamiltonian_p(H, y, s, p)
        k1p = -H.deriv_x(y, s, p) if has_hx else 0.0
        ym, pm, sm = y + 0.5 * hstep * k1y, p + 0.5 * hstep * k1p, s + 0.5 * hstep
        k2y = hamiltonian_p(H, ym, sm, pm)
        k2p = -H.deriv_x(ym, sm, pm) if has_hx else 0.0
        v_acc += hstep * ((pm - model.c) * k2y - H.eval(ym, sm, pm) + model.h)
        y = y + hstep * k2y
        p = p + hstep * k2p
        s += hstep
    return y, p, v_acc


def characteristics_solution(u0: Callable, v0: Callable, model: Model,
                             dt_ode: float = DT_ODE, window: float = 2.0,
                             n_scan: int = 512) -> ExactSolution:
    """Short-time smooth solution via characteristics with shooting.

    Foot points are bracketed by one vectorized scan of arrivals over a
    window and polished by bisection (all queries at once); only valid
    before characteristics cross, detected as non-monotone arrivals.
    """

    def _feet(xs, t):
        xs = np.asarray(xs, dtype=float)
        y0s = np.linspace(np.min(xs) - window, np.max(xs) + window, n_scan)
        arrivals, _, _ = _integrate_characteristics(model, y0s, model.c + u0(y0s), t, dt_ode)
        if np.any(np.diff(arrivals) <= 0):
            raise OracleUnavailable("characteristics crossed; no smooth solution")
        j = np.searchsorted(arrivals, xs)
        if np.any(j == 0) or np.any(j == n_scan):
            raise OracleUnavailable("arrival window too small")
        lo, hi = y0s[j - 1], y0s[j]
        for _ in range(52):
            mid = 0.5 * (lo + hi)
            arr, _, _ = _integrate_characteristics(model, mid, model.c + u0(mid), t, dt_ode)
            below = arr < xs
            lo = np.where(below, mid, lo)
            hi = np.where(below, hi, mid)
        return 0.5 * (lo + hi)

    def u(x, t):
        scalar = np.ndim(x) == 0
        ys = _feet(np.atleast_1d(x), float(t))
        _, p, _ = _integrate_characteristics(model, ys, model.c + u0(ys), float(t), dt_ode)
        out = p - model.c
        return float(out[0]) if scalar else out

    def v(x, t):
        scalar = np.ndim(x) == 0
        xs = np.atleast_1d(x)
        t = float(t)
        if t <= 0.0:
            out = np.asarray(v0(xs), dtype=float)
            return float(out[0]) if scalar else out
        ys = _feet(xs, t)
        _, _, dv = _integrate_characteristics(model, ys, model.c + u0(ys), t, dt_ode)
        out = np.asarray(v0(ys), dtype=float) + dv
        return float(out[0]) if scalar else out

    return ExactSolution(kind="characteristics", u=u, v=v, shock_loci=lambda t: [])
