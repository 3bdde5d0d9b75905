"""Flux/running-cost model pairs, convex duality, and stability constants.

A model couples a flux H(x, t, p), periodic with period 1 in x and t and
strictly convex and superlinear in p, with its convex conjugate
L(x, t, xi) = sup_p {xi*p - H(x, t, p)}.  The drift-shifted running cost is
L^c(x, t, xi) = L(x, t, xi) - c*xi, the conjugate of H(x, t, c + .).

Builtin fluxes (selected by name in the harness config):

    burgers            H = p^2/2
    quadratic-forced   H = p^2/2 - A*cos(2*pi*(x - omega*t))
    quartic            H = p^4/4 + p^2/2   (numeric conjugate)
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import AssumptionViolated, NoConvergence, NotConvex

FD_STEP = 1e-6          # relative-scaled fallback derivative step
NEWTON_TOL = 1e-12
NEWTON_MAX_ITER = 100


@dataclass(frozen=True)
class HamiltonianSpec:
    """Flux H(x, t, p) with optional analytic derivatives and conjugate.

    All callables must accept numpy arrays and broadcast.  ``kind`` is
    "analytic-conjugate" when ``conjugate`` (and ideally its derivatives)
    are supplied in closed form, else "numeric-conjugate" and the conjugate
    is located by safeguarded root finding on H_p(x, t, p) = xi.
    """

    name: str
    eval: Callable          # (x, t, p) -> H
    deriv_p: Optional[Callable] = None
    deriv_x: Optional[Callable] = None
    kind: str = "numeric-conjugate"
    conjugate: Optional[Callable] = None          # (x, t, xi) -> L
    conjugate_deriv_x: Optional[Callable] = None  # L_x
    conjugate_deriv_xi: Optional[Callable] = None  # L_xi
    conjugate_deriv_xx: Optional[Callable] = None  # L_xx
    params: dict = field(default_factory=dict)
    p_max: float = 8.0      # initial bracket half-width for the numeric conjugate

    def __post_init__(self):
        if self.kind not in ("analytic-conjugate", "numeric-conjugate"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.kind == "analytic-conjugate" and self.conjugate is None:
            raise ValueError("analytic-conjugate requires a conjugate callable")


@dataclass(frozen=True)
class LagrangianSpec:
    """Running cost L(x, t, xi) with derivatives, drift c, and offset h.

    ``eval`` is the plain conjugate L; the drift-shifted cost is
    L^c = L - c*xi (see :func:`lagrangian_c`).  ``deriv_x`` equals L^c_x
    since the drift term has no x dependence.
    """

    eval: Callable
    deriv_x: Callable
    deriv_xi: Callable
    deriv_xx: Callable
    c: float = 0.0
    h: float = 0.0


@dataclass(frozen=True)
class Model:
    """A Hamiltonian and its paired Lagrangian (drift and offset included)."""

    hamiltonian: HamiltonianSpec
    lagrangian: LagrangianSpec

    @property
    def c(self):
        return self.lagrangian.c

    @property
    def h(self):
        return self.lagrangian.h


def hamiltonian_p(H: HamiltonianSpec, x, t, p):
    """Slope H_p(x, t, p); analytic when available, else central difference."""
    p = np.asarray(p, dtype=float)
    if not np.all(np.isfinite(p)):
        raise ValueError("non-finite momentum")
    if H.deriv_p is not None:
        return H.deriv_p(x, t, p)
    step = FD_STEP * (1.0 + np.abs(p))
    return (H.eval(x, t, p + step) - H.eval(x, t, p - step)) / (2.0 * step)


def _hamiltonian_pp(H: HamiltonianSpec, x, t, p):
    step = FD_STEP * (1.0 + np.abs(p))
    return (hamiltonian_p(H, x, t, p + step) - hamiltonian_p(H, x, t, p - step)) / (2.0 * step)


def conjugate_argmax(H: HamiltonianSpec, x, t, xi, tol=NEWTON_TOL, max_iter=NEWTON_MAX_ITER):
    """Solve H_p(x, t, p) = xi for the unique p (strict convexity).

    Vectorized bisection-safeguarded Newton.  The bracket starts at
    [-p_max, p_max] and expands geometrically.  Raises NotConvex when the
    bracket endpoints show a decreasing slope, NoConvergence when the
    iteration budget runs out.
    """
    xi = np.asarray(xi, dtype=float)
    xb, tb = np.broadcast_arrays(np.asarray(x, float), np.asarray(t, float))
    shape = np.broadcast_shapes(xi.shape, xb.shape)
    xi = np.broadcast_to(xi, shape).astype(float).ravel()
    xv = np.broadcast_to(xb, shape).astype(float).ravel()
    tv = np.broadcast_to(tb, shape).astype(float).ravel()

    lo = np.full_like(xi, -H.p_max)
    hi = np.full_like(xi, H.p_max)
    for _ in range(64):
        flo = hamiltonian_p(H, xv, tv, lo)
        fhi = hamiltonian_p(H, xv, tv, hi)
        need_lo = flo > xi
        need_hi = fhi < xi
        if not (np.any(need_lo) or np.any(need_hi)):
            break
        lo = np.where(need_lo, 2.0 * lo, lo)
        hi = np.where(need_hi, 2.0 * hi, hi)
    else:
        raise NoConvergence("bracket expansion for the conjugate failed")
    if np.any(fhi < flo - 1e-12 * (1.0 + np.abs(flo))):
        raise NotConvex("H_p decreases across the bracket")

    p = 0.5 * (lo + hi)
    scale = 1.0 + np.abs(xi)
    for _ in range(max_iter):
        f = hamiltonian_p(H, xv, tv, p) - xi
        done = np.abs(f) <= tol * scale
        if np.all(done):
            break
        lo = np.where(f < 0, p, lo)
        hi = np.where(f > 0, p, hi)
        fpp = _hamiltonian_pp(H, xv, tv, p)
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = p - f / fpp
        bad = ~np.isfinite(newton) | (newton <= lo) | (newton >= hi)
        p = np.where(done, p, np.where(bad, 0.5 * (lo + hi), newton))
    else:
        raise NoConvergence("conjugate Newton iteration exhausted max_iter")
    return p.reshape(shape)


def legendre(H: HamiltonianSpec, x, t, xi, c=0.0):
    """Drift-shifted running cost L^c(x, t, xi) = sup_p {xi*p - H(x,t,p)} - c*xi."""
    xi = np.asarray(xi, dtype=float)
    if H.kind == "analytic-conjugate":
        return H.conjugate(x, t, xi) - c * xi
    p = conjugate_argmax(H, x, t, xi)
    return xi * p - H.eval(x, t, p) - c * xi


def make_lagrangian(H: HamiltonianSpec, c=0.0, h=0.0) -> LagrangianSpec:
    """Pair a flux with its conjugate running cost.

    Derivatives fall back to the envelope identities L_xi = p*(xi),
    L_x = -H_x(x, t, p*(xi)) and to central differences for L_xx.
    """

    def _hx(x, t, p):
        if H.deriv_x is not None:
            return H.deriv_x(x, t, p)
        step = FD_STEP * (1.0 + np.abs(np.asarray(x, float)))
        return (H.eval(np.asarray(x) + step, t, p) - H.eval(np.asarray(x) - step, t, p)) / (2.0 * step)

    if H.kind == "analytic-conjugate":
        l_eval = H.conjugate
        l_x = H.conjugate_deriv_x
        l_xi = H.conjugate_deriv_xi
        l_xx = H.conjugate_deriv_xx
    else:
        l_eval = l_x = l_xi = l_xx = None

    if l_eval is None:
        def l_eval(x, t, xi):
            p = conjugate_argmax(H, x, t, xi)
            return np.asarray(xi, float) * p - H.eval(x, t, p)

    if l_xi is None:
        def l_xi(x, t, xi):
            return conjugate_argmax(H, x, t, xi)

    if l_x is None:
        def l_x(x, t, xi, _eval=l_eval):
            p = conjugate_argmax(H, x, t, xi)
            return -_hx(x, t, p)

    if l_xx is None:
        def l_xx(x, t, xi, _lx=l_x):
            step = FD_STEP * (1.0 + np.abs(np.asarray(x, float)))
            return (_lx(np.asarray(x) + step, t, xi) - _lx(np.asarray(x) - step, t, xi)) / (2.0 * step)

    return LagrangianSpec(eval=l_eval, deriv_x=l_x, deriv_xi=l_xi, deriv_xx=l_xx, c=c, h=h)


def lagrangian_c(model: Model, x, t, xi):
    """L^c(x, t, xi) = L(x, t, xi) - c*xi."""
    return model.lagrangian.eval(x, t, xi) - model.c * np.asarray(xi, float)


def lagrangian_c_xi(model: Model, x, t, xi):
    """L^c_xi = L_xi - c."""
    return model.lagrangian.deriv_xi(x, t, xi) - model.c


# ---------------------------------------------------------------------------
# builtin fluxes


def _burgers_hamiltonian():
    return HamiltonianSpec(
        name="burgers",
        eval=lambda x, t, p: 0.5 * np.square(p),
        deriv_p=lambda x, t, p: np.asarray(p, float),
        deriv_x=lambda x, t, p: np.zeros_like(np.asarray(p, float) + np.asarray(x, float) * 0.0),
        kind="analytic-conjugate",
        conjugate=lambda x, t, xi: 0.5 * np.square(xi),
        conjugate_deriv_x=lambda x, t, xi: np.zeros_like(np.asarray(xi, float) + np.asarray(x, float) * 0.0),
        conjugate_deriv_xi=lambda x, t, xi: np.asarray(xi, float),
        conjugate_deriv_xx=lambda x, t, xi: np.zeros_like(np.asarray(xi, float) + np.asarray(x, float) * 0.0),
    )


def _forced_hamiltonian(amplitude=0.25, omega=1.0):
    A, w = float(amplitude), float(omega)
    two_pi = 2.0 * np.pi

    def phase(x, t):
        return two_pi * (np.asarray(x, float) - w * np.asarray(t, float))

    return HamiltonianSpec(
        name="quadratic-forced",
        eval=lambda x, t, p: 0.5 * np.square(p) - A * np.cos(phase(x, t)),
        deriv_p=lambda x, t, p: np.asarray(p, float) + 0.0 * phase(x, t),
        deriv_x=lambda x, t, p: two_pi * A * np.sin(phase(x, t)) + 0.0 * np.asarray(p, float),
        kind="analytic-conjugate",
        conjugate=lambda x, t, xi: 0.5 * np.square(xi) + A * np.cos(phase(x, t)),
        conjugate_deriv_x=lambda x, t, xi: -two_pi * A * np.sin(phase(x, t)) + 0.0 * np.asarray(xi, float),
        conjugate_deriv_xi=lambda x, t, xi: np.asarray(xi, float) + 0.0 * phase(x, t),
        conjugate_deriv_xx=lambda x, t, xi: -(two_pi**2) * A * np.cos(phase(x, t)) + 0.0 * np.asarray(xi, float),
        params={"amplitude": A, "omega": w},
    )


def _quartic_hamiltonian():
    return HamiltonianSpec(
        name="quartic",
        eval=lambda x, t, p: 0.25 * np.power(p, 4) + 0.5 * np.square(p),
        deriv_p=lambda x, t, p: np.power(p, 3) + np.asarray(p, float),
        deriv_x=lambda x, t, p: np.zeros_like(np.asarray(p, float) + np.asarray(x, float) * 0.0),
        kind="numeric-conjugate",
        p_max=4.0,
    )


BUILTIN_HAMILTONIANS = {
    "burgers": _burgers_hamiltonian,
    "quadratic-forced": _forced_hamiltonian,
    "quartic": _quartic_hamiltonian,
}


def make_hamiltonian(name, **params) -> HamiltonianSpec:
    try:
        factory = BUILTIN_HAMILTONIANS[name]
    except KeyError:
        raise KeyError(f"unknown flux {name!r}; builtins: {sorted(BUILTIN_HAMILTONIANS)}")
    return factory(**params)


def make_model(name, c=0.0, h=0.0, **params) -> Model:
    H = make_hamiltonian(name, **params)
    return Model(hamiltonian=H, lagrangian=make_lagrangian(H, c=c, h=h))


# ---------------------------------------------------------------------------
# assumption checks and stability constants


@dataclass(frozen=True)
class SampleGrid:
    """Sampling lattice for assumption witnesses and the stability constants."""

    nx: int = 64
    nt: int = 64
    n_xi: int = 129
    p_max: float = 8.0
    xi_max: float = 8.0

    def xs(self):
        return np.linspace(0.0, 1.0, self.nx, endpoint=False)

    def ts(self):
        return np.linspace(0.0, 1.0, self.nt, endpoint=False)

    def ps(self):
        return np.linspace(-self.p_max, self.p_max, self.n_xi)

    def xis(self):
        return np.linspace(-self.xi_max, self.xi_max, self.n_xi)


@dataclass(frozen=True)
class AssumptionReport:
    """Sampled witnesses for the model assumptions (sampled, not proven)."""

    a2_min_curvature: float
    a2_witness: tuple
    a3_ratio_half: float
    a3_ratio_full: float
    alpha1_hat: float
    alpha1_witness: tuple
    periodic_x_defect: float
    periodic_t_defect: float
    grid: SampleGrid
    note: str = "sampled, not proven"


def _lattice(grid: SampleGrid, third):
    xs, ts = grid.xs(), grid.ts()
    X, T, Z = np.meshgrid(xs, ts, third, indexing="ij")
    return X, T, Z


def verify_assumptions(H: HamiltonianSpec, sample_grid: SampleGrid | None = None) -> AssumptionReport:
    """Check convexity, superlinearity, periodicity, and the L_x growth bound.

    Returns the witness report, or raises AssumptionViolated naming the
    failing clause and the witness point.  All checks are sampled on the
    lattice, so a pass is evidence rather than proof.
    """
    grid = sample_grid or SampleGrid(p_max=H.p_max, xi_max=H.p_max)
    if grid.n_xi < 3:
        raise ValueError("sample grid needs at least 3 momentum points")

    X, T, P = _lattice(grid, grid.ps())
    vals = H.eval(X, T, P)

    # periodicity to round-off
    defect_x = float(np.max(np.abs(H.eval(X + 1.0, T, P) - vals)))
    defect_t = float(np.max(np.abs(H.eval(X, T + 1.0, P) - vals)))
    scale = 1.0 + float(np.max(np.abs(vals)))
    for tag, defect in (("A1-periodic-x", defect_x), ("A1-periodic-t", defect_t)):
        if defect > 1e-9 * scale:
            raise AssumptionViolated(tag, ("lattice",), f"defect {defect:.3g}")

    # A2: second divided differences in p must be strictly positive
    dp = grid.ps()[1] - grid.ps()[0]
    curv = (vals[:, :, 2:] - 2.0 * vals[:, :, 1:-1] + vals[:, :, :-2]) / dp**2
    i = np.unravel_index(np.argmin(curv), curv.shape)
    a2_min = float(curv[i])
    a2_witness = (float(X[i[0], i[1], i[2] + 1]), float(T[i[0], i[1], i[2] + 1]), float(P[i[0], i[1], i[2] + 1]))
    if a2_min <= 0.0:
        raise AssumptionViolated("A2", a2_witness, f"min curvature {a2_min:.3g}")

    # A3: H/|p| must grow along the test ladder |p| in {p_max/2, p_max}
    def min_ratio(p_abs):
        ratios = []
        for sign in (-1.0, 1.0):
            p = sign * p_abs
            Xq, Tq = np.meshgrid(grid.xs(), grid.ts(), indexing="ij")
            ratios.append(np.min(H.eval(Xq, Tq, p) / p_abs))
        return float(min(ratios))

    r_half = min_ratio(grid.p_max / 2.0)
    r_full = min_ratio(grid.p_max)
    if not r_full > r_half:
        raise AssumptionViolated("A3", (grid.p_max,), f"ratio ladder {r_half:.3g} -> {r_full:.3g} does not grow")

    # A4 witness: alpha1_hat = max |L_x| / (|L| + 1) on the (x, t, xi) lattice
    lag = make_lagrangian(H)
    Xz, Tz, Z = _lattice(grid, grid.xis())
    L = lag.eval(Xz, Tz, Z)
    Lx = lag.deriv_x(Xz, Tz, Z)
    ratio = np.abs(Lx) / (np.abs(L) + 1.0)
    j = np.unravel_index(np.argmax(ratio), ratio.shape)
    alpha1_hat = float(ratio[j])
    alpha1_witness = (float(Xz[j]), float(Tz[j]), float(Z[j]))

    return AssumptionReport(
        a2_min_curvature=a2_min,
        a2_witness=a2_witness,
        a3_ratio_half=r_half,
        a3_ratio_full=r_full,
        alpha1_hat=alpha1_hat,
        alpha1_witness=alpha1_witness,
        periodic_x_defect=defect_x,
        periodic_t_defect=defect_t,
        grid=grid,
    )


@dataclass(frozen=True)
class CflEstimate:
    """Stability constants for a run horizon.

    ``slope_bound`` caps |H_p(x, t, c + u)| along stable runs and
    ``cfl_limit = 1/slope_bound`` is the admissible ceiling for
    lambda = dt/dx.  ``theta`` scales the O(dx) slack of the derivative
    sandwich estimates.
    """

    r: float
    T: float
    L_star: float
    alpha1: float
    alpha2: float
    alpha3: float
    theta: float
    slope_bound: float
    cfl_limit: float

    def __post_init__(self):
        if not self.slope_bound > 0.0:
            raise ValueError("slope_bound must be positive")
        if self.cfl_limit != 1.0 / self.slope_bound:
            raise ValueError("cfl_limit must equal 1/slope_bound exactly")


def cfl_estimate(H: HamiltonianSpec, c_range, r, T, sample_grid: SampleGrid | None = None) -> CflEstimate:
    """Evaluate the stability constants on a sampling lattice.

    c_range is the drift interval [c0, c1]; r bounds both the sup norm of
    the initial conserved data and of the initial potential; T is the run
    horizon.
    """
    if r < 0.0 or T <= 0.0:
        raise ValueError("need r >= 0 and T > 0")
    c0, c1 = float(min(c_range)), float(max(c_range))
    grid = sample_grid or SampleGrid(p_max=H.p_max, xi_max=H.p_max)
    lag = make_lagrangian(H)

    Xz, Tz, Z = _lattice(grid, grid.xis())
    L = lag.eval(Xz, Tz, Z)
    Lx = lag.deriv_x(Xz, Tz, Z)

    alpha1 = 0.0
    l_star_min = 0.0
    for c in {c0, c1}:
        Lc = L - c * Z
        alpha1 = max(alpha1, float(np.max(np.abs(Lx) / (np.abs(Lc) + 1.0))))
        l_star_min = min(l_star_min, float(np.min(Lc)))
    L_star = abs(min(0.0, l_star_min))

    Xq, Tq = np.meshgrid(grid.xs(), grid.ts(), indexing="ij")
    alpha2 = r + T * float(np.max(lag.eval(Xq, Tq, 0.0)))
    alpha3 = alpha1 * ((1.0 + 2.0 * L_star) * T + alpha2 + r)

    p_hi = c1 + 1.0 + r + alpha3
    p_lo = c0 - 1.0 - r - alpha3
    slope_bound = max(
        float(np.max(np.abs(hamiltonian_p(H, Xq, Tq, p_hi)))),
        float(np.max(np.abs(hamiltonian_p(H, Xq, Tq, p_lo)))),
    )

    xis = np.linspace(-slope_bound, slope_bound, grid.n_xi)
    Xs, Ts, Zs = _lattice(grid, xis)
    theta = T * float(np.max(lag.deriv_xx(Xs, Ts, Zs)))

    return CflEstimate(
        r=float(r), T=float(T), L_star=L_star,
        alpha1=alpha1, alpha2=alpha2, alpha3=alpha3, theta=theta,
        slope_bound=slope_bound, cfl_limit=1.0 / slope_bound,
    )
