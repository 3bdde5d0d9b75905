"""Staggered space-time lattices, periodic grid fields, and initial data.

The mesh has dx = 1/(2N), dt = 1/(2K), lambda = dt/dx.  The conserved
variable lives on the even sub-lattice (m + k even), the potential on the
odd one (m + k odd).  At a fixed time level the valid spatial indices are
every other m, so a field stores N values with an offset that alternates
with k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import quad

from .errors import MeanNotZero, OutOfRange, ParityError, PeriodicityBroken

QUAD_TOL = 1e-10

EVEN = "even"
ODD = "odd"
_PBIT = {EVEN: 0, ODD: 1}


@dataclass(frozen=True)
class MeshSpec:
    """Uniform staggered mesh with 2N spatial points per period."""

    N: int
    K: int

    def __post_init__(self):
        if self.N < 1 or self.K < 1:
            raise ValueError("N and K must be positive integers")

    @property
    def dx(self):
        return 1.0 / (2 * self.N)

    @property
    def dt(self):
        return 1.0 / (2 * self.K)

    @property
    def lam(self):
        return self.dt / self.dx

    def x(self, m):
        return np.asarray(m) * self.dx

    def t(self, k):
        return np.asarray(k) * self.dt

    def wrap(self, m):
        return np.mod(m, 2 * self.N)

    def k_of(self, t):
        """Time cell index: t in [t_k, t_k + dt)."""
        if np.any(np.asarray(t) < 0):
            raise OutOfRange("negative time")
        return np.floor(np.asarray(t) / self.dt + 1e-12).astype(int)

    def steps_for(self, T):
        """Number of steps so the stored levels cover [0, T]."""
        return int(math.ceil(T / self.dt - 1e-12))


def locate(mesh: MeshSpec, x, t, parity=EVEN):
    """Cell indices (m, k) with x in [x_m, x_m + 2dx) among indices of the
    requested parity class and t in [t_k, t_k + dt).  x is reduced mod 1."""
    pbit = _PBIT[parity]
    xr = np.mod(np.asarray(x, float), 1.0)
    m = pbit + 2 * np.floor((xr / mesh.dx - pbit) / 2.0 + 1e-12).astype(int)
    return mesh.wrap(m), mesh.k_of(t)


class GridField:
    """Values on one parity class of one time level, periodic in m.

    Reads and writes go through ``value``/``set_value`` which reject
    indices of the wrong parity.  ``values`` exposes the N stored entries
    in increasing m order starting at ``m0``.
    """

    __slots__ = ("mesh", "parity", "k", "_vals")

    def __init__(self, mesh: MeshSpec, parity: str, k: int, values):
        if parity not in _PBIT:
            raise ValueError(f"parity must be 'even' or 'odd', got {parity!r}")
        vals = np.asarray(values, dtype=float)
        if vals.shape != (mesh.N,):
            raise ValueError(f"expected {mesh.N} values, got shape {vals.shape}")
        self.mesh = mesh
        self.parity = parity
        self.k = int(k)
        self._vals = vals

    @classmethod
    def zeros(cls, mesh, parity, k):
        return cls(mesh, parity, k, np.zeros(mesh.N))

    @classmethod
    def from_function(cls, mesh, parity, k, fn):
        field = cls.zeros(mesh, parity, k)
        return cls(mesh, parity, k, np.asarray(fn(field.xs(), mesh.t(k)), dtype=float))

    @property
    def m0(self):
        """Smallest valid m in [0, 2N)."""
        return (self.k + _PBIT[self.parity]) % 2

    @property
    def values(self):
        return self._vals

    def ms(self):
        return np.arange(self.m0, 2 * self.mesh.N, 2)

    def xs(self):
        return self.mesh.x(self.ms())

    def _slot(self, m):
        m = np.asarray(m)
        if np.any((m + self.k) % 2 != _PBIT[self.parity]):
            raise ParityError(f"index of wrong parity for {self.parity} field at k={self.k}")
        return (self.mesh.wrap(m) - self.m0) // 2

    def value(self, m):
        """Value at index m (any integer; wraps periodically)."""
        return self._vals[self._slot(m)]

    def with_values(self, values):
        return GridField(self.mesh, self.parity, self.k, values)

    def to_rows(self):
        """CSV-ready (m, x_m, value) triples."""
        return list(zip(self.ms().tolist(), self.xs().tolist(), self._vals.tolist()))


def save_history(path, fields: Sequence[GridField]):
    """Compact binary dump of a per-level field history."""
    mesh = fields[0].mesh
    np.savez_compressed(
        path,
        N=mesh.N, K=mesh.K,
        parity=fields[0].parity,
        ks=np.array([f.k for f in fields]),
        values=np.stack([f.values for f in fields]),
    )


def load_history(path):
    data = np.load(path, allow_pickle=False)
    mesh = MeshSpec(int(data["N"]), int(data["K"]))
    parity = str(data["parity"])
    return [GridField(mesh, parity, int(k), row) for k, row in zip(data["ks"], data["values"])]


class PiecewiseConstant:
    """Piecewise-constant function on the periodic unit interval.

    values[i] holds on [breaks[i], breaks[i+1]) with breaks sorted in
    [0, 1); the last piece wraps to breaks[0] + 1.  Integrals are exact.
    """

    def __init__(self, breaks, values):
        self.breaks = np.asarray(breaks, dtype=float)
        self.values = np.asarray(values, dtype=float)
        if self.breaks.ndim != 1 or self.breaks.shape != self.values.shape:
            raise ValueError("breaks and values must be 1-d and of equal length")
        if np.any(np.diff(self.breaks) <= 0) or self.breaks[0] < 0 or self.breaks[-1] >= 1:
            raise ValueError("breaks must be strictly increasing within [0, 1)")

    def __call__(self, x):
        xr = np.mod(np.asarray(x, float), 1.0)
        idx = np.searchsorted(self.breaks, xr, side="right") - 1
        return self.values[idx]  # xr < breaks[0] wraps to the last piece via idx=-1

    def mean(self):
        edges = np.append(self.breaks, self.breaks[0] + 1.0)
        return float(np.sum(self.values * np.diff(edges)))

    def integral(self, a, b):
        """Exact integral over [a, b] (b >= a, any reals)."""
        if b < a:
            return -self.integral(b, a)
        edges = np.append(self.breaks, self.breaks[0] + 1.0)
        total = 0.0
        # integrate period by period, splitting at breakpoints
        period_mean = self.mean()
        n_full = math.floor(b - a)
        total += n_full * period_mean
        a_frac = a
        b_frac = a + (b - a - n_full)
        pts = [a_frac]
        k0 = math.floor(a_frac - self.breaks[0])
        for shift in (k0, k0 + 1, k0 + 2):
            for e in edges[:-1] + shift:
                if a_frac < e < b_frac:
                    pts.append(e)
        pts.append(b_frac)
        pts = sorted(set(pts))
        for lo, hi in zip(pts[:-1], pts[1:]):
            total += float(self((lo + hi) / 2.0)) * (hi - lo)
        return total


def discretize_u0(mesh: MeshSpec, u0: Callable | PiecewiseConstant, quad_tol=QUAD_TOL, r=None) -> GridField:
    """Cell averages of u0 over [x_m - dx, x_m + dx) for even m at k = 0.

    u0 must have zero mean over the period (checked to quad_tol).  Declared
    piecewise-constant data is integrated exactly; smooth data goes through
    adaptive quadrature.
    """
    dx = mesh.dx
    ms = np.arange(0, 2 * mesh.N, 2)
    if isinstance(u0, PiecewiseConstant):
        mean = u0.mean()
        if abs(mean) > quad_tol:
            raise MeanNotZero(f"integral of u0 is {mean:.3g}")
        vals = np.array([u0.integral(m * dx - dx, m * dx + dx) / (2 * dx) for m in ms])
    else:
        mean, _ = quad(u0, 0.0, 1.0, epsabs=quad_tol, limit=200)
        if abs(mean) > quad_tol:
            raise MeanNotZero(f"integral of u0 is {mean:.3g}")
        vals = np.array([
            quad(u0, m * dx - dx, m * dx + dx, epsabs=quad_tol, limit=200)[0] / (2 * dx)
            for m in ms
        ])
    if r is not None and np.max(np.abs(vals)) > r + 1e-12:
        raise ValueError(f"cell averages exceed the declared bound r={r}")
    return GridField(mesh, EVEN, 0, vals)


def build_v0(mesh: MeshSpec, v0_at_0: float, u0_field: GridField) -> GridField:
    """Odd-grid initial potential: v0_at_0 plus the exact running integral
    of the piecewise-constant cell-average function.

    The loop around the torus must close (zero mean), else
    PeriodicityBroken.
    """
    if u0_field.parity != EVEN or u0_field.k != 0:
        raise ParityError("build_v0 needs the even-parity field at k = 0")
    u = u0_field.values
    dx = mesh.dx
    loop = float(np.sum(u) * 2 * dx)
    if abs(loop) > 1e-10:
        raise PeriodicityBroken(f"closed-loop integral is {loop:.3g}")
    # v at x_1 integrates half of cell 0; each further odd node adds one full cell
    vals = v0_at_0 + u[0] * dx + np.concatenate(([0.0], np.cumsum(u[1:] * 2 * dx)))
    return GridField(mesh, ODD, 0, vals)


def _level_interp(mesh: MeshSpec, field: GridField, x):
    """Linear interpolation in x on one time level of the odd lattice."""
    xr = np.mod(np.asarray(x, float), 1.0)
    pbit = field.m0 % 2
    pos = (xr / mesh.dx - pbit) / 2.0
    j = np.floor(pos + 1e-12).astype(int)
    frac = pos - j
    m_left = pbit + 2 * j
    left = field.value(m_left)
    right = field.value(m_left + 2)
    return left * (1.0 - frac) + right * frac


def interpolate_v(mesh: MeshSpec, v_history: Sequence[GridField], x, t):
    """Space-then-time linear interpolation of an odd-grid history.

    Interpolates in x on the two bracketing levels (the node pattern
    shifts by dx between levels) and then linearly in t.  Reproduces node
    values exactly.
    """
    t = np.asarray(t, float)
    last = len(v_history) - 1
    if np.any(t < -1e-12) or np.any(t > mesh.t(last) + 1e-12):
        raise OutOfRange(f"t outside stored history [0, {mesh.t(last)}]")
    tpos = np.clip(t / mesh.dt, 0.0, float(last))
    k = np.minimum(np.floor(tpos + 1e-12).astype(int), last)
    frac = tpos - k
    x = np.asarray(x, float)
    scalar = (t.ndim == 0 and x.ndim == 0)
    xb, kb, fb = np.broadcast_arrays(x, k, frac)
    out = np.empty(xb.shape, dtype=float)
    flat_x, flat_k, flat_f = xb.ravel(), kb.ravel(), fb.ravel()
    flat_out = out.ravel()
    for level in np.unique(flat_k):
        sel = flat_k == level
        lo = _level_interp(mesh, v_history[level], flat_x[sel])
        f = flat_f[sel]
        if level < last:
            hi = _level_interp(mesh, v_history[level + 1], flat_x[sel])
            flat_out[sel] = lo * (1.0 - f) + hi * f
        else:
            flat_out[sel] = lo
    return float(out) if scalar else out
