"""Backward random-walk cones on the odd lattice.

A walk starts at an odd-grid origin (x_n, t_{l+1}) and moves by one
spatial step per backward time step, so level k of the cone holds the
l+2-k reachable nodes.  A velocity field xi on the cone levels 1..l+1
controls the two transition probabilities

    p_plus  = (1 - lambda*xi)/2   (backward step +dx)
    p_minus = (1 + lambda*xi)/2   (backward step -dx)

whose expected backward displacement per step is -xi*dt.  The product of
transition probabilities along a path is its density; the per-level
occupation probabilities satisfy a backward recursion equivalent to full
path enumeration.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import DepthTooLarge, InvalidPath, LfvarError, RangeViolation
from .grid import MeshSpec

ENUM_DEPTH_MAX = 22
CLAMP_TOL = 1e-14
_CHUNK_BITS = 16


@dataclass(frozen=True)
class Cone:
    """Backward cone of an odd-grid origin (origin_m, origin_k)."""

    mesh: MeshSpec
    origin_m: int
    origin_k: int

    def __post_init__(self):
        if self.origin_k < 1:
            raise ValueError("cone origin must sit at a positive time level")
        if (self.origin_m + self.origin_k) % 2 != 1:
            raise ValueError("cone origin must lie on the odd lattice (m + k odd)")

    @property
    def depth(self):
        return self.origin_k

    def level_ms(self, k):
        """Node indices of level k (universal cover; may leave [0, 2N))."""
        if not 0 <= k <= self.depth:
            raise ValueError(f"level {k} outside cone of depth {self.depth}")
        half = self.depth - k
        return np.arange(self.origin_m - half, self.origin_m + half + 1, 2)

    def level_size(self, k):
        return self.depth - k + 1

    @property
    def n_field_nodes(self):
        """Nodes carrying velocity values (levels 1..depth)."""
        return self.depth * (self.depth + 1) // 2

    def origin_x(self):
        return self.mesh.x(self.origin_m)


class ConeVelocityField:
    """Velocity values on cone levels 1..depth, clamped to [-1/lambda, 1/lambda].

    Values within CLAMP_TOL of the band edge are clamped; larger excursions
    raise RangeViolation.
    """

    __slots__ = ("cone", "_levels")

    def __init__(self, cone: Cone, levels):
        bound = 1.0 / cone.mesh.lam
        store = [None]  # level 0 carries no velocities
        for k in range(1, cone.depth + 1):
            vals = np.asarray(levels[k], dtype=float)
            if vals.shape != (cone.level_size(k),):
                raise ValueError(f"level {k} needs {cone.level_size(k)} values")
            excess = np.max(np.abs(vals)) - bound
            if excess > CLAMP_TOL * max(1.0, bound):
                raise RangeViolation(f"|xi| exceeds 1/lambda = {bound:.6g} by {excess:.3g}")
            store.append(np.clip(vals, -bound, bound))
        self._levels = store
        self.cone = cone

    @classmethod
    def constant(cls, cone: Cone, value: float):
        return cls(cone, {k: np.full(cone.level_size(k), float(value)) for k in range(1, cone.depth + 1)})

    @classmethod
    def zeros(cls, cone: Cone):
        return cls.constant(cone, 0.0)

    @classmethod
    def from_function(cls, cone: Cone, fn: Callable):
        """fn(x_m array, t_k) per level."""
        mesh = cone.mesh
        return cls(cone, {
            k: np.asarray(fn(mesh.x(cone.level_ms(k)), mesh.t(k)), dtype=float)
            for k in range(1, cone.depth + 1)
        })

    @classmethod
    def random(cls, cone: Cone, rng: np.random.Generator, scale=1.0):
        bound = scale / cone.mesh.lam
        return cls(cone, {
            k: rng.uniform(-bound, bound, cone.level_size(k))
            for k in range(1, cone.depth + 1)
        })

    def level(self, k):
        return self._levels[k]

    def at_slots(self, k, slots):
        return self._levels[k][slots]

    def xi(self, k, m):
        base = self.cone.origin_m - (self.cone.depth - k)
        return self._levels[k][(np.asarray(m) - base) // 2]


def transition_probs(xi, lam):
    """(p_plus, p_minus) for a backward step of +dx / -dx."""
    xi = np.asarray(xi, dtype=float)
    lx = lam * xi
    if np.max(np.abs(lx)) > 1.0 + 1e-14:
        raise RangeViolation(f"|lambda*xi| = {float(np.max(np.abs(lx))):.16g} exceeds 1")
    lx = np.clip(lx, -1.0, 1.0)
    return 0.5 * (1.0 - lx), 0.5 * (1.0 + lx)


@dataclass(frozen=True)
class WalkPath:
    """One backward path, stored as node indices per level (0..depth)."""

    cone: Cone
    positions_m: np.ndarray

    def __post_init__(self):
        pos = np.asarray(self.positions_m, dtype=int)
        if pos.shape != (self.cone.depth + 1,):
            raise InvalidPath(f"need {self.cone.depth + 1} positions")
        if pos[-1] != self.cone.origin_m:
            raise InvalidPath("path must end at the cone origin")
        if np.any(np.abs(np.diff(pos)) != 1):
            raise InvalidPath("consecutive positions must differ by one spatial step")
        object.__setattr__(self, "positions_m", pos)

    def xs(self):
        return self.cone.mesh.x(self.positions_m)


def path_density(cone: Cone, field: ConeVelocityField, path: WalkPath):
    """Product of the per-step transition probabilities along the path."""
    lam = cone.mesh.lam
    mu = 1.0
    pos = path.positions_m
    for k in range(cone.depth, 0, -1):
        xi = float(field.xi(k, pos[k]))
        p_plus, p_minus = transition_probs(xi, lam)
        mu *= p_plus if pos[k - 1] == pos[k] + 1 else p_minus
    return float(mu)


def _slot_matrix(cone: Cone, pos_m):
    """Column k of pos_m (node indices) -> slots into level-k arrays."""
    slots = np.empty_like(pos_m)
    for k in range(cone.depth + 1):
        base = cone.origin_m - (cone.depth - k)
        slots[:, k] = (pos_m[:, k] - base) // 2
    return slots


def _enumerate_chunks(cone: Cone, field: ConeVelocityField):
    """Yield (positions_m, densities) over all sign sequences, chunked."""
    d = cone.depth
    lam = cone.mesh.lam
    total = 1 << d
    chunk = min(total, 1 << _CHUNK_BITS)
    # per-level transition probabilities, indexed by slot
    probs = [None] + [transition_probs(field.level(k), lam) for k in range(1, d + 1)]
    for start in range(0, total, chunk):
        codes = np.arange(start, min(start + chunk, total), dtype=np.int64)
        # bit j of the code decides the step from level j+1 down to level j
        signs = np.empty((codes.size, d), dtype=np.int64)
        for j in range(d):
            signs[:, j] = 1 - 2 * ((codes >> j) & 1)
        pos = np.empty((codes.size, d + 1), dtype=np.int64)
        pos[:, d] = cone.origin_m
        for j in range(d - 1, -1, -1):
            pos[:, j] = pos[:, j + 1] + signs[:, j]
        mu = np.ones(codes.size)
        for k in range(1, d + 1):
            base = cone.origin_m - (d - k)
            slots = (pos[:, k] - base) // 2
            p_plus, p_minus = probs[k]
            mu *= np.where(signs[:, k - 1] == 1, p_plus[slots], p_minus[slots])
        yield pos, mu


def _sample_paths(cone: Cone, field: ConeVelocityField, n_samples: int, rng: np.random.Generator):
    """Draw i.i.d. paths; one uniform per backward step."""
    d = cone.depth
    lam = cone.mesh.lam
    pos = np.empty((n_samples, d + 1), dtype=np.int64)
    pos[:, d] = cone.origin_m
    for k in range(d, 0, -1):
        base = cone.origin_m - (d - k)
        slots = (pos[:, k] - base) // 2
        p_plus, _ = transition_probs(field.at_slots(k, slots), lam)
        u = rng.random(n_samples)
        pos[:, k - 1] = pos[:, k] + np.where(u < p_plus, 1, -1)
    return pos


def occupation_probs(cone: Cone, field: ConeVelocityField):
    """Per-level occupation probabilities, origin seeded with mass one.

    Backward recursion: each node at level k feeds p_minus of its mass to
    the node one step left at level k-1 and p_plus one step right.
    """
    lam = cone.mesh.lam
    probs = [None] * (cone.depth + 1)
    probs[cone.depth] = np.array([1.0])
    for k in range(cone.depth, 0, -1):
        p_plus, p_minus = transition_probs(field.level(k), lam)
        nxt = np.zeros(cone.level_size(k - 1))
        cur = probs[k]
        nxt[:-1] += cur * p_minus
        nxt[1:] += cur * p_plus
        probs[k - 1] = nxt
    return probs


@dataclass(frozen=True)
class ExpectationResult:
    value: float
    stderr: float
    mode: str
    n_paths: int

    def __float__(self):
        return self.value


def expectation(cone: Cone, field: ConeVelocityField, f: Callable,
                mode: str = "enumerated", n_samples: Optional[int] = None,
                seed: Optional[int] = None) -> ExpectationResult:
    """Expectation of a path functional under the walk measure.

    f maps a (n_paths, depth+1) array of positions (x values, universal
    cover) to n_paths functional values.  Enumerated mode is the exact
    weighted sum (depth capped at ENUM_DEPTH_MAX); sampled mode reports
    the empirical mean and its standard error.
    """
    if mode == "enumerated":
        if cone.depth > ENUM_DEPTH_MAX:
            raise DepthTooLarge(f"depth {cone.depth} exceeds enumeration cap {ENUM_DEPTH_MAX}")
        acc = 0.0
        for pos, mu in _enumerate_chunks(cone, field):
            acc += float(np.sum(mu * np.asarray(f(cone.mesh.x(pos)), dtype=float)))
        return ExpectationResult(acc, 0.0, "enumerated", 1 << cone.depth)
    if mode == "sampled":
        if not n_samples or n_samples < 2:
            raise ValueError("sampled mode needs n_samples >= 2")
        rng = np.random.default_rng(seed)
        pos = _sample_paths(cone, field, n_samples, rng)
        vals = np.asarray(f(cone.mesh.x(pos)), dtype=float)
        return ExpectationResult(
            float(np.mean(vals)),
            float(np.std(vals, ddof=1) / np.sqrt(n_samples)),
            "sampled", n_samples,
        )
    raise ValueError(f"unknown mode {mode!r}")


def eta_process(path: WalkPath, field: ConeVelocityField):
    """Drift integral along one path: eta^k = x_origin - sum_{k'>k} xi(path) dt."""
    cone = path.cone
    dt = cone.mesh.dt
    eta = np.empty(cone.depth + 1)
    eta[cone.depth] = cone.origin_x()
    acc = 0.0
    for k in range(cone.depth, 0, -1):
        acc += float(field.xi(k, path.positions_m[k])) * dt
        eta[k - 1] = cone.origin_x() - acc
    return eta


def _eta_matrix(cone: Cone, field: ConeVelocityField, pos_m):
    """eta per path for a (n, depth+1) position matrix."""
    dt = cone.mesh.dt
    n = pos_m.shape[0]
    eta = np.empty((n, cone.depth + 1))
    eta[:, cone.depth] = cone.origin_x()
    acc = np.zeros(n)
    for k in range(cone.depth, 0, -1):
        base = cone.origin_m - (cone.depth - k)
        slots = (pos_m[:, k] - base) // 2
        acc += field.at_slots(k, slots) * dt
        eta[:, k - 1] = cone.origin_x() - acc
    return eta


class DispersionViolation(LfvarError):
    """The walk/drift gap moments broke their proven inequalities."""


@dataclass(frozen=True)
class DispersionStats:
    """Per-level moments of |gamma^k - eta^k| and the a-priori bound."""

    mean_sq_gap: np.ndarray   # E |gamma - eta|^2 per level
    mean_abs_gap: np.ndarray  # E |gamma - eta| per level
    bound: np.ndarray         # (t_{depth} - t_k) * dx / lambda
    mode: str
    n_paths: int


def dispersion_stats(cone: Cone, field: ConeVelocityField, mode="enumerated",
                     n_samples=None, seed=None, check=True, tol=1e-12) -> DispersionStats:
    """Both gap moments per level plus the bound (depth-k)*dx^2.

    With check=True the Cauchy-Schwarz and upper-bound inequalities are
    asserted to tolerance.
    """
    d = cone.depth
    mesh = cone.mesh
    if mode == "enumerated":
        if d > ENUM_DEPTH_MAX:
            raise DepthTooLarge(f"depth {d} exceeds enumeration cap {ENUM_DEPTH_MAX}")
        sq = np.zeros(d + 1)
        ab = np.zeros(d + 1)
        n_paths = 1 << d
        for pos, mu in _enumerate_chunks(cone, field):
            gap = np.abs(mesh.x(pos) - _eta_matrix(cone, field, pos))
            sq += mu @ gap**2
            ab += mu @ gap
    elif mode == "sampled":
        if not n_samples or n_samples < 2:
            raise ValueError("sampled mode needs n_samples >= 2")
        rng = np.random.default_rng(seed)
        pos = _sample_paths(cone, field, n_samples, rng)
        gap = np.abs(mesh.x(pos) - _eta_matrix(cone, field, pos))
        sq = np.mean(gap**2, axis=0)
        ab = np.mean(gap, axis=0)
        n_paths = n_samples
    else:
        raise ValueError(f"unknown mode {mode!r}")

    ks = np.arange(d + 1)
    bound = (mesh.t(d) - mesh.t(ks)) * mesh.dx / mesh.lam
    if check:
        if np.any(ab**2 > sq + tol):
            raise DispersionViolation("mean-abs squared exceeds mean-square")
        if mode == "enumerated" and np.any(sq > bound + tol):
            raise DispersionViolation("mean-square gap exceeds the a-priori bound")
    return DispersionStats(mean_sq_gap=sq, mean_abs_gap=ab, bound=bound, mode=mode, n_paths=n_paths)


@dataclass(frozen=True)
class WalkEnsemble:
    """Occupation and dispersion diagnostics of one cone/field pair."""

    cone: Cone
    field: ConeVelocityField
    mode: str
    n_samples: Optional[int]
    seed: Optional[int]
    occupation: list
    dispersion: DispersionStats

    @classmethod
    def build(cls, cone, field, mode="enumerated", n_samples=None, seed=None):
        return cls(
            cone=cone, field=field, mode=mode, n_samples=n_samples, seed=seed,
            occupation=occupation_probs(cone, field),
            dispersion=dispersion_stats(cone, field, mode=mode, n_samples=n_samples, seed=seed),
        )

    def total_mass(self):
        """Sum of path densities (enumerated); equals 1 by construction."""
        return sum(float(np.sum(mu)) for _, mu in _enumerate_chunks(self.cone, self.field))

    def to_json_dict(self):
        d = self.dispersion
        return {
            "origin": [int(self.cone.origin_m), int(self.cone.origin_k)],
            "depth": int(self.cone.depth),
            "N": int(self.cone.mesh.N),
            "K": int(self.cone.mesh.K),
            "mode": self.mode,
            "seed": self.seed,
            "n_samples": self.n_samples,
            "occupation": [p.tolist() for p in self.occupation],
            "mean_sq_gap": d.mean_sq_gap.tolist(),
            "mean_abs_gap": d.mean_abs_gap.tolist(),
            "bound": d.bound.tolist(),
        }

    def save_json(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
