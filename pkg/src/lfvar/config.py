"""Declarative run/study configuration.

One flat ``key = value`` per line; ``#`` starts a comment; unknown keys
are errors carrying the line number.  Every CLI subcommand reads the same
schema and accepts ``key=value`` overrides after the flags.  The schema
below is the complete reference.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, fields
from typing import Optional

from .errors import ConfigError

STUDY_KINDS = ("v-error", "u-pointwise", "characteristic", "dispersion", "equivalence")
MODELS = ("burgers", "quadratic-forced", "quartic")
INITIALS = ("cosine", "sine", "riemann-shock", "riemann-rarefaction", "zero")
WALK_MODES = ("recursion", "enumerated", "sampled")
XI_FIELDS = ("zero", "random")


def _parse_bool(s):
    low = s.strip().lower()
    if low in ("true", "yes", "1", "on"):
        return True
    if low in ("false", "no", "0", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _parse_int_list(s):
    return tuple(int(tok) for tok in s.replace(",", " ").split())


def _parse_float_pair(s):
    vals = tuple(float(tok) for tok in s.replace(",", " ").split())
    if len(vals) != 2:
        raise ValueError("expected two comma-separated numbers")
    return vals


def _parse_float_or_auto(s):
    return None if s.strip().lower() == "auto" else float(s)


@dataclass(frozen=True)
class StudyConfig:
    """Typed configuration; defaults give a small smoke study."""

    study: str = "v-error"
    model: str = "burgers"
    amplitude: float = 0.25          # forcing amplitude (quadratic-forced only)
    omega: float = 1.0               # forcing speed (quadratic-forced only)
    c: float = 0.0                   # drift parameter
    h: float = 0.0                   # potential offset rate
    initial: str = "cosine"
    initial_amplitude: float = 1.0
    mesh_ladder: tuple = (16, 32, 64, 128)
    lambda_frac: float = 0.8         # lambda target as a fraction of the cfl limit
    lambda0: float = 0.01            # lower scaling band edge
    T: float = 0.1
    r: Optional[float] = None        # None = derive from the data
    walk_mode: str = "recursion"
    n_samples: int = 10000
    seed: int = 20240817
    point: tuple = (0.3, 0.1)        # query point of characteristic studies
    depth: int = 8                   # cone depth of dispersion studies
    xi_field: str = "zero"           # velocity field of dispersion studies
    exclusion_radius: Optional[float] = None  # None = 10 * coarsest dx
    u_samples: int = 512             # spatial samples of u-pointwise studies
    sample_nx: int = 64
    sample_nt: int = 64
    output_dir: str = "out"
    figures: bool = True
    timings: bool = False            # wall-clock column breaks byte-determinism

    def require(self, cond, message):
        if not cond:
            raise ConfigError(message)


_PARSERS = {
    "study": str,
    "model": str,
    "amplitude": float,
    "omega": float,
    "c": float,
    "h": float,
    "initial": str,
    "initial_amplitude": float,
    "mesh_ladder": _parse_int_list,
    "lambda_frac": float,
    "lambda0": float,
    "T": float,
    "r": _parse_float_or_auto,
    "walk_mode": str,
    "n_samples": int,
    "seed": int,
    "point": _parse_float_pair,
    "depth": int,
    "xi_field": str,
    "exclusion_radius": _parse_float_or_auto,
    "u_samples": int,
    "sample_nx": int,
    "sample_nt": int,
    "output_dir": str,
    "figures": _parse_bool,
    "timings": _parse_bool,
}

_CHOICES = {
    "study": STUDY_KINDS,
    "model": MODELS,
    "initial": INITIALS,
    "walk_mode": WALK_MODES,
    "xi_field": XI_FIELDS,
}


def parse_config_text(text, source="<config>"):
    """Parse key = value lines into a raw string mapping (line-checked)."""
    raw = {}
    for lineno, line in enumerate(text.splitlines(), start=1):
        body = line.split("#", 1)[0].strip()
        if not body:
            continue
        if "=" not in body:
            raise ConfigError(f"expected 'key = value' in {source}", line=lineno)
        key, value = (part.strip() for part in body.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r} in {source}", line=lineno, key=key)
        if key in raw:
            raise ConfigError(f"duplicate key {key!r} in {source}", line=lineno, key=key)
        raw[key] = (value, lineno)
    return raw


def build_config(raw, overrides=None) -> StudyConfig:
    """Typed config from a raw mapping plus untracked CLI overrides."""
    values = {}
    for key, (text, lineno) in raw.items():
        try:
            values[key] = _PARSERS[key](text)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", line=lineno, key=key)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, text = (part.strip() for part in item.split("=", 1))
        if key not in _PARSERS:
            raise ConfigError(f"unknown key {key!r}", key=key)
        try:
            values[key] = _PARSERS[key](text)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}", key=key)
    cfg = StudyConfig(**values)
    _validate(cfg)
    return cfg


def load_config(path=None, overrides=None) -> StudyConfig:
    raw = {}
    if path is not None:
        with open(path) as fh:
            raw = parse_config_text(fh.read(), source=str(path))
    return build_config(raw, overrides)


def _validate(cfg: StudyConfig):
    for key, choices in _CHOICES.items():
        val = getattr(cfg, key)
        if val not in choices:
            raise ConfigError(f"{key} must be one of {choices}, got {val!r}", key=key)
    if not cfg.mesh_ladder or any(n < 1 for n in cfg.mesh_ladder):
        raise ConfigError("mesh_ladder needs positive integers", key="mesh_ladder")
    if cfg.T <= 0:
        raise ConfigError("T must be positive", key="T")
    if not 0.0 < cfg.lambda_frac < 1.0:
        raise ConfigError("lambda_frac must lie in (0, 1)", key="lambda_frac")
    if cfg.lambda0 <= 0.0:
        raise ConfigError("lambda0 must be positive", key="lambda0")
    if cfg.n_samples < 2:
        raise ConfigError("n_samples must be at least 2", key="n_samples")
    if cfg.depth < 1:
        raise ConfigError("depth must be at least 1", key="depth")
    if not 0.0 < cfg.point[1]:
        raise ConfigError("the query point needs t > 0", key="point")


def canonical_items(cfg: StudyConfig):
    out = []
    for f in fields(cfg):
        val = getattr(cfg, f.name)
        if isinstance(val, tuple):
            val = ",".join(repr(v) for v in val)
        out.append((f.name, repr(val) if not isinstance(val, str) else val))
    return out


def config_hash(cfg: StudyConfig) -> str:
    blob = "\n".join(f"{k}={v}" for k, v in canonical_items(cfg))
    return hashlib.sha256(blob.encode()).hexdigest()[:12]
