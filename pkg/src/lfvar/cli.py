"""Command-line harness.

Subcommands: run, study, walk, char, verify.  Each reads the declarative
config file (-c) plus key=value overrides, writes RFC-4180 CSV tables and
JSON diagnostics stamped with the config hash and seed, and, unless
--no-figures is given, a PNG figure next to each table.

Exit codes: 0 success, 1 configuration/validation failure (with a
line-numbered diagnostic), 2 runtime stability violation.
"""

from __future__ import annotations

import argparse
import csv
import math
import os
import sys

import numpy as np

from . import figures
from .config import config_hash, load_config
from .errors import CflViolation, ConfigError, LfvarError
from .harness import build_data, build_model, characteristic_origin, fit_rate, mesh_for, run_study
from .model import cfl_estimate, verify_assumptions
from .oracle import hopf_lax_value
from .scheme import run, u_from_v
from .variational import ValueTable, characteristic
from .walk import Cone, ConeVelocityField, WalkEnsemble


def _parser():
    p = argparse.ArgumentParser(prog="lfvar", description=__doc__,
                                formatter_class=argparse.RawDescriptionHelpFormatter)
    sub = p.add_subparsers(dest="command", required=True)
    for name, doc in [
        ("run", "single solve; emit field snapshots and per-step monitors"),
        ("study", "mesh-ladder error study with rate fit"),
        ("walk", "ensemble diagnostics of one backward cone"),
        ("char", "characteristic extraction at the configured point"),
        ("verify", "assumption witnesses and stability constants"),
    ]:
        q = sub.add_parser(name, help=doc)
        q.add_argument("-c", "--config", default=None, help="config file (key = value lines)")
        q.add_argument("-o", "--output-dir", default=None, help="override the output directory")
        q.add_argument("--no-figures", action="store_true", help="skip PNG rendering")
        q.add_argument("overrides", nargs="*", help="key=value config overrides")
    return p


def _outdir(cfg, args):
    out = args.output_dir or os.environ.get("LFVAR_OUTPUT_DIR") or cfg.output_dir
    os.makedirs(out, exist_ok=True)
    return out


def _field_csv(path, field, meta):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        writer.writerow(["m", "x_m", "value"] + sorted(meta))
        for m, x, v in field.to_rows():
            writer.writerow([m, repr(x), repr(v)] + [str(meta[k]) for k in sorted(meta)])


def _monitor_csv(path, state, meta):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        writer.writerow(["k", "t_k", "mass", "max_slope"] + sorted(meta))
        for k, t, mass, slope in state.monitor_rows():
            writer.writerow([k, repr(t), repr(mass), repr(slope)] + [str(meta[k2]) for k2 in sorted(meta)])


def _stamp(cfg):
    return {"config_hash": config_hash(cfg), "seed": cfg.seed}


def _single_mesh_state(cfg, scheme):
    model = build_model(cfg)
    data = build_data(cfg)
    r = cfg.r if cfg.r is not None else max(data.r_bound, 1e-6)
    cfl = cfl_estimate(model.hamiltonian, (cfg.c, cfg.c), r, cfg.T)
    mesh = mesh_for(cfg, cfg.mesh_ladder[0], cfl.cfl_limit)
    return model, data, cfl, mesh, run(model, mesh, data.initial, cfg.T, scheme=scheme, cfl=cfl)


def _cmd_run(cfg, args):
    out = _outdir(cfg, args)
    _, _, _, mesh, state = _single_mesh_state(cfg, "both")
    meta = _stamp(cfg)
    k_last = state.n_levels - 1
    _field_csv(os.path.join(out, "u_final.csv"), state.u_history[k_last], meta)
    _field_csv(os.path.join(out, "v_final.csv"), state.v_history[k_last], meta)
    _monitor_csv(os.path.join(out, "monitors.csv"), state, meta)
    if not args.no_figures and cfg.figures:
        figures.run_figure(state, os.path.join(out, "run.png"))
    print(f"run: {k_last} steps on N={mesh.N}, K={mesh.K}; "
          f"max slope {max(r.max_slope for r in state.monitors):.6g} "
          f"<= bound {state.cfl.slope_bound:.6g}")
    return 0


def _cmd_study(cfg, args):
    out = _outdir(cfg, args)
    table = run_study(cfg)
    path = os.path.join(out, f"study_{cfg.study}.csv")
    table.to_csv(path, include_runtime=cfg.timings)
    if not args.no_figures and cfg.figures:
        figures.study_figure(table, os.path.join(out, f"study_{cfg.study}.png"))
    if table.rate is not None:
        print(f"study {cfg.study}: rate {table.rate:.3f} ± {table.rate_stderr:.3f} ({path})")
    else:
        print(f"study {cfg.study}: {table.note or 'no rate'} ({path})")
    for row in table.rows:
        print(f"  N={row.N:5d}  dx={row.dx:.6g}  error={row.error:.6g}")
    return 0


def _cmd_walk(cfg, args):
    out = _outdir(cfg, args)
    model = build_model(cfg)
    data = build_data(cfg)
    r = cfg.r if cfg.r is not None else max(data.r_bound, 1e-6)
    cfl = cfl_estimate(model.hamiltonian, (cfg.c, cfg.c), r, cfg.T)
    mesh = mesh_for(cfg, cfg.mesh_ladder[0], cfl.cfl_limit)
    depth = min(cfg.depth, 2 * mesh.K)
    origin_m = mesh.N + ((mesh.N + depth + 1) % 2)
    cone = Cone(mesh, origin_m, depth)
    if cfg.xi_field == "zero":
        field = ConeVelocityField.zeros(cone)
    else:
        field = ConeVelocityField.random(cone, np.random.default_rng(cfg.seed))
    mode = cfg.walk_mode if cfg.walk_mode != "recursion" else "enumerated"
    ens = WalkEnsemble.build(cone, field, mode=mode,
                             n_samples=cfg.n_samples if mode == "sampled" else None,
                             seed=cfg.seed)
    path = os.path.join(out, "ensemble.json")
    ens.save_json(path)
    if not args.no_figures and cfg.figures:
        figures.walk_figure(ens, os.path.join(out, "walk.png"))
    print(f"walk: depth {depth} cone at m={origin_m}; "
          f"max (mean-square gap - bound) = {float(np.max(ens.dispersion.mean_sq_gap - ens.dispersion.bound)):.3g} ({path})")
    return 0


def _cmd_char(cfg, args):
    out = _outdir(cfg, args)
    model, data, cfl, mesh, state = _single_mesh_state(cfg, "v")
    x_q, t_q = cfg.point
    m_near, l1 = characteristic_origin(mesh, x_q, t_q)
    table = ValueTable(mesh=mesh, model=model, fields=tuple(state.v_history[: l1 + 1]))
    char = characteristic(table, (m_near, l1), mode=cfg.walk_mode,
                          n_samples=cfg.n_samples, seed=cfg.seed,
                          slope_cap=cfl.slope_bound)
    line = None
    if cfg.model in ("burgers", "quartic"):
        x_o, t_o = float(mesh.x(m_near)), float(mesh.t(l1))
        ref = hopf_lax_value(data.v0_exact, model, x_o, t_o, cfl.slope_bound)
        line = ref.minimizer(char.times, x_o, t_o)
    meta = _stamp(cfg)
    path = os.path.join(out, "characteristic.csv")
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        writer.writerow(["k", "t_k", "expected_x", "stderr", "exact_x"] + sorted(meta))
        for k, (t, xk, se) in enumerate(zip(char.times, char.expected_xs, char.stderr)):
            exact = "" if line is None else repr(float(line[k]))
            writer.writerow([k, repr(float(t)), repr(float(xk)), repr(float(se)), exact]
                            + [str(meta[k2]) for k2 in sorted(meta)])
    if not args.no_figures and cfg.figures:
        figures.characteristic_figure(char, line, os.path.join(out, "characteristic.png"))
    gap = "" if line is None else f"; sup gap {float(np.max(np.abs(char.expected_xs - line))):.4g}"
    print(f"char: origin (m={m_near}, k={l1}) near (x={x_q}, t={t_q}){gap} ({path})")
    return 0


def _cmd_verify(cfg, args):
    model = build_model(cfg)
    data = build_data(cfg)
    report = verify_assumptions(model.hamiltonian)
    r = cfg.r if cfg.r is not None else max(data.r_bound, 1e-6)
    est = cfl_estimate(model.hamiltonian, (cfg.c, cfg.c), r, cfg.T)
    print(f"model {cfg.model}: assumptions pass ({report.note})")
    print(f"  min p-curvature      {report.a2_min_curvature:.6g} at {report.a2_witness}")
    print(f"  growth ratio ladder  {report.a3_ratio_half:.6g} -> {report.a3_ratio_full:.6g}")
    print(f"  alpha1 witness       {report.alpha1_hat:.6g} at {report.alpha1_witness}")
    print(f"  periodic defects     x: {report.periodic_x_defect:.3g}, t: {report.periodic_t_defect:.3g}")
    print(f"stability constants (r={r}, T={cfg.T}):")
    print(f"  alpha1={est.alpha1:.6g} alpha2={est.alpha2:.6g} alpha3={est.alpha3:.6g}")
    print(f"  L_star={est.L_star:.6g} theta={est.theta:.6g}")
    print(f"  slope_bound={est.slope_bound:.6g} cfl_limit={est.cfl_limit:.6g}")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "study": _cmd_study,
    "walk": _cmd_walk,
    "char": _cmd_char,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        cfg = load_config(args.config, args.overrides)
        return _COMMANDS[args.command](cfg, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 1
    except CflViolation as exc:
        print(f"stability violation: {exc}", file=sys.stderr)
        return 2
    except LfvarError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
