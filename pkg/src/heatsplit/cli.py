"""Command-line front end: mesh-check, run, convergence, weak-error.

Configuration is a flat ``key = value`` file; command-line flags override
file values.  Every CSV starts with ``#``-prefixed provenance lines echoing
the fully resolved configuration, the seed and the package version, so a
run can be reproduced from its output alone.

Exit codes: 0 success, 1 failed nonnegativity certification under
``--strict`` (or a non-acute mesh in ``mesh-check``), 2 configuration errors.
"""

from __future__ import annotations

import argparse
import math
import sys

import heatsplit
from heatsplit.experiments import DEFAULT_MASTER_SEED, StudyConfig, run_study
from heatsplit.fem import assemble, dump_operators
from heatsplit.mesh import build_uniform_unit_square, check_weak_acuteness
from heatsplit.noise import basis_for_mesh, sample_paths
from heatsplit.nonlinearity import from_config
from heatsplit.propagator import build_propagator, certify_nonnegative
from heatsplit.scheme import SchemeConfig, run_scheme

__all__ = ["main"]


class ConfigError(Exception):
    pass


_STUDY_KEYS = {
    "study",
    "n_ref",
    "m_ref",
    "sweep",
    "realizations",
    "t_final",
    "k_modes",
    "nonlinearity",
    "lambda",
    "delta",
    "g_cap",
    "master_seed",
    "workers",
    "block_size",
    "rel_error_fit_cutoff",
}


def read_config(path: str) -> dict:
    """Parse a flat key=value file; '#' starts a comment."""
    values = {}
    try:
        lines = open(path).read().splitlines()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    for lineno, raw in enumerate(lines, 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in _STUDY_KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = value
    return values


def _build_nonlinearity(values: dict):
    name = values.get("nonlinearity", "reg_sqrt")
    g_cap = float(values["g_cap"]) if "g_cap" in values else None
    try:
        return from_config(
            name,
            lam=float(values.get("lambda", 1.0)),
            delta=float(values.get("delta", 0.1)),
            g_cap=g_cap,
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _study_config(vary: str, values: dict) -> StudyConfig:
    kwargs = {"vary": vary, "nonlinearity": _build_nonlinearity(values)}
    int_keys = {"n_ref", "m_ref", "realizations", "k_modes", "master_seed", "workers", "block_size"}
    float_keys = {"t_final", "rel_error_fit_cutoff"}
    for key, value in values.items():
        if key in {"nonlinearity", "lambda", "delta", "g_cap", "study"}:
            continue
        try:
            if key == "sweep":
                kwargs["sweep"] = tuple(int(v) for v in value.split(","))
            elif key in int_keys:
                kwargs[key] = int(value)
            elif key in float_keys:
                kwargs[key] = float(value)
        except ValueError as exc:
            raise ConfigError(f"config key {key!r}: {exc}") from exc
    try:
        return StudyConfig(**kwargs)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def _provenance_lines(items: dict) -> list[str]:
    lines = [f"# heatsplit_version={heatsplit.__version__}"]
    lines.extend(f"# {key}={items[key]}" for key in sorted(items))
    return lines


def _fmt(value) -> str:
    if isinstance(value, float):
        return f"{value:.17g}"
    return str(value)


def _write_csv(path: str, provenance: dict, columns: list[str], rows: list[tuple]) -> None:
    with open(path, "w") as fh:
        for line in _provenance_lines(provenance):
            fh.write(line + "\n")
        fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _cmd_mesh_check(args) -> int:
    mesh = build_uniform_unit_square(args.n)
    report = check_weak_acuteness(mesh)
    print(f"n={args.n}")
    print(f"n_vertices={len(mesh.vertices)}")
    print(f"n_triangles={len(mesh.triangles)}")
    print(f"n_h={mesh.n_h}")
    print(f"h={mesh.h:.17g}")
    for line in report.as_lines():
        print(line)

    ops = assemble(mesh)
    prop = build_propagator(ops, args.tau, mesh.label)
    cert = certify_nonnegative(prop)
    print(f"tau={args.tau:.17g}")
    for line in cert.as_lines():
        print(line)
    if args.dump_operators:
        dump_operators(ops, args.dump_operators)
    if args.dump_propagator:
        _dump_propagator(prop, args.dump_propagator)
    return 0 if (report.is_weakly_acute and cert.passed) else 1


def _dump_propagator(prop, path: str) -> None:
    with open(path, "w") as fh:
        n = prop.matrix.shape[0]
        fh.write(f"# {n} {n} {n * n}\n")
        for i in range(n):
            for j in range(n):
                fh.write(f"{i} {j} {prop.matrix[i, j]:.17g}\n")


def _cmd_run(args) -> int:
    if args.m_steps < 1:
        raise ConfigError("--m-steps must be >= 1")
    n_mode = math.isqrt(args.k_modes)
    if n_mode * n_mode != args.k_modes:
        raise ConfigError(f"--k-modes must be a perfect square (got {args.k_modes})")
    nl = from_config(args.nonlinearity, lam=args.lam, delta=args.delta, g_cap=args.g_cap)

    mesh = build_uniform_unit_square(args.n)
    ops = assemble(mesh)
    basis = basis_for_mesh(n_mode, mesh)
    prop = build_propagator(ops, args.t_final / args.m_steps, mesh.label)
    cert = certify_nonnegative(prop)
    for line in cert.as_lines():
        print(line)
    if args.strict and not cert.passed:
        print("nonnegativity certification failed and --strict is set", file=sys.stderr)
        return 1

    record = {"all": "all_steps", "norms": "norms_only", "final": "final_only"}[args.record]
    cfg = SchemeConfig(
        mesh=mesh,
        ops=ops,
        propagator=prop,
        nonlinearity=nl,
        basis=basis,
        m_steps=args.m_steps,
        t_final=args.t_final,
        record_mode=record,
    )
    store = sample_paths(args.seed, args.realizations, args.k_modes, args.m_steps, args.t_final)

    rows = []
    for r in range(args.realizations):
        traj = run_scheme(cfg, store, r)
        step_range = [args.m_steps] if record == "final_only" else range(args.m_steps + 1)
        overflow_steps = {step for step, _ in traj.overflow_events}
        for m in step_range:
            rows.append(
                (r, m, traj.times[m], traj.l2_norms[m], traj.h_norms[m], traj.min_values[m],
                 int(m in overflow_steps))
            )

    provenance = {
        "command": "run",
        "n": args.n,
        "m_steps": args.m_steps,
        "t_final": args.t_final,
        "k_modes": args.k_modes,
        "seed": args.seed,
        "realizations": args.realizations,
        "record": args.record,
        **nl.config_items(),
    }
    _write_csv(args.out, provenance,
               ["realization", "step", "time", "l2_norm", "h_norm", "min_value", "overflow"], rows)
    if args.dump_operators:
        dump_operators(ops, args.dump_operators)
    if args.dump_propagator:
        _dump_propagator(prop, args.dump_propagator)
    print(f"wrote {args.out}")
    return 0


def _study_rows(table) -> list[tuple]:
    return [
        (r.param_kind, r.param_value, r.error, r.std_error, r.rel_error, r.ref_norm)
        for r in table.rows
    ]


def _cmd_convergence(args) -> int:
    values = read_config(args.config) if args.config else {}
    if args.seed is not None:
        values["master_seed"] = str(args.seed)
    if args.workers is not None:
        values["workers"] = str(args.workers)
    cfg = _study_config(args.vary, values)

    result = run_study(cfg)
    if args.strict and not result.all_certificates_pass:
        print("nonnegativity certification failed and --strict is set", file=sys.stderr)
        return 1

    rows = _study_rows(result.strong)
    if result.strong.fit is not None:
        fit = result.strong.fit
        rows.append(("slope", fit.slope, fit.intercept, fit.residual, "", ""))
    worst_cert = min(c.min_entry for c in result.certificates.values())
    provenance = {
        "command": f"convergence --vary {args.vary}",
        "certificate_min_entry": _fmt(worst_cert),
        "certificates_pass": result.all_certificates_pass,
        "crn_max_deviation": _fmt(result.crn_max_deviation),
        **cfg.config_items(),
    }
    _write_csv(args.out, provenance,
               ["param_kind", "param_value", "error", "std_error", "rel_error", "ref_norm"], rows)
    print(f"wrote {args.out}")
    if result.strong.fit is not None:
        print(f"fitted_slope={result.strong.fit.slope:.6g}")
    return 0


def _cmd_weak_error(args) -> int:
    values = read_config(args.config) if args.config else {}
    if args.seed is not None:
        values["master_seed"] = str(args.seed)
    if args.workers is not None:
        values["workers"] = str(args.workers)
    vary = "time" if values.get("study", "temporal") == "temporal" else "space"
    cfg = _study_config(vary, values)

    result = run_study(cfg)
    provenance = {
        "command": "weak-error",
        "functional": "squared_l2_norm_at_final_time",
        **cfg.config_items(),
    }
    _write_csv(args.out, provenance,
               ["param_kind", "param_value", "error", "std_error", "rel_error", "ref_norm"],
               _study_rows(result.weak))
    print(f"wrote {args.out}")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="heatsplit",
        description="Nonnegativity-preserving splitting solver for the stochastic heat equation",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    mc = sub.add_parser("mesh-check", help="check weak acuteness and the propagator certificate")
    mc.add_argument("--n", type=int, required=True, help="subdivisions per side")
    mc.add_argument("--tau", type=float, default=2.0**-6, help="time step for the certificate")
    mc.add_argument("--dump-operators", metavar="DIR", help="write M, M_L, S as text triplets")
    mc.add_argument("--dump-propagator", metavar="FILE", help="write the propagator as text triplets")
    mc.set_defaults(func=_cmd_mesh_check)

    run = sub.add_parser("run", help="run seeded trajectories and write per-step norms")
    run.add_argument("--n", type=int, required=True)
    run.add_argument("--m-steps", type=int, required=True)
    run.add_argument("--t-final", type=float, default=0.5)
    run.add_argument("--k-modes", type=int, default=4)
    run.add_argument("--nonlinearity", default="reg_sqrt",
                     choices=["linear", "reg_sqrt", "half_sqrt", "zero"])
    run.add_argument("--lambda", dest="lam", type=float, default=1.0)
    run.add_argument("--delta", type=float, default=0.1)
    run.add_argument("--g-cap", type=float, default=None)
    run.add_argument("--seed", type=int, default=DEFAULT_MASTER_SEED)
    run.add_argument("--realizations", type=int, default=1)
    run.add_argument("--record", choices=["all", "norms", "final"], default="norms")
    run.add_argument("--out", required=True)
    run.add_argument("--strict", action="store_true",
                     help="exit 1 if the nonnegativity certificate fails")
    run.add_argument("--dump-operators", metavar="DIR")
    run.add_argument("--dump-propagator", metavar="FILE")
    run.set_defaults(func=_cmd_run)

    conv = sub.add_parser("convergence", help="strong-error convergence study")
    conv.add_argument("--vary", choices=["time", "space"], required=True)
    conv.add_argument("--config", help="flat key=value config file")
    conv.add_argument("--out", required=True)
    conv.add_argument("--seed", type=int, default=None, help="override master_seed")
    conv.add_argument("--workers", type=int, default=None)
    conv.add_argument("--strict", action="store_true")
    conv.set_defaults(func=_cmd_convergence)

    weak = sub.add_parser("weak-error", help="weak-error study with common random numbers")
    weak.add_argument("--config", help="flat key=value config file")
    weak.add_argument("--out", required=True)
    weak.add_argument("--seed", type=int, default=None)
    weak.add_argument("--workers", type=int, default=None)
    weak.set_defaults(func=_cmd_weak_error)

    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
