"""Experiment runner for curve, critical, stable-set, optimize, and simulate.

Reads a JSON experiment spec, dispatches to the analytic solver / simulator /
allocator, and writes CSV (or JSON) artifacts.  Every output embeds the
sha256 of the resolved spec, and all randomness is seed-derived, so the same
spec and seed produce byte-identical files.

Exit codes: 0 success, 2 configuration or usage error, 3 nonconvergence.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from importlib import resources
from pathlib import Path

from . import allocate, meanfield, simulate
from .config import ConfigError, ExperimentSpec, SimParams, load_experiment

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NONCONVERGED = 3

SCHEMA_VERSION = 1


def _resolve_config_path(value: str) -> Path:
    path = Path(value)
    if path.exists():
        return path
    name = value if value.endswith(".json") else f"{value}.json"
    bundled = resources.files("multiflow") / "configs" / name
    if bundled.is_file():
        return Path(str(bundled))
    raise ConfigError(f"config not found: {value!r} (no such file or bundled config)")


def _apply_seed_override(spec: ExperimentSpec, seed: int | None) -> ExperimentSpec:
    if seed is None or spec.sim is None:
        return spec
    sim = SimParams(n=spec.sim.n, runs=spec.sim.runs, seed_base=seed,
                    resample_population=spec.sim.resample_population)
    resolved = dict(spec.resolved)
    resolved["sim"] = dict(resolved["sim"], seed_base=seed)
    return ExperimentSpec(systems=spec.systems, p_grid=spec.p_grid, mode=spec.mode,
                          sim=sim, output=spec.output, resolved=resolved)


def _out_dir(args, spec: ExperimentSpec) -> Path:
    return Path(args.out if args.out is not None else spec.output.directory)


def _formats(args, spec: ExperimentSpec) -> tuple[str, ...]:
    return (args.format,) if args.format is not None else spec.output.formats


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _write_csv(path: Path, comments: list[str], header: list[str], rows) -> None:
    lines = [f"# {c}" for c in comments]
    lines.append(",".join(header))
    for row in rows:
        lines.append(",".join(_fmt(v) for v in row))
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")


def _write_json(path: Path, payload: dict) -> None:
    path.write_text(json.dumps(payload, indent=2, sort_keys=True) + "\n",
                    encoding="utf-8")


def _table(args, spec: ExperimentSpec, kind: str, system: str | None,
           header: list[str], rows, extra_comments: list[str] = (),
           extra_payload: dict | None = None) -> None:
    comments = [f"multiflow {kind} schema={SCHEMA_VERSION}",
                f"config_sha256={spec.checksum}",
                f"config={spec.canonical}"]
    if system is not None:
        comments.append(f"system={system}")
    comments.extend(extra_comments)
    suffix = f"_{system}" if system is not None else ""
    out = _out_dir(args, spec)
    for fmt in _formats(args, spec):
        if fmt == "json":
            payload = {
                "schema": f"multiflow.{kind}/{SCHEMA_VERSION}",
                "config_sha256": spec.checksum,
                "config": spec.resolved,
                "rows": [dict(zip(header, row)) for row in rows],
            }
            if system is not None:
                payload["system"] = system
            if extra_payload:
                payload.update(extra_payload)
            _write_json(out / f"{kind}{suffix}.json", payload)
        else:
            _write_csv(out / f"{kind}{suffix}.csv", comments, header, rows)


def cmd_curve(args, spec: ExperimentSpec) -> int:
    if spec.p_grid is None:
        print("error: spec.p_grid: required for the curve command", file=sys.stderr)
        return EXIT_CONFIG
    with_sim = spec.mode in ("simulate", "both")
    exit_code = EXIT_OK
    for name, cfg in spec.systems.items():
        nonconverged = []
        analytic = []
        for p in spec.p_grid:
            steady = meanfield.iterate_to_steady_state(p, cfg)
            analytic.append(steady.n_inf)
            if not steady.converged:
                nonconverged.append(p)
        header = ["p", "n_inf_analytic"]
        columns = [spec.p_grid, analytic]
        if with_sim:
            curve = simulate.monte_carlo_curve(
                cfg, spec.sim.n, spec.p_grid, spec.sim.runs, spec.sim.seed_base,
                workers=args.threads,
                resample_population=spec.sim.resample_population)
            header += ["sim_mean", "sim_std"]
            columns += [curve.mean.tolist(), curve.std.tolist()]
        rows = list(zip(*columns))
        extra = []
        if nonconverged:
            extra.append(f"nonconverged_p={nonconverged}")
            exit_code = EXIT_NONCONVERGED
        _table(args, spec, "curve", name, header, rows,
               extra_comments=extra)
    return exit_code


def cmd_critical(args, spec: ExperimentSpec) -> int:
    header = ["system", "p_hat", "lower", "upper", "tol_p", "budget_bound",
              "degenerate", "non_monotone"]
    rows = []
    for name, cfg in spec.systems.items():
        result = meanfield.critical_attack_size(cfg, tol_p=args.tol_p)
        joint = cfg.joint
        bound = allocate.optimal_critical_attack(
            joint.mean_load_a, joint.mean_load_b, cfg.factors,
            joint.mean_free_a + joint.mean_free_b)
        rows.append((name, result.p_hat, result.lower, result.upper, args.tol_p,
                     bound, int(result.degenerate), int(result.non_monotone)))
        print(f"{name}: p_hat={result.p_hat:.6f} (+/- {args.tol_p:g}), "
              f"budget bound {bound:.6f}"
              + (" [degenerate]" if result.degenerate else "")
              + (" [non-monotone scan]" if result.non_monotone else ""))
    _table(args, spec, "critical", None, header, rows)
    return EXIT_OK


def _single_system(args, spec: ExperimentSpec):
    if args.system is not None:
        if args.system not in spec.systems:
            raise ConfigError(f"--system: unknown system {args.system!r}; "
                              f"spec defines {sorted(spec.systems)}")
        return args.system, spec.systems[args.system]
    if len(spec.systems) != 1:
        raise ConfigError("spec defines several systems; choose one with --system")
    return next(iter(spec.systems.items()))


def cmd_stable_set(args, spec: ExperimentSpec) -> int:
    name, cfg = _single_system(args, spec)
    if not (0.0 < args.p < 1.0):
        print(f"error: --p must lie strictly in (0, 1), got {args.p}", file=sys.stderr)
        return EXIT_CONFIG
    grid = meanfield.stable_set_grid(args.p, cfg, x_max=args.x_max, y_max=args.y_max,
                                     resolution=args.resolution)
    rows = []
    for ix, x in enumerate(grid.x):
        for iy, y in enumerate(grid.y):
            rows.append((float(x), float(y), float(grid.lhs_a[ix, iy]),
                         float(grid.lhs_b[ix, iy]), int(grid.stable[ix, iy])))
    minimum = grid.minimum
    comments = [f"p={args.p!r}", f"threshold={grid.threshold!r}",
                f"empty={int(grid.empty)}"]
    out_dir = _out_dir(args, spec)
    _write_csv(out_dir / f"stable_set_{name}.csv",
               [f"multiflow stable_set schema={SCHEMA_VERSION}",
                f"config_sha256={spec.checksum}", f"config={spec.canonical}",
                f"system={name}", *comments],
               ["x", "y", "lhs_a", "lhs_b", "stable"], rows)
    sidecar = {
        "schema": f"multiflow.stable_set/{SCHEMA_VERSION}",
        "config_sha256": spec.checksum,
        "config": spec.resolved,
        "system": name,
        "p": args.p,
        "threshold": grid.threshold,
        "empty": grid.empty,
        "x_star": None if minimum is None else minimum[0],
        "y_star": None if minimum is None else minimum[1],
        "resolution": args.resolution,
    }
    _write_json(out_dir / f"stable_set_{name}.json", sidecar)
    if grid.empty:
        print(f"{name}: no stable points at p={args.p} (total collapse)")
    else:
        print(f"{name}: element-wise minimum stable point "
              f"({minimum[0]:.6g}, {minimum[1]:.6g}) at p={args.p}")
    return EXIT_OK


def cmd_optimize(args, spec: ExperimentSpec) -> int:
    name, cfg = _single_system(args, spec)
    joint = cfg.joint
    mean_a, mean_b = joint.mean_load_a, joint.mean_load_b
    s_total = args.budget
    if s_total is None:
        resolved = spec.resolved["systems"][name]
        if "allocation" in resolved:
            # per-layer or alpha-only allocations carry no total budget
            s_total = resolved["allocation"].get("s_total")
        elif "free_a" in resolved:
            s_total = joint.mean_free_a + joint.mean_free_b
    if s_total is None or s_total <= 0:
        print("error: free-space budget missing (give --budget or an allocation "
              "with s_total)", file=sys.stderr)
        return EXIT_CONFIG

    split = allocate.layer_weighted_split(mean_a, mean_b, cfg.factors, s_total)
    half = 0.5 * s_total
    alpha = s_total / (mean_a + mean_b)
    strategies = [
        ("layer_weighted_equal", split[0], split[1], "",
         allocate.optimal_critical_attack(mean_a, mean_b, cfg.factors, s_total)),
        ("equal_free_space", half, half, "",
         allocate.per_layer_critical(half, half, mean_a, mean_b, cfg.factors).p_opt),
        ("equal_tolerance_factor", "", "", alpha, ""),
    ]
    if (args.mu_a is None) != (args.mu_b is None):
        print("error: give both --mu-a and --mu-b or neither", file=sys.stderr)
        return EXIT_CONFIG
    if args.mu_a is not None:
        bounds = allocate.per_layer_critical(args.mu_a, args.mu_b, mean_a, mean_b,
                                             cfg.factors)
        strategies.append(("per_layer_equal", args.mu_a, args.mu_b, "", bounds.p_opt))
    header = ["strategy", "s_a", "s_b", "alpha", "predicted_critical"]
    width = max(len(row[0]) for row in strategies)
    print(f"loads: E[L_A]={mean_a:.6g}, E[L_B]={mean_b:.6g}; "
          f"beta=({cfg.factors.beta_a:g}, {cfg.factors.beta_b:g}); "
          f"budget={s_total:g}")
    for row in strategies:
        cells = [f"{row[0]:<{width}}"]
        cells.append(f"s_a={row[1]:.6g}" if row[1] != "" else "s_a=-")
        cells.append(f"s_b={row[2]:.6g}" if row[2] != "" else "s_b=-")
        cells.append(f"alpha={row[3]:.6g}" if row[3] != "" else "alpha=-")
        cells.append(f"p_opt={row[4]:.6g}" if row[4] != "" else "p_opt=-")
        print("  ".join(cells))
    _table(args, spec, "optimize", name, header, strategies)
    return EXIT_OK


def cmd_simulate(args, spec: ExperimentSpec) -> int:
    if spec.p_grid is None:
        print("error: spec.p_grid: required for the simulate command", file=sys.stderr)
        return EXIT_CONFIG
    if spec.sim is None:
        print("error: spec.sim: required for the simulate command", file=sys.stderr)
        return EXIT_CONFIG
    for name, cfg in spec.systems.items():
        curve = simulate.monte_carlo_curve(
            cfg, spec.sim.n, spec.p_grid, spec.sim.runs, spec.sim.seed_base,
            workers=args.threads, resample_population=spec.sim.resample_population)
        rows = [(p, m, s, spec.sim.runs, spec.sim.n)
                for p, m, s in zip(spec.p_grid, curve.mean, curve.std)]
        _table(args, spec, "simulate", name,
               ["p", "mean_n_inf", "std_n_inf", "runs", "n"], rows)
        if args.raw:
            raw_rows = [(p, run, curve.samples[ip, run])
                        for ip, p in enumerate(spec.p_grid)
                        for run in range(spec.sim.runs)]
            _write_csv(_out_dir(args, spec) / f"simulate_{name}_runs.csv",
                       [f"multiflow simulate_runs schema={SCHEMA_VERSION}",
                        f"config_sha256={spec.checksum}",
                        f"config={spec.canonical}", f"system={name}"],
                       ["p", "run", "n_inf"], raw_rows)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="multiflow",
        description="Cascading-failure analysis of two-layer multiplex flow networks")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser) -> None:
        p.add_argument("--config", required=True,
                       help="experiment spec (path or bundled config name)")
        p.add_argument("--out", default=None,
                       help="output directory (default: the spec's, or ./out)")
        p.add_argument("--threads", type=int, default=os.cpu_count() or 1,
                       help="worker processes for Monte Carlo runs")
        p.add_argument("--seed", type=int, default=None,
                       help="override the spec's sim.seed_base")
        p.add_argument("--format", choices=("csv", "json"), default=None,
                       help="output format (default: the spec's, or csv)")

    common(sub.add_parser("curve", help="robustness curve n_inf(p) per system"))

    p_critical = sub.add_parser("critical", help="bisect the critical attack size")
    common(p_critical)
    p_critical.add_argument("--tol-p", type=float, default=meanfield.DEFAULT_TOL_P)

    p_stable = sub.add_parser("stable-set", help="scan the stable set at one attack size")
    common(p_stable)
    p_stable.add_argument("--p", type=float, required=True)
    p_stable.add_argument("--resolution", type=int, default=meanfield.DEFAULT_GRID_RESOLUTION)
    p_stable.add_argument("--x-max", type=float, default=None)
    p_stable.add_argument("--y-max", type=float, default=None)
    p_stable.add_argument("--system", default=None)

    p_opt = sub.add_parser("optimize", help="allocation table for all strategies")
    common(p_opt)
    p_opt.add_argument("--budget", type=float, default=None,
                       help="total free-space budget (overrides the spec)")
    p_opt.add_argument("--mu-a", type=float, default=None,
                       help="fixed layer-A free-space mean (adds the per-layer row)")
    p_opt.add_argument("--mu-b", type=float, default=None,
                       help="fixed layer-B free-space mean (adds the per-layer row)")
    p_opt.add_argument("--system", default=None)

    p_sim = sub.add_parser("simulate", help="Monte Carlo curve only")
    common(p_sim)
    p_sim.add_argument("--raw", action="store_true", help="also write per-run fractions")

    return parser


_COMMANDS = {
    "curve": cmd_curve,
    "critical": cmd_critical,
    "stable-set": cmd_stable_set,
    "optimize": cmd_optimize,
    "simulate": cmd_simulate,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    try:
        spec = load_experiment(_resolve_config_path(args.config))
        spec = _apply_seed_override(spec, args.seed)
        _out_dir(args, spec).mkdir(parents=True, exist_ok=True)
        return _COMMANDS[args.command](args, spec)
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
