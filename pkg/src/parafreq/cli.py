"""Batch driver: simulate, check, eigen, poon, and sweep subcommands.

Exit codes: 0 all configured checks pass, 1 configuration error, 2 check
failure.  Outputs are CSV files with stable schemas plus one JSON report per
run; identical config and seed produce identical bytes.
"""

from __future__ import annotations

import argparse
import copy
import json
import sys
from pathlib import Path

import numpy as np

from .caloric import (
    check_poon_convexity,
    check_poon_correspondence,
    make_oracle,
    poon_h,
)
from .config import ExperimentConfig, build_gauge, build_geometry, build_initial, build_perturbation, build_time
from .errors import ConfigError, ParafreqError
from .evolution import evolve_cn, evolve_exact, evolve_perturbed, gauge_transform
from .frequency import (
    check_general_frequency,
    check_general_lower_bound,
    check_gradient_only,
    check_hadamard_bound,
    check_log_convexity,
    check_rigidity,
    check_u_monotone,
    default_tolerance,
    frequency_trace,
    vanishing_order_surrogate,
)
from .operators import assemble, eigenpairs
from .reports import (
    write_poon_csv,
    write_report,
    write_spectrum_csv,
    write_trace_csv,
    write_trajectory_csv,
)
from .suite import run_check_all

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_CHECK = 2


def _out_dir(args, config: ExperimentConfig | None = None) -> Path:
    if args.out is not None:
        out = Path(args.out)
    elif config is not None and config.output:
        out = Path(config.output)
    else:
        out = Path("parafreq-out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _run_trace_checks(config, traj, trace, op, tol_scale):
    reports = []
    for entry in config.checks:
        name = entry["name"]
        tol = entry.get("tol")
        if tol is None:
            tol = default_tolerance(trace, tol_scale)
        else:
            tol = float(tol) * tol_scale
        if name == "u-monotone":
            reports.append(check_u_monotone(trace, tol))
        elif name == "log-convexity":
            reports.append(check_log_convexity(trace, tol / trace.dt**2))
        elif name == "hadamard-bound":
            reports.append(check_hadamard_bound(trace, tol))
        elif name == "rigidity":
            reports.append(check_rigidity(traj, tol, op))
        elif name == "general-frequency":
            reports.append(check_general_frequency(trace, entry.get("bound"), tol))
        elif name == "general-lower-bound":
            reports.append(check_general_lower_bound(trace, entry.get("bound"), tol))
        elif name == "gradient-only":
            reports.append(check_gradient_only(trace, entry.get("bound"), tol))
        elif name == "vanishing-order":
            reports.append(vanishing_order_surrogate(trace, float(entry.get("rate", 0.0))))
    return reports


def run_simulate(config: ExperimentConfig, out_dir: Path, seed, tol_scale: float) -> int:
    geometry = build_geometry(config.geometry)
    op = assemble(geometry)
    grid = build_time(config.time)
    u0 = build_initial(config.initial, geometry, op)
    if config.perturbation is not None:
        pert = build_perturbation(config.perturbation, geometry, grid)
        traj = evolve_perturbed(op, u0, grid, pert)
    elif config.integrator == "implicit-step":
        traj = evolve_cn(op, u0, grid)
    else:
        traj = evolve_exact(op, u0, grid)
    if config.gauge is not None:
        traj = gauge_transform(traj, build_gauge(config.gauge))
    trace = frequency_trace(traj, op)
    reports = _run_trace_checks(config, traj, trace, op, tol_scale)
    write_trajectory_csv(out_dir / "trajectory.csv", traj)
    write_trace_csv(out_dir / "trace.csv", trace)
    write_report(
        out_dir / "report.json",
        reports,
        seed=seed,
        extra={
            "command": "simulate",
            "integrator": config.integrator,
            "provenance": traj.provenance,
            "samples": trace.samples,
            "u_initial": float(trace.U[0]),
            "u_final": float(trace.U[-1]),
        },
    )
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK


def run_eigen(config: ExperimentConfig, out_dir: Path, k: int, seed) -> int:
    geometry = build_geometry(config.geometry)
    op = assemble(geometry)
    pairs = eigenpairs(op, k)
    write_spectrum_csv(out_dir / "spectrum.csv", [p.eigenvalue for p in pairs])
    write_report(
        out_dir / "report.json",
        [],
        seed=seed,
        extra={"command": "eigen", "k": k,
               "eigenvalues": [p.eigenvalue for p in pairs]},
    )
    return EXIT_OK


def run_poon(out_dir: Path, seed, tol_scale: float) -> int:
    """Scaled-frequency curves and checks for the standard oracle set."""
    s_grid = np.linspace(0.2, 3.0, 21)
    reports = []
    for name in ("constant", "linear", "caloric-quadratic"):
        oracle = make_oracle(name, 1)
        radii = np.exp(s_grid / 2.0)
        h_vals = np.array([poon_h(oracle, r) for r in radii])
        write_poon_csv(out_dir / f"poon_{name}.csv", s_grid, radii, h_vals)
        reports.append(
            check_poon_correspondence(oracle, s_grid, 1e-8 * tol_scale).renamed(
                f"poon-correspondence/{name}"
            )
        )
        reports.append(
            check_poon_convexity(oracle, s_grid, 1e-8 * tol_scale).renamed(
                f"poon-convexity/{name}"
            )
        )
    write_report(out_dir / "report.json", reports, seed=seed, extra={"command": "poon"})
    return EXIT_OK if all(r.passed for r in reports) else EXIT_CHECK


def run_sweep(raw_config: dict, out_dir: Path, seed, tol_scale: float) -> int:
    base = raw_config.get("base")
    entries = raw_config.get("sweep")
    if not isinstance(base, dict) or not isinstance(entries, list) or not entries:
        raise ConfigError("sweep configs need a 'base' object and a nonempty 'sweep' list")
    worst = EXIT_OK
    summary = []
    for entry in entries:
        if not isinstance(entry, dict) or "name" not in entry:
            raise ConfigError("sweep entries need a 'name'")
        merged = copy.deepcopy(base)
        for key, value in entry.get("overrides", {}).items():
            node = merged
            parts = key.split(".")
            for part in parts[:-1]:
                node = node.setdefault(part, {})
            node[parts[-1]] = value
        sub_dir = out_dir / str(entry["name"])
        sub_dir.mkdir(parents=True, exist_ok=True)
        code = run_simulate(ExperimentConfig.from_dict(merged), sub_dir, seed, tol_scale)
        summary.append({"name": str(entry["name"]), "exit": code})
        worst = max(worst, code)
    write_report(
        out_dir / "report.json",
        [],
        seed=seed,
        extra={"command": "sweep", "runs": summary},
    )
    return worst


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="parafreq",
        description="Simulate drift heat flows and verify frequency monotonicity.",
    )
    parser.add_argument("--seed", type=int, default=0, help="run seed (default 0)")
    parser.add_argument("--out", type=str, default=None, help="output directory")
    parser.add_argument(
        "--tol-scale", type=float, default=1.0, help="multiply all tolerances"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_sim = sub.add_parser("simulate", help="run one configured experiment")
    p_sim.add_argument("--config", required=True, help="path to a JSON config")

    p_check = sub.add_parser("check", help="run verification suites")
    p_check.add_argument("suite", choices=["all"], help="which suite to run")
    p_check.add_argument(
        "--corrupt-operator",
        action="store_true",
        help="negative control: corrupt one operator and expect failure",
    )

    p_eigen = sub.add_parser("eigen", help="export the leading spectrum")
    p_eigen.add_argument("--config", required=True)
    p_eigen.add_argument("-k", type=int, required=True, help="number of eigenvalues")

    sub.add_parser("poon", help="scaled-frequency curves for the oracle set")

    p_sweep = sub.add_parser("sweep", help="run a family of configured experiments")
    p_sweep.add_argument("--config", required=True)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "simulate":
            config = ExperimentConfig.load(args.config)
            return run_simulate(config, _out_dir(args, config), args.seed, args.tol_scale)
        if args.command == "check":
            out_dir = _out_dir(args)
            reports = run_check_all(
                seed=args.seed,
                tol_scale=args.tol_scale,
                corrupt_operator=args.corrupt_operator,
            )
            write_report(
                out_dir / "report.json",
                reports,
                seed=args.seed,
                extra={"command": "check", "suite": args.suite,
                       "tol_scale": args.tol_scale},
            )
            failures = [r.name for r in reports if not r.passed]
            for r in reports:
                print(f"[{'PASS' if r.passed else 'FAIL'}] {r.name}")
            if failures:
                print(f"failed checks: {', '.join(failures)}", file=sys.stderr)
                return EXIT_CHECK
            return EXIT_OK
        if args.command == "eigen":
            config = ExperimentConfig.load(args.config)
            return run_eigen(config, _out_dir(args, config), args.k, args.seed)
        if args.command == "poon":
            return run_poon(_out_dir(args), args.seed, args.tol_scale)
        if args.command == "sweep":
            try:
                raw = json.loads(Path(args.config).read_text())
            except FileNotFoundError:
                raise ConfigError(f"config file not found: {args.config}") from None
            except json.JSONDecodeError as exc:
                raise ConfigError(f"config is not valid JSON: {exc}") from None
            return run_sweep(raw, _out_dir(args), args.seed, args.tol_scale)
        raise ConfigError(f"unknown command {args.command!r}")
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ParafreqError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
