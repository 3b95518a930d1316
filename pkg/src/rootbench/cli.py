"""Command-line entry point.

Subcommands cover the full workflow: run a config, rebuild the gap and
comparison tables, emit figure data, run the sampler-bias and max-height
experiments, export a trajectory for external solvers, and verify the
toolkit's invariants.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path

from . import harness
from .benchmark import export_trajectory, generate_trajectory
from .harness import (ConfigError, ExperimentConfig, base_config,
                      comparison_table, emit_figure_data,
                      experiment_angle_density, experiment_max_height,
                      figure_reports, gap_table, load_config, run_experiment,
                      verify_suite, write_angle_density_csv,
                      write_comparison_table, write_gap_table,
                      write_max_height_csv, write_report)
from .rng import ENV_STREAM, RngState


def _common_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--seed", type=int, default=None,
                        help="master seed (64-bit unsigned decimal)")
    parser.add_argument("--reps", type=int, default=None,
                        help="number of replications")
    parser.add_argument("--out", default=None,
                        help="output directory (or file for export-trajectory)")
    parser.add_argument("--workers", type=int, default=None,
                        help="worker processes (default: ROOT_BENCH_WORKERS or 1)")


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rootbench",
        description="Moving-peaks benchmarks, uniform-sampling solvers and "
                    "robustness metrics.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run one experiment config")
    p.add_argument("config", help="path to a key = value config file")
    _common_flags(p)

    p = sub.add_parser("table2", help="gap table: analytic bound vs methods")
    _common_flags(p)

    p = sub.add_parser("table3", help="comparison with best-known results")
    _common_flags(p)

    p = sub.add_parser("fig", help="emit per-subplot figure data")
    p.add_argument("which", choices=("fig2", "fig3"))
    _common_flags(p)

    p = sub.add_parser("angles", help="angle densities of both samplers")
    p.add_argument("--draws", type=int, default=1_000_000)
    p.add_argument("--bins", type=int, default=64)
    _common_flags(p)

    p = sub.add_parser("maxheight", help="mean height of the tallest peak")
    p.add_argument("--peaks", type=int, nargs="+", default=[5, 25])
    p.add_argument("--horizon", type=int, default=20)
    _common_flags(p)

    p = sub.add_parser("export-trajectory",
                       help="write one environment realization to a text file")
    p.add_argument("config", help="path to a key = value config file")
    p.add_argument("--rep", type=int, default=0,
                   help="replication index whose environment to export")
    _common_flags(p)

    p = sub.add_parser("verify", help="run the invariant suite")
    _common_flags(p)
    return parser


def _apply_overrides(config: ExperimentConfig,
                     args: argparse.Namespace) -> ExperimentConfig:
    overrides = {}
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.reps is not None:
        overrides["replications"] = args.reps
    if args.out is not None:
        overrides["out"] = args.out
    if args.workers is not None:
        overrides["workers"] = args.workers
    if overrides:
        config = replace(config, **overrides)
        config.validate()
    return config


def _resolved(args: argparse.Namespace, name: str, fallback):
    value = getattr(args, name, None)
    return fallback if value is None else value


def _cmd_run(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    report = run_experiment(config)
    paths = write_report(report, config.out)
    print(f"{config.benchmark} method {config.method}: "
          f"{config.replications} replications in "
          f"{report.runtime_seconds:.1f}s")
    for kind, param in report.metric_keys():
        label = kind if param is None else f"{kind}({param:g})"
        print(f"  {label:>14} = {report.mean((kind, param)):8.4f}"
              f"  +- {report.stderr((kind, param)):.4f}")
    print(f"wrote {paths['summary'].parent}")
    return 0


def _cmd_table2(args) -> int:
    rows = gap_table(replications=_resolved(args, "reps", 5000),
                     seed=_resolved(args, "seed", 1),
                     workers=_resolved(args, "workers", 0))
    path = write_gap_table(rows, _resolved(args, "out", "results"))
    print(f"{'benchmark':<10} {'bound':>8} {'A':>8} {'B':>8} {'C':>8}")
    for benchmark, row in rows.items():
        print(f"{benchmark:<10} {row['bound']:8.2f} {row['A']:8.2f} "
              f"{row['B']:8.2f} {row['C']:8.2f}")
    print(f"wrote {path}")
    return 0


def _cmd_table3(args) -> int:
    rows = comparison_table(replications=_resolved(args, "reps", 5000),
                            seed=_resolved(args, "seed", 1),
                            workers=_resolved(args, "workers", 0))
    path = write_comparison_table(rows, _resolved(args, "out", "results"))
    for name, row in rows.items():
        ours = row["ours"]
        cells = "  ".join(f"{ours[key]:6.2f}" for key in harness.COMPARISON_METRICS)
        print(f"{name:<16} {cells}")
    print(f"wrote {path}")
    return 0


def _cmd_fig(args) -> int:
    reports = figure_reports(args.which,
                             replications=_resolved(args, "reps", 5000),
                             seed=_resolved(args, "seed", 1),
                             workers=_resolved(args, "workers", 0))
    paths = emit_figure_data(reports, args.which,
                             _resolved(args, "out", "results"))
    for path in paths:
        print(f"wrote {path}")
    return 0


def _cmd_angles(args) -> int:
    edges, square, sphere = experiment_angle_density(
        n_draws=args.draws, bins=args.bins, seed=_resolved(args, "seed", 1))
    path = write_angle_density_csv(edges, square, sphere,
                                   _resolved(args, "out", "results"))
    print(f"wrote {path}")
    return 0


def _cmd_maxheight(args) -> int:
    series = {}
    for peaks in args.peaks:
        series[peaks] = experiment_max_height(
            peaks, horizon=args.horizon,
            replications=_resolved(args, "reps", 2000),
            seed=_resolved(args, "seed", 1))
        print(f"peaks={peaks}: final mean max height "
              f"{series[peaks][-1]:.2f}")
    path = write_max_height_csv(series, _resolved(args, "out", "results"))
    print(f"wrote {path}")
    return 0


def _cmd_export_trajectory(args) -> int:
    config = _apply_overrides(load_config(args.config), args)
    rng = RngState.for_replication(config.seed, args.rep, ENV_STREAM)
    trajectory = generate_trajectory(config.bench_params(), config.horizon, rng)
    out = args.out
    if out is None:
        out = f"trajectory_{config.benchmark}_rep{args.rep}.txt"
    path = Path(out)
    if path.is_dir():
        path = path / f"trajectory_{config.benchmark}_rep{args.rep}.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        export_trajectory(trajectory, fh)
    print(f"wrote {path}")
    return 0


def _cmd_verify(args) -> int:
    results = verify_suite(seed=_resolved(args, "seed", 1))
    failures = 0
    for name, passed, detail in results:
        status = "PASS" if passed else "FAIL"
        suffix = f"  ({detail})" if detail else ""
        print(f"[{status}] {name}{suffix}")
        if not passed:
            failures += 1
    if failures:
        print(f"{failures} of {len(results)} checks failed")
        return 1
    print(f"all {len(results)} checks passed")
    return 0


_COMMANDS = {
    "run": _cmd_run,
    "table2": _cmd_table2,
    "table3": _cmd_table3,
    "fig": _cmd_fig,
    "angles": _cmd_angles,
    "maxheight": _cmd_maxheight,
    "export-trajectory": _cmd_export_trajectory,
    "verify": _cmd_verify,
}


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except (ConfigError, FileNotFoundError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
