"""Experiment harness: config files, seeded replication runs, reports.

A run is fully determined by (config, master seed): replication r derives
its own random streams from the master seed, so results are bit-identical
across reruns and independent of how many workers execute them.  Raw
per-replication values are always persisted next to the aggregates so third
parties can re-aggregate.
"""

from __future__ import annotations

import csv
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, fields, replace
from datetime import datetime, timezone
from functools import partial
from pathlib import Path

import numpy as np

from . import __version__
from .benchmark import (Bench1Params, Bench1State, Bench2Params, BenchParams,
                        Box, StackedTrajectory, Trajectory, Uniform,
                        eval_batch, generate_trajectory, parse_scalar_or_draw,
                        rotation_matrix)
from .metrics import (MetricsConfig, cover_radius, lipschitz_gap_bound,
                      score_series, verify_cover_lemma)
from .rng import (ENV_STREAM, SOLVER_STREAM, RngState, angle_histogram,
                  uniforms)
from .solver import (NEIGHBOR_METRICS, BudgetLedger, GridSample, make_grid,
                     solve_robust, solve_tmo)

WORKERS_ENV_VAR = "ROOT_BENCH_WORKERS"


class ConfigError(ValueError):
    """A config file entry is unknown, malformed or violates a constraint."""


def _parse_int_list(text: str) -> tuple:
    """Parse '2,6,10' or an inclusive range '1:20'."""
    text = text.strip()
    if ":" in text:
        lo, _, hi = text.partition(":")
        return tuple(range(int(lo), int(hi) + 1))
    return tuple(int(p) for p in text.split(","))


def _parse_float_list(text: str) -> tuple:
    return tuple(float(p) for p in text.split(","))


def _parse_benchmark(text: str) -> str:
    value = text.strip().lower()
    if value not in ("bench1", "bench2"):
        raise ValueError(f"benchmark must be 'bench1' or 'bench2', got {text!r}")
    return value


def _parse_method(text: str) -> str:
    value = text.strip().upper()
    if value not in ("A", "B", "C"):
        raise ValueError(f"method must be A, B or C, got {text!r}")
    return value


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything a run needs; defaults follow the standard parameter table."""

    benchmark: str = "bench1"
    method: str = "B"
    seed: int = 1
    replications: int = 5000
    horizon: int = 100
    lookahead: int = 20                       # extra future states for scoring
    n_eval: int = 2500
    n_loc: int = 200
    n_sub: int = 2300
    neighbor_radius: float = 3.0
    neighbor_metric: str = "step"
    peaks: int = 5
    dim: int = 2
    x_min: float = 0.0
    x_max: float = 50.0
    h_min: float = 30.0
    h_max: float = 70.0
    w_min: float = 1.0
    w_max: float = 12.0
    h_init: float = 50.0
    w_init: float = 6.0
    momentum: float = 0.0                     # config key: lambda
    step_size: float = 1.0
    sigma_h: object = Uniform(1.0, 10.0)
    sigma_w: object = Uniform(0.1, 1.0)
    sigma_mode: str = "per_step"
    sigma_theta: float = 1.0
    theta_min: float = -math.pi
    theta_max: float = math.pi
    theta_init: float = 0.0
    center_init: str = "random"
    windows: tuple = tuple(range(1, 21))
    thresholds: tuple = (40.0, 50.0)
    t_lo: int = 20
    t_hi: int = 100
    workers: int = 0                          # 0: env var, then serial
    out: str = "results"

    @classmethod
    def defaults(cls, benchmark: str) -> "ExperimentConfig":
        """Standard parameter values for the requested benchmark."""
        if benchmark == "bench1":
            return cls()
        if benchmark == "bench2":
            return cls(benchmark="bench2", peaks=25, x_min=-25.0, x_max=25.0,
                       w_max=13.0, sigma_h=5.0, sigma_w=0.5)
        raise ConfigError(f"unknown benchmark {benchmark!r}")

    def validate(self) -> None:
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.horizon < 1:
            raise ConfigError("horizon must be >= 1")
        if self.lookahead < 0:
            raise ConfigError("lookahead must be >= 0")
        if not 1 <= self.t_lo <= self.t_hi <= self.horizon:
            raise ConfigError(
                f"aggregation range [{self.t_lo}, {self.t_hi}] must lie "
                f"within 1..{self.horizon}")
        if not 0 <= self.n_loc <= self.n_eval:
            raise ConfigError(f"n_loc = {self.n_loc} must lie in "
                              f"[0, n_eval = {self.n_eval}]")
        if not 0 < self.n_sub <= self.n_eval:
            raise ConfigError(f"n_sub = {self.n_sub} must lie in "
                              f"(0, n_eval = {self.n_eval}]")
        if self.method == "B" and self.n_sub + self.n_loc != self.n_eval:
            raise ConfigError(
                f"method B needs n_sub + n_loc = n_eval, got "
                f"{self.n_sub} + {self.n_loc} != {self.n_eval}")
        k = round(self.n_eval ** (1.0 / self.dim))
        if not any(c >= 2 and c ** self.dim == self.n_eval
                   for c in (k - 1, k, k + 1)):
            raise ConfigError(f"n_eval = {self.n_eval} is not a k^{self.dim} "
                              f"lattice size with k >= 2")
        if not 0.0 <= self.momentum <= 1.0:
            raise ConfigError(f"lambda must lie in [0, 1], got {self.momentum}")
        if self.neighbor_radius < 0:
            raise ConfigError("neighbor_radius must be >= 0")
        if self.neighbor_metric not in NEIGHBOR_METRICS:
            raise ConfigError(f"neighbor_metric must be one of "
                              f"{NEIGHBOR_METRICS}, got {self.neighbor_metric!r}")
        if any(s < 1 for s in self.windows):
            raise ConfigError("windows entries must be >= 1")
        self.bench_params()                  # parameter-level constraints

    def bench_params(self) -> BenchParams:
        box = Box(self.x_min, self.x_max, self.dim)
        try:
            if self.benchmark == "bench1":
                return Bench1Params(
                    peaks=self.peaks, box=box,
                    h_bounds=(self.h_min, self.h_max),
                    w_bounds=(self.w_min, self.w_max),
                    h_init=self.h_init, w_init=self.w_init,
                    momentum=self.momentum, step_size=self.step_size,
                    sigma_h=self.sigma_h, sigma_w=self.sigma_w,
                    sigma_mode=self.sigma_mode)
            return Bench2Params(
                peaks=self.peaks, box=box,
                h_bounds=(self.h_min, self.h_max),
                w_bounds=(self.w_min, self.w_max),
                theta_bounds=(self.theta_min, self.theta_max),
                sigma_h=float(self.sigma_h), sigma_w=float(self.sigma_w),
                sigma_theta=self.sigma_theta, theta_init=self.theta_init,
                center_init=self.center_init)
        except (TypeError, ValueError) as exc:
            raise ConfigError(str(exc)) from exc

    def metrics_config(self) -> MetricsConfig:
        return MetricsConfig(windows=self.windows, thresholds=self.thresholds,
                             t_lo=self.t_lo, t_hi=self.t_hi)

    def resolve_workers(self) -> int:
        if self.workers > 0:
            return self.workers
        env = os.environ.get(WORKERS_ENV_VAR, "")
        if env.strip():
            try:
                value = int(env)
            except ValueError:
                raise ConfigError(
                    f"{WORKERS_ENV_VAR} must be an integer, got {env!r}")
            if value > 0:
                return value
        return 1

    def to_text(self) -> str:
        """Echo of the effective configuration, one `key = value` per line."""
        lines = []
        for name, value in self._key_values():
            lines.append(f"{name} = {value}")
        return "\n".join(lines) + "\n"

    def _key_values(self):
        for f in fields(self):
            key = "lambda" if f.name == "momentum" else f.name
            value = getattr(self, f.name)
            if isinstance(value, tuple):
                value = ",".join(f"{v:g}" if isinstance(v, float) else str(v)
                                 for v in value)
            elif isinstance(value, float):
                value = f"{value:.17g}"
            yield key, value


_CONFIG_PARSERS = {
    "benchmark": _parse_benchmark,
    "method": _parse_method,
    "seed": int,
    "replications": int,
    "horizon": int,
    "lookahead": int,
    "n_eval": int,
    "n_loc": int,
    "n_sub": int,
    "neighbor_radius": float,
    "neighbor_metric": str,
    "peaks": int,
    "dim": int,
    "x_min": float,
    "x_max": float,
    "h_min": float,
    "h_max": float,
    "w_min": float,
    "w_max": float,
    "h_init": float,
    "w_init": float,
    "lambda": float,
    "step_size": float,
    "sigma_h": parse_scalar_or_draw,
    "sigma_w": parse_scalar_or_draw,
    "sigma_mode": str,
    "sigma_theta": float,
    "theta_min": float,
    "theta_max": float,
    "theta_init": float,
    "center_init": str,
    "windows": _parse_int_list,
    "thresholds": _parse_float_list,
    "t_lo": int,
    "t_hi": int,
    "workers": int,
    "out": str,
}

_KEY_TO_FIELD = {key: ("momentum" if key == "lambda" else key)
                 for key in _CONFIG_PARSERS}


def parse_config_text(text: str) -> ExperimentConfig:
    """Parse flat `key = value` lines (# comments) into a validated config."""
    pairs: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', "
                              f"got {raw.strip()!r}")
        key, _, value = line.partition("=")
        pairs[key.strip()] = value.strip()

    benchmark = pairs.get("benchmark", "bench1")
    config = ExperimentConfig.defaults(_parse_benchmark(benchmark))
    overrides = {}
    for key, raw_value in pairs.items():
        parser = _CONFIG_PARSERS.get(key)
        if parser is None:
            raise ConfigError(f"unknown config key {key!r}")
        try:
            overrides[_KEY_TO_FIELD[key]] = parser(raw_value)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad value for {key!r}: {exc}") from exc
    config = replace(config, **overrides)
    config.validate()
    return config


def load_config(path) -> ExperimentConfig:
    """Read and validate a config file; omitted keys take standard defaults."""
    return parse_config_text(Path(path).read_text())


# ---------------------------------------------------------------------------
# Replication runner
# ---------------------------------------------------------------------------

def oracle_values_fast(stacked: StackedTrajectory) -> np.ndarray:
    """Optimal objective per time instant, vectorized over the trajectory."""
    if stacked.kind == "bench1":
        return np.max(stacked.heights, axis=1)
    c = stacked.centers                              # (T, M, D)
    dist = np.abs(c[:, :, None, :] - c[:, None, :, :])   # candidate x peak
    vals = stacked.heights[:, None, :, :] - stacked.widths[:, None, :, :] * dist
    per_candidate = np.max(vals, axis=2)             # (T, M, D)
    return np.mean(np.max(per_candidate, axis=1), axis=1)


def run_solver(config: ExperimentConfig, trajectory: Trajectory,
               grid: GridSample, rep: int):
    """Run the configured method on one trajectory; returns the series."""
    if config.method in ("A", "B"):
        use_ls = config.method == "B"
        ledger = BudgetLedger(config.n_eval, config.n_loc if use_ls else 0)
        sol_rng = RngState.for_replication(config.seed, rep, SOLVER_STREAM)
        return solve_tmo(trajectory, grid, ledger, sol_rng, use_ls,
                         n_sub=config.n_sub, horizon=config.horizon)
    ledger = BudgetLedger(config.n_eval)
    return solve_robust(trajectory, grid, config.neighbor_radius, ledger,
                        config.neighbor_metric, horizon=config.horizon)


def _run_replication(config: ExperimentConfig, rep: int) -> dict:
    params = config.bench_params()
    env_rng = RngState.for_replication(config.seed, rep, ENV_STREAM)
    trajectory = generate_trajectory(params, config.horizon + config.lookahead,
                                     env_rng)
    stacked = StackedTrajectory(trajectory)
    f_star = oracle_values_fast(stacked)
    grid = make_grid(params.box, config.n_eval)
    series = run_solver(config, trajectory, grid, rep)
    surv_window = config.lookahead if config.lookahead > 0 else None
    score = score_series(series.xs, stacked, f_star,
                         config.windows, config.thresholds,
                         surv_window=surv_window)

    horizon = config.horizon
    lo, hi = config.t_lo - 1, config.t_hi           # python slice bounds
    scalars: dict = {}
    per_t: dict = {}
    censored_frac: dict = {}
    censored_per_t: dict = {}
    total = config.horizon + config.lookahead
    for s in config.windows:
        arr = score.aver[s]
        per_t[("f_aver", s)] = arr
        valid_hi = min(hi, total - s + 1)
        scalars[("f_aver", s)] = (float(np.mean(arr[lo:valid_hi]))
                                  if valid_hi > lo else float("nan"))
    for delta in config.thresholds:
        steps = score.surv_steps[delta].astype(float)
        flags = score.surv_censored[delta]
        per_t[("f_surv", delta)] = steps
        censored_per_t[delta] = flags
        scalars[("f_surv", delta)] = float(np.mean(steps[lo:hi]))
        censored_frac[delta] = float(np.mean(flags[lo:hi]))
    per_t[("gap", None)] = score.gap
    scalars[("gap", None)] = float(np.mean(score.gap[lo:hi]))
    return {
        "scalars": scalars,
        "per_t": per_t,
        "censored_frac": censored_frac,
        "censored_per_t": censored_per_t,
        "evals": series.evals,
    }


@dataclass
class ExperimentReport:
    """Aggregated and per-replication results of one configuration."""

    config: ExperimentConfig
    per_rep: dict                    # metric key -> (replications,) array
    per_t_mean: dict                 # metric key -> (T,) mean over reps
    censored_fraction: dict          # threshold -> mean fraction in window
    censored_per_t: dict             # threshold -> (T,) fraction per t
    evals_min: np.ndarray            # (T,)
    evals_max: np.ndarray            # (T,)
    runtime_seconds: float

    def mean(self, key) -> float:
        return float(np.mean(self.per_rep[key]))

    def stderr(self, key) -> float:
        values = self.per_rep[key]
        if values.size < 2:
            return float("nan")
        return float(np.std(values, ddof=1) / math.sqrt(values.size))

    def mean_aver(self, window: int) -> float:
        return self.mean(("f_aver", window))

    def mean_surv(self, threshold: float) -> float:
        return self.mean(("f_surv", threshold))

    def mean_gap(self) -> float:
        return self.mean(("gap", None))

    def metric_keys(self) -> list:
        keys = [("f_aver", s) for s in self.config.windows]
        keys += [("f_surv", d) for d in self.config.thresholds]
        keys.append(("gap", None))
        return keys


def run_experiment(config: ExperimentConfig) -> ExperimentReport:
    """Run all replications of a configuration and aggregate the metrics.

    Replications execute independently (optionally on a process pool) and
    are collected in index order, so the report does not depend on the
    worker count.  Any replication failure aborts the run.
    """
    config.validate()
    workers = config.resolve_workers()
    reps = config.replications
    started = time.perf_counter()

    job = partial(_run_replication, config)
    if workers > 1 and reps > 1:
        chunk = max(1, reps // (workers * 8))
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(job, range(reps), chunksize=chunk))
    else:
        outcomes = [job(rep) for rep in range(reps)]

    keys = list(outcomes[0]["scalars"].keys())
    per_rep = {key: np.array([o["scalars"][key] for o in outcomes])
               for key in keys}
    per_t_mean = {}
    for key in outcomes[0]["per_t"]:
        per_t_mean[key] = np.mean([o["per_t"][key] for o in outcomes], axis=0)
    censored_fraction = {
        delta: float(np.mean([o["censored_frac"][delta] for o in outcomes]))
        for delta in config.thresholds}
    censored_per_t = {
        delta: np.mean([o["censored_per_t"][delta] for o in outcomes], axis=0)
        for delta in config.thresholds}
    evals = np.stack([o["evals"] for o in outcomes])
    return ExperimentReport(
        config=config,
        per_rep=per_rep,
        per_t_mean=per_t_mean,
        censored_fraction=censored_fraction,
        censored_per_t=censored_per_t,
        evals_min=evals.min(axis=0),
        evals_max=evals.max(axis=0),
        runtime_seconds=time.perf_counter() - started,
    )


# ---------------------------------------------------------------------------
# Report output
# ---------------------------------------------------------------------------

def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


def _metric_rows(report: ExperimentReport):
    for kind, param in report.metric_keys():
        yield kind, param


def write_report(report: ExperimentReport, outdir) -> dict:
    """Persist aggregates, raw per-replication values and run metadata."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    config = report.config
    paths = {}

    paths["config"] = outdir / "effective_config.txt"
    paths["config"].write_text(config.to_text())

    paths["manifest"] = outdir / "manifest.txt"
    paths["manifest"].write_text(
        f"version = {__version__}\n"
        f"seed = {config.seed}\n"
        f"replications = {config.replications}\n"
        f"timestamp = {datetime.now(timezone.utc).isoformat()}\n"
        f"runtime_seconds = {report.runtime_seconds:.3f}\n")

    paths["summary"] = outdir / "summary.csv"
    with open(paths["summary"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["benchmark", "method", "metric", "parameter",
                         "mean", "stderr", "censored_fraction"])
        for kind, param in _metric_rows(report):
            frac = (report.censored_fraction[param] if kind == "f_surv"
                    else None)
            writer.writerow([config.benchmark, config.method, kind,
                             _fmt(param), _fmt(report.mean((kind, param))),
                             _fmt(report.stderr((kind, param))), _fmt(frac)])

    paths["replications"] = outdir / "replications.csv"
    with open(paths["replications"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["benchmark", "method", "metric", "parameter",
                         "rep", "value"])
        for kind, param in _metric_rows(report):
            values = report.per_rep[(kind, param)]
            for rep, value in enumerate(values):
                writer.writerow([config.benchmark, config.method, kind,
                                 _fmt(param), rep, _fmt(float(value))])

    paths["per_t"] = outdir / "per_t.csv"
    with open(paths["per_t"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["benchmark", "method", "metric", "parameter",
                         "t", "value", "censored_flag"])
        for kind, param in _metric_rows(report):
            series = report.per_t_mean[(kind, param)]
            for i, value in enumerate(series):
                frac = (report.censored_per_t[param][i]
                        if kind == "f_surv" else None)
                writer.writerow([config.benchmark, config.method, kind,
                                 _fmt(param), i + 1, _fmt(float(value)),
                                 _fmt(None if frac is None else float(frac))])

    paths["evals"] = outdir / "evals.csv"
    with open(paths["evals"], "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["method", "t", "evals_min", "evals_max", "n_eval"])
        for i in range(report.evals_min.size):
            writer.writerow([config.method, i + 1, int(report.evals_min[i]),
                             int(report.evals_max[i]), config.n_eval])
    return paths


# ---------------------------------------------------------------------------
# The published tables
# ---------------------------------------------------------------------------

# Best results reported in earlier ROOT studies, for the comparison table.
# Entries are (metric, parameter) -> value; missing entries were not
# published.  Sources: survey of prior moving-peaks ROOT papers (Fu et al.
# 2013/2015, Jin et al. 2013, Yazdani et al. 2017, Novoa-Hernandez et al.
# 2018).
BEST_KNOWN = {
    "bench1_lambda1": {
        "source": "Fu et al. 2013",
        ("f_aver", 2): 53.48, ("f_aver", 6): 8.82,
        ("f_surv", 40.0): 3.02, ("f_surv", 50.0): 1.69,
    },
    "bench1_lambda0": {
        "source": "Jin et al. 2013; Yazdani et al. 2017",
        ("f_surv", 40.0): 8.35, ("f_surv", 50.0): 4.25,
    },
    "bench2": {
        "source": "Fu et al. 2015; Novoa-Hernandez et al. 2018",
        ("f_aver", 2): 48.88, ("f_aver", 6): 40.58,
        ("f_surv", 40.0): 1.35, ("f_surv", 50.0): 1.02,
    },
}

# Mean peak width, the Lipschitz constant used for the analytic gap column.
MEAN_WIDTH = {"bench1": 6.5, "bench2": 7.0}


def base_config(benchmark: str, *, method: str = "B", momentum: float = 0.0,
                center_init: str = "random", replications: int = 5000,
                seed: int = 1, workers: int = 0,
                horizon: int = 100) -> ExperimentConfig:
    """Standard-table configuration with the common knobs exposed."""
    config = ExperimentConfig.defaults(benchmark)
    overrides = dict(method=method, replications=replications, seed=seed,
                     workers=workers, horizon=horizon,
                     t_hi=min(100, horizon))
    if benchmark == "bench1":
        overrides["momentum"] = momentum
    else:
        overrides["center_init"] = center_init
    config = replace(config, **overrides)
    config.validate()
    return config


def gap_table(replications: int = 5000, seed: int = 1,
              workers: int = 0) -> dict:
    """Mean oracle gaps of all three methods next to the analytic bound."""
    rows = {}
    for benchmark in ("bench1", "bench2"):
        config = base_config(benchmark, replications=replications, seed=seed,
                             workers=workers)
        box = Box(config.x_min, config.x_max, config.dim)
        bound = lipschitz_gap_bound(MEAN_WIDTH[benchmark], config.n_eval, box)
        row = {"bound": bound}
        for method in ("A", "B", "C"):
            report = run_experiment(replace(config, method=method))
            row[method] = report.mean_gap()
        rows[benchmark] = row
    return rows


def write_gap_table(rows: dict, outdir) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "table_gaps.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["benchmark", "analytic_bound", "method_A",
                         "method_B", "method_C"])
        for benchmark, row in rows.items():
            writer.writerow([benchmark, _fmt(row["bound"]), _fmt(row["A"]),
                             _fmt(row["B"]), _fmt(row["C"])])
    return path


COMPARISON_SETTINGS = (
    ("bench1_lambda1", "bench1", dict(momentum=1.0)),
    ("bench1_lambda0", "bench1", dict(momentum=0.0)),
    ("bench2", "bench2", dict()),
)

COMPARISON_METRICS = (("f_aver", 2), ("f_aver", 6),
                      ("f_surv", 40.0), ("f_surv", 50.0))


def comparison_table(replications: int = 5000, seed: int = 1,
                     workers: int = 0) -> dict:
    """Best-known reference values next to this toolkit's method-B results."""
    rows = {}
    for name, benchmark, extra in COMPARISON_SETTINGS:
        config = base_config(benchmark, replications=replications, seed=seed,
                             workers=workers, **extra)
        report = run_experiment(config)
        ours = {key: report.mean(key) for key in COMPARISON_METRICS}
        rows[name] = {"best_known": BEST_KNOWN[name], "ours": ours}
    return rows


def write_comparison_table(rows: dict, outdir) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "table_comparison.csv"
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        header = ["setting", "source"]
        header += [f"best_{kind}_{param:g}" for kind, param in COMPARISON_METRICS]
        header += [f"ours_{kind}_{param:g}" for kind, param in COMPARISON_METRICS]
        writer.writerow(header)
        for name, row in rows.items():
            best = row["best_known"]
            record = [name, best["source"]]
            record += [_fmt(best.get(key)) for key in COMPARISON_METRICS]
            record += [_fmt(row["ours"][key]) for key in COMPARISON_METRICS]
            writer.writerow(record)
    return path


# ---------------------------------------------------------------------------
# Figure data
# ---------------------------------------------------------------------------

FIGURE_VARIANTS = {
    "fig2": (("lambda0", "bench1", dict(momentum=0.0)),
             ("lambda1", "bench1", dict(momentum=1.0))),
    "fig3": (("random", "bench2", dict(center_init="random")),
             ("grid", "bench2", dict(center_init="grid"))),
}

METHODS = ("A", "B", "C")


def figure_reports(which: str, replications: int = 5000, seed: int = 1,
                   workers: int = 0) -> dict:
    """Reports for every (variant, method) cell a figure needs."""
    if which not in FIGURE_VARIANTS:
        raise ValueError(f"unknown figure {which!r}")
    reports = {}
    for variant, benchmark, extra in FIGURE_VARIANTS[which]:
        for method in METHODS:
            config = base_config(benchmark, method=method,
                                 replications=replications, seed=seed,
                                 workers=workers, **extra)
            reports[(variant, method)] = run_experiment(config)
    return reports


def emit_figure_data(reports: dict, which: str, outdir) -> list:
    """Write per-subplot CSVs: averaged objective vs window length, and
    survival vs starting time for each threshold; one column per method."""
    if which not in FIGURE_VARIANTS:
        raise ValueError(f"unknown figure {which!r}")
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = []
    for variant, _, _ in FIGURE_VARIANTS[which]:
        cells = {}
        for method in METHODS:
            if (variant, method) not in reports:
                raise ValueError(f"missing report for variant {variant!r} "
                                 f"method {method!r}")
            cells[method] = reports[(variant, method)]
        ref = cells["A"].config
        if not ref.windows:
            raise ValueError(f"missing metric sweep: f_aver windows for "
                             f"{variant!r}")

        path = outdir / f"{which}_faver_{variant}.csv"
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["window"] + [f"method_{m}" for m in METHODS])
            for s in ref.windows:
                writer.writerow([s] + [_fmt(cells[m].mean_aver(s))
                                       for m in METHODS])
        paths.append(path)

        for delta in ref.thresholds:
            for method in METHODS:
                if ("f_surv", delta) not in cells[method].per_t_mean:
                    raise ValueError(f"missing metric sweep: f_surv at "
                                     f"threshold {delta:g} for {variant!r}")
            path = outdir / f"{which}_fsurv{delta:g}_{variant}.csv"
            with open(path, "w", newline="") as fh:
                writer = csv.writer(fh)
                writer.writerow(["t"] + [f"method_{m}" for m in METHODS])
                for t in range(ref.t_lo, ref.t_hi + 1):
                    row = [t]
                    for m in METHODS:
                        series = cells[m].per_t_mean[("f_surv", delta)]
                        row.append(_fmt(float(series[t - 1])))
                    writer.writerow(row)
            paths.append(path)
    return paths


# ---------------------------------------------------------------------------
# Appendix-style experiments
# ---------------------------------------------------------------------------

def experiment_max_height(peaks: int, horizon: int = 20,
                          replications: int = 2000, seed: int = 1) -> np.ndarray:
    """Mean height of the tallest peak at each time, over many replications."""
    params = replace(Bench1Params(), peaks=peaks)
    totals = np.zeros(horizon)
    for rep in range(replications):
        rng = RngState.for_replication(seed, rep, ENV_STREAM)
        trajectory = generate_trajectory(params, horizon, rng)
        totals += np.array([np.max(s.heights) for s in trajectory.states])
    return totals / replications


def write_max_height_csv(series_by_peaks: dict, outdir) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "max_height.csv"
    counts = sorted(series_by_peaks)
    horizon = len(next(iter(series_by_peaks.values())))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"peaks_{m}" for m in counts])
        for t in range(horizon):
            writer.writerow([t + 1] + [_fmt(float(series_by_peaks[m][t]))
                                       for m in counts])
    return path


def experiment_angle_density(n_draws: int = 1_000_000, bins: int = 64,
                             seed: int = 1):
    """Angle densities of the square-normalized and sphere samplers."""
    square_rng = RngState.for_replication(seed, 0, ENV_STREAM)
    sphere_rng = RngState.for_replication(seed, 1, ENV_STREAM)
    edges, square = angle_histogram(square_rng, "square", n_draws, bins)
    _, sphere = angle_histogram(sphere_rng, "sphere", n_draws, bins)
    return edges, square, sphere


def write_angle_density_csv(edges, square, sphere, outdir) -> Path:
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    path = outdir / "angle_density.csv"
    centers = 0.5 * (edges[:-1] + edges[1:])
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["angle", "square_density", "sphere_density"])
        for c, sq, sp in zip(centers, square, sphere):
            writer.writerow([_fmt(float(c)), _fmt(float(sq)), _fmt(float(sp))])
    return path


# ---------------------------------------------------------------------------
# Verification suite (CLI `verify`)
# ---------------------------------------------------------------------------

def random_bench1_state(rng: RngState, params: Bench1Params) -> Bench1State:
    """A benchmark-1 state with heights and widths anywhere in their bounds."""
    m, d = params.peaks, params.dim
    return Bench1State(
        box=params.box,
        centers=uniforms(rng, params.box.lo, params.box.hi, (m, d)),
        heights=uniforms(rng, params.h_bounds[0], params.h_bounds[1], m),
        widths=uniforms(rng, params.w_bounds[0], params.w_bounds[1], m),
        velocities=np.zeros((m, d)),
        sigma_h=np.zeros(m),
        sigma_w=np.zeros(m),
    )


def verify_suite(seed: int = 1) -> list:
    """Fast end-to-end invariant checks; returns (name, passed, detail)."""
    from scipy import stats

    results = []

    def check(name, passed, detail=""):
        results.append((name, bool(passed), detail))

    params = Bench1Params()
    grid = make_grid(params.box, 2500)
    rng = RngState.for_replication(seed, 0, ENV_STREAM)
    violations = 0
    for _ in range(1000):
        state = random_bench1_state(rng, params)
        if not verify_cover_lemma(state, grid):
            violations += 1
    check("cover lemma on 1000 random states", violations == 0,
          f"{violations} violations")

    # Adversarial mid-cell cone: the bound is attained up to rounding.
    mid = params.box.lo + 0.5 * grid.spacing
    cone = Bench1State(
        box=params.box,
        centers=np.array([[mid, mid]]),
        heights=np.array([70.0]), widths=np.array([params.w_bounds[1]]),
        velocities=np.zeros((1, 2)), sigma_h=np.zeros(1), sigma_w=np.zeros(1))
    best = float(np.max(eval_batch(grid.points, cone)))
    slack = 70.0 - params.w_bounds[1] * cover_radius(grid.n, params.box) - best
    check("mid-cell cone attains the bound", abs(slack) < 1e-9,
          f"slack {slack:.3g}")

    gen = RngState.for_replication(seed, 1, ENV_STREAM)
    worst_orth, worst_det = 0.0, 0.0
    for _ in range(200):
        thetas = gen.generator.uniform(-math.pi, math.pi, 3)
        rot = rotation_matrix(thetas)
        worst_orth = max(worst_orth,
                         float(np.max(np.abs(rot.T @ rot - np.eye(4)))))
        worst_det = max(worst_det, abs(float(np.linalg.det(rot)) - 1.0))
    check("rotation matrices orthogonal", worst_orth <= 1e-12
          and worst_det <= 1e-12, f"orth {worst_orth:.2g} det {worst_det:.2g}")

    ok_bounds, ok_norms = True, True
    for momentum in (0.0, 0.5, 1.0):
        p1 = replace(Bench1Params(), momentum=momentum)
        t_rng = RngState.for_replication(seed, 2, ENV_STREAM)
        traj = generate_trajectory(p1, 50, t_rng)
        for state in traj.states:
            ok_bounds &= bool(
                np.all(state.heights >= p1.h_bounds[0] - 1e-12)
                and np.all(state.heights <= p1.h_bounds[1] + 1e-12)
                and np.all(state.widths >= p1.w_bounds[0] - 1e-12)
                and np.all(state.widths <= p1.w_bounds[1] + 1e-12)
                and np.all(state.centers >= p1.box.lo - 1e-12)
                and np.all(state.centers <= p1.box.hi + 1e-12))
            norms = np.linalg.norm(state.velocities, axis=1)
            ok_norms &= bool(np.all(np.abs(norms - p1.step_size)
                                    <= 1e-9 * max(1.0, p1.step_size)))
    p2 = Bench2Params()
    t_rng = RngState.for_replication(seed, 3, ENV_STREAM)
    traj2 = generate_trajectory(p2, 50, t_rng)
    for state in traj2.states:
        ok_bounds &= bool(
            np.all(state.heights >= p2.h_bounds[0] - 1e-12)
            and np.all(state.heights <= p2.h_bounds[1] + 1e-12)
            and np.all(state.centers >= p2.box.lo - 1e-12)
            and np.all(state.centers <= p2.box.hi + 1e-12)
            and np.all(state.thetas >= p2.theta_bounds[0] - 1e-12)
            and np.all(state.thetas <= p2.theta_bounds[1] + 1e-12))
    check("dynamics keep all variables in bounds", ok_bounds)
    check("velocity norm preserved", ok_norms)

    small = replace(ExperimentConfig.defaults("bench1"), replications=3,
                    horizon=12, n_eval=100, n_sub=80, n_loc=20,
                    t_lo=2, t_hi=12, windows=(1, 2, 3), seed=seed)
    report_a = run_experiment(replace(small, method="A"))
    report_a2 = run_experiment(replace(small, method="A"))
    same = all(np.array_equal(report_a.per_rep[k], report_a2.per_rep[k])
               for k in report_a.per_rep)
    check("reruns are bit-identical", same)

    report_b = run_experiment(replace(small, method="B"))
    report_c = run_experiment(replace(small, method="C"))
    audit = (np.all(report_a.evals_max == small.n_sub)
             and np.all(report_a.evals_min == small.n_sub)
             and np.all(report_b.evals_max <= small.n_eval)
             and np.all(report_c.evals_max == small.n_eval)
             and np.all(report_c.evals_min == small.n_eval))
    check("evaluation budgets respected", bool(audit))

    dominance = all(np.all(report.per_rep[("gap", None)] >= -1e-9)
                    for report in (report_a, report_b, report_c))
    check("oracle dominates every solution", dominance)

    surv_mono = np.all(report_b.per_rep[("f_surv", 50.0)]
                       <= report_b.per_rep[("f_surv", 40.0)] + 1e-12)
    check("survival monotone in threshold", bool(surv_mono))

    # f_aver with window 1 must equal the current objective value.
    traj = generate_trajectory(small.bench_params(), small.horizon,
                               RngState.for_replication(seed, 7, ENV_STREAM))
    grid_small = make_grid(small.bench_params().box, small.n_eval)
    series = solve_robust(traj, grid_small, small.neighbor_radius)
    stacked = StackedTrajectory(traj)
    score = score_series(series.xs, stacked, oracle_values_fast(stacked),
                         (1,), (40.0,))
    check("window-1 average equals current value",
          bool(np.allclose(score.aver[1], score.values_now, atol=1e-12)))

    draws = 100_000
    s_rng = RngState.for_replication(seed, 4, ENV_STREAM)
    _, sphere_density = angle_histogram(s_rng, "sphere", draws, 64)
    q_rng = RngState.for_replication(seed, 5, ENV_STREAM)
    _, square_density = angle_histogram(q_rng, "square", draws, 64)
    width = 2 * math.pi / 64
    sphere_counts = sphere_density * draws * width
    square_counts = square_density * draws * width
    p_sphere = stats.chisquare(sphere_counts).pvalue
    p_square = stats.chisquare(square_counts).pvalue
    check("sphere sampler angles uniform", p_sphere > 0.01,
          f"p = {p_sphere:.4f}")
    check("square sampler angles biased", p_square < 1e-6,
          f"p = {p_square:.3g}")

    n_rng = RngState.for_replication(seed, 6, ENV_STREAM)
    sample = n_rng.generator.standard_normal(100_000)
    p_norm = stats.kstest(sample, "norm").pvalue
    check("normal draws pass KS", p_norm > 0.01, f"p = {p_norm:.4f}")

    return results
