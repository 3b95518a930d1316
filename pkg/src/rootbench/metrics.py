"""Robustness metrics, gap analysis and the sampling quality bound.

Scoring is a posteriori: the chosen solution is evaluated against the true
future states of the trajectory, which the solvers never saw.  Survival
measurements that outlast the horizon are censored at T - t + 1 and flagged
so aggregates can report the censored fraction.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .benchmark import (BenchState, Box, StackedTrajectory, Trajectory,
                        eval_batch, eval_point, oracle_optimum,
                        state_lipschitz)
from .solver import GridSample, SolutionSeries


@dataclass(frozen=True)
class MetricsConfig:
    """Which metrics to compute and the time range to aggregate over."""

    windows: tuple = tuple(range(1, 21))       # averaging window lengths S
    thresholds: tuple = (40.0, 50.0)           # survival thresholds
    t_lo: int = 20
    t_hi: int = 100

    def __post_init__(self):
        if any(s < 1 for s in self.windows):
            raise ValueError("averaging windows must be >= 1")
        if not 1 <= self.t_lo <= self.t_hi:
            raise ValueError(f"invalid aggregation range "
                             f"[{self.t_lo}, {self.t_hi}]")


class SurvivalTime(NamedTuple):
    steps: int
    censored: bool


def f_aver(x: np.ndarray, trajectory: Trajectory, t: int, window: int) -> float:
    """Mean objective of x over the true states at times t .. t+window-1."""
    if window < 1:
        raise ValueError(f"window must be >= 1, got {window}")
    if t < 1 or t + window - 1 > trajectory.horizon:
        raise ValueError(f"window [{t}, {t + window - 1}] exceeds horizon "
                         f"{trajectory.horizon}")
    vals = [eval_point(x, trajectory.state(t + s)) for s in range(window)]
    return float(np.mean(vals))


def f_surv(x: np.ndarray, trajectory: Trajectory, t: int, threshold: float,
           window: int | None = None) -> SurvivalTime:
    """Steps until the objective of x first drops to the threshold or below.

    Returns 0 when the objective already fails at time t.  The scan covers
    the recorded states from t on, optionally capped at `window` of them;
    when the value never drops within the scanned range the measurement is
    censored at the number of scanned states (T - t + 1 uncapped, `window`
    otherwise).
    """
    if not 1 <= t <= trajectory.horizon:
        raise ValueError(f"time {t} outside 1..{trajectory.horizon}")
    scan = trajectory.horizon - t + 1
    if window is not None:
        if window < 1:
            raise ValueError(f"survival window must be >= 1, got {window}")
        scan = min(scan, window)
    for s in range(scan):
        if eval_point(x, trajectory.state(t + s)) <= threshold:
            return SurvivalTime(s, False)
    return SurvivalTime(scan, True)


def cover_radius(n_points: int, box: Box) -> float:
    """Cover radius of the uniform lattice: sqrt(D)(hi-lo)/(2(N^(1/D)-1))."""
    k = round(n_points ** (1.0 / box.dim))
    for candidate in (k - 1, k, k + 1):
        if candidate >= 2 and candidate ** box.dim == n_points:
            k = candidate
            break
    else:
        raise ValueError(f"{n_points} points do not form a k^{box.dim} "
                         f"lattice with k >= 2")
    return math.sqrt(box.dim) * box.range / (2.0 * (k - 1))


def lipschitz_gap_bound(lipschitz: float, n_points: int, box: Box) -> float:
    """Guaranteed worst-case gap of the best lattice point: L * cover radius."""
    if lipschitz < 0:
        raise ValueError(f"Lipschitz constant must be >= 0, got {lipschitz}")
    return lipschitz * cover_radius(n_points, box)


def verify_cover_lemma(state: BenchState, grid: GridSample,
                       oracle: tuple[np.ndarray, float] | None = None) -> bool:
    """Check that the best lattice value is within L * cover radius of f*."""
    if oracle is None:
        oracle = oracle_optimum(state)
    _, f_star = oracle
    best = float(np.max(eval_batch(grid.points, state)))
    bound = state_lipschitz(state) * cover_radius(grid.n, grid.box)
    return best >= f_star - bound - 1e-9


@dataclass
class GapReport:
    """Per-time and mean distance between the oracle and a solution series."""

    per_t: np.ndarray          # (T,) f_star(t) - f(x(t); state t)
    mean: float
    t_lo: int
    t_hi: int


def gap_report(series: SolutionSeries, trajectory: Trajectory,
               t_lo: int = 1, t_hi: int | None = None) -> GapReport:
    """Oracle gap of a solution series, re-evaluated from the trajectory."""
    horizon = trajectory.horizon
    if series.horizon != horizon:
        raise ValueError(f"series covers {series.horizon} instants but the "
                         f"trajectory has {horizon}")
    t_hi = horizon if t_hi is None else t_hi
    if not 1 <= t_lo <= t_hi <= horizon:
        raise ValueError(f"invalid gap range [{t_lo}, {t_hi}]")
    stacked = StackedTrajectory(trajectory)
    now = np.einsum("tt->t", stacked.eval_points_over_time(series.xs))
    f_star = oracle_values_over_time(trajectory)
    per_t = f_star - now
    return GapReport(per_t=per_t, mean=float(np.mean(per_t[t_lo - 1:t_hi])),
                     t_lo=t_lo, t_hi=t_hi)


def oracle_values_over_time(trajectory: Trajectory) -> np.ndarray:
    """Optimal objective value of every recorded state."""
    return np.array([oracle_optimum(s)[1] for s in trajectory.states])


@dataclass
class SeriesScore:
    """All per-time metric values of one solution series on one trajectory."""

    values_now: np.ndarray              # (T,) f(x(t); state t)
    gap: np.ndarray                     # (T,) oracle gap
    aver: dict                          # window S -> (T,) means, NaN if invalid
    surv_steps: dict                    # threshold -> (T,) ints
    surv_censored: dict                 # threshold -> (T,) bools


def score_series(xs: np.ndarray, stacked: StackedTrajectory,
                 f_star: np.ndarray, windows: Sequence[int],
                 thresholds: Sequence[float],
                 surv_window: int | None = None) -> SeriesScore:
    """Score chosen points against the full trajectory in one pass.

    Builds the matrix V[i, j] = f(x(i+1); state j+1) and derives every
    averaging window and survival threshold from it.  The trajectory may
    extend past the solution series (a look-ahead margin); survival scans
    at most `surv_window` states when given.
    """
    chosen = xs.shape[0]
    total = stacked.horizon
    if chosen > total:
        raise ValueError(f"{chosen} chosen points but only {total} states")
    v = stacked.eval_points_over_time(xs)            # (chosen, total)
    i = np.arange(chosen)
    now = v[i, i].copy()
    cums = np.cumsum(v, axis=1)

    aver = {}
    for s in windows:
        out = np.full(chosen, np.nan)
        valid = min(chosen, total - s + 1)
        if valid > 0:
            ii = np.arange(valid)
            upper = cums[ii, ii + s - 1]
            lower = np.where(ii > 0, cums[ii, np.maximum(ii - 1, 0)], 0.0)
            out[:valid] = (upper - lower) / s
        aver[s] = out

    surv_steps = {}
    surv_censored = {}
    for delta in thresholds:
        below = v <= delta
        steps = np.empty(chosen, dtype=int)
        censored = np.zeros(chosen, dtype=bool)
        for idx in range(chosen):
            scan = total - idx
            if surv_window is not None:
                scan = min(scan, surv_window)
            row = below[idx, idx:idx + scan]
            if row.any():
                steps[idx] = int(np.argmax(row))
            else:
                steps[idx] = scan        # number of scanned states, censored
                censored[idx] = True
        surv_steps[delta] = steps
        surv_censored[delta] = censored

    return SeriesScore(values_now=now, gap=f_star[:chosen] - now, aver=aver,
                       surv_steps=surv_steps, surv_censored=surv_censored)
