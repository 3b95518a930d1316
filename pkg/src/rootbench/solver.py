"""Uniform-sampling solvers with strict per-time evaluation budgets.

Both methods evaluate a fixed lattice of points that never changes over
time, so per-point value histories accumulate for free.  The hybrid method
improves the best sampled point with a budgeted compass search; the robust
method replaces each value by its neighborhood average and picks the best
averaged point.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Callable, TextIO

import numpy as np

from .benchmark import (BenchState, Bench2State, Box, Trajectory,
                        bench2_axis_tables, eval_batch, eval_f1_batch,
                        lattice_values_from_tables)
from .rng import RngState


@dataclass
class GridSample:
    """Fixed lattice over the box plus the per-time value history."""

    box: Box
    points: np.ndarray                  # (N, D), row-major over axes
    axis: np.ndarray                    # (k,) per-axis coordinates
    spacing: float
    sqnorms: np.ndarray = None          # (N,) cached squared point norms
    history: list = field(default_factory=list)   # one (N,) array per time

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def points_per_axis(self) -> int:
        return self.axis.size

    def record(self, values: np.ndarray) -> None:
        """Append one time instant's values; existing entries are immutable."""
        self.history.append(values)

    def evaluate(self, state: BenchState, idx: np.ndarray) -> np.ndarray:
        """Objective values of the lattice points with the given indices.

        Exploits the lattice structure: separable objectives combine cached
        per-axis tables, cone objectives reuse the cached point norms.
        """
        if isinstance(state, Bench2State):
            tables = bench2_axis_tables(state, self.axis)
            return lattice_values_from_tables(tables, idx, self.points_per_axis)
        return eval_f1_batch(self.points[idx], state, sqnorms=self.sqnorms[idx])


def make_grid(box: Box, n_points: int) -> GridSample:
    """Uniform axis-aligned lattice with both endpoints included.

    Requires n_points = k^dim with k >= 2; the per-axis coordinates are
    lo + i*(hi-lo)/(k-1), which makes the lattice a cover of the box with
    radius sqrt(dim)*(hi-lo)/(2*(k-1)).
    """
    k = round(n_points ** (1.0 / box.dim))
    for candidate in (k - 1, k, k + 1):
        if candidate >= 2 and candidate ** box.dim == n_points:
            k = candidate
            break
    else:
        raise ValueError(f"grid size {n_points} is not a perfect "
                         f"{box.dim}-th power of an integer >= 2")
    axis = box.lo + np.arange(k) * (box.range / (k - 1))
    mesh = np.meshgrid(*([axis] * box.dim), indexing="ij")
    points = np.stack([g.ravel() for g in mesh], axis=1)
    return GridSample(box=box, points=points, axis=axis,
                      spacing=box.range / (k - 1),
                      sqnorms=np.einsum("nd,nd->n", points, points))


@dataclass
class BudgetLedger:
    """Per-time accounting of black-box objective evaluations."""

    n_eval: int
    n_loc: int = 0
    spent: list = field(default_factory=list)

    def __post_init__(self):
        if self.n_eval < 1:
            raise ValueError(f"n_eval must be >= 1, got {self.n_eval}")
        if not 0 <= self.n_loc <= self.n_eval:
            raise ValueError(f"n_loc must lie in [0, n_eval], got {self.n_loc}")

    def open_step(self) -> None:
        self.spent.append(0)

    def charge(self, count: int) -> None:
        self.spent[-1] += count
        # must be impossible by construction
        assert self.spent[-1] <= self.n_eval, (
            f"evaluation budget exceeded: {self.spent[-1]} > {self.n_eval}")

    def spent_per_time(self) -> np.ndarray:
        return np.array(self.spent, dtype=int)


@dataclass
class SolutionSeries:
    """Chosen solution per time instant with evaluation accounting."""

    xs: np.ndarray          # (T, D)
    values: np.ndarray      # (T,) current-time objective of the chosen point
    evals: np.ndarray       # (T,) evaluations spent at each time

    @property
    def horizon(self) -> int:
        return self.xs.shape[0]

    def to_csv(self, fh: TextIO) -> None:
        import csv
        dim = self.xs.shape[1]
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x{d + 1}" for d in range(dim)]
                        + ["value", "evals"])
        for i in range(self.horizon):
            writer.writerow([i + 1]
                            + [f"{v:.12g}" for v in self.xs[i]]
                            + [f"{self.values[i]:.12g}", int(self.evals[i])])


def subsample_indices(rng: RngState, n_total: int, n_sub: int) -> np.ndarray:
    """Uniform random subset of grid indices, without replacement, sorted."""
    if not 0 <= n_sub <= n_total:
        raise ValueError(f"cannot draw {n_sub} of {n_total} indices")
    if n_sub == n_total:
        return np.arange(n_total)
    idx = rng.generator.choice(n_total, size=n_sub, replace=False)
    return np.sort(idx)


def select_best(values: np.ndarray) -> int:
    """Index of the maximum value; lowest index wins ties."""
    values = np.asarray(values)
    if values.size == 0:
        raise ValueError("cannot select from an empty value array")
    return int(np.argmax(values))


def local_search(x0: np.ndarray, f0: float,
                 evaluate: Callable[[np.ndarray], np.ndarray],
                 budget: int, box: Box, step: float) -> tuple[np.ndarray, float, int]:
    """Budgeted compass search: axis probes, move to best improvement.

    Probes x +/- step along every axis (clipped into the box, and still
    evaluated when clipping lands on the current point), moves to the best
    strictly improving probe, halves the step when none improves.  Every
    probe evaluation counts against the budget.  Returns the best point
    seen, its value, and the evaluations used; never worse than (x0, f0).
    """
    if budget < 0:
        raise ValueError(f"local search budget must be >= 0, got {budget}")
    x = np.array(x0, dtype=float)
    best = f0
    used = 0
    dim = x.size
    while used < budget and step > 1e-12:
        probes = np.repeat(x[None, :], 2 * dim, axis=0)
        for d in range(dim):
            probes[2 * d, d] += step
            probes[2 * d + 1, d] -= step
        probes = box.clip(probes)
        probes = probes[: budget - used]
        vals = evaluate(probes)
        used += probes.shape[0]
        j = select_best(vals)
        if vals[j] > best:
            best = float(vals[j])
            x = probes[j]
        else:
            step *= 0.5
    return x, best, used


def solve_tmo(trajectory: Trajectory, grid: GridSample, ledger: BudgetLedger,
              rng: RngState, use_local_search: bool,
              n_sub: int | None = None,
              horizon: int | None = None) -> SolutionSeries:
    """Current-time optimizer: sample the grid, pick the best, refine.

    At every time instant a fresh random subset of ``n_sub`` lattice points
    is evaluated (the full lattice when ``n_sub`` is None), the argmax is
    taken, and, if enabled, a compass search spends the remaining local
    budget from there.  The past and future are ignored.  `horizon` limits
    the solved time range when the trajectory carries extra look-ahead
    states reserved for scoring.
    """
    n_total = grid.n
    n_sub = n_total if n_sub is None else n_sub
    if use_local_search:
        if n_sub + ledger.n_loc != ledger.n_eval:
            raise ValueError(
                f"budget split violated: {n_sub} sampled + {ledger.n_loc} "
                f"local != {ledger.n_eval} total")
    elif n_sub > ledger.n_eval:
        raise ValueError(f"cannot sample {n_sub} points on a budget of "
                         f"{ledger.n_eval}")

    horizon = trajectory.horizon if horizon is None else horizon
    if not 1 <= horizon <= trajectory.horizon:
        raise ValueError(f"horizon {horizon} outside 1..{trajectory.horizon}")
    dim = grid.points.shape[1]
    full = np.arange(n_total)
    xs = np.empty((horizon, dim))
    chosen_values = np.empty(horizon)
    for t in range(1, horizon + 1):
        state = trajectory.state(t)
        ledger.open_step()
        idx = full if n_sub == n_total else subsample_indices(rng, n_total, n_sub)
        ledger.charge(idx.shape[0])
        vals = grid.evaluate(state, idx)
        snapshot = np.full(n_total, np.nan)
        snapshot[idx] = vals
        grid.record(snapshot)

        best = select_best(vals)
        x, value = grid.points[idx[best]], float(vals[best])
        if use_local_search:
            def probe(candidates: np.ndarray) -> np.ndarray:
                ledger.charge(candidates.shape[0])
                return eval_batch(candidates, state)

            x, value, _ = local_search(x, value, probe, ledger.n_loc,
                                       grid.box, grid.spacing)
        xs[t - 1] = x
        chosen_values[t - 1] = value
    return SolutionSeries(xs=xs, values=chosen_values,
                          evals=ledger.spent_per_time())


NEIGHBOR_METRICS = ("step", "euclidean")


def neighborhood_offsets(spacing: float, radius: float, dim: int,
                         metric: str = "step") -> list:
    """Integer lattice offsets forming the averaging neighborhood.

    "step" counts the radius in lattice steps per axis (a square window of
    side 2*radius + 1, the reading that reproduces the published robust-
    method gaps).  "euclidean" keeps offsets within coordinate distance
    `radius` in the Euclidean norm.
    """
    if radius < 0:
        raise ValueError(f"neighborhood radius must be >= 0, got {radius}")
    if metric not in NEIGHBOR_METRICS:
        raise ValueError(f"unknown neighborhood metric {metric!r}")
    if metric == "step":
        reach = int(radius * (1 + 1e-12))
        return list(itertools.product(range(-reach, reach + 1), repeat=dim))
    reach = int(radius / spacing * (1 + 1e-12))
    offsets = []
    for off in itertools.product(range(-reach, reach + 1), repeat=dim):
        if sum(o * o for o in off) * spacing * spacing <= radius * radius * (1 + 1e-12):
            offsets.append(off)
    return offsets


def neighborhood_average(grid: GridSample, values: np.ndarray, radius: float,
                         metric: str = "step") -> np.ndarray:
    """Mean of values over all lattice points within `radius` of each point.

    The point itself is included; lattice positions outside the box simply
    do not exist, so boundary points average over fewer neighbors.
    """
    k = grid.points_per_axis
    dim = grid.box.dim
    offsets = neighborhood_offsets(grid.spacing, radius, dim, metric)
    cube = values.reshape((k,) * dim)
    total = np.zeros_like(cube)
    count = np.zeros_like(cube)
    for off in offsets:
        src = tuple(slice(max(0, -o), k - max(0, o)) for o in off)
        dst = tuple(slice(max(0, o), k + min(0, o)) for o in off)
        total[dst] += cube[src]
        count[dst] += 1.0
    return (total / count).ravel()


def solve_robust(trajectory: Trajectory, grid: GridSample, radius: float,
                 ledger: BudgetLedger | None = None, metric: str = "step",
                 horizon: int | None = None) -> SolutionSeries:
    """Robust selector: full-grid evaluation, neighborhood-averaged argmax.

    Every time instant evaluates the whole lattice, replaces each value by
    the average over its spatial neighborhood and returns the point with the
    highest average.  The accumulated value history stays available on the
    grid at no evaluation cost.
    """
    if ledger is None:
        ledger = BudgetLedger(n_eval=grid.n)
    if grid.n > ledger.n_eval:
        raise ValueError(f"grid of {grid.n} points exceeds the budget "
                         f"of {ledger.n_eval}")
    horizon = trajectory.horizon if horizon is None else horizon
    if not 1 <= horizon <= trajectory.horizon:
        raise ValueError(f"horizon {horizon} outside 1..{trajectory.horizon}")
    dim = grid.points.shape[1]
    full = np.arange(grid.n)
    xs = np.empty((horizon, dim))
    chosen_values = np.empty(horizon)
    for t in range(1, horizon + 1):
        state = trajectory.state(t)
        ledger.open_step()
        ledger.charge(grid.n)
        vals = grid.evaluate(state, full)
        grid.record(vals)
        averaged = neighborhood_average(grid, vals, radius, metric)
        best = select_best(averaged)
        xs[t - 1] = grid.points[best]
        chosen_values[t - 1] = float(vals[best])
    return SolutionSeries(xs=xs, values=chosen_values,
                          evals=ledger.spent_per_time())
