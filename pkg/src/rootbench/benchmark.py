"""Moving-peaks environments: generation, dynamics, objectives and oracles.

Benchmark 1 is a max of conic peaks whose centers drift with momentum-blended
random velocities; benchmark 2 averages per-dimension cone maxima while its
centers rotate around the origin.  All state variables are clipped back into
their declared bounds after every step.  Oracles compute the exact optimum of
a state for a-posteriori gap analysis; solvers never see them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence, TextIO, Union

import numpy as np

from .rng import RngState, normals, uniforms


@dataclass(frozen=True)
class Box:
    """Axis-aligned search space [lo, hi]^dim."""

    lo: float
    hi: float
    dim: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"box requires lo < hi, got [{self.lo}, {self.hi}]")
        if self.dim < 1:
            raise ValueError(f"box dimension must be >= 1, got {self.dim}")

    def contains(self, x: np.ndarray) -> bool:
        return bool(np.all(x >= self.lo) and np.all(x <= self.hi))

    def clip(self, x: np.ndarray) -> np.ndarray:
        return np.clip(x, self.lo, self.hi)

    @property
    def range(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class Uniform:
    """A parameter to be drawn once per replication from U(lo, hi)."""

    lo: float
    hi: float

    def __post_init__(self):
        if self.lo > self.hi:
            raise ValueError(f"invalid uniform range [{self.lo}, {self.hi}]")

    def __str__(self) -> str:
        return f"U({self.lo:g},{self.hi:g})"


ScalarOrDraw = Union[float, Uniform]


def _resolve_per_peak(value: ScalarOrDraw, m: int, rng: RngState) -> np.ndarray:
    """Per-peak parameter array: fixed scalar or one draw per peak."""
    if isinstance(value, Uniform):
        return uniforms(rng, value.lo, value.hi, m)
    return np.full(m, float(value))


@dataclass(frozen=True)
class Bench1Params:
    """Configuration of the cone-peaks environment with drifting centers."""

    peaks: int = 5
    box: Box = Box(0.0, 50.0, 2)
    h_bounds: tuple[float, float] = (30.0, 70.0)
    w_bounds: tuple[float, float] = (1.0, 12.0)
    h_init: float = 50.0
    w_init: float = 6.0
    momentum: float = 0.0                    # blend of old velocity, in [0, 1]
    step_size: float = 1.0                   # center speed per time step
    sigma_h: ScalarOrDraw = Uniform(1.0, 10.0)
    sigma_w: ScalarOrDraw = Uniform(0.1, 1.0)
    sigma_mode: str = "per_step"             # when sigma is a distribution:
                                             # redrawn every step, or fixed
                                             # per peak for the whole run

    def __post_init__(self):
        if self.peaks < 1:
            raise ValueError(f"need at least one peak, got {self.peaks}")
        if not self.h_bounds[0] <= self.h_init <= self.h_bounds[1]:
            raise ValueError(f"h_init {self.h_init} outside bounds {self.h_bounds}")
        if not self.w_bounds[0] <= self.w_init <= self.w_bounds[1]:
            raise ValueError(f"w_init {self.w_init} outside bounds {self.w_bounds}")
        if not 0.0 <= self.momentum <= 1.0:
            raise ValueError(f"momentum must lie in [0, 1], got {self.momentum}")
        if self.step_size < 0:
            raise ValueError(f"step size must be >= 0, got {self.step_size}")
        if self.sigma_mode not in ("per_step", "per_peak"):
            raise ValueError(f"sigma_mode must be 'per_step' or 'per_peak', "
                             f"got {self.sigma_mode!r}")

    @property
    def dim(self) -> int:
        return self.box.dim


@dataclass
class Bench1State:
    """All peak parameters of benchmark 1 at one time instant."""

    box: Box
    centers: np.ndarray      # (M, D)
    heights: np.ndarray      # (M,)
    widths: np.ndarray       # (M,)
    velocities: np.ndarray   # (M, D), norm s^m per peak
    sigma_h: np.ndarray      # (M,) frozen per replication
    sigma_w: np.ndarray      # (M,)


@dataclass(frozen=True)
class Bench2Params:
    """Configuration of the separable rotating-peaks environment."""

    peaks: int = 25
    box: Box = Box(-25.0, 25.0, 2)
    h_bounds: tuple[float, float] = (30.0, 70.0)
    w_bounds: tuple[float, float] = (1.0, 13.0)
    theta_bounds: tuple[float, float] = (-math.pi, math.pi)
    sigma_h: float = 5.0
    sigma_w: float = 0.5
    sigma_theta: float = 1.0
    theta_init: float = 0.0
    center_init: str = "random"              # "random" or "grid"

    def __post_init__(self):
        if self.peaks < 1:
            raise ValueError(f"need at least one peak, got {self.peaks}")
        for name in ("sigma_h", "sigma_w", "sigma_theta"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.center_init not in ("random", "grid"):
            raise ValueError(f"center_init must be 'random' or 'grid', "
                             f"got {self.center_init!r}")
        if not self.theta_bounds[0] <= self.theta_init <= self.theta_bounds[1]:
            raise ValueError("theta_init outside theta bounds")

    @property
    def dim(self) -> int:
        return self.box.dim


@dataclass
class Bench2State:
    """All peak parameters of benchmark 2 at one time instant."""

    box: Box
    centers: np.ndarray      # (M, D)
    heights: np.ndarray      # (M, D) per peak and dimension
    widths: np.ndarray       # (M, D)
    thetas: np.ndarray       # (D-1,) rotation angles


BenchParams = Union[Bench1Params, Bench2Params]
BenchState = Union[Bench1State, Bench2State]


# ---------------------------------------------------------------------------
# Benchmark 1
# ---------------------------------------------------------------------------

def init_bench1(params: Bench1Params, rng: RngState) -> Bench1State:
    """Initial state: centers uniform in the box, fixed h/w, random velocity.

    Draw order: centers, velocity directions, then the per-peak sigma values
    (when configured as distributions).
    """
    m, d = params.peaks, params.dim
    centers = uniforms(rng, params.box.lo, params.box.hi, (m, d))
    units = _unit_directions(rng, m, d)
    velocities = units * params.step_size
    sigma_h = _resolve_per_peak(params.sigma_h, m, rng)
    sigma_w = _resolve_per_peak(params.sigma_w, m, rng)
    if np.any(sigma_h < 0) or np.any(sigma_w < 0):
        raise ValueError("sigma_h and sigma_w must be non-negative")
    return Bench1State(
        box=params.box,
        centers=centers,
        heights=np.full(m, params.h_init),
        widths=np.full(m, params.w_init),
        velocities=velocities,
        sigma_h=sigma_h,
        sigma_w=sigma_w,
    )


def _unit_directions(rng: RngState, n: int, dim: int) -> np.ndarray:
    """n unit vectors uniform on the sphere (normal-normalization method)."""
    vecs = normals(rng, (n, dim))
    norms_ = np.linalg.norm(vecs, axis=1)
    while np.any(norms_ == 0.0):
        bad = norms_ == 0.0
        vecs[bad] = normals(rng, (int(bad.sum()), dim))
        norms_ = np.linalg.norm(vecs, axis=1)
    return vecs / norms_[:, None]


def step_bench1(state: Bench1State, params: Bench1Params,
                rng: RngState) -> Bench1State:
    """One dynamics step: perturb h and w, blend the velocity, move, clip.

    Draw order per step: height perturbation scales (per_step mode only),
    height perturbations, width scales, width perturbations, fresh random
    directions.  With momentum 1 the velocity is carried over exactly; with
    momentum 0 it equals the fresh draw.  Centers, heights and widths are
    clipped back into their bounds; the stored velocity is not altered by
    clipping.
    """
    m, d = state.centers.shape
    lam = params.momentum
    s = params.step_size

    if params.sigma_mode == "per_step":
        sigma_h = _resolve_per_peak(params.sigma_h, m, rng)
        noise_h = normals(rng, m)
        sigma_w = _resolve_per_peak(params.sigma_w, m, rng)
        noise_w = normals(rng, m)
    else:
        sigma_h, sigma_w = state.sigma_h, state.sigma_w
        noise_h = normals(rng, m)
        noise_w = normals(rng, m)
    heights = np.clip(state.heights + sigma_h * noise_h, *params.h_bounds)
    widths = np.clip(state.widths + sigma_w * noise_w, *params.w_bounds)

    if lam == 1.0 or s == 0.0:
        velocities = state.velocities.copy()
    else:
        fresh = _unit_directions(rng, m, d) * s
        blend = (1.0 - lam) * fresh + lam * state.velocities
        norms_ = np.linalg.norm(blend, axis=1)
        while np.any(norms_ == 0.0):      # measure-zero cancellation: redraw
            bad = norms_ == 0.0
            fresh[bad] = _unit_directions(rng, int(bad.sum()), d) * s
            blend[bad] = (1.0 - lam) * fresh[bad] + lam * state.velocities[bad]
            norms_[bad] = np.linalg.norm(blend[bad], axis=1)
        velocities = blend * (s / norms_)[:, None]

    centers = params.box.clip(state.centers + velocities)
    return Bench1State(
        box=state.box,
        centers=centers,
        heights=heights,
        widths=widths,
        velocities=velocities,
        sigma_h=sigma_h,
        sigma_w=sigma_w,
    )


def eval_f1(x: np.ndarray, state: Bench1State) -> float:
    """Objective of benchmark 1 at a single point inside the box."""
    x = np.asarray(x, dtype=float)
    if not state.box.contains(x):
        raise ValueError(f"query point {x} outside search space "
                         f"[{state.box.lo}, {state.box.hi}]^{state.box.dim}")
    dist = np.linalg.norm(x[None, :] - state.centers, axis=1)
    return float(np.max(state.heights - state.widths * dist))


def eval_f1_batch(points: np.ndarray, state: Bench1State,
                  sqnorms: np.ndarray | None = None) -> np.ndarray:
    """Objective of benchmark 1 at many points; no domain check.

    When the squared norms of the points are already known (grid caches
    them) the distances come from one matrix product instead of a full
    pairwise difference tensor.
    """
    if sqnorms is None:
        diff = points[:, None, :] - state.centers[None, :, :]
        dist = np.sqrt(np.einsum("nmd,nmd->nm", diff, diff))
    else:
        csq = np.einsum("md,md->m", state.centers, state.centers)
        d2 = sqnorms[:, None] + csq[None, :] - 2.0 * (points @ state.centers.T)
        np.maximum(d2, 0.0, out=d2)
        dist = np.sqrt(d2, out=d2)
    return np.max(state.heights[None, :] - state.widths[None, :] * dist, axis=1)


def oracle_optimum1(state: Bench1State) -> tuple[np.ndarray, float]:
    """Exact maximizer of benchmark 1: the tallest peak's center.

    Any peak evaluated anywhere is bounded by its own height, so the global
    maximum equals max_m h^m, attained at that peak's center (which lies in
    the box by the clipping invariant).  Ties break to the lowest index.
    """
    best = int(np.argmax(state.heights))
    return state.centers[best].copy(), float(state.heights[best])


# ---------------------------------------------------------------------------
# Benchmark 2
# ---------------------------------------------------------------------------

def init_bench2(params: Bench2Params, rng: RngState) -> Bench2State:
    """Initial state: centers random or on a product grid, h/w from bounds.

    Grid mode draws k points per axis (M = k^D) and takes their Cartesian
    product.  Draw order: centers (axis by axis in grid mode), heights,
    widths.
    """
    m, d = params.peaks, params.dim
    if params.center_init == "grid":
        k = round(m ** (1.0 / d))
        if k ** d != m:
            raise ValueError(f"grid center init needs peaks = k^dim, "
                             f"got {m} with dim {d}")
        axes = [uniforms(rng, params.box.lo, params.box.hi, k) for _ in range(d)]
        mesh = np.meshgrid(*axes, indexing="ij")
        centers = np.stack([g.ravel() for g in mesh], axis=1)
    else:
        centers = uniforms(rng, params.box.lo, params.box.hi, (m, d))
    heights = uniforms(rng, params.h_bounds[0], params.h_bounds[1], (m, d))
    widths = uniforms(rng, params.w_bounds[0], params.w_bounds[1], (m, d))
    return Bench2State(
        box=params.box,
        centers=centers,
        heights=heights,
        widths=widths,
        thetas=np.full(d - 1, params.theta_init) if d > 1 else np.zeros(0),
    )


def rotation_matrix(thetas: Sequence[float]) -> np.ndarray:
    """Composite rotation R^(D-1)(t_{D-1}) ... R^1(t_1) for D = len(thetas)+1.

    R^d rotates the plane spanned by axes d and d+1 (1-based); the lowest
    plane is applied first.  The result is orthogonal with determinant 1.
    """
    thetas = np.asarray(thetas, dtype=float)
    d = thetas.size + 1
    if d < 2:
        raise ValueError("rotation requires dimension >= 2")
    out = np.eye(d)
    for i, theta in enumerate(thetas):
        plane = np.eye(d)
        c, s = math.cos(theta), math.sin(theta)
        plane[i, i] = c
        plane[i, i + 1] = -s
        plane[i + 1, i] = s
        plane[i + 1, i + 1] = c
        out = plane @ out
    return out


def step_bench2(state: Bench2State, params: Bench2Params,
                rng: RngState) -> Bench2State:
    """One dynamics step: perturb h and w, rotate centers, advance angles.

    The rotation uses the pre-update angles; angle perturbations are drawn
    after it.  Every variable is clipped back into its bounds (centers into
    the box, angles into the angle interval).
    """
    m, d = state.centers.shape
    heights = np.clip(state.heights + params.sigma_h * normals(rng, (m, d)),
                      *params.h_bounds)
    widths = np.clip(state.widths + params.sigma_w * normals(rng, (m, d)),
                     *params.w_bounds)
    if d > 1:
        rot = rotation_matrix(state.thetas)
        centers = params.box.clip(state.centers @ rot.T)
        thetas = np.clip(state.thetas + params.sigma_theta * normals(rng, d - 1),
                         *params.theta_bounds)
    else:
        centers = state.centers.copy()
        thetas = state.thetas
    return Bench2State(
        box=state.box,
        centers=centers,
        heights=heights,
        widths=widths,
        thetas=thetas,
    )


def eval_f2(x: np.ndarray, state: Bench2State) -> float:
    """Objective of benchmark 2 at a single point inside the box."""
    x = np.asarray(x, dtype=float)
    if not state.box.contains(x):
        raise ValueError(f"query point {x} outside search space "
                         f"[{state.box.lo}, {state.box.hi}]^{state.box.dim}")
    dist = np.abs(x[None, :] - state.centers)                    # (M, D)
    per_dim = np.max(state.heights - state.widths * dist, axis=0)
    return float(np.mean(per_dim))


def eval_f2_batch(points: np.ndarray, state: Bench2State) -> np.ndarray:
    """Objective of benchmark 2 at many points; no domain check."""
    dist = np.abs(points[:, None, :] - state.centers[None, :, :])  # (N, M, D)
    per_dim = np.max(state.heights[None] - state.widths[None] * dist, axis=1)
    return np.mean(per_dim, axis=1)


def bench2_axis_tables(state: Bench2State, axis: np.ndarray) -> np.ndarray:
    """One-dimensional objective of every axis coordinate: (k, D) table.

    The objective is separable, so the value of any lattice point is the
    mean of its per-axis table entries.
    """
    dist = np.abs(axis[:, None, None] - state.centers[None, :, :])  # (k, M, D)
    return np.max(state.heights[None] - state.widths[None] * dist, axis=1)


def lattice_values_from_tables(tables: np.ndarray, idx: np.ndarray,
                               points_per_axis: int) -> np.ndarray:
    """Combine per-axis tables into values of row-major lattice indices."""
    dim = tables.shape[1]
    rem = np.asarray(idx)
    out = tables[rem % points_per_axis, dim - 1].copy()
    rem = rem // points_per_axis
    for d in range(dim - 2, -1, -1):
        out += tables[rem % points_per_axis, d]
        rem = rem // points_per_axis
    return out / dim


def oracle_optimum2(state: Bench2State) -> tuple[np.ndarray, float]:
    """Exact maximizer of benchmark 2, assembled dimension by dimension.

    Each one-dimensional subproblem is a maximum of concave tent functions
    whose apexes (the clipped centers) lie inside the interval, so its
    maximum is attained at one of the M centers; all candidates are
    evaluated and ties break to the lowest index.
    """
    m, d = state.centers.shape
    x_star = np.empty(d)
    per_dim = np.empty(d)
    for dd in range(d):
        c = state.centers[:, dd]
        dist = np.abs(c[:, None] - c[None, :])                  # candidate, peak
        vals = np.max(state.heights[None, :, dd] -
                      state.widths[None, :, dd] * dist, axis=1)
        best = int(np.argmax(vals))
        x_star[dd] = c[best]
        per_dim[dd] = vals[best]
    return x_star, float(np.mean(per_dim))


# ---------------------------------------------------------------------------
# Dispatch helpers shared by solvers and metrics
# ---------------------------------------------------------------------------

def eval_point(x: np.ndarray, state: BenchState) -> float:
    """Domain-checked single-point objective for either benchmark."""
    if isinstance(state, Bench1State):
        return eval_f1(x, state)
    return eval_f2(x, state)


def eval_batch(points: np.ndarray, state: BenchState) -> np.ndarray:
    """Vectorized objective at many points for either benchmark."""
    if isinstance(state, Bench1State):
        return eval_f1_batch(points, state)
    return eval_f2_batch(points, state)


def oracle_optimum(state: BenchState) -> tuple[np.ndarray, float]:
    if isinstance(state, Bench1State):
        return oracle_optimum1(state)
    return oracle_optimum2(state)


def state_lipschitz(state: BenchState) -> float:
    """Exact Lipschitz constant (w.r.t. the Euclidean norm) of the state.

    Benchmark 1: the maximal peak width.  Benchmark 2: Cauchy-Schwarz on the
    per-dimension slopes gives ||(max_m w^{m,d})_d||_2 / D.
    """
    if isinstance(state, Bench1State):
        return float(np.max(state.widths))
    return float(np.linalg.norm(np.max(state.widths, axis=0)) /
                 state.widths.shape[1])


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

@dataclass
class Trajectory:
    """A realized environment path: one state per time instant t = 1..T."""

    kind: str                      # "bench1" or "bench2"
    params: BenchParams
    seed: str                      # label of the generating random stream
    states: list = field(default_factory=list)

    @property
    def horizon(self) -> int:
        return len(self.states)

    def state(self, t: int) -> BenchState:
        """State at time t (1-based, matching the dynamics index)."""
        if not 1 <= t <= self.horizon:
            raise IndexError(f"time {t} outside 1..{self.horizon}")
        return self.states[t - 1]


def generate_trajectory(params: BenchParams, horizon: int,
                        rng: RngState) -> Trajectory:
    """Initialize an environment and record `horizon` consecutive states."""
    if horizon < 1:
        raise ValueError(f"horizon must be >= 1, got {horizon}")
    if isinstance(params, Bench1Params):
        kind, init, step = "bench1", init_bench1, step_bench1
    elif isinstance(params, Bench2Params):
        kind, init, step = "bench2", init_bench2, step_bench2
    else:
        raise TypeError(f"unsupported parameter type {type(params).__name__}")
    states = [init(params, rng)]
    for _ in range(horizon - 1):
        states.append(step(states[-1], params, rng))
    return Trajectory(kind=kind, params=params, seed=rng.label, states=states)


class StackedTrajectory:
    """Per-field arrays of a trajectory, stacked over time for fast scoring."""

    def __init__(self, trajectory: Trajectory):
        self.kind = trajectory.kind
        self.horizon = trajectory.horizon
        states = trajectory.states
        self.centers = np.stack([s.centers for s in states])     # (T, M, D)
        self.heights = np.stack([s.heights for s in states])
        self.widths = np.stack([s.widths for s in states])

    def eval_points_over_time(self, points: np.ndarray) -> np.ndarray:
        """Objective of each point under every recorded state: (P, T).

        Uses plain coordinate differences: chosen points often sit exactly
        on peak centers, where faster norm expansions lose precision.
        """
        p = points.shape[0]
        t, m, d = self.centers.shape
        flat_c = self.centers.reshape(t * m, d)
        if self.kind == "bench1":
            diff = points[:, None, :] - flat_c[None, :, :]
            dist = np.sqrt(np.einsum("pnd,pnd->pn", diff, diff)).reshape(p, t, m)
            vals = self.heights[None] - self.widths[None] * dist
            return np.max(vals, axis=2)
        flat_h = self.heights.reshape(t * m, d)
        flat_w = self.widths.reshape(t * m, d)
        out = np.zeros((p, t))
        for dd in range(d):
            dist = np.abs(points[:, dd, None] - flat_c[None, :, dd])
            vals = (flat_h[None, :, dd] - flat_w[None, :, dd] * dist)
            out += np.max(vals.reshape(p, t, m), axis=2)
        return out / d                                           # (P, T)


# ---------------------------------------------------------------------------
# Text export / import of trajectories
# ---------------------------------------------------------------------------
#
# Line format: header lines "# key = value" describing kind, seed, horizon
# and all generating parameters, then one line per state.  Benchmark 1 state
# lines hold t followed per peak by center (D), height, width, velocity (D),
# sigma_h, sigma_w.  Benchmark 2 lines hold t followed per peak by center
# (D), heights (D), widths (D), then the D-1 angles.  Numbers use 17
# significant digits so a round trip is exact.

_FMT = "%.17g"


def _param_header(params: BenchParams) -> dict[str, str]:
    if isinstance(params, Bench1Params):
        return {
            "kind": "bench1",
            "peaks": str(params.peaks),
            "dim": str(params.dim),
            "x_min": _FMT % params.box.lo,
            "x_max": _FMT % params.box.hi,
            "h_min": _FMT % params.h_bounds[0],
            "h_max": _FMT % params.h_bounds[1],
            "w_min": _FMT % params.w_bounds[0],
            "w_max": _FMT % params.w_bounds[1],
            "h_init": _FMT % params.h_init,
            "w_init": _FMT % params.w_init,
            "lambda": _FMT % params.momentum,
            "step_size": _FMT % params.step_size,
            "sigma_h": str(params.sigma_h),
            "sigma_w": str(params.sigma_w),
            "sigma_mode": params.sigma_mode,
        }
    return {
        "kind": "bench2",
        "peaks": str(params.peaks),
        "dim": str(params.dim),
        "x_min": _FMT % params.box.lo,
        "x_max": _FMT % params.box.hi,
        "h_min": _FMT % params.h_bounds[0],
        "h_max": _FMT % params.h_bounds[1],
        "w_min": _FMT % params.w_bounds[0],
        "w_max": _FMT % params.w_bounds[1],
        "theta_min": _FMT % params.theta_bounds[0],
        "theta_max": _FMT % params.theta_bounds[1],
        "sigma_h": _FMT % params.sigma_h,
        "sigma_w": _FMT % params.sigma_w,
        "sigma_theta": _FMT % params.sigma_theta,
        "theta_init": _FMT % params.theta_init,
        "center_init": params.center_init,
    }


def parse_scalar_or_draw(text: str) -> ScalarOrDraw:
    """Parse '3.5' or 'U(1,10)' into a fixed value or a distribution."""
    text = text.strip()
    if text.upper().startswith("U(") and text.endswith(")"):
        inner = text[2:-1]
        parts = inner.split(",")
        if len(parts) != 2:
            raise ValueError(f"cannot parse uniform spec {text!r}")
        return Uniform(float(parts[0]), float(parts[1]))
    return float(text)


def export_trajectory(trajectory: Trajectory, fh: TextIO) -> None:
    """Write a trajectory in the line-oriented text format."""
    header = _param_header(trajectory.params)
    header["seed"] = trajectory.seed
    header["horizon"] = str(trajectory.horizon)
    for key, value in header.items():
        fh.write(f"# {key} = {value}\n")
    for t, state in enumerate(trajectory.states, start=1):
        fields = [str(t)]
        m = state.centers.shape[0]
        if trajectory.kind == "bench1":
            for i in range(m):
                fields.extend(_FMT % v for v in state.centers[i])
                fields.append(_FMT % state.heights[i])
                fields.append(_FMT % state.widths[i])
                fields.extend(_FMT % v for v in state.velocities[i])
                fields.append(_FMT % state.sigma_h[i])
                fields.append(_FMT % state.sigma_w[i])
        else:
            for i in range(m):
                fields.extend(_FMT % v for v in state.centers[i])
                fields.extend(_FMT % v for v in state.heights[i])
                fields.extend(_FMT % v for v in state.widths[i])
            fields.extend(_FMT % v for v in state.thetas)
        fh.write(" ".join(fields) + "\n")


def import_trajectory(fh: TextIO) -> Trajectory:
    """Read a trajectory written by :func:`export_trajectory`."""
    header: dict[str, str] = {}
    state_lines: list[str] = []
    for line in fh:
        line = line.strip()
        if not line:
            continue
        if line.startswith("#"):
            key, _, value = line[1:].partition("=")
            header[key.strip()] = value.strip()
        else:
            state_lines.append(line)
    try:
        kind = header["kind"]
        m = int(header["peaks"])
        d = int(header["dim"])
        box = Box(float(header["x_min"]), float(header["x_max"]), d)
        if kind == "bench1":
            params: BenchParams = Bench1Params(
                peaks=m, box=box,
                h_bounds=(float(header["h_min"]), float(header["h_max"])),
                w_bounds=(float(header["w_min"]), float(header["w_max"])),
                h_init=float(header["h_init"]),
                w_init=float(header["w_init"]),
                momentum=float(header["lambda"]),
                step_size=float(header["step_size"]),
                sigma_h=parse_scalar_or_draw(header["sigma_h"]),
                sigma_w=parse_scalar_or_draw(header["sigma_w"]),
                sigma_mode=header.get("sigma_mode", "per_step"),
            )
        elif kind == "bench2":
            params = Bench2Params(
                peaks=m, box=box,
                h_bounds=(float(header["h_min"]), float(header["h_max"])),
                w_bounds=(float(header["w_min"]), float(header["w_max"])),
                theta_bounds=(float(header["theta_min"]),
                              float(header["theta_max"])),
                sigma_h=float(header["sigma_h"]),
                sigma_w=float(header["sigma_w"]),
                sigma_theta=float(header["sigma_theta"]),
                theta_init=float(header["theta_init"]),
                center_init=header["center_init"],
            )
        else:
            raise ValueError(f"unknown benchmark kind {kind!r}")
    except KeyError as exc:
        raise ValueError(f"trajectory header is missing key {exc}") from None

    states: list[BenchState] = []
    for t, line in enumerate(state_lines, start=1):
        values = line.split()
        if int(values[0]) != t:
            raise ValueError(f"state line {t} carries time index {values[0]}")
        nums = np.array([float(v) for v in values[1:]])
        if kind == "bench1":
            per_peak = nums.reshape(m, 2 * d + 4)
            states.append(Bench1State(
                box=box,
                centers=per_peak[:, 0:d].copy(),
                heights=per_peak[:, d].copy(),
                widths=per_peak[:, d + 1].copy(),
                velocities=per_peak[:, d + 2:2 * d + 2].copy(),
                sigma_h=per_peak[:, 2 * d + 2].copy(),
                sigma_w=per_peak[:, 2 * d + 3].copy(),
            ))
        else:
            per_peak = nums[:m * 3 * d].reshape(m, 3 * d)
            states.append(Bench2State(
                box=box,
                centers=per_peak[:, 0:d].copy(),
                heights=per_peak[:, d:2 * d].copy(),
                widths=per_peak[:, 2 * d:3 * d].copy(),
                thetas=nums[m * 3 * d:].copy(),
            ))
    return Trajectory(kind=kind, params=params,
                      seed=header.get("seed", ""), states=states)
