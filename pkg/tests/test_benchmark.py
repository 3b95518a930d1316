import io
import math

import numpy as np
import pytest
from scipy import stats

from rootbench.benchmark import (Bench1Params, Bench1State, Bench2Params,
                                 Bench2State, Box, StackedTrajectory, Uniform,
                                 eval_f1, eval_f1_batch, eval_f2,
                                 eval_f2_batch, export_trajectory,
                                 generate_trajectory, import_trajectory,
                                 init_bench1, init_bench2, oracle_optimum1,
                                 oracle_optimum2, rotation_matrix,
                                 state_lipschitz, step_bench1, step_bench2)
from rootbench.rng import RngState, normals


def bench1_defaults(**kw):
    return Bench1Params(**kw)


# ---------------------------------------------------------------------------
# Benchmark 1
# ---------------------------------------------------------------------------

def test_init_bench1_sets_heights_widths_and_speed():
    rng = RngState.from_seed(1)
    params = bench1_defaults()
    state = init_bench1(params, rng)
    assert np.all(state.heights == 50.0)
    assert np.all(state.widths == 6.0)
    norms = np.linalg.norm(state.velocities, axis=1)
    assert np.all(np.abs(norms - 1.0) <= 1e-9)
    assert np.all(state.sigma_h >= 1.0) and np.all(state.sigma_h <= 10.0)
    assert np.all(state.sigma_w >= 0.1) and np.all(state.sigma_w <= 1.0)


def test_init_bench1_centers_uniform():
    # 1e5 center components, tested against the uniform CDF
    params = bench1_defaults(peaks=5000)
    samples = []
    for seed in range(10):
        state = init_bench1(params, RngState.from_seed(seed))
        samples.append(state.centers.ravel())
    values = np.concatenate(samples)
    assert values.size == 100_000
    assert stats.kstest(values, stats.uniform(loc=0, scale=50).cdf).pvalue > 0.01


def test_step_bench1_momentum_one_keeps_velocity_exactly():
    params = bench1_defaults(momentum=1.0)
    rng = RngState.from_seed(3)
    state = init_bench1(params, rng)
    before = state.velocities.copy()
    after = step_bench1(state, params, rng)
    assert np.array_equal(after.velocities, before)


def test_step_bench1_momentum_zero_redraws_velocity():
    params = bench1_defaults(momentum=0.0)
    rng = RngState.from_seed(4)
    state = init_bench1(params, rng)
    after = step_bench1(state, params, rng)
    assert not np.allclose(after.velocities, state.velocities)
    norms = np.linalg.norm(after.velocities, axis=1)
    assert np.all(np.abs(norms - 1.0) <= 1e-9)


def test_step_bench1_straight_line_until_clip():
    params = bench1_defaults(momentum=1.0, sigma_h=0.0, sigma_w=0.0)
    rng = RngState.from_seed(5)
    traj = generate_trajectory(params, 10, rng)
    for a, b in zip(traj.states, traj.states[1:]):
        interior = np.all((b.centers > 0) & (b.centers < 50), axis=1)
        moved = b.centers - a.centers
        assert np.allclose(moved[interior], b.velocities[interior])


def test_step_bench1_clips_height_at_upper_bound():
    params = bench1_defaults(sigma_h=5.0, sigma_w=0.0)
    # find a seed whose first height perturbations are all positive
    for seed in range(200):
        probe = RngState.from_seed(seed)
        if np.all(normals(probe, params.peaks) > 0):
            break
    else:
        pytest.fail("no suitable seed found")
    rng = RngState.from_seed(seed)
    state = init_bench1(params, RngState.from_seed(0))
    state.heights[:] = 70.0
    after = step_bench1(state, params, rng)
    assert np.all(after.heights == 70.0)


def test_bench1_bounds_and_velocity_norm_along_trajectory():
    for momentum in (0.0, 0.3, 1.0):
        params = bench1_defaults(momentum=momentum)
        traj = generate_trajectory(params, 60, RngState.from_seed(17))
        for state in traj.states:
            assert np.all(state.heights >= 30.0) and np.all(state.heights <= 70.0)
            assert np.all(state.widths >= 1.0) and np.all(state.widths <= 12.0)
            assert np.all(state.centers >= 0.0) and np.all(state.centers <= 50.0)
            norms = np.linalg.norm(state.velocities, axis=1)
            assert np.all(np.abs(norms - 1.0) <= 1e-9)


def test_zero_step_size_keeps_centers_static():
    params = bench1_defaults(step_size=0.0)
    traj = generate_trajectory(params, 10, RngState.from_seed(2))
    for state in traj.states:
        assert np.array_equal(state.centers, traj.states[0].centers)
        assert np.all(state.velocities == 0.0)


def make_state1(centers, heights, widths, box=None):
    centers = np.asarray(centers, dtype=float)
    box = box or Box(0.0, 50.0, centers.shape[1])
    m = centers.shape[0]
    return Bench1State(box=box, centers=centers,
                       heights=np.asarray(heights, dtype=float),
                       widths=np.asarray(widths, dtype=float),
                       velocities=np.zeros_like(centers),
                       sigma_h=np.zeros(m), sigma_w=np.zeros(m))


def test_eval_f1_known_values():
    state = make_state1([[0.0, 0.0]], [50.0], [6.0])
    assert eval_f1(np.array([3.0, 4.0]), state) == pytest.approx(20.0)

    state2 = make_state1([[0.0, 0.0], [1.0, 0.0]], [50.0, 40.0], [1.0, 10.0])
    assert eval_f1(np.array([1.0, 0.0]), state2) == pytest.approx(49.0)

    # at the tallest peak's center the value is its height
    x_star, f_star = oracle_optimum1(state2)
    assert eval_f1(x_star, state2) == pytest.approx(f_star)


def test_eval_f1_rejects_points_outside_box():
    state = make_state1([[0.0, 0.0]], [50.0], [6.0])
    with pytest.raises(ValueError):
        eval_f1(np.array([51.0, 0.0]), state)


def test_eval_f1_batch_matches_pointwise_and_fast_path():
    rng = RngState.from_seed(30)
    params = bench1_defaults()
    state = init_bench1(params, rng)
    points = rng.generator.uniform(0, 50, (200, 2))
    batch = eval_f1_batch(points, state)
    direct = np.array([eval_f1(p, state) for p in points])
    assert np.allclose(batch, direct, atol=1e-12)
    fast = eval_f1_batch(points, state,
                         sqnorms=np.einsum("nd,nd->n", points, points))
    assert np.allclose(fast, direct, atol=1e-9)


def test_oracle_optimum1_argmax_and_ties():
    state = make_state1([[1.0, 1.0], [2.0, 2.0], [3.0, 3.0]],
                        [50.0, 65.0, 40.0], [1.0, 1.0, 1.0])
    x_star, f_star = oracle_optimum1(state)
    assert f_star == 65.0
    assert np.array_equal(x_star, [2.0, 2.0])

    tie = make_state1([[1.0, 1.0], [2.0, 2.0]], [65.0, 65.0], [1.0, 1.0])
    x_star, _ = oracle_optimum1(tie)
    assert np.array_equal(x_star, [1.0, 1.0])


def test_oracle_optimum1_against_dense_grid():
    rng = RngState.from_seed(31)
    params = bench1_defaults()
    traj = generate_trajectory(params, 5, rng)
    axis = np.linspace(0.0, 50.0, 2000)
    mesh = np.meshgrid(axis, axis, indexing="ij")
    grid = np.stack([g.ravel() for g in mesh], axis=1)
    for state in traj.states:
        _, f_star = oracle_optimum1(state)
        brute = float(np.max(eval_f1_batch(grid, state)))
        assert f_star >= brute - 1e-9
        assert f_star - brute <= np.max(state.widths) * (50.0 / 1999.0)


def test_bench1_lipschitz_on_random_pairs():
    rng = RngState.from_seed(32)
    state = init_bench1(bench1_defaults(), rng)
    state.heights[:] = rng.generator.uniform(30, 70, 5)
    state.widths[:] = rng.generator.uniform(1, 12, 5)
    lip = state_lipschitz(state)
    xs = rng.generator.uniform(0, 50, (300, 2))
    ys = rng.generator.uniform(0, 50, (300, 2))
    fx = eval_f1_batch(xs, state)
    fy = eval_f1_batch(ys, state)
    dist = np.linalg.norm(xs - ys, axis=1)
    assert np.all(np.abs(fx - fy) <= lip * dist + 1e-9)


# ---------------------------------------------------------------------------
# Benchmark 2
# ---------------------------------------------------------------------------

def test_init_bench2_random_mode():
    params = Bench2Params()
    state = init_bench2(params, RngState.from_seed(1))
    assert np.all(state.thetas == 0.0)
    assert np.all(state.heights >= 30.0) and np.all(state.heights <= 70.0)
    assert np.all(state.widths >= 1.0) and np.all(state.widths <= 13.0)
    assert np.all(state.centers >= -25.0) and np.all(state.centers <= 25.0)


def test_init_bench2_grid_mode_is_cartesian_product():
    params = Bench2Params(center_init="grid")
    state = init_bench2(params, RngState.from_seed(2))
    xs = np.unique(state.centers[:, 0])
    ys = np.unique(state.centers[:, 1])
    assert xs.size == 5 and ys.size == 5
    expect = {(x, y) for x in xs for y in ys}
    got = {(a, b) for a, b in state.centers}
    assert got == expect


def test_init_bench2_grid_mode_requires_perfect_power():
    params = Bench2Params(peaks=24, center_init="grid")
    with pytest.raises(ValueError):
        init_bench2(params, RngState.from_seed(0))


def test_rotation_matrix_identity_and_quarter_turn():
    assert np.allclose(rotation_matrix([0.0]), np.eye(2))
    rot = rotation_matrix([math.pi / 2])
    assert np.allclose(rot @ np.array([1.0, 0.0]), [0.0, 1.0], atol=1e-15)


@pytest.mark.parametrize("dim", [3, 4, 6])
def test_rotation_matrix_orthogonal(dim):
    rng = RngState.from_seed(dim)
    for _ in range(25):
        thetas = rng.generator.uniform(-math.pi, math.pi, dim - 1)
        rot = rotation_matrix(thetas)
        assert np.max(np.abs(rot.T @ rot - np.eye(dim))) <= 1e-12
        assert abs(np.linalg.det(rot) - 1.0) <= 1e-12


def test_step_bench2_identity_when_frozen():
    params = Bench2Params(sigma_h=0.0, sigma_w=0.0, sigma_theta=0.0)
    state = init_bench2(params, RngState.from_seed(3))
    after = step_bench2(state, params, RngState.from_seed(4))
    assert np.array_equal(after.centers, state.centers)
    assert np.array_equal(after.heights, state.heights)
    assert np.array_equal(after.widths, state.widths)
    assert np.array_equal(after.thetas, state.thetas)


def test_step_bench2_quarter_rotation():
    params = Bench2Params(peaks=1, sigma_h=0.0, sigma_w=0.0, sigma_theta=0.0)
    state = init_bench2(params, RngState.from_seed(5))
    state.centers[:] = [[10.0, 0.0]]
    state.thetas[:] = [math.pi / 2]
    after = step_bench2(state, params, RngState.from_seed(6))
    assert np.allclose(after.centers, [[0.0, 10.0]], atol=1e-12)


def test_step_bench2_corner_rotation_is_clipped():
    params = Bench2Params(peaks=1, sigma_h=0.0, sigma_w=0.0, sigma_theta=0.0)
    state = init_bench2(params, RngState.from_seed(7))
    state.centers[:] = [[25.0, 25.0]]
    state.thetas[:] = [math.pi / 4]
    after = step_bench2(state, params, RngState.from_seed(8))
    # rotation sends the corner to (0, 25*sqrt(2)); the box caps it at 25
    assert np.allclose(after.centers, [[0.0, 25.0]], atol=1e-12)


def test_step_bench2_rotation_preserves_norm_before_clipping():
    rng = RngState.from_seed(9)
    state = init_bench2(Bench2Params(), rng)
    rot = rotation_matrix(state.thetas)
    rotated = state.centers @ rot.T
    assert np.allclose(np.linalg.norm(rotated, axis=1),
                       np.linalg.norm(state.centers, axis=1), atol=1e-9)


def test_bench2_bounds_along_trajectory():
    params = Bench2Params()
    traj = generate_trajectory(params, 60, RngState.from_seed(10))
    for state in traj.states:
        assert np.all(state.heights >= 30.0) and np.all(state.heights <= 70.0)
        assert np.all(state.widths >= 1.0) and np.all(state.widths <= 13.0)
        assert np.all(state.centers >= -25.0) and np.all(state.centers <= 25.0)
        assert np.all(state.thetas >= -math.pi) and np.all(state.thetas <= math.pi)


def make_state2(centers, heights, widths, box=None):
    centers = np.asarray(centers, dtype=float)
    box = box or Box(-25.0, 25.0, centers.shape[1])
    return Bench2State(box=box, centers=centers,
                       heights=np.asarray(heights, dtype=float),
                       widths=np.asarray(widths, dtype=float),
                       thetas=np.zeros(centers.shape[1] - 1))


def test_eval_f2_known_values():
    state = make_state2([[0.0, 0.0]], [[60.0, 40.0]], [[2.0, 2.0]])
    assert eval_f2(np.array([1.0, 1.0]), state) == pytest.approx(48.0)


def test_eval_f2_rejects_points_outside_box():
    state = make_state2([[0.0, 0.0]], [[60.0, 40.0]], [[2.0, 2.0]])
    with pytest.raises(ValueError):
        eval_f2(np.array([26.0, 0.0]), state)


def test_eval_f2_batch_matches_pointwise():
    rng = RngState.from_seed(33)
    state = init_bench2(Bench2Params(), rng)
    points = rng.generator.uniform(-25, 25, (150, 2))
    batch = eval_f2_batch(points, state)
    direct = np.array([eval_f2(p, state) for p in points])
    assert np.allclose(batch, direct, atol=1e-12)


def test_oracle_optimum2_single_peak():
    state = make_state2([[3.0, -4.0]], [[60.0, 40.0]], [[2.0, 2.0]])
    x_star, f_star = oracle_optimum2(state)
    assert np.array_equal(x_star, [3.0, -4.0])
    assert f_star == pytest.approx(50.0)


def test_oracle_optimum2_dominates_random_points():
    rng = RngState.from_seed(34)
    state = init_bench2(Bench2Params(), rng)
    _, f_star = oracle_optimum2(state)
    points = rng.generator.uniform(-25, 25, (10_000, 2))
    assert f_star >= np.max(eval_f2_batch(points, state)) - 1e-9


def test_oracle_optimum2_against_line_grids():
    rng = RngState.from_seed(35)
    state = init_bench2(Bench2Params(), rng)
    x_star, f_star = oracle_optimum2(state)
    line = np.linspace(-25.0, 25.0, 100_000)
    total = 0.0
    for d in range(2):
        dist = np.abs(line[:, None] - state.centers[None, :, d])
        vals = np.max(state.heights[None, :, d]
                      - state.widths[None, :, d] * dist, axis=1)
        total += float(np.max(vals))
    brute = total / 2.0
    assert f_star >= brute - 1e-9
    # the line grid resolves the optimum to slope * half-spacing
    assert f_star - brute <= 13.0 * 0.5 * (50.0 / 99_999)
    assert eval_f2(x_star, state) == pytest.approx(f_star, abs=1e-9)


def test_bench2_lipschitz_l1_form_on_random_pairs():
    rng = RngState.from_seed(36)
    state = init_bench2(Bench2Params(), rng)
    slope = np.max(state.widths)
    xs = rng.generator.uniform(-25, 25, (300, 2))
    ys = rng.generator.uniform(-25, 25, (300, 2))
    fx = eval_f2_batch(xs, state)
    fy = eval_f2_batch(ys, state)
    l1 = np.sum(np.abs(xs - ys), axis=1)
    assert np.all(np.abs(fx - fy) <= slope / 2.0 * l1 + 1e-9)


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def test_generate_trajectory_single_state():
    traj = generate_trajectory(bench1_defaults(), 1, RngState.from_seed(1))
    assert traj.horizon == 1


def test_generate_trajectory_deterministic():
    a = generate_trajectory(bench1_defaults(), 20, RngState.from_seed(44))
    b = generate_trajectory(bench1_defaults(), 20, RngState.from_seed(44))
    for sa, sb in zip(a.states, b.states):
        assert np.array_equal(sa.centers, sb.centers)
        assert np.array_equal(sa.heights, sb.heights)
        assert np.array_equal(sa.velocities, sb.velocities)


def test_generate_trajectory_rejects_bad_horizon():
    with pytest.raises(ValueError):
        generate_trajectory(bench1_defaults(), 0, RngState.from_seed(1))


def test_stacked_trajectory_matches_direct_eval():
    for params in (bench1_defaults(), Bench2Params()):
        traj = generate_trajectory(params, 15, RngState.from_seed(45))
        stacked = StackedTrajectory(traj)
        rng = RngState.from_seed(46)
        points = rng.generator.uniform(params.box.lo, params.box.hi, (8, 2))
        table = stacked.eval_points_over_time(points)
        for i, p in enumerate(points):
            for t in range(1, 16):
                direct = (eval_f1(p, traj.state(t))
                          if traj.kind == "bench1"
                          else eval_f2(p, traj.state(t)))
                assert table[i, t - 1] == pytest.approx(direct, abs=1e-9)


@pytest.mark.parametrize("params", [bench1_defaults(), Bench2Params(),
                                    Bench2Params(center_init="grid")])
def test_trajectory_round_trip(params):
    traj = generate_trajectory(params, 12, RngState.from_seed(47))
    buf = io.StringIO()
    export_trajectory(traj, buf)
    buf.seek(0)
    back = import_trajectory(buf)
    assert back.kind == traj.kind
    assert back.horizon == traj.horizon
    assert back.params == traj.params
    for sa, sb in zip(traj.states, back.states):
        assert np.array_equal(sa.centers, sb.centers)
        assert np.array_equal(sa.heights, sb.heights)
        assert np.array_equal(sa.widths, sb.widths)
        if traj.kind == "bench1":
            assert np.array_equal(sa.velocities, sb.velocities)
        else:
            assert np.array_equal(sa.thetas, sb.thetas)


def test_parameter_validation():
    with pytest.raises(ValueError):
        Bench1Params(momentum=1.5)
    with pytest.raises(ValueError):
        Bench1Params(h_init=80.0)
    with pytest.raises(ValueError):
        Bench1Params(step_size=-1.0)
    with pytest.raises(ValueError):
        Bench2Params(sigma_theta=-0.1)
    with pytest.raises(ValueError):
        Bench2Params(center_init="hexagonal")
    with pytest.raises(ValueError):
        Box(1.0, 1.0, 2)
    with pytest.raises(ValueError):
        Uniform(3.0, 1.0)
