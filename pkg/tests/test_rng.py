import math

import numpy as np
import pytest
from scipy import stats

from rootbench.rng import (RngState, angle_histogram, normals, sample_normal,
                           sample_sphere, sample_spheres,
                           sample_square_normalized,
                           sample_squares_normalized, sample_uniform, uniforms)


def test_same_seed_same_stream():
    a = RngState.from_seed(1234)
    b = RngState.from_seed(1234)
    assert [sample_normal(a) for _ in range(100)] == \
           [sample_normal(b) for _ in range(100)]


def test_replication_streams_are_independent_and_reproducible():
    a = RngState.for_replication(7, 3)
    b = RngState.for_replication(7, 3)
    c = RngState.for_replication(7, 4)
    draws_a = normals(a, 50)
    assert np.array_equal(draws_a, normals(b, 50))
    assert not np.array_equal(draws_a, normals(c, 50))


def test_env_and_solver_streams_differ():
    env = RngState.for_replication(7, 3, stream=0)
    sol = RngState.for_replication(7, 3, stream=1)
    assert not np.array_equal(normals(env, 20), normals(sol, 20))


def test_normal_moments():
    rng = RngState.from_seed(42)
    draws = normals(rng, 1_000_000)
    assert abs(draws.mean()) < 0.01
    assert abs(draws.var() - 1.0) < 0.02


def test_normal_ks():
    rng = RngState.from_seed(9)
    assert stats.kstest(normals(rng, 100_000), "norm").pvalue > 0.01


def test_uniform_degenerate_interval():
    rng = RngState.from_seed(0)
    assert sample_uniform(rng, 5.0, 5.0) == 5.0


def test_uniform_mean():
    rng = RngState.from_seed(1)
    assert abs(uniforms(rng, 0.0, 1.0, 1_000_000).mean() - 0.5) < 0.01


def test_uniform_rejects_inverted_range():
    rng = RngState.from_seed(0)
    with pytest.raises(ValueError):
        sample_uniform(rng, 2.0, 1.0)
    with pytest.raises(ValueError):
        uniforms(rng, 2.0, 1.0, 5)


@pytest.mark.parametrize("dim", [1, 2, 3, 5])
def test_sphere_norm_equals_radius(dim):
    rng = RngState.from_seed(5)
    for radius in (1.0, 2.5):
        draws = sample_spheres(rng, 200, dim, radius)
        norms = np.linalg.norm(draws, axis=1)
        assert np.all(np.abs(norms - radius) <= 1e-9 * radius)


def test_sphere_one_dimensional_is_sign_flip():
    rng = RngState.from_seed(6)
    draws = sample_spheres(rng, 10_000, 1, 2.0)[:, 0]
    assert set(np.unique(np.round(draws, 12))) == {-2.0, 2.0}
    # both signs occur with roughly equal frequency
    assert abs((draws > 0).mean() - 0.5) < 0.02


def test_single_draw_matches_batch():
    a = RngState.from_seed(11)
    b = RngState.from_seed(11)
    single = sample_sphere(a, 3, 1.5)
    batch = sample_spheres(b, 1, 3, 1.5)
    assert np.array_equal(single, batch[0])


def test_sphere_rejects_bad_parameters():
    rng = RngState.from_seed(0)
    with pytest.raises(ValueError):
        sample_sphere(rng, 2, 0.0)
    with pytest.raises(ValueError):
        sample_sphere(rng, 0, 1.0)
    with pytest.raises(ValueError):
        sample_square_normalized(rng, 2, -1.0)


def test_square_normalized_norm():
    rng = RngState.from_seed(8)
    draws = sample_squares_normalized(rng, 500, 2, 3.0)
    assert np.all(np.abs(np.linalg.norm(draws, axis=1) - 3.0) <= 1e-12 * 3.0)


def test_sphere_angles_uniform_square_angles_biased():
    bins = 64
    sphere_rng = RngState.from_seed(21)
    _, sphere_density = angle_histogram(sphere_rng, "sphere", 200_000, bins)
    square_rng = RngState.from_seed(22)
    _, square_density = angle_histogram(square_rng, "square", 200_000, bins)
    width = 2 * math.pi / bins
    p_sphere = stats.chisquare(sphere_density * 200_000 * width).pvalue
    p_square = stats.chisquare(square_density * 200_000 * width).pvalue
    assert p_sphere > 0.01
    assert p_square < 1e-6


def test_square_density_peaks_at_diagonals():
    rng = RngState.from_seed(23)
    edges, density = angle_histogram(rng, "square", 400_000, 64)
    centers = 0.5 * (edges[:-1] + edges[1:])
    width = centers[1] - centers[0]
    top4 = centers[np.argsort(density)[-4:]]
    diagonals = np.array([1, 3, 5, 7]) * math.pi / 4
    for angle in top4:
        assert np.min(np.abs(diagonals - angle)) <= width


def test_angle_histogram_single_bin_is_flat_density():
    rng = RngState.from_seed(2)
    _, density = angle_histogram(rng, "sphere", 1000, 1)
    assert density[0] == pytest.approx(1.0 / (2 * math.pi), rel=1e-12)


def test_angle_histogram_integrates_to_one():
    rng = RngState.from_seed(3)
    edges, density = angle_histogram(rng, "square", 5000, 17)
    widths = np.diff(edges)
    assert np.sum(density * widths) == pytest.approx(1.0, abs=1e-12)


def test_angle_histogram_rejects_bad_parameters():
    rng = RngState.from_seed(0)
    with pytest.raises(ValueError):
        angle_histogram(rng, "cube", 100, 4)
    with pytest.raises(ValueError):
        angle_histogram(rng, "sphere", 100, 0)
    with pytest.raises(ValueError):
        angle_histogram(rng, "sphere", 3, 4)
