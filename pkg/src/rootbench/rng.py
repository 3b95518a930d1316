"""Deterministic, seedable random sources for the benchmark dynamics.

All stochastic elements of the toolkit draw from an :class:`RngState`.  Each
Monte-Carlo replication owns its own state, derived from the master seed by a
fixed, documented rule (see :meth:`RngState.for_replication`), so results are
reproducible bit-for-bit regardless of how replications are scheduled.

Two direction samplers are provided: the correct uniform-on-the-sphere
sampler used by the environment dynamics, and the legacy square-then-rescale
sampler kept only to demonstrate its angular bias.
"""

from __future__ import annotations

import numpy as np


class RngState:
    """A seeded PCG64 stream plus the label identifying how it was derived.

    A state must never be shared between concurrent workers; every draw
    advances it.  Identical derivations give identical streams on every
    platform and run.
    """

    def __init__(self, seed_seq: np.random.SeedSequence, label: str):
        self.generator = np.random.Generator(np.random.PCG64(seed_seq))
        self.label = label

    @classmethod
    def from_seed(cls, seed: int) -> "RngState":
        """Root state for a 64-bit master seed."""
        return cls(np.random.SeedSequence(seed), str(seed))

    @classmethod
    def for_replication(cls, master_seed: int, replication: int,
                        stream: int = 0) -> "RngState":
        """Independent per-replication state.

        Derivation rule: ``SeedSequence(entropy=master_seed,
        spawn_key=(replication, stream))``.  ``stream`` separates the
        environment draws (0) from solver-side draws (1) so that the same
        replication index reproduces the same environment under every solver.
        """
        seq = np.random.SeedSequence(master_seed, spawn_key=(replication, stream))
        return cls(seq, f"{master_seed}/r{replication}.s{stream}")

    def __repr__(self) -> str:
        return f"RngState({self.label})"


ENV_STREAM = 0
SOLVER_STREAM = 1


def sample_normal(rng: RngState) -> float:
    """One standard normal variate N(0, 1)."""
    return float(rng.generator.standard_normal())


def sample_uniform(rng: RngState, lo: float, hi: float) -> float:
    """One uniform variate on [lo, hi]."""
    if lo > hi:
        raise ValueError(f"invalid uniform range: lo={lo} > hi={hi}")
    return float(rng.generator.uniform(lo, hi))


def normals(rng: RngState, shape) -> np.ndarray:
    """Batch of N(0, 1) draws; consumes the stream in row-major order."""
    return rng.generator.standard_normal(shape)


def uniforms(rng: RngState, lo: float, hi: float, shape) -> np.ndarray:
    """Batch of uniform draws on [lo, hi]."""
    if lo > hi:
        raise ValueError(f"invalid uniform range: lo={lo} > hi={hi}")
    return rng.generator.uniform(lo, hi, shape)


def sample_sphere(rng: RngState, dim: int, radius: float) -> np.ndarray:
    """One point uniform on the sphere of given radius in `dim` dimensions.

    Normalizes a vector of independent standard normals; the measure-zero
    all-zeros draw is rejected and redrawn.
    """
    return sample_spheres(rng, 1, dim, radius)[0]


def sample_spheres(rng: RngState, n: int, dim: int, radius: float) -> np.ndarray:
    """Batch form of :func:`sample_sphere`; returns an (n, dim) array."""
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    if radius <= 0:
        raise ValueError(f"sphere radius must be positive, got {radius}")
    vecs = rng.generator.standard_normal((n, dim))
    norms_ = np.linalg.norm(vecs, axis=1)
    while np.any(norms_ == 0.0):
        bad = norms_ == 0.0
        vecs[bad] = rng.generator.standard_normal((int(bad.sum()), dim))
        norms_ = np.linalg.norm(vecs, axis=1)
    return vecs * (radius / norms_)[:, None]


def sample_square_normalized(rng: RngState, dim: int, radius: float) -> np.ndarray:
    """One direction drawn on the cube [-1, 1]^dim then rescaled to `radius`.

    Deliberately NOT uniform on the sphere: the cube's corners overweight
    the diagonal directions.  Kept for the bias-demonstration experiment.
    """
    return sample_squares_normalized(rng, 1, dim, radius)[0]


def sample_squares_normalized(rng: RngState, n: int, dim: int,
                              radius: float) -> np.ndarray:
    """Batch form of :func:`sample_square_normalized`; (n, dim) array."""
    if dim < 1:
        raise ValueError(f"dimension must be >= 1, got {dim}")
    if radius <= 0:
        raise ValueError(f"sphere radius must be positive, got {radius}")
    vecs = rng.generator.uniform(-1.0, 1.0, (n, dim))
    norms_ = np.linalg.norm(vecs, axis=1)
    while np.any(norms_ == 0.0):
        bad = norms_ == 0.0
        vecs[bad] = rng.generator.uniform(-1.0, 1.0, (int(bad.sum()), dim))
        norms_ = np.linalg.norm(vecs, axis=1)
    return vecs * (radius / norms_)[:, None]


SAMPLER_KINDS = ("sphere", "square")


def angle_histogram(rng: RngState, sampler: str, n_draws: int,
                    bins: int) -> tuple[np.ndarray, np.ndarray]:
    """Empirical angle density of 2-D direction draws.

    Draws `n_draws` two-dimensional unit vectors with the given sampler
    ("sphere" or "square"), bins the angle against (1, 0) on [0, 2*pi) and
    returns ``(edges, density)`` with density normalized to integrate to 1.
    """
    if sampler not in SAMPLER_KINDS:
        raise ValueError(f"unknown sampler kind: {sampler!r}")
    if bins < 1:
        raise ValueError(f"bins must be >= 1, got {bins}")
    if n_draws < bins:
        raise ValueError(f"need n_draws >= bins, got {n_draws} < {bins}")
    draw = sample_spheres if sampler == "sphere" else sample_squares_normalized
    edges = np.linspace(0.0, 2.0 * np.pi, bins + 1)
    counts = np.zeros(bins, dtype=np.int64)
    remaining = n_draws
    while remaining > 0:
        chunk = min(remaining, 1_000_000)
        vecs = draw(rng, chunk, 2, 1.0)
        angles = np.mod(np.arctan2(vecs[:, 1], vecs[:, 0]), 2.0 * np.pi)
        counts += np.histogram(angles, bins=edges)[0]
        remaining -= chunk
    width = 2.0 * np.pi / bins
    density = counts / (n_draws * width)
    return edges, density
