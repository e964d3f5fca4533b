"""Synthetic polarization sweeps with Poisson counting noise.

Each emitter and the background are counted separately at every polarizer angle, C ~ Poisson(D(θ)·t), and the sweep's
g² is formed by substituting the counts for the rates in the g² expression. Every (angle, source) draw has its own
random stream derived from the seed, so sweeps do not depend on evaluation order.
"""
from __future__ import annotations

import dataclasses
from typing import Union

import numpy as np

from nvpolar.dipole import OpticalSystem
from nvpolar.errors import DomainError
from nvpolar.photon_statistics import EmitterSystem
from nvpolar.sweep import DEFAULT_ANGLES_DEG, PolarizationSweep

Seed = Union[int, np.random.SeedSequence]

_MAX_SEED = 2**64 - 1


def derive_seed(seed: Seed, *key: int) -> np.random.SeedSequence:
    """Child seed addressed by ``key``; identical (seed, key) always gives the same stream"""
    if isinstance(seed, np.random.SeedSequence):
        return np.random.SeedSequence(seed.entropy, spawn_key=tuple(seed.spawn_key) + tuple(key))
    if isinstance(seed, bool) or not isinstance(seed, (int, np.integer)) or not 0 <= seed <= _MAX_SEED:
        raise DomainError(f"Seed must be an unsigned 64-bit integer, got {seed!r}")
    return np.random.SeedSequence(int(seed), spawn_key=tuple(key))


def sample_counts(rate: float, t: float, seed: Seed, size: int | None = None) -> int | np.ndarray:
    """Poisson-distributed photon count with mean ``rate * t``

    Args:
        rate: detection rate D.
        t: acquisition time.
        seed: random seed; the draw is a deterministic function of it.
        size: number of independent draws, or None for a single count.
    """
    if not (rate >= 0 and t >= 0) or not np.isfinite(rate * t):
        raise DomainError(f"Rate and acquisition time must be finite and non-negative, got rate={rate}, t={t}")
    rng = np.random.default_rng(derive_seed(seed))
    counts = rng.poisson(rate * t, size=size)
    return int(counts) if size is None else counts


def _g2_with_error(emitter_counts: np.ndarray, background_counts: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """g² from counts of shape (n_emitters, n_angles), with a delta-method error using Var C = C"""
    total = emitter_counts.sum(axis=0) + background_counts
    squares = np.sum(emitter_counts**2, axis=0)
    dark = total <= 0
    safe_total = np.where(dark, 1.0, total)
    g2 = np.where(dark, 0.0, 1.0 - squares / safe_total**2)

    # ∂g/∂C_k = -2 C_k / T² + 2 Q / T³ and ∂g/∂C_bg = 2 Q / T³, with Q = Σ C_k²
    common = 2.0 * squares / safe_total**3
    d_emitters = -2.0 * emitter_counts / safe_total**2 + common
    variance = np.sum(d_emitters**2 * emitter_counts, axis=0) + common**2 * background_counts
    errors = np.where(dark, 1.0, np.sqrt(variance))
    return g2, errors


@dataclasses.dataclass(frozen=True)
class SweepGenerator:
    """Produces sweeps of a fixed ground-truth system on a fixed angle grid"""

    truth: EmitterSystem
    optics: OpticalSystem = dataclasses.field(default_factory=OpticalSystem)
    angles_deg: tuple[float, ...] = tuple(DEFAULT_ANGLES_DEG)

    def __post_init__(self) -> None:
        object.__setattr__(self, "angles_deg", tuple(float(a) for a in self.angles_deg))

    def expected_counts(self, t: float) -> tuple[np.ndarray, np.ndarray]:
        """Mean counts per emitter, shape (n_emitters, n_angles), and mean background counts per angle"""
        if not t > 0:
            raise DomainError(f"Acquisition time must be positive, got {t}")
        rates = self.truth.detection_rates(self.optics, np.deg2rad(self.angles_deg))
        background = np.full(len(self.angles_deg), self.truth.background_rate(self.optics))
        return rates * t, background * t

    def noiseless(self, t: float = 1.0) -> PolarizationSweep:
        emitters, background = self.expected_counts(t)
        g2, errors = _g2_with_error(emitters, background)
        return PolarizationSweep(
            angles_deg=np.array(self.angles_deg),
            intensities=emitters.sum(axis=0) + background,
            g2_values=g2,
            g2_errors=errors,
            acquisition_time=t,
        )

    def generate(self, t: float, seed: Seed) -> PolarizationSweep:
        emitters, background = self.expected_counts(t)
        n_emitters, n_angles = emitters.shape
        # Source index n_emitters is the background
        means = np.vstack([emitters, background[None, :]])
        counts = np.empty_like(means)
        for angle_index in range(n_angles):
            for source_index in range(n_emitters + 1):
                rng = np.random.default_rng(derive_seed(seed, angle_index, source_index))
                counts[source_index, angle_index] = rng.poisson(means[source_index, angle_index])

        g2, errors = _g2_with_error(counts[:n_emitters], counts[n_emitters])
        return PolarizationSweep(
            angles_deg=np.array(self.angles_deg),
            intensities=counts.sum(axis=0),
            g2_values=g2,
            g2_errors=errors,
            acquisition_time=t,
        )


def generate_sweep(
    truth: EmitterSystem,
    optics: OpticalSystem,
    t: float,
    seed: Seed,
    angles_deg: np.ndarray | None = None,
) -> PolarizationSweep:
    angles = DEFAULT_ANGLES_DEG if angles_deg is None else angles_deg
    return SweepGenerator(truth, optics, tuple(angles)).generate(t, seed)


def noiseless_sweep(
    truth: EmitterSystem,
    optics: OpticalSystem,
    t: float = 1.0,
    angles_deg: np.ndarray | None = None,
) -> PolarizationSweep:
    """Expected counts and exact g² in sweep form; errors are the Poisson errors a sweep of length ``t`` would carry"""
    angles = DEFAULT_ANGLES_DEG if angles_deg is None else angles_deg
    return SweepGenerator(truth, optics, tuple(angles)).noiseless(t)
