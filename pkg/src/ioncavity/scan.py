"""Synthetic cavity-translation scans and visibility datasets.

Randomness comes from numpy's PCG64 bit generator seeded through
``SeedSequence([seed, *keys])``; per-point streams mix the point index into
the key so results do not depend on evaluation order. PCG64 output is
stable across platforms and has been fixed since numpy 1.17.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .config import TWO_PI, TrapConfig
from .coupling import CouplingModel, VisibilityCurve, emission_profile, model_visibilities

RNG_ALGORITHM = "numpy PCG64 via SeedSequence"

DEFAULT_POINTS = 64
DEFAULT_BIN_TIME = 0.1  # s


def rng_for(seed: int, *keys: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([int(seed), *map(int, keys)])))


@dataclass(frozen=True, eq=False)
class ScanTrace:
    displacements: np.ndarray  # m
    counts: np.ndarray
    bin_time: float
    mean_rate: float
    rng_seed: int
    wavelength: float = 866e-9

    def __post_init__(self):
        if len(self.displacements) != len(self.counts):
            raise ValueError("displacements and counts differ in length")
        if np.any(np.diff(self.displacements) <= 0):
            raise ValueError("displacements must be strictly ascending")
        if np.any(np.asarray(self.counts) < 0):
            raise ValueError("counts must be non-negative")


def scan_displacements(span: float, num_points: int) -> np.ndarray:
    # endpoint excluded so a span of whole fringe periods samples them evenly
    return np.linspace(0.0, span, num_points, endpoint=False)


def expected_counts(model: CouplingModel, displacements, mean_rate: float, bin_time: float) -> np.ndarray:
    """Mean counts per bin; the displacement average of W is N g0^2."""
    w = emission_profile(model, np.asarray(displacements, dtype=float))
    return mean_rate * bin_time * w / model.config.num_ions


def simulate_scan(model: CouplingModel, span: float | None = None, num_points: int = DEFAULT_POINTS,
                  mean_rate: float = 1e4, bin_time: float = DEFAULT_BIN_TIME, seed: int = 0) -> ScanTrace:
    """Poisson-sampled counts as the cavity is translated across the string."""
    if span is None:
        span = 2.0 * model.config.wavelength
    if not span > 0:
        raise ValueError("span must be positive")
    if num_points < 8:
        raise ValueError("need at least 8 scan points")
    if not mean_rate * bin_time >= 1:
        raise ValueError("mean_rate * bin_time must be at least one count per bin")
    x = scan_displacements(span, num_points)
    lam = expected_counts(model, x, mean_rate, bin_time)
    counts = rng_for(seed).poisson(lam)
    return ScanTrace(x, counts, bin_time, mean_rate, int(seed), model.config.wavelength)


def simulate_visibility_dataset(config: TrapConfig, true_T: float, true_nu0: float, freq_grid,
                                noise: float, seed: int = 0) -> VisibilityCurve:
    """Model visibilities at nu + nu0 plus Gaussian noise, clamped to [0, 1].

    ``freq_grid`` is angular (rad/s); ``true_nu0`` is an ordinary offset in Hz.
    """
    if noise < 0:
        raise ValueError("noise must be non-negative")
    freqs = np.asarray(freq_grid, dtype=float)
    clean = model_visibilities(config, true_T, freqs + TWO_PI * true_nu0)
    if noise == 0:
        vis = clean
    else:
        draws = np.array([rng_for(seed, i).standard_normal() for i in range(freqs.size)])
        vis = np.clip(clean + noise * draws, 0.0, 1.0)
    return VisibilityCurve(freqs, vis, np.full(freqs.size, float(noise)))
