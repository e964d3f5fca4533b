from __future__ import annotations

import numpy as np

from nvpolar.errors import DomainError
from nvpolar.sweep import PolarizationSweep

# Floor on normalized model values in the Pearson denominators
CHI2_FLOOR = 1e-6


def pearson_chi2(
    measured_intensity: np.ndarray,
    model_intensity: np.ndarray,
    measured_g2: np.ndarray,
    model_g2: np.ndarray,
    g2_weight: float = 1.0,
) -> np.ndarray:
    """Σ (I - I_m)²/I_m + w Σ (g - g_m)²/g_m over the last axis; intensities already normalized"""
    intensity_term = np.sum(
        (measured_intensity - model_intensity) ** 2 / np.maximum(model_intensity, CHI2_FLOOR), axis=-1
    )
    g2_term = np.sum((measured_g2 - model_g2) ** 2 / np.maximum(model_g2, CHI2_FLOOR), axis=-1)
    return intensity_term + g2_weight * g2_term


def chi_squared(measured: PolarizationSweep, model: PolarizationSweep, g2_weight: float = 1.0) -> float:
    """Goodness of fit of ``model`` to ``measured``

    Both intensity curves are divided by the model maximum before taking residuals.

    Args:
        measured: the measured sweep.
        model: the model evaluated on the same angles.
        g2_weight: relative weight of the g² term.

    Returns:
        float: χ² ≥ 0.
    """
    if not measured.same_grid(model):
        raise DomainError(
            f"Measured and model sweeps have different angle grids ({len(measured)} vs {len(model)} angles)"
        )
    if g2_weight < 0:
        raise DomainError(f"g2_weight must be non-negative, got {g2_weight}")
    normalization = model.intensities.max()
    if not normalization > 0:
        raise DomainError("Model intensity is zero at every angle")
    return float(
        pearson_chi2(
            measured.intensities / normalization,
            model.intensities / normalization,
            measured.g2_values,
            model.g2_values,
            g2_weight,
        )
    )
