"""Monte Carlo uncertainty of the recovered brightness ratio and background."""
from __future__ import annotations

import dataclasses
import functools
import math
from typing import Sequence

import numpy as np
import pandas as pd
from loguru import logger
from scipy.stats import chi2 as chi2_distribution

from nvpolar.context import get_context
from nvpolar.dipole import OpticalSystem
from nvpolar.errors import DomainError
from nvpolar.estimator.fitting import FitOptions, fit_pair
from nvpolar.geometry import OrientationPair
from nvpolar.photon_statistics import EmitterSystem
from nvpolar.runners.profiler import log_event
from nvpolar.synthetic import Seed, derive_seed, generate_sweep

CONFIDENCE_LEVEL = 0.683

# Squared Mahalanobis radius enclosing 68.3% of a bivariate normal
ELLIPSE_QUANTILE = float(chi2_distribution.ppf(CONFIDENCE_LEVEL, df=2))

TRIAL_COLUMNS = ["trial", "ratio", "background", "chi2", "converged"]


def _monte_carlo_options() -> FitOptions:
    return FitOptions(n_seeds=1)


@dataclasses.dataclass(frozen=True)
class ConfidenceSummary:
    n_trials: int
    mean_ratio: float
    mean_background: float
    covariance: np.ndarray
    sigma1_area: float
    trials: pd.DataFrame = dataclasses.field(repr=False, compare=False)

    @property
    def half_extents(self) -> tuple[float, float]:
        """Half widths of the 68.3% ellipse along the ratio and background axes"""
        return (
            math.sqrt(ELLIPSE_QUANTILE * max(self.covariance[0, 0], 0.0)),
            math.sqrt(ELLIPSE_QUANTILE * max(self.covariance[1, 1], 0.0)),
        )

    def meets(self, target: float) -> bool:
        return all(extent <= target for extent in self.half_extents)

    def to_dict(self) -> dict:
        return {
            "n_trials": self.n_trials,
            "mean_ratio": self.mean_ratio,
            "mean_background": self.mean_background,
            "covariance": self.covariance.tolist(),
            "sigma1_area": self.sigma1_area,
            "half_extents": list(self.half_extents),
        }


def ellipse_area(covariance: np.ndarray) -> float:
    """Area of the 68.3% confidence ellipse of a 2x2 covariance"""
    determinant = max(float(np.linalg.det(covariance)), 0.0)
    return math.pi * math.sqrt(determinant) * ELLIPSE_QUANTILE


def _trial(
    index: int,
    truth: EmitterSystem,
    pair: OrientationPair,
    optics: OpticalSystem,
    t: float,
    seed: Seed,
    options: FitOptions,
) -> dict:
    sweep = generate_sweep(truth, optics, t, derive_seed(seed, index))
    fit = fit_pair(sweep, pair, optics, options)
    return {
        "trial": index,
        "ratio": fit.hypothesis.ratio,
        "background": fit.hypothesis.background,
        "chi2": fit.chi2,
        "converged": fit.converged,
    }


def _summarize(rows: list[dict]) -> ConfidenceSummary:
    trials = pd.DataFrame(rows, columns=TRIAL_COLUMNS)
    samples = trials[["ratio", "background"]].to_numpy(dtype=float)
    covariance = np.cov(samples, rowvar=False, ddof=1)
    covariance = 0.5 * (covariance + covariance.T)
    return ConfidenceSummary(
        n_trials=len(trials),
        mean_ratio=float(samples[:, 0].mean()),
        mean_background=float(samples[:, 1].mean()),
        covariance=covariance,
        sigma1_area=ellipse_area(covariance),
        trials=trials,
    )


def _truth_pair(truth: EmitterSystem, pair: OrientationPair | str | None) -> OrientationPair:
    if pair is not None:
        return OrientationPair.parse(pair)
    if len(truth.emitters) != 2:
        raise DomainError(f"Monte Carlo confidence needs a two-emitter truth, got {len(truth.emitters)} emitters")
    bright, dim = sorted(truth.emitters, key=lambda e: -e.brightness)
    return OrientationPair(bright.orientation.label, dim.orientation.label)


def confidence_monte_carlo(
    truth: EmitterSystem,
    optics: OpticalSystem,
    t: float,
    n_trials: int,
    seed: Seed,
    pair: OrientationPair | str | None = None,
    options: FitOptions | None = None,
) -> ConfidenceSummary:
    """Fits ``n_trials`` independent noisy sweeps of ``truth`` with the true pair

    Args:
        truth: two-emitter ground truth.
        optics: collection optics.
        t: acquisition time of every sweep.
        n_trials: number of sweeps, at least 2.
        seed: base seed; trial i uses the stream derived from (seed, i).
        pair: hypothesis to fit, defaulting to the truth's orientations with the brighter emitter first.
        options: optimizer settings.

    Returns:
        ConfidenceSummary: sample mean and covariance of (ratio, background), the 68.3% ellipse area and the per-trial
        table.
    """
    if n_trials < 2:
        raise DomainError(f"A Monte Carlo confidence estimate needs at least 2 trials, got {n_trials}")
    if not t > 0:
        raise DomainError(f"Acquisition time must be positive, got {t}")
    fit_as = _truth_pair(truth, pair)
    trial = functools.partial(
        _trial, truth=truth, pair=fit_as, optics=optics, t=t, seed=seed, options=options or _monte_carlo_options()
    )
    with log_event(f"confidence_monte_carlo[{n_trials} trials, t={t:g}]"):
        rows = get_context().runner().map(trial, list(range(n_trials)))
    return _summarize(rows)


@dataclasses.dataclass(frozen=True)
class GridResult:
    """Matrices over a (row, column) parameter grid, rows first"""

    row_name: str
    rows: np.ndarray
    column_name: str
    columns: np.ndarray
    values: dict

    def to_frame(self, key: str) -> pd.DataFrame:
        frame = pd.DataFrame(self.values[key], index=pd.Index(self.rows, name=self.row_name), columns=self.columns)
        frame.columns.name = self.column_name
        return frame


def _min_time_cell(
    cell: tuple[float, float],
    pair: OrientationPair,
    optics: OpticalSystem,
    target: float,
    seed: Seed,
    n_trials: int,
    t_start: float,
    t_max: float,
    bisection_steps: int,
    options: FitOptions,
) -> float:
    background, ratio = cell
    truth = EmitterSystem.from_pair(pair, ratio, background)
    rows_cache: dict[float, bool] = {}

    def meets(t: float) -> bool:
        if t not in rows_cache:
            rows = [
                _trial(i, truth=truth, pair=pair, optics=optics, t=t, seed=seed, options=options)
                for i in range(n_trials)
            ]
            rows_cache[t] = _summarize(rows).meets(target)
        return rows_cache[t]

    t = t_start
    while not meets(t):
        t *= 2.0
        if t > t_max:
            logger.debug(f"Cell ratio={ratio:g} background={background:g} unreached below t={t_max:g}")
            return math.nan
    low, high = t / 2.0, t
    for _ in range(bisection_steps):
        middle = 0.5 * (low + high)
        if meets(middle):
            high = middle
        else:
            low = middle
    return high


def min_acquisition_time(
    ratios: Sequence[float],
    backgrounds: Sequence[float],
    optics: OpticalSystem,
    seed: Seed,
    target_uncertainty: float = 0.01,
    pair: OrientationPair | str = "a&c",
    n_trials: int = 50,
    t_start: float = 16.0,
    t_max: float = 1.0e7,
    bisection_steps: int = 4,
    options: FitOptions | None = None,
) -> GridResult:
    """Smallest acquisition time whose 68.3% ellipse half-extents are within ``target_uncertainty`` on both axes

    Each cell doubles t from ``t_start`` until the target is met, then bisects. Every probe of every cell reuses the
    same trial seeds. Cells that need more than ``t_max`` are NaN.

    Returns:
        GridResult: ``values["t_min"]`` with rows = backgrounds, columns = ratios.
    """
    ratios = np.asarray(ratios, dtype=float)
    backgrounds = np.asarray(backgrounds, dtype=float)
    if np.any((ratios < 0) | (ratios > 1)):
        raise DomainError("Grid ratios must lie in [0, 1]")
    if np.any((backgrounds < 0) | (backgrounds > 0.5)):
        raise DomainError("Grid backgrounds must lie in [0, 0.5]")
    if not target_uncertainty > 0 or n_trials < 2 or not 0 < t_start <= t_max:
        raise DomainError("Need target_uncertainty > 0, n_trials >= 2 and 0 < t_start <= t_max")

    pair = OrientationPair.parse(pair)
    cells = [(float(b), float(r)) for b in backgrounds for r in ratios]
    cell = functools.partial(
        _min_time_cell,
        pair=pair,
        optics=optics,
        target=target_uncertainty,
        seed=seed,
        n_trials=n_trials,
        t_start=t_start,
        t_max=t_max,
        bisection_steps=bisection_steps,
        options=options or _monte_carlo_options(),
    )
    with log_event(f"min_acquisition_time[{len(cells)} cells]"):
        values = get_context().runner().map(cell, cells)
    return GridResult(
        row_name="background",
        rows=backgrounds,
        column_name="ratio",
        columns=ratios,
        values={"t_min": np.array(values, dtype=float).reshape(len(backgrounds), len(ratios))},
    )


def _error_cell(
    cell: tuple[int, float, float],
    pair: OrientationPair,
    optics: OpticalSystem,
    t: float,
    seed: Seed,
    options: FitOptions,
) -> tuple[float, float, float]:
    index, ratio, background = cell
    truth = EmitterSystem.from_pair(pair, ratio, background)
    fit = fit_pair(generate_sweep(truth, optics, t, derive_seed(seed, index)), pair, optics, options)
    return abs(fit.hypothesis.ratio - ratio), abs(fit.hypothesis.background - background), fit.chi2


def background_error_sweep(
    ratios: Sequence[float],
    backgrounds: Sequence[float],
    optics: OpticalSystem,
    t: float,
    seed: Seed,
    pair: OrientationPair | str = "a&c",
    options: FitOptions | None = None,
) -> GridResult:
    """Absolute fit errors and χ² of one noisy sweep per (ratio, background) cell, fitted with the true pair

    Returns:
        GridResult: ``ratio_error``, ``background_error`` and ``chi2`` with rows = ratios, columns = backgrounds.
    """
    if not t > 0:
        raise DomainError(f"Acquisition time must be positive, got {t}")
    ratios = np.asarray(ratios, dtype=float)
    backgrounds = np.asarray(backgrounds, dtype=float)
    pair = OrientationPair.parse(pair)
    cells = [
        (i * len(backgrounds) + j, float(r), float(b)) for i, r in enumerate(ratios) for j, b in enumerate(backgrounds)
    ]
    cell = functools.partial(_error_cell, pair=pair, optics=optics, t=t, seed=seed, options=options or FitOptions())
    with log_event(f"background_error_sweep[{len(cells)} cells]"):
        results = np.array(get_context().runner().map(cell, cells), dtype=float)
    shape = (len(ratios), len(backgrounds))
    return GridResult(
        row_name="ratio",
        rows=ratios,
        column_name="background",
        columns=backgrounds,
        values={
            "ratio_error": results[:, 0].reshape(shape),
            "background_error": results[:, 1].reshape(shape),
            "chi2": results[:, 2].reshape(shape),
        },
    )
