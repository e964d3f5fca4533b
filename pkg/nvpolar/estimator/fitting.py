"""χ² model selection over the two-emitter orientation hypotheses.

Every hypothesis has free brightness ratio, background, overall scale and polarizer zero offset. The scale is solved in
closed form at each evaluation, a coarse grid over (ratio, background, offset) seeds a bounded Nelder-Mead polish, and
the hypotheses are compared by their minimized χ².
"""
from __future__ import annotations

import dataclasses
import enum
import functools
import math
from typing import Iterator, Sequence

import numpy as np
import pandas as pd
from loguru import logger
from scipy.optimize import minimize

from nvpolar.context import get_context
from nvpolar.dipole import DipoleEmitter, OpticalSystem, coherency_matrix, rate_from_coherency
from nvpolar.errors import ConvergenceError, DomainError
from nvpolar.estimator.chi_squared import CHI2_FLOOR, pearson_chi2
from nvpolar.geometry import (
    DegeneracyClass,
    OrientationPair,
    degeneracy_classes,
    enumerate_pairs,
    rotation_family,
)
from nvpolar.sweep import PolarizationSweep

_SINGLE_EMITTER_PAIR = OrientationPair.parse("a&a")


class Verdict(enum.Enum):
    ONE_EMITTER = "OneEmitter"
    TWO_EMITTERS = "TwoEmitters"
    INCONCLUSIVE = "Inconclusive"

    def __str__(self) -> str:
        return self.value


@dataclasses.dataclass(frozen=True)
class FitOptions:
    """Optimizer settings and verdict thresholds

    Args:
        ratio_grid: coarse-grid brightness ratios.
        background_grid: coarse-grid backgrounds.
        offset_step_deg: coarse-grid spacing of the polarizer offset over [0, 180).
        max_background: upper bound of the background during polishing.
        g2_weight: relative weight of the g² term of χ².
        max_iterations: Nelder-Mead iteration cap per run.
        fatol: χ² convergence tolerance.
        xatol: parameter convergence tolerance.
        restarts: extra Nelder-Mead runs from the previous optimum while χ² keeps improving.
        n_seeds: number of best grid points polished.
        ratio_floor: ratios below this count as a single emitter.
        rel_margin: a two-emitter hypothesis must reach this fraction of the single-emitter χ².
        single_margin: a single emitter wins when its χ² is within this relative margin of the best.
    """

    ratio_grid: tuple[float, ...] = tuple(round(0.1 * i, 10) for i in range(11))
    background_grid: tuple[float, ...] = (0.0, 0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.75, 1.0)
    offset_step_deg: float = 5.0
    max_background: float = 5.0
    g2_weight: float = 1.0
    max_iterations: int = 500
    fatol: float = 1e-10
    xatol: float = 1e-8
    restarts: int = 2
    n_seeds: int = 3
    ratio_floor: float = 1e-3
    rel_margin: float = 0.5
    single_margin: float = 0.25

    def __post_init__(self) -> None:
        object.__setattr__(self, "ratio_grid", tuple(float(r) for r in self.ratio_grid))
        object.__setattr__(self, "background_grid", tuple(float(b) for b in self.background_grid))
        if not self.ratio_grid or any(not 0.0 <= r <= 1.0 for r in self.ratio_grid):
            raise DomainError(f"ratio_grid values must lie in [0, 1], got {self.ratio_grid}")
        if not self.background_grid or any(not 0.0 <= b <= self.max_background for b in self.background_grid):
            raise DomainError(f"background_grid values must lie in [0, {self.max_background}]")
        if not 0.0 < self.offset_step_deg <= 90.0:
            raise DomainError(f"offset_step_deg must lie in (0, 90], got {self.offset_step_deg}")
        if self.g2_weight < 0:
            raise DomainError(f"g2_weight must be non-negative, got {self.g2_weight}")
        if self.max_iterations < 1 or self.n_seeds < 1 or self.restarts < 0:
            raise DomainError("max_iterations and n_seeds must be positive, restarts non-negative")
        if not 0.0 < self.rel_margin <= 1.0:
            raise DomainError(f"rel_margin must lie in (0, 1], got {self.rel_margin}")
        if self.ratio_floor < 0 or self.single_margin < 0:
            raise DomainError("ratio_floor and single_margin must be non-negative")


@dataclasses.dataclass(frozen=True)
class FitHypothesis:
    pair: OrientationPair
    ratio: float
    background: float
    scale: float
    theta_offset: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.ratio <= 1.0:
            raise DomainError(f"Fitted ratio must lie in [0, 1], got {self.ratio}")
        if not self.background >= 0.0:
            raise DomainError(f"Fitted background must be non-negative, got {self.background}")
        if not self.scale > 0.0:
            raise DomainError(f"Fitted scale must be positive, got {self.scale}")
        if not 0.0 <= self.theta_offset < math.pi:
            raise DomainError(f"theta_offset must lie in [0, π), got {self.theta_offset}")

    def with_pair(self, pair: OrientationPair) -> FitHypothesis:
        return dataclasses.replace(self, pair=pair)


@dataclasses.dataclass(frozen=True)
class PairFit:
    """Best hypothesis for one orientation pair; unpacks as ``(hypothesis, chi2)``"""

    hypothesis: FitHypothesis
    chi2: float
    converged: bool = True
    iterations: int = 0

    def __iter__(self) -> Iterator:
        return iter((self.hypothesis, self.chi2))

    @property
    def pair(self) -> OrientationPair:
        return self.hypothesis.pair


class PairModel:
    """Unscaled intensity and g² of a two-emitter hypothesis, vectorized over parameter sets"""

    def __init__(self, pair: OrientationPair, optics: OpticalSystem) -> None:
        self.pair = pair
        bright, dim = pair.orientations
        self._bright = coherency_matrix(DipoleEmitter(bright), optics)
        self._dim = coherency_matrix(DipoleEmitter(dim), optics)
        self._peak = float(np.linalg.eigvalsh(self._bright)[-1])

    def curves(
        self, angles: np.ndarray, ratio: np.ndarray, background: np.ndarray, offset: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray]:
        """Intensities and g² of shape (n_parameter_sets, n_angles)"""
        ratio, background, offset = (np.atleast_1d(np.asarray(v, dtype=float)) for v in (ratio, background, offset))
        theta = angles[None, :] - offset[:, None]
        bright = rate_from_coherency(self._bright, theta)
        dim = ratio[:, None] * rate_from_coherency(self._dim, theta)
        total = bright + dim + background[:, None] * self._peak
        return total, 1.0 - (bright * bright + dim * dim) / (total * total)


@dataclasses.dataclass
class _Objective:
    """χ² of a normalized sweep with the scale profiled out"""

    model: PairModel
    angles: np.ndarray
    intensity: np.ndarray
    g2: np.ndarray
    g2_weight: float

    def profile(
        self, ratio: np.ndarray, background: np.ndarray, offset: np.ndarray
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Returns χ², the optimal measured-to-model multiplier u and the model maximum for each parameter set"""
        total, g2 = self.model.curves(self.angles, ratio, background, offset)
        peak = total.max(axis=1, keepdims=True)
        shape = total / peak
        denominator = np.maximum(shape, CHI2_FLOOR)
        u = np.sum(self.intensity * shape / denominator, axis=1) / np.sum(self.intensity**2 / denominator, axis=1)
        chi2 = pearson_chi2(u[:, None] * self.intensity, shape, self.g2, g2, self.g2_weight)
        return chi2, u, peak[:, 0]


def _initial_simplex(x0: np.ndarray, steps: Sequence[float], bounds: Sequence[tuple]) -> np.ndarray:
    simplex = [x0.copy()]
    for i, step in enumerate(steps):
        vertex = x0.copy()
        upper = bounds[i][1]
        vertex[i] = x0[i] + step if upper is None or x0[i] + step <= upper else x0[i] - step
        simplex.append(vertex)
    return np.array(simplex)


def _fit(
    measured: PolarizationSweep,
    pair: OrientationPair,
    optics: OpticalSystem,
    options: FitOptions,
    fixed_ratio: float | None = None,
) -> PairFit:
    measured.check_fittable()
    peak_intensity = float(measured.intensities.max())
    objective = _Objective(
        model=PairModel(pair, optics),
        angles=measured.angles,
        intensity=measured.intensities / peak_intensity,
        g2=measured.g2_values,
        g2_weight=options.g2_weight,
    )

    ratios = np.array([fixed_ratio]) if fixed_ratio is not None else np.array(options.ratio_grid)
    offsets = np.deg2rad(np.arange(0.0, 180.0, options.offset_step_deg))
    grid = [g.ravel() for g in np.meshgrid(ratios, np.array(options.background_grid), offsets, indexing="ij")]
    grid_chi2, _, _ = objective.profile(*grid)

    def unpack(x: np.ndarray) -> tuple[float, float, float]:
        if fixed_ratio is not None:
            return fixed_ratio, x[0], x[1]
        return x[0], x[1], x[2]

    def f(x: np.ndarray) -> float:
        ratio, background, offset = unpack(x)
        chi2, _, _ = objective.profile(
            np.array([min(max(ratio, 0.0), 1.0)]),
            np.array([min(max(background, 0.0), options.max_background)]),
            np.array([offset]),
        )
        return float(chi2[0])

    bounds: list[tuple] = [(0.0, options.max_background), (None, None)]
    steps = [0.02, math.pi / 72]
    if fixed_ratio is None:
        bounds.insert(0, (0.0, 1.0))
        steps.insert(0, 0.05)

    best_x, best_chi2, converged, iterations = None, math.inf, False, 0
    for index in np.argsort(grid_chi2, kind="stable")[: options.n_seeds]:
        x = np.array([grid[0][index], grid[1][index], grid[2][index]])
        if fixed_ratio is not None:
            x = x[1:]
        value = f(x)
        run_converged = False
        for _ in range(options.restarts + 1):
            result = minimize(
                f,
                x,
                method="Nelder-Mead",
                bounds=bounds,
                options={
                    "maxiter": options.max_iterations,
                    "xatol": options.xatol,
                    "fatol": options.fatol,
                    "initial_simplex": _initial_simplex(x, steps, bounds),
                },
            )
            iterations += int(result.nit)
            run_converged = result.status == 0
            improvement = value - float(result.fun)
            if float(result.fun) <= value:
                x, value = np.asarray(result.x, dtype=float), float(result.fun)
            if improvement <= options.fatol:
                break
        if value < best_chi2:
            best_x, best_chi2, converged = x, value, run_converged

    if best_x is None or not math.isfinite(best_chi2):
        raise ConvergenceError(f"Fit of {pair} found no finite chi2 from {options.n_seeds} seeds")
    ratio, background, offset = unpack(best_x)
    ratio = min(max(float(ratio), 0.0), 1.0)
    background = min(max(float(background), 0.0), options.max_background)
    _, u, model_peak = objective.profile(np.array([ratio]), np.array([background]), np.array([offset]))
    hypothesis = FitHypothesis(
        pair=pair,
        ratio=ratio,
        background=background,
        scale=float(peak_intensity / (u[0] * model_peak[0])),
        theta_offset=float(np.mod(offset, math.pi)) % math.pi,
    )
    if not converged:
        logger.warning(
            f"Fit of {pair} did not converge within {options.max_iterations} iterations, chi2={best_chi2:.4g}"
        )
    logger.debug(f"Fitted {pair}: ratio={ratio:.4f} background={background:.4f} chi2={best_chi2:.4g}")
    return PairFit(hypothesis=hypothesis, chi2=best_chi2, converged=converged, iterations=iterations)


def fit_pair(
    measured: PolarizationSweep,
    pair: OrientationPair | str,
    optics: OpticalSystem,
    options: FitOptions | None = None,
) -> PairFit:
    """Minimizes χ² over (ratio, background, scale, theta_offset) for one orientation pair

    Args:
        measured: sweep with at least 8 angles spanning 90 degrees.
        pair: orientation hypothesis; its first label is the brighter emitter.
        optics: collection optics of the forward model.
        options: optimizer settings.

    Returns:
        PairFit: best hypothesis and its χ². Non-convergence is reported through ``converged``.
    """
    return _fit(measured, OrientationPair.parse(pair), optics, options or FitOptions())


def fit_single(measured: PolarizationSweep, optics: OpticalSystem, options: FitOptions | None = None) -> PairFit:
    """Reference fit of a single emitter plus background (ratio pinned at 0)"""
    return _fit(measured, _SINGLE_EMITTER_PAIR, optics, options or FitOptions(), fixed_ratio=0.0)


def model_sweep(
    hypothesis: FitHypothesis, optics: OpticalSystem, angles_deg: np.ndarray | Sequence[float]
) -> PolarizationSweep:
    """The hypothesis' intensity and g² on the given angles, in measured units"""
    angles_deg = np.asarray(angles_deg, dtype=float)
    total, g2 = PairModel(hypothesis.pair, optics).curves(
        np.deg2rad(angles_deg), hypothesis.ratio, hypothesis.background, hypothesis.theta_offset
    )
    return PolarizationSweep(angles_deg=angles_deg, intensities=hypothesis.scale * total[0], g2_values=g2[0])


@dataclasses.dataclass(frozen=True)
class FitResult:
    """Outcome of fitting every orientation pair to one sweep

    ``verdict`` compares the best pair against the single-emitter fit: ONE_EMITTER when the recovered ratio is below
    ``ratio_floor`` or the single emitter comes within ``single_margin`` of the best χ², TWO_EMITTERS when the best χ²
    is at most ``rel_margin`` times the single-emitter χ², INCONCLUSIVE otherwise.

    ``orientation_resolved`` applies the same ``rel_margin`` between orientation hypotheses. Classes related by a
    rotation about the optical axis only differ by the polarizer offset, so the best class is compared against the
    best χ² outside its rotation family rather than against the runner-up class. A TWO_EMITTERS verdict with
    ``orientation_resolved`` False means two emitters are present but their orientation family is ambiguous.
    """

    per_pair: tuple[PairFit, ...]
    best_class: DegeneracyClass
    verdict: Verdict
    recovered_ratio: float
    recovered_background: float
    single_emitter: PairFit
    orientation_resolved: bool
    converged: bool

    @property
    def best(self) -> PairFit:
        return self.fit_for(self.best_class.representative)

    def fit_for(self, pair: OrientationPair | str) -> PairFit:
        pair = OrientationPair.parse(pair)
        for fit in self.per_pair:
            if fit.pair == pair:
                return fit
        raise KeyError(str(pair))

    def class_chi2(self) -> dict[int, float]:
        return {cls.id: self.fit_for(cls.representative).chi2 for cls in degeneracy_classes()}

    def to_frame(self) -> pd.DataFrame:
        classes = {pair: cls.id for cls in degeneracy_classes() for pair in cls.members}
        return pd.DataFrame(
            [
                {
                    "pair": str(fit.pair),
                    "class": classes[fit.pair],
                    "chi2": fit.chi2,
                    "ratio": fit.hypothesis.ratio,
                    "background": fit.hypothesis.background,
                    "scale": fit.hypothesis.scale,
                    "theta_offset_deg": math.degrees(fit.hypothesis.theta_offset),
                    "converged": fit.converged,
                }
                for fit in self.per_pair
            ]
        )


def _fit_class(
    cls: DegeneracyClass, measured: PolarizationSweep, optics: OpticalSystem, options: FitOptions
) -> PairFit:
    return _fit(measured, cls.representative, optics, options)


def decide(best: PairFit, single: PairFit, other_family_chi2: float, options: FitOptions) -> tuple[Verdict, bool]:
    """One-vs-two-emitter verdict, and whether the best orientation family beats the others by ``rel_margin``"""
    if best.hypothesis.ratio < options.ratio_floor or single.chi2 <= (1.0 + options.single_margin) * best.chi2:
        verdict = Verdict.ONE_EMITTER
    elif best.chi2 <= options.rel_margin * single.chi2:
        verdict = Verdict.TWO_EMITTERS
    else:
        verdict = Verdict.INCONCLUSIVE
    return verdict, best.chi2 <= options.rel_margin * other_family_chi2


def fit_all(measured: PolarizationSweep, optics: OpticalSystem, options: FitOptions | None = None) -> FitResult:
    """Fits all ten orientation pairs and decides between one and two emitters

    Pairs of one degeneracy class share a model curve, so each class is fitted once and the result is reported for
    every member.
    """
    options = options or FitOptions()
    measured.check_fittable()
    classes = degeneracy_classes()
    runner = get_context().runner()
    class_fits = runner.map(
        functools.partial(_fit_class, measured=measured, optics=optics, options=options), list(classes)
    )
    single = fit_single(measured, optics, options)

    by_pair = {}
    for cls, fit in zip(classes, class_fits):
        # members share one model curve, so the representative's fit holds for each of them
        for pair in cls.members:
            by_pair[pair] = dataclasses.replace(fit, hypothesis=fit.hypothesis.with_pair(pair))
    per_pair = tuple(by_pair[pair] for pair in enumerate_pairs())

    best_index = min(range(len(classes)), key=lambda i: (class_fits[i].chi2, i))
    best_class, best = classes[best_index], class_fits[best_index]
    family = rotation_family(best_class)
    other_chi2 = min((fit.chi2 for cls, fit in zip(classes, class_fits) if cls.id not in family), default=math.inf)
    verdict, resolved = decide(best, single, other_chi2, options)

    converged = all(fit.converged for fit in class_fits) and single.converged
    logger.info(
        f"Best class {best_class} chi2={best.chi2:.4g} (single emitter {single.chi2:.4g}), verdict {verdict}"
    )
    return FitResult(
        per_pair=per_pair,
        best_class=best_class,
        verdict=verdict,
        recovered_ratio=best.hypothesis.ratio,
        recovered_background=best.hypothesis.background,
        single_emitter=single,
        orientation_resolved=resolved,
        converged=converged,
    )


def classify(measured: PolarizationSweep, optics: OpticalSystem, options: FitOptions | None = None) -> Verdict:
    return fit_all(measured, optics, options).verdict


def chi2_landscape(
    measured: PolarizationSweep,
    pair: OrientationPair | str,
    ratios: Sequence[float],
    backgrounds: Sequence[float],
    optics: OpticalSystem,
    g2_weight: float = 1.0,
    offset_step_deg: float = 0.5,
) -> pd.DataFrame:
    """χ² minimized over scale and polarizer offset at every (ratio, background); rows are ratios"""
    measured.check_fittable()
    objective = _Objective(
        model=PairModel(OrientationPair.parse(pair), optics),
        angles=measured.angles,
        intensity=measured.intensities / measured.intensities.max(),
        g2=measured.g2_values,
        g2_weight=g2_weight,
    )
    ratios = np.asarray(ratios, dtype=float)
    backgrounds = np.asarray(backgrounds, dtype=float)
    offsets = np.deg2rad(np.arange(0.0, 180.0, offset_step_deg))
    values = np.empty((len(ratios), len(backgrounds)))
    for i, ratio in enumerate(ratios):
        b, o = (g.ravel() for g in np.meshgrid(backgrounds, offsets, indexing="ij"))
        chi2, _, _ = objective.profile(np.full(b.shape, ratio), b, o)
        values[i] = chi2.reshape(len(backgrounds), len(offsets)).min(axis=1)
    frame = pd.DataFrame(values, index=pd.Index(ratios, name="ratio"), columns=backgrounds)
    frame.columns.name = "background"
    return frame
