"""Polarization sweeps: PL intensity and g² measured at a series of polarizer angles, and their CSV form."""
from __future__ import annotations

import csv
import dataclasses
import io
import math

import numpy as np
import pandas as pd
from loguru import logger

from nvpolar import filesystem
from nvpolar.errors import DomainError, InputValidationError

SWEEP_COLUMNS = ["angle_deg", "intensity", "g2", "g2_err"]

# Bound past which a g² value cannot come from antibunched emission plus background
G2_SANITY_BOUND = 1.5

DEFAULT_ANGLES_DEG = np.arange(0.0, 181.0, 10.0)

MIN_FIT_ANGLES = 8
MIN_FIT_SPAN_DEG = 90.0


def _frozen_array(values, name: str) -> np.ndarray:
    array = np.array(values, dtype=float).ravel()
    if np.any(np.isnan(array)) and name != "g2_errors":
        raise DomainError(f"{name} contains NaN")
    array.setflags(write=False)
    return array


@dataclasses.dataclass(frozen=True)
class PolarizationSweep:
    """A sweep over polarizer angle

    Args:
        angles_deg: strictly increasing polarizer angles in [0, 180].
        intensities: PL intensity at each angle, in counts or any proportional unit.
        g2_values: measured g²(0) at each angle.
        g2_errors: optional standard errors of ``g2_values``; NaN marks a missing entry.
        acquisition_time: integration time per angle, when known.
    """

    angles_deg: np.ndarray
    intensities: np.ndarray
    g2_values: np.ndarray
    g2_errors: np.ndarray | None = None
    acquisition_time: float | None = None

    def __post_init__(self) -> None:
        for name in ("angles_deg", "intensities", "g2_values"):
            object.__setattr__(self, name, _frozen_array(getattr(self, name), name))
        if self.g2_errors is not None:
            object.__setattr__(self, "g2_errors", _frozen_array(self.g2_errors, "g2_errors"))

        n = len(self.angles_deg)
        lengths = {len(self.intensities), len(self.g2_values)}
        if self.g2_errors is not None:
            lengths.add(len(self.g2_errors))
        if lengths != {n}:
            raise DomainError(f"Sweep columns have mismatched lengths: {n} angles vs {sorted(lengths)}")
        if n == 0:
            raise DomainError("A polarization sweep needs at least one angle")
        if np.any(self.angles_deg < 0) or np.any(self.angles_deg > 180):
            raise DomainError("Polarizer angles must lie in [0, 180] degrees")
        if np.any(np.diff(self.angles_deg) <= 0):
            raise DomainError("Polarizer angles must be strictly increasing")
        if np.any(self.intensities < 0):
            raise DomainError("Intensities must be non-negative")
        if np.any(self.g2_values < 0) or np.any(self.g2_values > G2_SANITY_BOUND):
            raise DomainError(f"g2 values must lie in [0, {G2_SANITY_BOUND}]")
        if self.acquisition_time is not None and not self.acquisition_time > 0:
            raise DomainError(f"Acquisition time must be positive, got {self.acquisition_time}")

    def __len__(self) -> int:
        return len(self.angles_deg)

    @property
    def angles(self) -> np.ndarray:
        """Polarizer angles in radians"""
        return np.deg2rad(self.angles_deg)

    @property
    def angular_span_deg(self) -> float:
        return float(self.angles_deg[-1] - self.angles_deg[0])

    def check_fittable(self) -> None:
        if len(self) < MIN_FIT_ANGLES or self.angular_span_deg < MIN_FIT_SPAN_DEG:
            raise DomainError(
                f"Fitting needs at least {MIN_FIT_ANGLES} angles spanning {MIN_FIT_SPAN_DEG:g} degrees, "
                f"got {len(self)} angles spanning {self.angular_span_deg:g}"
            )
        if not self.intensities.max() > 0:
            raise DomainError("Cannot fit a sweep with zero intensity at every angle")

    def normalized(self) -> PolarizationSweep:
        """Copy with intensities divided by their maximum"""
        peak = self.intensities.max()
        if not peak > 0:
            raise DomainError("Cannot normalize a sweep with zero intensity at every angle")
        return dataclasses.replace(self, intensities=self.intensities / peak)

    def same_grid(self, other: PolarizationSweep) -> bool:
        return len(self) == len(other) and bool(np.allclose(self.angles_deg, other.angles_deg, rtol=0, atol=1e-9))

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "angle_deg": self.angles_deg,
                "intensity": self.intensities,
                "g2": self.g2_values,
                "g2_err": self.g2_errors if self.g2_errors is not None else np.full(len(self), np.nan),
            },
            columns=SWEEP_COLUMNS,
        )

    @classmethod
    def from_frame(cls, frame: pd.DataFrame, acquisition_time: float | None = None) -> PolarizationSweep:
        errors = frame["g2_err"].to_numpy(dtype=float) if "g2_err" in frame else None
        if errors is not None and np.all(np.isnan(errors)):
            errors = None
        return cls(
            angles_deg=frame["angle_deg"].to_numpy(dtype=float),
            intensities=frame["intensity"].to_numpy(dtype=float),
            g2_values=frame["g2"].to_numpy(dtype=float),
            g2_errors=errors,
            acquisition_time=acquisition_time,
        )


def _parse_float(text: str, column: str, path: str, line: int) -> float:
    try:
        value = float(text)
    except ValueError:
        raise InputValidationError(f"column {column!r} is not a number: {text!r}", path=path, line=line)
    if not math.isfinite(value):
        raise InputValidationError(f"column {column!r} is not finite: {text!r}", path=path, line=line)
    return value


def parse_sweep_csv(text: str, path: str = "<string>") -> PolarizationSweep:
    """Parses and validates sweep CSV text; lines starting with '#' and blank lines are skipped"""
    rows: list[tuple[int, list[str]]] = []
    for line_number, line in enumerate(io.StringIO(text), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        rows.append((line_number, next(csv.reader([stripped]))))
    if not rows:
        raise InputValidationError("empty sweep file, expected header " + ",".join(SWEEP_COLUMNS), path=path)

    header_line, header = rows[0]
    header = [h.strip() for h in header]
    if header != SWEEP_COLUMNS:
        raise InputValidationError(
            f"expected header {','.join(SWEEP_COLUMNS)!r}, got {','.join(header)!r}", path=path, line=header_line
        )
    if len(rows) == 1:
        raise InputValidationError("sweep file has a header but no data rows", path=path, line=header_line)

    angles, intensities, g2s, errors = [], [], [], []
    for line_number, fields in rows[1:]:
        fields = [f.strip() for f in fields]
        if len(fields) == 3:
            fields.append("")
        if len(fields) != 4:
            raise InputValidationError(f"expected 4 columns, got {len(fields)}", path=path, line=line_number)
        angle = _parse_float(fields[0], "angle_deg", path, line_number)
        if not 0.0 <= angle <= 180.0:
            raise InputValidationError(f"angle {angle:g} outside [0, 180] degrees", path=path, line=line_number)
        if angles and angle <= angles[-1]:
            raise InputValidationError(
                f"angles must be strictly increasing, {angle:g} follows {angles[-1]:g}", path=path, line=line_number
            )
        intensity = _parse_float(fields[1], "intensity", path, line_number)
        if intensity < 0:
            raise InputValidationError(f"negative intensity {intensity:g}", path=path, line=line_number)
        g2 = _parse_float(fields[2], "g2", path, line_number)
        if not 0.0 <= g2 <= G2_SANITY_BOUND:
            raise InputValidationError(f"g2 {g2:g} outside [0, {G2_SANITY_BOUND}]", path=path, line=line_number)
        if g2 > 1.0:
            logger.warning(f"{path}:{line_number}: g2 = {g2:g} exceeds 1, keeping it")
        error = _parse_float(fields[3], "g2_err", path, line_number) if fields[3] else math.nan
        if error < 0:
            raise InputValidationError(f"negative g2_err {error:g}", path=path, line=line_number)

        angles.append(angle)
        intensities.append(intensity)
        g2s.append(g2)
        errors.append(error)

    return PolarizationSweep(
        angles_deg=np.array(angles),
        intensities=np.array(intensities),
        g2_values=np.array(g2s),
        g2_errors=None if all(math.isnan(e) for e in errors) else np.array(errors),
    )


def read_sweep_csv(path: str) -> PolarizationSweep:
    try:
        text = filesystem.read_text(path)
    except FileNotFoundError as e:
        raise InputValidationError(str(e), path=path) from e
    return parse_sweep_csv(text, path=path)


def write_sweep_csv(sweep: PolarizationSweep, path: str, comment: str | None = None) -> None:
    with filesystem.open_for_write(path) as f:
        if comment:
            for line in comment.splitlines():
                f.write(f"# {line}\n")
        sweep.to_frame().to_csv(f, index=False, float_format="%.10g", na_rep="", lineterminator="\n")
