"""Run configuration: a JSON object of known keys, plus ``--set key=value`` overrides from the command line."""
from __future__ import annotations

import json
import math
import re
from typing import Annotated, Any, List, Literal, Optional, Tuple, Union

import numpy as np
import pydantic
from pydantic import BaseModel, ConfigDict, Field, field_validator

from nvpolar import filesystem
from nvpolar.dipole import OpticalSystem
from nvpolar.errors import InputValidationError
from nvpolar.estimator.fitting import FitOptions
from nvpolar.geometry import NvLabel, OrientationPair
from nvpolar.odmr import OdmrConfig, default_b_field
from nvpolar.photon_statistics import EmitterSystem
from nvpolar.sweep import DEFAULT_ANGLES_DEG

COMMANDS = ("simulate", "fit", "confidence", "sweep-map", "g2-map", "odmr")

CommandName = Literal["simulate", "fit", "confidence", "sweep-map", "g2-map", "odmr"]

_MAX_SEED = 2**64 - 1

Fraction = Annotated[float, Field(ge=0.0, le=1.0)]
NonNegative = Annotated[float, Field(ge=0.0)]
Positive = Annotated[float, Field(gt=0.0)]
Angle = Annotated[float, Field(ge=0.0, le=180.0)]


class RunSettings(BaseModel):
    """Every accepted config key with its default; unknown keys are rejected"""

    model_config = ConfigDict(extra="forbid", frozen=True, strict=True, allow_inf_nan=False)

    # Emitters
    orientations: List[str] = Field(default_factory=lambda: ["a", "c"])
    ratio: Union[Fraction, Annotated[List[Fraction], Field(min_length=1)]] = 0.4
    background: NonNegative = 0.05
    beta_deg: float = 0.0
    pair: Optional[str] = None
    # Acquisition
    acquisition_time: Positive = 1000.0
    seed: Annotated[int, Field(ge=0, le=_MAX_SEED)] = 0
    angles_deg: Annotated[List[Angle], Field(min_length=1)] = Field(
        default_factory=lambda: [float(a) for a in DEFAULT_ANGLES_DEG]
    )
    # Optics
    na: Positive = 1.98
    refractive_index: Annotated[float, Field(ge=1.0)] = 2.4
    wavelength_nm: Positive = 700.0
    quadrature_points: Annotated[int, Field(ge=16, multiple_of=4)] = 64
    far_field_radius_kr: Annotated[float, Field(ge=100.0)] = 1.0e4
    emission_rate: Positive = 1000.0
    # Estimator
    ratio_floor: NonNegative = 1e-3
    rel_margin: Annotated[float, Field(gt=0.0, le=1.0)] = 0.5
    single_margin: NonNegative = 0.25
    g2_weight: NonNegative = 1.0
    n_trials: Annotated[int, Field(ge=2)] = 100
    target_uncertainty: Positive = 0.01
    max_acquisition_time: Positive = 1.0e7
    ratio_grid: Optional[Annotated[List[Fraction], Field(min_length=1)]] = None
    background_grid: Optional[Annotated[List[NonNegative], Field(min_length=1)]] = None
    map_ratios: Optional[Annotated[List[Fraction], Field(min_length=1)]] = None
    map_backgrounds: Optional[Annotated[List[NonNegative], Field(min_length=1)]] = None
    # g² maps
    emitters: Annotated[int, Field(ge=2, le=3)] = 2
    grid: Tuple[int, int] = (101, 101)
    # ODMR
    d_ghz: Positive = 2.857
    gyromagnetic_ghz_per_t: Positive = 28.024
    b_field_mt: Optional[Annotated[List[float], Field(min_length=3, max_length=3)]] = None
    linewidth_mhz: Positive = 2.0
    contrast: Annotated[float, Field(gt=0.0, lt=1.0)] = 0.1
    photons_per_point: Optional[Positive] = None
    odmr_weights: Optional[Annotated[List[NonNegative], Field(min_length=1)]] = None
    freq_min_ghz: Positive = 2.80
    freq_max_ghz: Positive = 2.92
    freq_points: Annotated[int, Field(ge=2)] = 1201

    @field_validator("orientations", mode="before")
    @classmethod
    def _parse_labels(cls, value: Any) -> Any:
        if not isinstance(value, list) or not 1 <= len(value) <= 3:
            raise ValueError(f"expected a list of 1 to 3 orientation labels, got {value!r}")
        return [NvLabel.parse(v).value for v in value]

    @field_validator("pair", mode="before")
    @classmethod
    def _parse_pair(cls, value: Any) -> Any:
        if value is None:
            return None
        if not isinstance(value, (str, list)):
            raise ValueError(f"expected a pair like 'a&c', got {value!r}")
        return str(OrientationPair.parse(value))

    @field_validator("grid", mode="before")
    @classmethod
    def _parse_grid(cls, value: Any) -> Any:
        if isinstance(value, int) and not isinstance(value, bool):
            value = [value, value]
        if isinstance(value, str):
            match = re.fullmatch(r"\s*(\d+)\s*[xX]\s*(\d+)\s*", value)
            if match is None:
                raise ValueError(f"expected a grid like '101x101', got {value!r}")
            value = [int(match.group(1)), int(match.group(2))]
        if not isinstance(value, (list, tuple)) or len(value) != 2:
            raise ValueError(f"expected two grid sizes, got {value!r}")
        if any(isinstance(v, bool) or not isinstance(v, int) or v < 2 for v in value):
            raise ValueError(f"grid sizes must be integers of at least 2, got {value!r}")
        return tuple(value)


def _input_error(error: pydantic.ValidationError, path: str | None = None) -> InputValidationError:
    first = error.errors()[0]
    key = first["loc"][0] if first["loc"] else None
    if first["type"] == "extra_forbidden":
        return InputValidationError(f"unknown config key {key!r}", path=path)
    message = first["msg"].removeprefix("Value error, ")
    if key is None:
        return InputValidationError(message, path=path)
    return InputValidationError(f"config key {key!r}: {message}", path=path)


def validate(values: Any, path: str | None = None) -> dict[str, Any]:
    """Validates the given keys against ``RunSettings`` and returns them parsed"""
    if not isinstance(values, dict):
        raise InputValidationError(f"config must be a JSON object, got {type(values).__name__}", path=path)
    try:
        settings = RunSettings.model_validate(values)
    except pydantic.ValidationError as e:
        raise _input_error(e, path=path) from e
    return {key: getattr(settings, key) for key in values}


def parse_override(text: str) -> tuple[str, Any]:
    """Parses ``key=value``; the value is read as JSON, falling back to a plain string"""
    if "=" not in text:
        raise InputValidationError(f"override {text!r} is not of the form key=value")
    key, raw = text.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def load_config_file(path: str) -> dict[str, Any]:
    try:
        text = filesystem.read_text(path)
    except FileNotFoundError as e:
        raise InputValidationError(str(e), path=path) from e
    try:
        values = json.loads(text)
    except json.JSONDecodeError as e:
        raise InputValidationError(f"invalid JSON: {e.msg}", path=path, line=e.lineno) from e
    return validate(values, path=path)


class RunConfig(BaseModel):
    """Validated settings of one CLI invocation

    Args:
        command: subcommand name.
        input_path: input file, for commands that read one.
        output_path: main output file.
        seed: seed for every randomized step.
        settings: config file values with ``--set`` overrides applied over them.
    """

    model_config = ConfigDict(extra="forbid", frozen=True)

    command: CommandName
    input_path: Optional[str] = None
    output_path: Optional[str] = None
    seed: Annotated[int, Field(ge=0, le=_MAX_SEED)] = 0
    settings: RunSettings = Field(default_factory=RunSettings)

    @classmethod
    def build(
        cls,
        command: str,
        config_path: str | None = None,
        overrides: list[str] | None = None,
        input_path: str | None = None,
        output_path: str | None = None,
        seed: int | None = None,
    ) -> RunConfig:
        if command not in COMMANDS:
            raise InputValidationError(f"unknown command {command!r}, expected one of {', '.join(COMMANDS)}")
        values = load_config_file(config_path) if config_path else {}
        override_values = validate(dict(parse_override(o) for o in overrides or []))
        settings = RunSettings.model_validate({**values, **override_values})
        if seed is None:
            seed = settings.seed
        elif not 0 <= seed <= _MAX_SEED:
            raise InputValidationError(f"--seed must be an unsigned 64-bit integer, got {seed}")
        return cls(
            command=command,
            input_path=input_path,
            output_path=output_path,
            seed=seed,
            settings=settings,
        )

    def get(self, key: str) -> Any:
        if key not in RunSettings.model_fields:
            raise KeyError(key)
        return getattr(self.settings, key)

    def optics(self) -> OpticalSystem:
        return OpticalSystem.from_refractive_index(
            self.get("na"),
            self.get("refractive_index"),
            wavelength_nm=self.get("wavelength_nm"),
            quadrature_points=self.get("quadrature_points"),
            far_field_radius=self.get("far_field_radius_kr"),
            emission_rate=self.get("emission_rate"),
        )

    def brightness(self) -> list[float]:
        """Emitter brightnesses relative to the first emitter"""
        n = len(self.get("orientations"))
        ratio = self.get("ratio")
        if isinstance(ratio, list):
            if len(ratio) == n:
                return list(ratio)
            if len(ratio) == n - 1:
                return [1.0, *ratio]
            raise InputValidationError(f"config key 'ratio': expected {n - 1} or {n} values for {n} orientations")
        return [1.0] + [ratio] * (n - 1)

    def emitter_system(self) -> EmitterSystem:
        return EmitterSystem.from_labels(
            self.get("orientations"),
            self.brightness(),
            background=self.get("background"),
            beta=math.radians(self.get("beta_deg")),
        )

    def pair(self) -> OrientationPair:
        if self.get("pair") is not None:
            return OrientationPair.parse(self.get("pair"))
        labels = self.get("orientations")
        if len(labels) != 2:
            raise InputValidationError("set 'pair' or give exactly two orientations")
        return OrientationPair.parse(labels)

    def angles_deg(self) -> np.ndarray:
        return np.array(self.get("angles_deg"), dtype=float)

    def fit_options(self) -> FitOptions:
        kwargs: dict[str, Any] = {
            "ratio_floor": self.get("ratio_floor"),
            "rel_margin": self.get("rel_margin"),
            "single_margin": self.get("single_margin"),
            "g2_weight": self.get("g2_weight"),
        }
        if self.get("ratio_grid") is not None:
            kwargs["ratio_grid"] = tuple(self.get("ratio_grid"))
        if self.get("background_grid") is not None:
            kwargs["background_grid"] = tuple(self.get("background_grid"))
        return FitOptions(**kwargs)

    def odmr_config(self) -> OdmrConfig:
        if self.get("freq_max_ghz") <= self.get("freq_min_ghz"):
            raise InputValidationError("freq_max_ghz must exceed freq_min_ghz")
        config = OdmrConfig(
            zero_field_splitting=self.get("d_ghz"),
            gyromagnetic_ratio=self.get("gyromagnetic_ghz_per_t"),
            linewidth=self.get("linewidth_mhz"),
            contrast_per_nv=self.get("contrast"),
            frequency_grid=tuple(
                np.linspace(self.get("freq_min_ghz"), self.get("freq_max_ghz"), self.get("freq_points"))
            ),
        )
        b_field = self.get("b_field_mt")
        return config.with_field(default_b_field(config) if b_field is None else b_field)

    def odmr_emitters(self) -> list[tuple[str, float]]:
        labels = self.get("orientations")
        weights = self.get("odmr_weights") or [1.0] * len(labels)
        if len(weights) != len(labels):
            raise InputValidationError(f"config key 'odmr_weights': expected {len(labels)} values")
        return list(zip(labels, weights))

    def to_dict(self) -> dict[str, Any]:
        """Effective configuration, defaults included"""
        out = self.settings.model_dump()
        out["seed"] = self.seed
        out["grid"] = list(out["grid"])
        return out
