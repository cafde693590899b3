"""Pipeline configuration shared by the CLI, the HTTP service, and the
library entry points."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields

from .errors import InvalidArgumentError


@dataclass(frozen=True)
class PipelineConfig:
    """Tunable parameters for the whole pipeline.

    Defaults follow the reference procedure where it states values
    (3x3 median, Canny aperture 5, 2x2 gradient kernel) and sensible
    measured choices where it is silent (contour area floor, hysteresis
    thresholds, merge radius).
    """

    median_window: int = 3
    canny_aperture: int = 5
    canny_low: float = 50.0
    canny_high: float = 150.0
    gradient_kernel_size: int = 2
    min_contour_area: float = 40.0
    merge_radius: float = 3.0
    spur_prune_iterations: int = 4
    crop_pad: int = 2
    dark_foreground: bool = True
    classes: int = 23
    expected_total: int = 46

    def validate(self) -> None:
        if self.median_window < 3 or self.median_window % 2 == 0:
            raise InvalidArgumentError(f"median_window must be odd and >= 3, got {self.median_window}")
        if self.canny_aperture not in (3, 5, 7):
            raise InvalidArgumentError(f"canny_aperture must be 3, 5 or 7, got {self.canny_aperture}")
        if not 0 <= self.canny_low <= self.canny_high:
            raise InvalidArgumentError("canny thresholds must satisfy 0 <= low <= high")
        if self.gradient_kernel_size < 2:
            raise InvalidArgumentError("gradient_kernel_size must be >= 2")
        if self.min_contour_area < 0:
            raise InvalidArgumentError("min_contour_area must be >= 0")
        if self.merge_radius < 0:
            raise InvalidArgumentError("merge_radius must be >= 0")
        if self.spur_prune_iterations < 0:
            raise InvalidArgumentError("spur_prune_iterations must be >= 0")
        if self.crop_pad < 0:
            raise InvalidArgumentError("crop_pad must be >= 0")
        if self.classes < 1:
            raise InvalidArgumentError("classes must be >= 1")
        if self.expected_total < 1:
            raise InvalidArgumentError("expected_total must be >= 1")

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj: dict) -> "PipelineConfig":
        if not isinstance(obj, dict):
            raise InvalidArgumentError("config must be a JSON object")
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(obj) - known)
        if unknown:
            raise InvalidArgumentError(f"unknown config fields: {', '.join(unknown)}")
        try:
            config = cls(**obj)
        except TypeError as exc:
            raise InvalidArgumentError(str(exc)) from exc
        config.validate()
        return config

    def canonical_json(self) -> str:
        """Stable serialization used for session-id hashing."""
        return json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
