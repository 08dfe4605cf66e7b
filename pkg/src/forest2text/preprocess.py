"""Numeric-representation transforms for prompt and rule text.

Three independent switches control how numbers and comparisons are rendered:

* integer normalisation (IN): affine rescaling of raw values into a small
  integer range, with rounding and clipping;
* verbal description (VD): a box-plot style tag appended to each value;
* relation encoding (RE): inequality symbols replaced by words.

All statistics are fitted on the training partition and then applied to both
example values and tree thresholds, so rendered statements and validation
live in the same representation space.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dataset import Dataset

QUANTILES = (0.001, 0.25, 0.5, 0.75, 0.999)

VERBAL_CLASSES = (
    "lower outlier",
    "lower whisker",
    "median",
    "upper whisker",
    "upper outlier",
)


@dataclass(frozen=True)
class PreprocessConfig:
    integer_normalisation: bool = False
    verbal_description: bool = False
    relation_encoding: bool = False
    range_min: int = 0
    range_max: int = 99

    def __post_init__(self):
        if self.range_min >= self.range_max:
            raise ValueError(
                f"range_min must be below range_max, got [{self.range_min}, {self.range_max}]"
            )

    def tag(self) -> str:
        """Report tag fragment, e.g. "IN+VN" (empty when neither is active)."""
        parts = []
        if self.integer_normalisation:
            parts.append("IN")
        if self.verbal_description:
            parts.append("VN")
        return "+".join(parts)

    def to_dict(self) -> dict:
        return {
            "integer_normalisation": self.integer_normalisation,
            "verbal_description": self.verbal_description,
            "relation_encoding": self.relation_encoding,
            "range_min": self.range_min,
            "range_max": self.range_max,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "PreprocessConfig":
        return cls(**data)


@dataclass(frozen=True)
class ScalingParams:
    """Per-feature training minima and maxima."""

    v_min: np.ndarray
    v_max: np.ndarray

    def __post_init__(self):
        v_min = np.ascontiguousarray(self.v_min, dtype=np.float64)
        v_max = np.ascontiguousarray(self.v_max, dtype=np.float64)
        if v_min.shape != v_max.shape or v_min.ndim != 1:
            raise ValueError("v_min and v_max must be 1-D arrays of equal length")
        if np.any(v_min > v_max):
            raise ValueError("v_min must not exceed v_max")
        v_min.setflags(write=False)
        v_max.setflags(write=False)
        object.__setattr__(self, "v_min", v_min)
        object.__setattr__(self, "v_max", v_max)


@dataclass(frozen=True)
class PercentileBins:
    """Per-feature cut points at the 0.1th/25th/50th/75th/99.9th percentiles."""

    cuts: np.ndarray

    def __post_init__(self):
        cuts = np.ascontiguousarray(self.cuts, dtype=np.float64)
        if cuts.ndim != 2 or cuts.shape[1] != len(QUANTILES):
            raise ValueError(f"cuts must have shape (F, {len(QUANTILES)})")
        if np.any(np.diff(cuts, axis=1) < 0):
            raise ValueError("cut points must be non-decreasing per feature")
        cuts.setflags(write=False)
        object.__setattr__(self, "cuts", cuts)


def fit_scaling(train: Dataset) -> ScalingParams:
    """Column-wise extrema of the training features."""
    if train.n_examples == 0:
        raise ValueError("cannot fit scaling on an empty dataset")
    return ScalingParams(
        v_min=train.features.min(axis=0),
        v_max=train.features.max(axis=0),
    )


def _round_half_away(value: float) -> int:
    if value >= 0.0:
        return int(math.floor(value + 0.5))
    return int(math.ceil(value - 0.5))


def scale_value(params: ScalingParams, feature: int, value: float, config: PreprocessConfig) -> int:
    """Map a raw value into the configured integer range.

    Affine rescale onto [range_min, range_max], round half away from zero,
    then clip. A constant feature (zero training spread) maps to range_min.
    """
    lo, hi = params.v_min[feature], params.v_max[feature]
    if hi == lo:
        return config.range_min
    span = config.range_max - config.range_min
    raw = (value - lo) / (hi - lo) * span + config.range_min
    return max(config.range_min, min(config.range_max, _round_half_away(raw)))


def scale_features(params: ScalingParams, features: np.ndarray, config: PreprocessConfig) -> np.ndarray:
    """Vectorised ``scale_value`` over a feature matrix; returns int64."""
    x = np.asarray(features, dtype=np.float64)
    spread = params.v_max - params.v_min
    safe = np.where(spread == 0.0, 1.0, spread)
    span = config.range_max - config.range_min
    raw = (x - params.v_min) / safe * span + config.range_min
    raw = np.where(spread == 0.0, float(config.range_min), raw)
    rounded = np.trunc(raw + np.copysign(0.5, raw))
    return np.clip(rounded, config.range_min, config.range_max).astype(np.int64)


def fit_percentiles(train: Dataset) -> PercentileBins:
    """Linear-interpolation quantiles of each training feature column."""
    if train.n_examples == 0:
        raise ValueError("cannot fit percentiles on an empty dataset")
    cuts = np.quantile(train.features, QUANTILES, axis=0, method="linear").T
    return PercentileBins(cuts=cuts)


def describe_value(bins: PercentileBins, feature: int, value: float) -> str:
    """Verbal class of ``value`` relative to the training distribution.

    The real line is partitioned as: (-inf, p0.1) lower outlier,
    [p0.1, p25) lower whisker, [p25, p75] median, (p75, p99.9] upper whisker,
    (p99.9, inf) upper outlier.
    """
    p001, p25, _p50, p75, p999 = bins.cuts[feature]
    if value < p001:
        return "lower outlier"
    if value < p25:
        return "lower whisker"
    if value <= p75:
        return "median"
    if value <= p999:
        return "upper whisker"
    return "upper outlier"


def encode_relation(direction: int, config: PreprocessConfig) -> str:
    """Comparison token for a branch direction (-1 left, +1 right)."""
    if direction == -1:
        return "is less than" if config.relation_encoding else "<="
    if direction == +1:
        return "is greater than" if config.relation_encoding else ">"
    raise ValueError(f"direction must be -1 or +1, got {direction}")
