"""Scalar environment fields X(position) with additive white sampling noise.

Every sample is base(position) plus a fresh uniform draw from
(-noise_halfwidth, +noise_halfwidth); exactly one RNG draw is consumed
per sample regardless of the halfwidth, so paired-seed runs stay aligned.
Fields are immutable after construction and safe for concurrent reads.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from random import Random
from typing import Union

DEFAULT_NOISE_HALFWIDTH = 0.5


@dataclass(frozen=True)
class DiscreteBorder:
    """Sharp step: low left of the border, high at and right of it."""

    border_x: float = 0.0
    low: float = 0.0
    high: float = 5.0
    noise_halfwidth: float = DEFAULT_NOISE_HALFWIDTH

    def base_at(self, x: float, y: float) -> float:
        # Boundary points belong to the high (right) domain.
        return self.high if x >= self.border_x else self.low


@dataclass(frozen=True)
class LinearGradient:
    """Flat low region for x < onset, then a linear rise with slope per R."""

    onset_x: float = 0.0
    slope: float = 5.0 / 4.5
    low: float = 0.0
    noise_halfwidth: float = DEFAULT_NOISE_HALFWIDTH

    def base_at(self, x: float, y: float) -> float:
        if x < self.onset_x:
            return self.low
        return self.low + self.slope * (x - self.onset_x)


@dataclass(frozen=True)
class RadialCloud:
    """Circular region of deviating values, low inside and high outside.

    The base is `low` within inner_radius of the center, ramps linearly to
    `high` across [inner_radius, outer_radius], and stays `high` beyond.
    Set inverted=True to swap the two plateaus; the ramp flips with them.
    """

    center: tuple[float, float] = (0.0, 0.0)
    inner_radius: float = 3.0
    outer_radius: float = 4.5
    low: float = 0.0
    high: float = 5.0
    inverted: bool = False
    noise_halfwidth: float = DEFAULT_NOISE_HALFWIDTH

    def base_at(self, x: float, y: float) -> float:
        d = math.hypot(x - self.center[0], y - self.center[1])
        inner, outer = (self.high, self.low) if self.inverted else (self.low, self.high)
        if d < self.inner_radius:
            return inner
        if d > self.outer_radius:
            return outer
        span = self.outer_radius - self.inner_radius
        return inner + (outer - inner) * (d - self.inner_radius) / span


@dataclass(frozen=True)
class OneDimensionalPattern:
    """Row of equal-width cells along x, each with its own brightness.

    Positions left of the first cell read the first brightness, positions
    beyond the last cell the last one. Defaults to noiseless sampling to
    mirror binary on/off light sensors.
    """

    brightness: tuple[float, ...]
    cell_width: float = 1.0
    origin_x: float = 0.0
    noise_halfwidth: float = 0.0

    def __post_init__(self) -> None:
        if not self.brightness:
            raise ValueError("OneDimensionalPattern needs at least one cell")

    def base_at(self, x: float, y: float) -> float:
        index = int(math.floor((x - self.origin_x) / self.cell_width))
        index = max(0, min(len(self.brightness) - 1, index))
        return self.brightness[index]


EnvironmentField = Union[DiscreteBorder, LinearGradient, RadialCloud, OneDimensionalPattern]

_FIELD_KINDS = {
    "discrete": DiscreteBorder,
    "gradient": LinearGradient,
    "cloud": RadialCloud,
    "pattern": OneDimensionalPattern,
}
_KIND_OF_TYPE = {cls: kind for kind, cls in _FIELD_KINDS.items()}


def base(field: EnvironmentField, position: tuple[float, float]) -> float:
    """Noise-free field value at a position."""
    return field.base_at(position[0], position[1])


def sample(field: EnvironmentField, position: tuple[float, float], rng: Random) -> float:
    """Field value plus one fresh uniform noise draw.

    Consumes exactly one rng.random() call whatever the halfwidth, so
    paired-seed runs over different fields stay draw-aligned.
    """
    noise = (2.0 * rng.random() - 1.0) * field.noise_halfwidth
    return field.base_at(position[0], position[1]) + noise


def field_to_dict(field: EnvironmentField) -> dict:
    """JSON-serializable description of a field, for snapshots and logs."""
    kind = _KIND_OF_TYPE[type(field)]
    payload = {"kind": kind}
    for name in field.__dataclass_fields__:
        value = getattr(field, name)
        if isinstance(value, tuple):
            value = list(value)
        payload[name] = value
    return payload


def field_from_dict(payload: dict) -> EnvironmentField:
    data = dict(payload)
    kind = data.pop("kind")
    if kind not in _FIELD_KINDS:
        raise ValueError(f"unknown field kind {kind!r}")
    cls = _FIELD_KINDS[kind]
    for name, value in data.items():
        if isinstance(value, list):
            data[name] = tuple(value)
    return cls(**data)
