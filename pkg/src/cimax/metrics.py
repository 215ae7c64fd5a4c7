"""Observer-side measures: entropy, mean diversity, and success detection.

Everything here is a pure function over logged or in-world data; nothing
mutates simulation state.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Union

from .decision import pooled_variance


def shannon_entropy(probabilities: list[float], base: float = 2.0) -> float:
    """Entropy -sum(p * log_base(p)) of a discrete distribution.

    Zero-probability terms contribute nothing. The distribution must be
    nonnegative and sum to 1 within 1e-9.
    """
    if base <= 1.0:
        raise ValueError(f"entropy base must exceed 1, got {base}")
    total = math.fsum(probabilities)
    if any(p < 0.0 for p in probabilities):
        raise ValueError("probabilities must be nonnegative")
    if abs(total - 1.0) > 1e-9:
        raise ValueError(f"probabilities sum to {total!r}, not 1")
    log_base = math.log(base)
    return -math.fsum(p * math.log(p) / log_base for p in probabilities if p > 0.0)


def average_diversity(world) -> Optional[float]:
    """Mean over agents of each agent's stored-measurement diversity.

    An agent's diversity is the population variance of all measurements
    contained in its stored messages, pooled together. Agents with empty
    stores are excluded; with every store empty there is no sample and
    None is returned.
    """
    diversities = [pooled_variance(store) for store in world.stores if store]
    if not diversities:
        return None
    return math.fsum(diversities) / len(diversities)


@dataclass
class DiversityTrace:
    """Mean swarm diversity sampled once per evaluation instant."""

    samples: list[tuple[int, float]] = field(default_factory=list)

    def append(self, t: int, value: Optional[float]) -> None:
        if value is not None:
            self.samples.append((t, value))

    def values(self) -> list[float]:
        return [v for _, v in self.samples]


@dataclass(frozen=True)
class BorderProximity:
    """Success when the center of mass is within threshold of a vertical border."""

    threshold: float
    border_x: float = 0.0

    def holds(self, x: float, y: float) -> bool:
        return abs(x - self.border_x) < self.threshold


@dataclass(frozen=True)
class PositionThreshold:
    """Success when the center of mass reaches x >= x_min."""

    x_min: float

    def holds(self, x: float, y: float) -> bool:
        return x >= self.x_min


SuccessCriterion = Union[BorderProximity, PositionThreshold]


def detect_success(
    trajectory: Iterable[tuple[int, float, float]],
    criterion: SuccessCriterion,
    deadline: int,
) -> tuple[bool, Optional[int]]:
    """First time the criterion holds along a (t, x, y) trajectory.

    Points after the deadline are ignored; a trajectory that never
    satisfies the criterion in time fails with no success time.
    """
    found_any = False
    for t, x, y in trajectory:
        found_any = True
        if t > deadline:
            break
        if criterion.holds(x, y):
            return True, t
    if not found_any:
        raise ValueError("detect_success on an empty trajectory")
    return False, None


def wilson_interval(successes: int, trials: int, z: float = 1.96) -> tuple[float, float]:
    """Wilson score confidence interval for a success rate."""
    if trials <= 0:
        raise ValueError("wilson_interval needs at least one trial")
    p = successes / trials
    denom = 1.0 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    spread = (z / denom) * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials))
    return max(0.0, center - spread), min(1.0, center + spread)
