"""Per-agent evaluation of gathered measurements and opinion dynamics.

Agents score each angular sector by the average variance of the message
contents received from that direction, prefer the highest-scoring sector,
and pull their opinion toward opinions heard from neighbors.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from random import Random

TWO_PI = 2.0 * math.pi


@dataclass(slots=True)
class StoredObservation:
    """Variance of one received message, keyed by the bearing it arrived from.

    The variance covers the full measurement list of the received message
    including the receiver's own appended reading. count and mean are the
    message's sufficient statistics, kept so an observer can pool every
    stored measurement of an agent into one diversity figure.
    """

    variance: float
    bearing: float
    count: int = 1
    mean: float = 0.0

    def __post_init__(self) -> None:
        if self.variance < 0.0:
            raise ValueError(f"variance must be >= 0, got {self.variance}")
        if self.count < 1:
            raise ValueError(f"count must be >= 1, got {self.count}")


@dataclass
class DirectionWeights:
    """Measurement diversity and message count per angular sector.

    A sector's weight is the population variance of all measurements
    contained in the messages received from that sector, pooled together;
    long informative relay chains therefore dominate short local chatter.
    Sector k is centered on angle 2*pi*k/bins; a sector with no
    observations carries weight 0.
    """

    bins: int
    weights: list[float]
    counts: list[int]


@dataclass(slots=True)
class Opinion:
    """An agent's current belief about the best movement bearing."""

    preferred_direction: float = 0.0
    defined: bool = False


def measurement_stats(measurements: list[float]) -> tuple[int, float, float]:
    """(count, mean, population variance) of a measurement list."""
    n = len(measurements)
    if n == 0:
        raise ValueError("variance of an empty measurement list")
    mean = math.fsum(measurements) / n
    variance = math.fsum((m - mean) ** 2 for m in measurements) / n
    return n, mean, variance


def message_variance(measurements: list[float]) -> float:
    """Population variance (divide by n) of a message's measurement list."""
    return measurement_stats(measurements)[2]


def pooled_variance(observations: list[StoredObservation]) -> float:
    """Population variance of every measurement in a set of stored messages.

    Combines the messages' sufficient statistics exactly, as if all their
    measurement lists were concatenated.
    """
    if not observations:
        raise ValueError("pooled_variance of an empty store")
    total = sum(o.count for o in observations)
    grand_mean = math.fsum(o.count * o.mean for o in observations) / total
    m2 = math.fsum(
        o.count * o.variance + o.count * (o.mean - grand_mean) ** 2
        for o in observations
    )
    return m2 / total


def wrap_angle(angle: float) -> float:
    """Normalize an angle to [0, 2*pi)."""
    a = math.fmod(angle, TWO_PI)
    return a + TWO_PI if a < 0.0 else a


def signed_angle_difference(from_angle: float, to_angle: float) -> float:
    """Signed shortest arc from one angle to another, in [-pi, pi)."""
    return math.fmod(to_angle - from_angle + 3.0 * math.pi, TWO_PI) - math.pi


def bin_center(index: int, bins: int) -> float:
    return TWO_PI * index / bins


def bin_of(bearing: float, bins: int) -> int:
    """Sector whose center is nearest to the bearing (half-open boundaries)."""
    width = TWO_PI / bins
    return int(math.floor(wrap_angle(bearing) / width + 0.5)) % bins


def direction_weights(observations: list[StoredObservation], bins: int) -> DirectionWeights:
    """Aggregate stored observations into per-sector diversity weights."""
    grouped: list[list[StoredObservation]] = [[] for _ in range(bins)]
    for obs in observations:
        grouped[bin_of(obs.bearing, bins)].append(obs)
    weights = [pooled_variance(group) if group else 0.0 for group in grouped]
    return DirectionWeights(
        bins=bins, weights=weights, counts=[len(g) for g in grouped]
    )


def preferred_bin_direction(
    observations: list[StoredObservation], bins: int, rng: Random
) -> float:
    """Center angle of the sector with the largest diversity weight.

    Exact ties are broken uniformly at random among the maximal sectors.
    Sectors without observations are never candidates unless every sector
    is empty, in which case the direction is uniform over all centers.
    """
    weights = direction_weights(observations, bins)
    occupied = [k for k in range(bins) if weights.counts[k] > 0]
    if not occupied:
        candidates = list(range(bins))
    else:
        best = max(weights.weights[k] for k in occupied)
        candidates = [k for k in occupied if weights.weights[k] == best]
    if len(candidates) == 1:
        choice = candidates[0]
    else:
        choice = candidates[rng.randrange(len(candidates))]
    return bin_center(choice, bins)


def evaluate(observations: list[StoredObservation], bins: int, rng: Random) -> Opinion:
    """Turn an agent's observation store into an opinion, then empty the store."""
    direction = preferred_bin_direction(observations, bins, rng)
    observations.clear()
    return Opinion(preferred_direction=direction, defined=True)


def absorb_opinion(own: Opinion, received_direction: float, rate: float = 0.1) -> Opinion:
    """Rotate an opinion part-way toward a received direction.

    The rotation covers `rate` times the signed shortest arc, so opposite
    opinions converge through whichever side is (marginally) nearer.
    """
    if not own.defined:
        raise ValueError("cannot absorb into an undefined opinion")
    if not 0.0 < rate <= 1.0:
        raise ValueError(f"absorb rate must be in (0, 1], got {rate}")
    delta = signed_angle_difference(own.preferred_direction, received_direction)
    return Opinion(
        preferred_direction=wrap_angle(own.preferred_direction + rate * delta),
        defined=True,
    )


def circular_mean(angles: list[float]) -> tuple[float, float]:
    """Circular mean angle and mean resultant length of a set of angles.

    The mean angle is meaningless when the resultant length is near zero;
    callers that care should inspect the second element.
    """
    if not angles:
        raise ValueError("circular_mean of no angles")
    n = len(angles)
    c = math.fsum(math.cos(a) for a in angles) / n
    s = math.fsum(math.sin(a) for a in angles) / n
    return wrap_angle(math.atan2(s, c)), math.hypot(c, s)


def majority_direction(votes: list[float], own: Opinion, bins: int) -> float:
    """Most frequent sector among observed opinion votes; ties keep one's own.

    Votes and the tie fallback are snapped to sector centers so that a
    left/right (two-sector) split stays an exact tie instead of drifting.
    """
    if not votes:
        return bin_center(bin_of(own.preferred_direction, bins), bins) if own.defined else 0.0
    counts = [0] * bins
    for v in votes:
        counts[bin_of(v, bins)] += 1
    best = max(counts)
    winners = [k for k in range(bins) if counts[k] == best]
    if len(winners) == 1:
        return bin_center(winners[0], bins)
    if own.defined:
        own_bin = bin_of(own.preferred_direction, bins)
        if own_bin in winners:
            return bin_center(own_bin, bins)
    return bin_center(winners[0], bins)
