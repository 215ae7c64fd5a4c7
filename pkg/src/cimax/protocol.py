"""Three-state wave-relay communication automaton.

Each agent cycles inactive -> active -> refractory -> inactive. Inactive
agents either relay the first incoming message (appending their own
reading) or spontaneously initiate a fresh one when their ping timer
fires. Active lasts exactly one timestep (the transmission slot) and the
refractory tail keeps a wave from re-exciting the agents it came from.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from random import Random
from typing import Optional

from .decision import StoredObservation, measurement_stats


class Mode(enum.Enum):
    INACTIVE = "inactive"
    ACTIVE = "active"
    REFRACTORY = "refractory"


class ConfigurationError(ValueError):
    """A parameter set violates the protocol's operating constraints."""


@dataclass(frozen=True)
class ProtocolParams:
    """Timing constants of the relay protocol, in integer timesteps.

    t_p_max is the cycle length: every agent re-arms its ping timer in
    [t_p_min, t_p_max] after initiating, so it initiates at least once per
    cycle. t_ref must exceed 2*t_delay or a relay can re-excite its sender.
    """

    t_p_max: int = 25
    t_ref: int = 10
    t_delay: int = 1
    t_p_min: int = 1

    def validate(self, swarm_hop_diameter: int | None = None) -> None:
        if self.t_p_max < 1:
            raise ConfigurationError(f"t_p_max must be >= 1, got {self.t_p_max}")
        if not 1 <= self.t_p_min <= self.t_p_max:
            raise ConfigurationError(
                f"t_p_min must be in [1, t_p_max], got {self.t_p_min}"
            )
        if self.t_delay < 1:
            raise ConfigurationError(f"t_delay must be >= 1, got {self.t_delay}")
        if self.t_ref <= 2 * self.t_delay:
            raise ConfigurationError(
                f"t_ref must exceed 2*t_delay to prevent relay echo; "
                f"got t_ref={self.t_ref}, t_delay={self.t_delay}"
            )
        if swarm_hop_diameter is not None:
            needed = swarm_hop_diameter * self.t_delay + self.t_ref
            if self.t_p_max <= needed:
                raise ConfigurationError(
                    f"t_p_max={self.t_p_max} too short: a wave needs more than "
                    f"{needed} steps (diameter {swarm_hop_diameter} hops * "
                    f"t_delay {self.t_delay} + t_ref {self.t_ref}) to complete "
                    f"within one cycle"
                )


@dataclass(slots=True)
class Message:
    """A relayed reading list, one measurement appended per hop.

    preferred_direction is set only while opinions are being exchanged.
    In fused operation each hop appends its opinion and id alongside its
    reading, so directions and authors run parallel to measurements.
    """

    initiator_id: int
    measurements: list[float]
    preferred_direction: Optional[float] = None
    hop_count: int = 0
    directions: Optional[list[float]] = None
    authors: Optional[list[int]] = None

    def is_wellformed(self) -> bool:
        if not self.measurements:
            return False
        if self.directions is not None and len(self.directions) != len(self.measurements):
            return False
        if self.authors is not None and len(self.authors) != len(self.measurements):
            return False
        return True


@dataclass(slots=True)
class Delivery:
    """One message landing in an agent's inbox.

    bearing is measured at the recipient, pointing toward the sender.
    """

    sender: int
    bearing: float
    message: Message


@dataclass(slots=True)
class AgentState:
    mode: Mode = Mode.INACTIVE
    refractory_remaining: int = 0
    ping_timer: int = 1
    pending_outgoing: Optional[Message] = None


def arm_ping_timer(rng: Random, params: ProtocolParams) -> int:
    """Uniform integer timer in [t_p_min, t_p_max]; consumes one RNG draw."""
    if params.t_p_max < 1 or params.t_p_min > params.t_p_max:
        raise ConfigurationError(
            f"invalid timer range [{params.t_p_min}, {params.t_p_max}]"
        )
    return rng.randint(params.t_p_min, params.t_p_max)


def initial_state(rng: Random, params: ProtocolParams) -> AgentState:
    return AgentState(mode=Mode.INACTIVE, ping_timer=arm_ping_timer(rng, params))


def select_incoming(
    inbox: list[Delivery],
    rng: Random,
    diagnostics: Optional[list[str]] = None,
) -> Optional[Delivery]:
    """Pick the one delivery to process this tick, dropping the rest.

    Malformed messages are rejected (reported via diagnostics) first.
    Collisions are broken uniformly at random: wavefronts tend to deliver
    through several neighbors in the same tick, and any fixed precedence
    would funnel nearly all receptions through one neighbor and destroy
    the bearing statistics the direction weights are built on. The draw
    comes from the seeded run RNG, so runs stay reproducible.
    """
    valid = []
    for d in inbox:
        if d.message.is_wellformed():
            valid.append(d)
        elif diagnostics is not None:
            diagnostics.append(
                f"malformed message from agent {d.sender} rejected: "
                f"{len(d.message.measurements)} measurements, "
                f"hop_count {d.message.hop_count}"
            )
    if not valid:
        return None
    if len(valid) == 1:
        return valid[0]
    return valid[rng.randrange(len(valid))]


def tick(
    state: AgentState,
    params: ProtocolParams,
    inbox: list[Delivery],
    own_measurement: float,
    rng: Random,
    agent_id: int = -1,
    diagnostics: Optional[list[str]] = None,
) -> tuple[AgentState, Optional[Message], Optional[StoredObservation]]:
    """Advance one agent by one timestep of the gathering protocol.

    Returns the (mutated) state, the message broadcast this step if any,
    and the observation recorded on a relay. A broadcast returned at time
    t is the transmission that neighbors receive at t + t_delay; the agent
    spends the next step in ACTIVE (transmitting, deaf) before turning
    refractory. An incoming message takes priority over a due ping timer.
    """
    state.ping_timer -= 1

    if state.mode is Mode.REFRACTORY:
        state.refractory_remaining -= 1
        if state.refractory_remaining <= 0:
            state.refractory_remaining = 0
            state.mode = Mode.INACTIVE
        return state, None, None

    if state.mode is Mode.ACTIVE:
        state.mode = Mode.REFRACTORY
        state.refractory_remaining = params.t_ref
        state.pending_outgoing = None
        return state, None, None

    chosen = select_incoming(inbox, rng, diagnostics) if inbox else None
    if chosen is not None:
        relayed = Message(
            initiator_id=chosen.message.initiator_id,
            measurements=chosen.message.measurements + [own_measurement],
            preferred_direction=chosen.message.preferred_direction,
            hop_count=chosen.message.hop_count + 1,
        )
        count, mean, variance = measurement_stats(relayed.measurements)
        observation = StoredObservation(
            variance=variance, bearing=chosen.bearing, count=count, mean=mean
        )
        state.mode = Mode.ACTIVE
        state.pending_outgoing = relayed
        return state, relayed, observation

    if state.ping_timer <= 0:
        fresh = Message(
            initiator_id=agent_id, measurements=[own_measurement], hop_count=0
        )
        state.mode = Mode.ACTIVE
        state.pending_outgoing = fresh
        state.ping_timer = arm_ping_timer(rng, params)
        return state, fresh, None

    return state, None, None
