"""Negotiation periods: gather measurements, evaluate, converge on a heading.

Phased operation runs relay gathering for the first half of the period,
turns each agent's observation store into an opinion, then spends the
second half diffusing opinions (each received opinion pulls the listener
a fraction of the way toward it). Fused operation carries readings and
opinions in the same messages, re-evaluates continuously, and adopts the
majority of observed opinions at the end of the period.

Every phase starts with all agents inactive on freshly randomized ping
timers and an empty delivery queue, so phases cannot leak messages into
each other.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import protocol
from .decision import (
    DirectionWeights,
    Opinion,
    StoredObservation,
    absorb_opinion,
    circular_mean,
    direction_weights,
    evaluate,
    majority_direction,
    measurement_stats,
    preferred_bin_direction,
)
from .metrics import average_diversity
from .protocol import Delivery, Message, Mode
from .swarm import DeliverySchedule, GATHERING, PHASE_TICKS, World, run_steps

DECISION = "decision"
FUSED = "fused"

PHASED_MODE = "phased"
FUSED_MODE = "fused"


def _ensure_opinion(world: World, agent_id: int) -> Opinion:
    """Current opinion, formed on demand from the store when still undefined."""
    opinion = world.opinions[agent_id]
    if not opinion.defined:
        direction = preferred_bin_direction(
            world.stores[agent_id], world.bins, world.rng
        )
        opinion = Opinion(preferred_direction=direction, defined=True)
        world.opinions[agent_id] = opinion
    return opinion


def _advance_busy(world: World, agent_id: int) -> bool:
    """Shared busy-state handling; True when the agent cannot listen this tick."""
    state = world.states[agent_id]
    state.ping_timer -= 1
    if state.mode is Mode.REFRACTORY:
        state.refractory_remaining -= 1
        if state.refractory_remaining <= 0:
            state.refractory_remaining = 0
            state.mode = Mode.INACTIVE
        return True
    if state.mode is Mode.ACTIVE:
        state.mode = Mode.REFRACTORY
        state.refractory_remaining = world.params.t_ref
        state.pending_outgoing = None
        return True
    return False


def _broadcast(world: World, agent_id: int, message: Message) -> Message:
    state = world.states[agent_id]
    state.mode = Mode.ACTIVE
    state.pending_outgoing = message
    return message


def _decision_tick(
    world: World, agent_id: int, inbox: list[Delivery], measurement: float
) -> Optional[Message]:
    """One opinion-diffusion timestep: hear an opinion, yield toward it, relay own."""
    if _advance_busy(world, agent_id):
        return None
    state = world.states[agent_id]
    chosen = protocol.select_incoming(inbox, world.rng, world.diagnostics)
    if chosen is not None and chosen.message.preferred_direction is not None:
        own = _ensure_opinion(world, agent_id)
        own = absorb_opinion(
            own, chosen.message.preferred_direction, world.absorb_rate
        )
        world.opinions[agent_id] = own
        # Remember the speaker's latest opinion for the period-end majority.
        world.votes[agent_id][chosen.message.initiator_id] = (
            chosen.message.preferred_direction
        )
        return _broadcast(
            world,
            agent_id,
            Message(
                initiator_id=agent_id,
                measurements=[measurement],
                preferred_direction=own.preferred_direction,
            ),
        )
    if state.ping_timer <= 0:
        own = _ensure_opinion(world, agent_id)
        state.ping_timer = protocol.arm_ping_timer(world.rng, world.params)
        return _broadcast(
            world,
            agent_id,
            Message(
                initiator_id=agent_id,
                measurements=[measurement],
                preferred_direction=own.preferred_direction,
            ),
        )
    return None


def _fused_tick(
    world: World, agent_id: int, inbox: list[Delivery], measurement: float
) -> Optional[Message]:
    """One fused timestep: messages carry (reading, opinion) pairs per hop.

    A relaying agent appends its reading and current opinion, stores the
    extended message's variance against the bearing of reception, records
    every opinion it saw as a vote, then re-evaluates its own opinion from
    the rolling store.
    """
    if _advance_busy(world, agent_id):
        return None
    state = world.states[agent_id]
    chosen = protocol.select_incoming(inbox, world.rng, world.diagnostics)
    if chosen is not None:
        own = _ensure_opinion(world, agent_id)
        incoming = chosen.message
        meas = incoming.measurements + [measurement]
        dirs = list(incoming.directions or []) + [own.preferred_direction]
        authors = list(incoming.authors or []) + [agent_id]
        cap = world.max_message_entries
        if cap is not None:
            # Oldest entries fall off when the payload budget is exceeded.
            meas = meas[-cap:]
            dirs = dirs[-cap:]
            authors = authors[-cap:]
        count, mean, variance = measurement_stats(meas)
        observation = StoredObservation(
            variance=variance, bearing=chosen.bearing, count=count, mean=mean
        )
        world.stores[agent_id].append(observation)
        # Latest opinion seen per swarm member; in-message order is oldest
        # first, so later entries overwrite earlier ones.
        for author, direction in zip(authors, dirs):
            if author != agent_id:
                world.votes[agent_id][author] = direction
        world.opinions[agent_id] = Opinion(
            preferred_direction=preferred_bin_direction(
                world.stores[agent_id], world.bins, world.rng
            ),
            defined=True,
        )
        return _broadcast(
            world,
            agent_id,
            Message(
                initiator_id=incoming.initiator_id,
                measurements=meas,
                hop_count=incoming.hop_count + 1,
                directions=dirs,
                authors=authors,
            ),
        )
    if state.ping_timer <= 0:
        own = _ensure_opinion(world, agent_id)
        state.ping_timer = protocol.arm_ping_timer(world.rng, world.params)
        return _broadcast(
            world,
            agent_id,
            Message(
                initiator_id=agent_id,
                measurements=[measurement],
                directions=[own.preferred_direction],
                authors=[agent_id],
            ),
        )
    return None


PHASE_TICKS[DECISION] = _decision_tick
PHASE_TICKS[FUSED] = _fused_tick


def begin_phase(world: World, phase: str) -> None:
    """Enter a phase: all agents inactive, fresh timers, empty delivery queue."""
    world.set_phase(phase)
    world.schedule = DeliverySchedule()
    for i in range(world.n):
        world.states[i] = protocol.initial_state(world.rng, world.params)


def _adopt_majorities(world: World) -> None:
    """Each agent adopts the sector favored by most swarm members it heard.

    Votes are the latest opinion observed per member plus the agent's own;
    ties keep the agent's own sector. This amplification step is what
    turns a slim opinion majority into a decisive common heading instead
    of letting opposed groups cancel in the average.
    """
    for i in range(world.n):
        own = _ensure_opinion(world, i)
        member_votes = list(world.votes[i].values()) + [own.preferred_direction]
        adopted = majority_direction(member_votes, own, world.bins)
        world.opinions[i] = Opinion(preferred_direction=adopted, defined=True)
        world.votes[i].clear()


@dataclass
class PeriodResult:
    """Outcome of one negotiation period."""

    collective_direction: float
    resultant_length: float
    mean_diversity: Optional[float]
    opinions: list[float]
    weights: list[DirectionWeights]


def run_negotiation_period(
    world: World, period_cycles: int = 2, mode: str = PHASED_MODE
) -> PeriodResult:
    """Run one negotiation period and return the swarm's agreed heading.

    The heading is the circular mean of the agents' final opinions; the
    caller applies it as a movement step. Opinions persist on the world as
    the starting opinions of the next period.
    """
    if period_cycles < 1:
        raise ValueError(f"period_cycles must be >= 1, got {period_cycles}")
    steps_total = period_cycles * world.params.t_p_max

    if mode == PHASED_MODE:
        begin_phase(world, GATHERING)
        run_steps(world, steps_total // 2)
        mean_div = average_diversity(world)
        weights = [direction_weights(store, world.bins) for store in world.stores]
        for i in range(world.n):
            world.opinions[i] = evaluate(world.stores[i], world.bins, world.rng)
        begin_phase(world, DECISION)
        run_steps(world, steps_total - steps_total // 2)
        _adopt_majorities(world)
    elif mode == FUSED_MODE:
        begin_phase(world, FUSED)
        run_steps(world, steps_total)
        mean_div = average_diversity(world)
        weights = [direction_weights(store, world.bins) for store in world.stores]
        _adopt_majorities(world)
        for store in world.stores:
            store.clear()
    else:
        raise ValueError(f"unknown negotiation mode {mode!r}")

    directions = [o.preferred_direction for o in world.opinions]
    collective, resultant = circular_mean(directions)
    return PeriodResult(
        collective_direction=collective,
        resultant_length=resultant,
        mean_diversity=mean_div,
        opinions=directions,
        weights=weights,
    )


def opinion_spread(opinions: list[float]) -> float:
    """Circular spread (1 - mean resultant length) of a set of opinions."""
    _, resultant = circular_mean(opinions)
    return 1.0 - resultant
