"""Swarm geometry, synchronous message delivery, and the timestep loop.

Agents are point particles placed in a disk; two agents are neighbors when
their distance is at most the perception range R (the unit of length).
The swarm moves rigidly, so the neighbor graph and all bearings are
computed once per placement. A world advances in synchronous timesteps:
deliveries due now land in inboxes, every agent ticks in ascending id
order with a fresh environment sample, and resulting broadcasts are
scheduled for every neighbor at t + t_delay.
"""

from __future__ import annotations

import math
from collections import deque
from random import Random
from typing import Callable, Optional

import numpy as np

from . import protocol
from .decision import Opinion, StoredObservation, wrap_angle
from .environment import EnvironmentField, field_from_dict, field_to_dict
from .protocol import (
    AgentState,
    ConfigurationError,
    Delivery,
    Message,
    Mode,
    ProtocolParams,
)


class SwarmConfiguration:
    """Agent positions plus the neighbor graph within perception range."""

    def __init__(
        self,
        positions: list[tuple[float, float]],
        perception_range: float = 1.0,
        _adjacency: Optional[list[list[tuple[int, float]]]] = None,
        _outgoing: Optional[list[list[tuple[int, float]]]] = None,
    ):
        if len(positions) < 2:
            raise ConfigurationError("a swarm needs at least 2 agents")
        if perception_range <= 0:
            raise ConfigurationError("perception_range must be positive")
        self.positions = [(float(x), float(y)) for x, y in positions]
        self.perception_range = float(perception_range)
        if _adjacency is not None and _outgoing is not None:
            self._adjacency = _adjacency
            self._outgoing = _outgoing
        else:
            self._build_adjacency()

    def _build_adjacency(self) -> None:
        # adjacency[i] = [(j, bearing at i toward j)];
        # outgoing[i] = [(j, bearing at j toward i)]: reception bearings
        # precomputed for broadcast fan-out.
        n = len(self.positions)
        r = self.perception_range
        adjacency: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        outgoing: list[list[tuple[int, float]]] = [[] for _ in range(n)]
        for i in range(n):
            xi, yi = self.positions[i]
            for j in range(i + 1, n):
                xj, yj = self.positions[j]
                if math.hypot(xj - xi, yj - yi) <= r:
                    toward_j = wrap_angle(math.atan2(yj - yi, xj - xi))
                    toward_i = wrap_angle(math.atan2(yi - yj, xi - xj))
                    adjacency[i].append((j, toward_j))
                    adjacency[j].append((i, toward_i))
                    outgoing[i].append((j, toward_i))
                    outgoing[j].append((i, toward_j))
        self._adjacency = adjacency
        self._outgoing = outgoing

    @property
    def n(self) -> int:
        return len(self.positions)

    @property
    def center_of_mass(self) -> tuple[float, float]:
        n = self.n
        return (
            math.fsum(x for x, _ in self.positions) / n,
            math.fsum(y for _, y in self.positions) / n,
        )

    @property
    def mean_degree(self) -> float:
        return sum(len(a) for a in self._adjacency) / self.n

    def neighbors_of(self, agent_id: int) -> list[tuple[int, float]]:
        return self._adjacency[agent_id]

    def reception_bearings_of(self, sender: int) -> list[tuple[int, float]]:
        """Per neighbor of the sender: (recipient, bearing at recipient toward sender)."""
        return self._outgoing[sender]

    def is_connected(self) -> bool:
        seen = [False] * self.n
        seen[0] = True
        queue = deque([0])
        count = 1
        while queue:
            i = queue.popleft()
            for j, _ in self._adjacency[i]:
                if not seen[j]:
                    seen[j] = True
                    count += 1
                    queue.append(j)
        return count == self.n

    def hop_diameter_bound(self) -> int:
        """Crude hop-count bound used for protocol timing validation."""
        xs = [x for x, _ in self.positions]
        ys = [y for _, y in self.positions]
        extent = math.hypot(max(xs) - min(xs), max(ys) - min(ys))
        return max(1, math.ceil(extent / self.perception_range)) + 1


def place_swarm(
    n: int,
    diameter: float,
    rng: Random,
    perception_range: float = 1.0,
    center: tuple[float, float] = (0.0, 0.0),
    max_attempts: int = 1000,
) -> SwarmConfiguration:
    """Uniform placement in a disk, redrawn until the neighbor graph connects.

    The whole placement is resampled on each failed attempt; an infeasible
    density (too few agents for the diameter) fails loudly rather than
    running a disconnected swarm.
    """
    if n < 2:
        raise ConfigurationError(f"need at least 2 agents, got {n}")
    radius = diameter / 2.0
    for _ in range(max_attempts):
        positions = []
        for _ in range(n):
            r = radius * math.sqrt(rng.random())
            theta = rng.uniform(0.0, 2.0 * math.pi)
            positions.append((center[0] + r * math.cos(theta), center[1] + r * math.sin(theta)))
        config = SwarmConfiguration(positions, perception_range)
        if config.is_connected():
            return config
    raise ConfigurationError(
        f"no connected placement of {n} agents in a diameter-{diameter} disk "
        f"within {max_attempts} attempts; N/diameter combination infeasible"
    )


def swarm_from_positions(
    positions: list[tuple[float, float]], perception_range: float = 1.0
) -> SwarmConfiguration:
    """Explicit-positions variant of placement (line setups, tests, replays)."""
    return SwarmConfiguration(positions, perception_range)


def neighbors(config: SwarmConfiguration, agent_id: int) -> list[tuple[int, float]]:
    """All agents within R of the querying agent, with bearings toward them."""
    if not 0 <= agent_id < config.n:
        raise ValueError(f"agent id {agent_id} out of range")
    return list(config.neighbors_of(agent_id))


def move_swarm(
    config: SwarmConfiguration, direction: float, step: float
) -> SwarmConfiguration:
    """Translate every agent by step along direction; the graph is preserved."""
    dx = step * math.cos(direction)
    dy = step * math.sin(direction)
    moved = [(x + dx, y + dy) for x, y in config.positions]
    return SwarmConfiguration(
        moved,
        config.perception_range,
        _adjacency=config._adjacency,
        _outgoing=config._outgoing,
    )


class DeliverySchedule:
    """Queue of pending deliveries keyed by delivery timestep."""

    def __init__(self) -> None:
        self._due: dict[int, list[tuple[int, Delivery]]] = {}

    def enqueue(self, deliver_at: int, recipient: int, delivery: Delivery) -> None:
        self._due.setdefault(deliver_at, []).append((recipient, delivery))

    def pop_due(self, t: int) -> dict[int, list[Delivery]]:
        """Inboxes for timestep t, deliveries ordered by sender id."""
        entries = self._due.pop(t, [])
        inboxes: dict[int, list[Delivery]] = {}
        for recipient, delivery in entries:
            inboxes.setdefault(recipient, []).append(delivery)
        for inbox in inboxes.values():
            inbox.sort(key=lambda d: d.sender)
        return inboxes

    def pending(self) -> int:
        return sum(len(v) for v in self._due.values())

    def entries(self) -> list[tuple[int, int, Delivery]]:
        out = []
        for deliver_at in sorted(self._due):
            for recipient, delivery in self._due[deliver_at]:
                out.append((deliver_at, recipient, delivery))
        return out


# Per-phase agent behaviors; the opinion-exchange phases register here.
TickFn = Callable[["World", int, list[Delivery], float], Optional[Message]]
PHASE_TICKS: dict[str, TickFn] = {}

GATHERING = "gathering"


def _gathering_tick(
    world: "World", agent_id: int, inbox: list[Delivery], measurement: float
) -> Optional[Message]:
    state, outgoing, observation = protocol.tick(
        world.states[agent_id],
        world.params,
        inbox,
        measurement,
        world.rng,
        agent_id=agent_id,
        diagnostics=world.diagnostics,
    )
    world.states[agent_id] = state
    if observation is not None:
        world.stores[agent_id].append(observation)
    return outgoing


PHASE_TICKS[GATHERING] = _gathering_tick


class World:
    """Complete simulation state: swarm, field, protocol, and clock.

    One world per run; the timestep loop is strictly sequential, so runs
    with the same seed and configuration reproduce bit-identical logs.
    """

    def __init__(
        self,
        config: SwarmConfiguration,
        field: EnvironmentField,
        params: ProtocolParams,
        rng: Random,
        bins: int = 8,
        absorb_rate: float = 0.1,
        max_message_entries: Optional[int] = None,
    ):
        params.validate()
        self._config = config
        self._field = field
        self.params = params
        self.rng = rng
        # Environment noise comes from a dedicated vectorized stream, one
        # batch draw per timestep; protocol randomness stays on `rng`.
        self.sample_rng = np.random.default_rng(rng.getrandbits(64))
        self.bins = bins
        self.absorb_rate = absorb_rate
        self.max_message_entries = max_message_entries
        self._base_values: Optional[list[float]] = None

        n = config.n
        self.states = [protocol.initial_state(rng, params) for _ in range(n)]
        self.stores: list[list[StoredObservation]] = [[] for _ in range(n)]
        self.opinions = [Opinion() for _ in range(n)]
        # Fused operation: latest opinion observed per other swarm member.
        self.votes: list[dict[int, float]] = [{} for _ in range(n)]
        self.t = 0
        self.schedule = DeliverySchedule()
        self.phase = GATHERING
        self.tick_agent: TickFn = PHASE_TICKS[GATHERING]
        self.diagnostics: list[str] = []
        self.activation_counts = [0] * n
        self.last_measurements = [0.0] * n
        self.broadcast_log: Optional[list[tuple[int, int, Message]]] = None
        self.trace: Optional[list[tuple]] = None
        if not config.is_connected():
            self.diagnostics.append(
                "swarm neighbor graph is disconnected; consensus may be partial"
            )

    @property
    def n(self) -> int:
        return self._config.n

    @property
    def config(self) -> SwarmConfiguration:
        return self._config

    @config.setter
    def config(self, value: SwarmConfiguration) -> None:
        self._config = value
        self._base_values = None

    @property
    def field(self) -> EnvironmentField:
        return self._field

    @field.setter
    def field(self, value: EnvironmentField) -> None:
        self._field = value
        self._base_values = None

    def base_values(self) -> list[float]:
        """Noise-free field value per agent, cached until positions change."""
        if self._base_values is None:
            base_at = self._field.base_at
            self._base_values = [base_at(x, y) for x, y in self._config.positions]
        return self._base_values

    def set_phase(self, phase: str) -> None:
        if phase not in PHASE_TICKS:
            raise ValueError(f"unknown phase {phase!r}")
        self.phase = phase
        self.tick_agent = PHASE_TICKS[phase]

    def move(self, direction: float, step: float) -> None:
        self.config = move_swarm(self._config, direction, step)


def step_simulation(world: World) -> World:
    """Advance the world by one timestep.

    Idle agents (inactive with a non-due timer and an empty inbox, or deep
    in refractory) are stepped inline; anything that can act goes through
    the phase's full tick. Every agent consumes one fresh environment
    sample per step either way.
    """
    inboxes = world.schedule.pop_due(world.t)
    broadcasts: list[tuple[int, Message]] = []
    empty: list[Delivery] = []
    halfwidth = world.field.noise_halfwidth
    base = world.base_values()
    noise = world.sample_rng.random(world.n).tolist()
    states = world.states
    measurements = world.last_measurements
    tick_agent = world.tick_agent
    inactive = Mode.INACTIVE
    refractory = Mode.REFRACTORY
    for i in range(world.n):
        measurement = base[i] + (2.0 * noise[i] - 1.0) * halfwidth
        measurements[i] = measurement
        state = states[i]
        mode = state.mode
        if mode is inactive:
            if state.ping_timer > 1 and i not in inboxes:
                state.ping_timer -= 1
                continue
        elif mode is refractory and state.refractory_remaining > 1:
            state.ping_timer -= 1
            state.refractory_remaining -= 1
            continue
        outgoing = tick_agent(world, i, inboxes.get(i, empty), measurement)
        if outgoing is not None:
            broadcasts.append((i, outgoing))
            world.activation_counts[i] += 1
    deliver_at = world.t + world.params.t_delay
    enqueue = world.schedule.enqueue
    for sender, message in broadcasts:
        if world.broadcast_log is not None:
            world.broadcast_log.append((world.t, sender, message))
        for recipient, bearing in world.config.reception_bearings_of(sender):
            enqueue(deliver_at, recipient, Delivery(sender, bearing, message))
    if world.trace is not None:
        positions = world.config.positions
        for i in range(world.n):
            x, y = positions[i]
            world.trace.append(
                (world.t, i, x, y, states[i].mode.value, measurements[i])
            )
    world.t += 1
    return world


def run_steps(world: World, steps: int) -> World:
    for _ in range(steps):
        step_simulation(world)
    return world


def _message_to_dict(message: Message) -> dict:
    return {
        "initiator_id": message.initiator_id,
        "measurements": list(message.measurements),
        "preferred_direction": message.preferred_direction,
        "hop_count": message.hop_count,
        "directions": list(message.directions) if message.directions is not None else None,
        "authors": list(message.authors) if message.authors is not None else None,
    }


def _message_from_dict(payload: dict) -> Message:
    return Message(
        initiator_id=payload["initiator_id"],
        measurements=list(payload["measurements"]),
        preferred_direction=payload["preferred_direction"],
        hop_count=payload["hop_count"],
        directions=list(payload["directions"]) if payload["directions"] is not None else None,
        authors=list(payload["authors"]) if payload.get("authors") is not None else None,
    )


def snapshot(world: World) -> dict:
    """JSON-serializable copy of everything needed to resume the run."""
    rng_version, rng_internal, rng_gauss = world.rng.getstate()
    return {
        "format": "cimax-world-v1",
        "t": world.t,
        "perception_range": world.config.perception_range,
        "positions": [list(p) for p in world.config.positions],
        "field": field_to_dict(world.field),
        "params": {
            "t_p_max": world.params.t_p_max,
            "t_ref": world.params.t_ref,
            "t_delay": world.params.t_delay,
            "t_p_min": world.params.t_p_min,
        },
        "bins": world.bins,
        "absorb_rate": world.absorb_rate,
        "max_message_entries": world.max_message_entries,
        "phase": world.phase,
        "states": [
            {
                "mode": s.mode.value,
                "refractory_remaining": s.refractory_remaining,
                "ping_timer": s.ping_timer,
                "pending_outgoing": _message_to_dict(s.pending_outgoing)
                if s.pending_outgoing is not None
                else None,
            }
            for s in world.states
        ],
        "stores": [
            [
                {"variance": o.variance, "bearing": o.bearing, "count": o.count, "mean": o.mean}
                for o in store
            ]
            for store in world.stores
        ],
        "opinions": [
            {"preferred_direction": o.preferred_direction, "defined": o.defined}
            for o in world.opinions
        ],
        "votes": [sorted((author, d) for author, d in v.items()) for v in world.votes],
        "schedule": [
            {
                "deliver_at": deliver_at,
                "recipient": recipient,
                "sender": delivery.sender,
                "bearing": delivery.bearing,
                "message": _message_to_dict(delivery.message),
            }
            for deliver_at, recipient, delivery in world.schedule.entries()
        ],
        "activation_counts": list(world.activation_counts),
        "rng_state": [rng_version, list(rng_internal), rng_gauss],
        "sample_rng_state": world.sample_rng.bit_generator.state,
        "diagnostics": list(world.diagnostics),
    }


def world_from_snapshot(payload: dict) -> World:
    if payload.get("format") != "cimax-world-v1":
        raise ValueError("unrecognized world snapshot format")
    config = SwarmConfiguration(
        [tuple(p) for p in payload["positions"]], payload["perception_range"]
    )
    params = ProtocolParams(**payload["params"])
    world = World(
        config,
        field_from_dict(payload["field"]),
        params,
        Random(0),
        bins=payload["bins"],
        absorb_rate=payload["absorb_rate"],
        max_message_entries=payload["max_message_entries"],
    )
    # Restore the RNGs only after construction: __init__ itself draws timers.
    version, internal, gauss = payload["rng_state"]
    world.rng.setstate((version, tuple(internal), gauss))
    world.sample_rng = np.random.default_rng()
    world.sample_rng.bit_generator.state = payload["sample_rng_state"]
    world.t = payload["t"]
    world.set_phase(payload["phase"])
    world.states = [
        AgentState(
            mode=Mode(s["mode"]),
            refractory_remaining=s["refractory_remaining"],
            ping_timer=s["ping_timer"],
            pending_outgoing=_message_from_dict(s["pending_outgoing"])
            if s["pending_outgoing"] is not None
            else None,
        )
        for s in payload["states"]
    ]
    world.stores = [
        [
            StoredObservation(o["variance"], o["bearing"], o["count"], o["mean"])
            for o in store
        ]
        for store in payload["stores"]
    ]
    world.opinions = [
        Opinion(preferred_direction=o["preferred_direction"], defined=o["defined"])
        for o in payload["opinions"]
    ]
    world.votes = [{int(author): d for author, d in v} for v in payload["votes"]]
    world.schedule = DeliverySchedule()
    for entry in payload["schedule"]:
        world.schedule.enqueue(
            entry["deliver_at"],
            entry["recipient"],
            Delivery(
                sender=entry["sender"],
                bearing=entry["bearing"],
                message=_message_from_dict(entry["message"]),
            ),
        )
    world.activation_counts = list(payload["activation_counts"])
    world.diagnostics = list(payload["diagnostics"])
    return world
