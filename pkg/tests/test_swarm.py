import json
import math
from random import Random

import pytest

from cimax.decision import Opinion
from cimax.environment import DiscreteBorder
from cimax.protocol import AgentState, ConfigurationError, Mode, ProtocolParams
from cimax.swarm import (
    DeliverySchedule,
    World,
    move_swarm,
    neighbors,
    place_swarm,
    run_steps,
    snapshot,
    step_simulation,
    swarm_from_positions,
    world_from_snapshot,
)

FLAT = DiscreteBorder(border_x=math.inf, noise_halfwidth=0.0)


def line_swarm(n, spacing=0.9):
    return swarm_from_positions([(i * spacing, 0.0) for i in range(n)])


def quiet_world(config, params=None, seed=0, field=FLAT):
    # All ping timers pushed far out so only scripted activity happens.
    world = World(config, field, params or ProtocolParams(t_p_max=10_000, t_ref=10), Random(seed))
    for state in world.states:
        state.ping_timer = 9_999
    return world


class TestPlacement:
    def test_two_agents_in_small_disk_adjacent(self):
        config = place_swarm(2, 0.5, Random(0))
        assert config.is_connected()
        assert neighbors(config, 0)[0][0] == 1

    def test_line_spacing_gives_path_graph(self):
        config = line_swarm(4)
        degrees = [len(config.neighbors_of(i)) for i in range(4)]
        assert degrees == [1, 2, 2, 1]

    def test_placement_connected_and_degree_over_seeds(self):
        # 61 agents in a 6R disk: always connected (by construction),
        # mean degree >= 4 in at least 95% of seeds.
        good = 0
        runs = 1000
        for seed in range(runs):
            config = place_swarm(61, 6.0, Random(seed))
            assert config.is_connected()
            if config.mean_degree >= 4.0:
                good += 1
        assert good / runs >= 0.95

    def test_infeasible_density_fails_loudly(self):
        with pytest.raises(ConfigurationError, match="infeasible"):
            place_swarm(3, 100.0, Random(0), max_attempts=20)

    def test_needs_two_agents(self):
        with pytest.raises(ConfigurationError):
            place_swarm(1, 5.0, Random(0))

    def test_points_inside_disk(self):
        config = place_swarm(61, 6.0, Random(5), center=(2.0, -1.0))
        for x, y in config.positions:
            assert math.hypot(x - 2.0, y + 1.0) <= 3.0 + 1e-9


class TestNeighbors:
    def test_bearing_points_at_neighbor(self):
        config = swarm_from_positions([(0.0, 0.0), (0.5, 0.5)])
        (j, bearing), = neighbors(config, 0)
        assert j == 1
        assert bearing == pytest.approx(math.pi / 4)
        (i, back), = neighbors(config, 1)
        assert back == pytest.approx(math.pi + math.pi / 4)

    def test_invalid_id_rejected(self):
        with pytest.raises(ValueError):
            neighbors(line_swarm(3), 5)


class TestMoveSwarm:
    def test_step_along_x(self):
        config = line_swarm(4)
        moved = move_swarm(config, 0.0, 0.33)
        assert moved.center_of_mass[0] == pytest.approx(config.center_of_mass[0] + 0.33)
        assert moved.center_of_mass[1] == pytest.approx(config.center_of_mass[1])

    def test_zero_step_identity(self):
        config = line_swarm(4)
        moved = move_swarm(config, 1.0, 0.0)
        assert moved.positions == config.positions

    def test_opposite_moves_cancel(self):
        config = place_swarm(10, 3.0, Random(1))
        there = move_swarm(config, 0.7, 0.33)
        back = move_swarm(there, 0.7 + math.pi, 0.33)
        for (x0, y0), (x1, y1) in zip(config.positions, back.positions):
            assert abs(x0 - x1) < 1e-12 and abs(y0 - y1) < 1e-12

    def test_rigid_motion_preserves_graph_exactly(self):
        config = place_swarm(30, 5.0, Random(2))
        moved = move_swarm(config, 2.1, 10.0)
        assert [sorted(j for j, _ in moved.neighbors_of(i)) for i in range(30)] == [
            sorted(j for j, _ in config.neighbors_of(i)) for i in range(30)
        ]
        assert moved.mean_degree == config.mean_degree


class TestDeliverySchedule:
    def test_inbox_sorted_by_sender(self):
        from cimax.protocol import Delivery, Message

        schedule = DeliverySchedule()
        for sender in (5, 1, 3):
            schedule.enqueue(
                4, 0, Delivery(sender, 0.0, Message(sender, [1.0]))
            )
        inboxes = schedule.pop_due(4)
        assert [d.sender for d in inboxes[0]] == [1, 3, 5]
        assert schedule.pending() == 0

    def test_non_due_messages_stay(self):
        from cimax.protocol import Delivery, Message

        schedule = DeliverySchedule()
        schedule.enqueue(9, 0, Delivery(1, 0.0, Message(1, [1.0])))
        assert schedule.pop_due(8) == {}
        assert schedule.pending() == 1


class TestWavePropagation:
    def test_line_wavefront_one_hop_per_step(self):
        # Agent 0 initiates at t=0; agent k broadcasts at t=k.
        config = line_swarm(5)
        world = quiet_world(config)
        world.states[0].ping_timer = 1
        world.broadcast_log = []
        run_steps(world, 6)
        by_sender = {s: t for t, s, _ in world.broadcast_log}
        assert by_sender == {0: 0, 1: 1, 2: 2, 3: 3, 4: 4}

    def test_relay_insensitive_while_refractory(self):
        config = line_swarm(3)
        world = quiet_world(config)
        world.states[0].ping_timer = 1
        run_steps(world, 8)
        # Initiator activates once; the echo from agent 1 lands during its
        # refractory tail and dies there.
        assert world.activation_counts == [1, 1, 1]

    def test_all_refractory_swarm_stays_silent(self):
        config = line_swarm(4)
        world = quiet_world(config)
        for state in world.states:
            state.mode = Mode.REFRACTORY
            state.refractory_remaining = 10
        from cimax.protocol import Delivery, Message

        for i in range(4):
            world.schedule.enqueue(0, i, Delivery(9, 0.0, Message(9, [1.0])))
        run_steps(world, 5)
        assert world.activation_counts == [0, 0, 0, 0]

    def test_broadcast_reaches_every_neighbor_exactly_once(self):
        # Star graph: center broadcasts, all leaves activate the next step.
        positions = [(0.0, 0.0)] + [
            (0.9 * math.cos(a), 0.9 * math.sin(a))
            for a in (0.1, 1.9, 3.6, 5.1)
        ]
        config = swarm_from_positions(positions)
        world = quiet_world(config)
        world.states[0].ping_timer = 1
        run_steps(world, 3)
        assert world.activation_counts == [1, 1, 1, 1, 1]

    def test_full_sweep_timing_matches_reference_illustration(self):
        # 80 agents in a 5R disk, t_ref=10: one wave from a rim agent sweeps
        # and every agent is inactive again by t of roughly 16.
        params = ProtocolParams(t_p_max=10_000, t_ref=10)
        config = place_swarm(80, 5.0, Random(8))
        world = quiet_world(config, params=params)
        rim = max(range(80), key=lambda i: config.positions[i][0])
        world.states[rim].ping_timer = 1
        quiet_at = None
        for t in range(1, 40):
            step_simulation(world)
            all_inactive = all(s.mode is Mode.INACTIVE for s in world.states)
            if all_inactive and world.schedule.pending() == 0 and t > 1:
                quiet_at = t
                break
        assert world.activation_counts.count(1) == 80
        assert quiet_at is not None and 12 <= quiet_at <= 20

    def test_single_wave_activates_every_agent_exactly_once(self):
        for seed in range(20):
            rng = Random(seed)
            n = rng.randint(5, 40)
            config = place_swarm(n, rng.uniform(2.0, 4.0), Random(seed + 1000))
            world = quiet_world(config, seed=seed)
            world.states[0].ping_timer = 1
            run_steps(world, n + 20)
            assert world.activation_counts == [1] * n


class TestDeterminismAndSnapshot:
    def make_world(self, seed=9):
        config = place_swarm(20, 4.0, Random(seed))
        return World(
            config,
            DiscreteBorder(),
            ProtocolParams(t_p_max=40, t_ref=5),
            Random(seed + 1),
        )

    def test_identical_seeds_identical_histories(self):
        a, b = self.make_world(), self.make_world()
        a.trace, b.trace = [], []
        run_steps(a, 200)
        run_steps(b, 200)
        assert a.trace == b.trace
        assert a.activation_counts == b.activation_counts

    def test_snapshot_round_trip_continues_identically(self):
        a = self.make_world()
        run_steps(a, 73)
        payload = json.loads(json.dumps(snapshot(a)))
        b = world_from_snapshot(payload)
        a.trace, b.trace = [], []
        run_steps(a, 90)
        run_steps(b, 90)
        assert a.trace == b.trace

    def test_snapshot_preserves_opinions_and_stores(self):
        a = self.make_world()
        run_steps(a, 50)
        a.opinions[3] = Opinion(1.25, True)
        b = world_from_snapshot(snapshot(a))
        assert b.opinions[3] == Opinion(1.25, True)
        assert [len(s) for s in b.stores] == [len(s) for s in a.stores]
        assert b.t == a.t

    def test_disconnected_swarm_flagged(self):
        config = swarm_from_positions([(0.0, 0.0), (0.5, 0.0), (10.0, 0.0), (10.5, 0.0)])
        world = World(
            config, FLAT, ProtocolParams(t_p_max=100, t_ref=10), Random(0)
        )
        assert any("disconnected" in d for d in world.diagnostics)
