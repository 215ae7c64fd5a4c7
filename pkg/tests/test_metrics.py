import math
from random import Random

import pytest

from cimax.decision import StoredObservation, measurement_stats
from cimax.metrics import (
    BorderProximity,
    DiversityTrace,
    PositionThreshold,
    average_diversity,
    detect_success,
    shannon_entropy,
    wilson_interval,
)


class FakeWorld:
    def __init__(self, stores):
        self.stores = stores


def obs_from(values, bearing=0.0):
    n, mean, var = measurement_stats(values)
    return StoredObservation(var, bearing, n, mean)


class TestShannonEntropy:
    def test_uniform_four_bits(self):
        assert shannon_entropy([0.25] * 4, base=2) == pytest.approx(2.0, abs=1e-12)

    def test_degenerate_distribution_zero(self):
        assert shannon_entropy([1.0, 0.0, 0.0], base=2) == 0.0

    def test_uniform_is_log2_m_exactly(self):
        for m in range(2, 65):
            h = shannon_entropy([1.0 / m] * m, base=2)
            assert abs(h - math.log2(m)) < 1e-12

    def test_joint_entropy_of_independent_agents(self):
        # Three independent agents with four equally likely readings each:
        # the joint distribution over 4^3 outcomes carries 3 * log2(4) bits.
        n_agents, m = 3, 4
        joint = [1.0 / m**n_agents] * m**n_agents
        assert shannon_entropy(joint, base=2) == pytest.approx(
            n_agents * math.log2(m), abs=1e-12
        )

    def test_invalid_distribution_rejected(self):
        with pytest.raises(ValueError):
            shannon_entropy([0.5, 0.4])
        with pytest.raises(ValueError):
            shannon_entropy([1.5, -0.5])
        with pytest.raises(ValueError):
            shannon_entropy([1.0], base=1.0)

    def test_other_bases(self):
        assert shannon_entropy([1 / 3] * 3, base=3) == pytest.approx(1.0)

    def test_uniform_maximizes_entropy(self):
        rng = Random(0)
        m = 6
        h_uniform = shannon_entropy([1 / m] * m, base=2)
        for _ in range(200):
            weights = [rng.random() for _ in range(m)]
            total = sum(weights)
            p = [w / total for w in weights]
            assert shannon_entropy(p, base=2) <= h_uniform + 1e-9


class TestAverageDiversity:
    def test_constant_messages_zero(self):
        world = FakeWorld([[obs_from([2.0, 2.0])], [obs_from([2.0, 2.0, 2.0])]])
        assert average_diversity(world) == 0.0

    def test_two_agent_example(self):
        world = FakeWorld([[obs_from([0.0, 5.0])], [obs_from([0.0, 5.0])]])
        assert average_diversity(world) == pytest.approx(6.25)

    def test_empty_stores_excluded(self):
        world = FakeWorld([[obs_from([0.0, 5.0])], []])
        assert average_diversity(world) == pytest.approx(6.25)

    def test_all_empty_is_missing_sample(self):
        assert average_diversity(FakeWorld([[], []])) is None

    def test_pools_across_messages_within_agent(self):
        # One agent holding {0} and {5}: pooled variance, not mean of zeros.
        world = FakeWorld([[obs_from([0.0]), obs_from([5.0])]])
        assert average_diversity(world) == pytest.approx(6.25)


class TestDiversityTrace:
    def test_skips_missing_samples(self):
        trace = DiversityTrace()
        trace.append(0, 1.0)
        trace.append(1, None)
        trace.append(2, 3.0)
        assert trace.samples == [(0, 1.0), (2, 3.0)]
        assert trace.values() == [1.0, 3.0]


class TestDetectSuccess:
    def test_start_inside_region(self):
        ok, t = detect_success([(0, 0.1, 0.0)], BorderProximity(0.33), deadline=100)
        assert ok and t == 0

    def test_first_crossing_reported(self):
        trajectory = [(0, -2.0, 0.0), (20, -1.0, 0.0), (40, 0.2, 0.0), (60, 0.1, 0.0)]
        ok, t = detect_success(trajectory, BorderProximity(0.33), deadline=100)
        assert ok and t == 40

    def test_deadline_enforced(self):
        trajectory = [(0, -2.0, 0.0), (120, 0.0, 0.0)]
        ok, t = detect_success(trajectory, BorderProximity(0.33), deadline=100)
        assert not ok and t is None

    def test_position_threshold(self):
        ok, t = detect_success(
            [(0, 1.0, 0.0), (10, 2.5, 0.0)], PositionThreshold(2.33), deadline=50
        )
        assert ok and t == 10

    def test_empty_trajectory_rejected(self):
        with pytest.raises(ValueError):
            detect_success([], BorderProximity(0.33), deadline=10)

    def test_monotone_in_region_size(self):
        # Enlarging the success region never turns success into failure.
        rng = Random(3)
        for _ in range(200):
            trajectory = [
                (t * 10, rng.uniform(-3, 3), rng.uniform(-3, 3)) for t in range(8)
            ]
            small, _ = detect_success(trajectory, BorderProximity(0.2), deadline=60)
            big, _ = detect_success(trajectory, BorderProximity(0.8), deadline=60)
            assert big or not small

    def test_time_monotone_in_region_size(self):
        trajectory = [(0, -2.0, 0.0), (10, -0.6, 0.0), (20, -0.1, 0.0)]
        _, t_small = detect_success(trajectory, BorderProximity(0.33), deadline=60)
        _, t_big = detect_success(trajectory, BorderProximity(1.0), deadline=60)
        assert t_big <= t_small


class TestWilsonInterval:
    def test_brackets_point_estimate(self):
        lo, hi = wilson_interval(45, 50)
        assert lo < 0.9 < hi
        assert 0.0 <= lo <= hi <= 1.0

    def test_extremes(self):
        lo, hi = wilson_interval(0, 20)
        assert lo == 0.0 and hi < 0.25
        lo, hi = wilson_interval(20, 20)
        assert lo > 0.75 and hi == 1.0

    def test_no_trials_rejected(self):
        with pytest.raises(ValueError):
            wilson_interval(0, 0)
