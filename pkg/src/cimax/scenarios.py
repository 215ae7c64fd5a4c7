"""Experiment harness: trajectories, success sweeps, vector fields, lab runs.

Each runner is deterministic given (config, seed): per-run seeds are
derived by hashing the base seed with the run's coordinates, so sweep
points are independent jobs that can execute in any order (or in a
process pool) and still merge into identical output.
"""

from __future__ import annotations

import hashlib
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from random import Random
from typing import Optional, Sequence

from .config import ScenarioConfig, build_field, build_params, config_hash
from .decision import bin_of
from .environment import OneDimensionalPattern
from .metrics import (
    BorderProximity,
    DiversityTrace,
    PositionThreshold,
    SuccessCriterion,
    wilson_interval,
)
from .negotiation import FUSED_MODE, PeriodResult, run_negotiation_period
from .swarm import SwarmConfiguration, World, place_swarm, swarm_from_positions


def derive_seed(base_seed: int, *coordinates) -> int:
    """Stable per-job seed from the base seed and job coordinates."""
    text = ":".join([str(base_seed)] + [str(c) for c in coordinates])
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


def steps_per_period(cfg: ScenarioConfig) -> int:
    return cfg.scenario.negotiation_period_cycles * build_params(cfg).t_p_max


def success_criterion(cfg: ScenarioConfig) -> Optional[SuccessCriterion]:
    kind = cfg.scenario.kind
    if kind == "discrete":
        return BorderProximity(
            threshold=cfg.scenario.success_border_threshold * cfg.swarm.perception_range,
            border_x=cfg.environment.border_x,
        )
    if kind == "gradient":
        return PositionThreshold(x_min=cfg.scenario.success_x_min)
    return None


def build_world(
    cfg: ScenarioConfig,
    seed: int,
    center: Optional[tuple[float, float]] = None,
    pattern: Optional[list[int]] = None,
) -> World:
    """Assemble a world for one seeded run, optionally recentered."""
    rng = Random(seed)
    params = build_params(cfg)
    fld = build_field(cfg, pattern=pattern)
    if cfg.scenario.kind == "lab":
        lab = cfg.lab
        spacing = lab.agent_spacing
        positions = [(i * spacing, 0.0) for i in range(lab.agent_count)]
        cells = pattern if pattern is not None else cfg.environment.pattern
        # Cell i is centered on agent i so each agent reads its own cell.
        fld = OneDimensionalPattern(
            brightness=tuple(float(v) for v in cells),
            cell_width=spacing,
            origin_x=-spacing / 2.0,
            noise_halfwidth=0.0,
        )
        config = swarm_from_positions(positions, cfg.swarm.perception_range)
        return World(
            config,
            fld,
            params,
            rng,
            bins=2,  # one-dimensional setup: left/right only
            absorb_rate=cfg.decision.absorb_rate,
            max_message_entries=lab.max_message_entries or None,
        )
    where = center if center is not None else (cfg.scenario.x_init, cfg.scenario.y_init)
    config = place_swarm(
        cfg.swarm.n,
        cfg.swarm.diameter,
        rng,
        perception_range=cfg.swarm.perception_range,
        center=where,
    )
    # Align the center of mass exactly with the requested start: initial
    # positions are quoted as "the position of the swarm" (its center).
    com = config.center_of_mass
    config = SwarmConfiguration(
        [(x + where[0] - com[0], y + where[1] - com[1]) for x, y in config.positions],
        cfg.swarm.perception_range,
        _adjacency=config._adjacency,
        _outgoing=config._outgoing,
    )
    return World(
        config,
        fld,
        params,
        rng,
        bins=cfg.decision.bins,
        absorb_rate=cfg.decision.absorb_rate,
        max_message_entries=cfg.decision.max_message_entries or None,
    )


@dataclass
class PeriodRecord:
    period: int
    t_steps: int
    com_x: float
    com_y: float
    collective_direction: float
    resultant_length: float
    mean_diversity: Optional[float]


@dataclass
class TrajectoryResult:
    seed: int
    config_digest: str
    records: list[PeriodRecord]
    diversity: DiversityTrace
    success: bool
    success_time_steps: Optional[int]
    agent_trace: Optional[list[tuple]] = None
    decision_rows: list[tuple] = field(default_factory=list)
    diagnostics: list[str] = field(default_factory=list)


def run_trajectory(
    cfg: ScenarioConfig,
    seed: int,
    center: Optional[tuple[float, float]] = None,
    stop_on_success: bool = False,
    collect_agent_trace: bool = False,
    collect_decision_log: bool = False,
) -> TrajectoryResult:
    """One seeded run: negotiation periods alternating with movement steps."""
    world = build_world(cfg, seed, center=center)
    if collect_agent_trace:
        world.trace = []
    criterion = success_criterion(cfg)
    period_steps = steps_per_period(cfg)
    digest = config_hash(cfg)

    records: list[PeriodRecord] = []
    diversity = DiversityTrace()
    decision_rows: list[tuple] = []
    success = False
    success_time: Optional[int] = None

    com = world.config.center_of_mass
    if criterion is not None and criterion.holds(*com):
        success, success_time = True, 0

    for period in range(cfg.scenario.deadline_periods):
        if success and stop_on_success:
            break
        result = run_negotiation_period(
            world, cfg.scenario.negotiation_period_cycles, cfg.scenario.mode
        )
        world.move(result.collective_direction, cfg.swarm.step_length)
        t_steps = (period + 1) * period_steps
        com = world.config.center_of_mass
        records.append(
            PeriodRecord(
                period=period,
                t_steps=t_steps,
                com_x=com[0],
                com_y=com[1],
                collective_direction=result.collective_direction,
                resultant_length=result.resultant_length,
                mean_diversity=result.mean_diversity,
            )
        )
        diversity.append(period, result.mean_diversity)
        if collect_decision_log:
            for agent_id, opinion in enumerate(result.opinions):
                weights = result.weights[agent_id]
                decision_rows.append(
                    (period, result.collective_direction, agent_id, opinion)
                    + tuple(weights.weights)
                )
        if not success and criterion is not None and criterion.holds(*com):
            success, success_time = True, t_steps

    return TrajectoryResult(
        seed=seed,
        config_digest=digest,
        records=records,
        diversity=diversity,
        success=success,
        success_time_steps=success_time,
        agent_trace=world.trace,
        decision_rows=decision_rows,
        diagnostics=list(world.diagnostics),
    )


@dataclass
class SweepPoint:
    x_init: float
    runs: int
    successes: int
    success_rate: float
    mean_success_time: Optional[float]
    ci_low: float
    ci_high: float


@dataclass
class SweepResult:
    seed: int
    config_digest: str
    points: list[SweepPoint]


def _sweep_run(args: tuple) -> tuple[float, int, bool, Optional[int]]:
    cfg, x_init, run_index, run_seed = args
    result = run_trajectory(
        cfg, run_seed, center=(x_init, cfg.scenario.y_init), stop_on_success=True
    )
    return x_init, run_index, result.success, result.success_time_steps


def run_success_sweep(
    cfg: ScenarioConfig,
    seed: int,
    x_init_values: Optional[Sequence[float]] = None,
    runs_per_point: Optional[int] = None,
    jobs: int = 1,
) -> SweepResult:
    """Success rate and mean success time per initial position.

    Placement is resampled per run. Mean success times cover successful
    runs only; a point with no successes reports None.
    """
    xs = list(x_init_values if x_init_values is not None else cfg.sweep.x_init_values)
    runs = runs_per_point if runs_per_point is not None else cfg.sweep.runs_per_point
    tasks = [
        (cfg, x, r, derive_seed(seed, "sweep", xi, r))
        for xi, x in enumerate(xs)
        for r in range(runs)
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(_sweep_run, tasks, chunksize=4))
    else:
        outcomes = [_sweep_run(task) for task in tasks]

    by_x: dict[float, list[tuple[int, bool, Optional[int]]]] = {x: [] for x in xs}
    for x, run_index, success, t in outcomes:
        by_x[x].append((run_index, success, t))
    points = []
    for x in xs:
        results = sorted(by_x[x])
        successes = [t for _, ok, t in results if ok]
        n_ok = len(successes)
        lo, hi = wilson_interval(n_ok, runs)
        points.append(
            SweepPoint(
                x_init=x,
                runs=runs,
                successes=n_ok,
                success_rate=n_ok / runs,
                mean_success_time=(sum(successes) / n_ok) if n_ok else None,
                ci_low=lo,
                ci_high=hi,
            )
        )
    return SweepResult(seed=seed, config_digest=config_hash(cfg), points=points)


@dataclass
class VectorFieldPoint:
    x: float
    y: float
    direction: float
    resultant_length: float


def default_vector_grid(cfg: ScenarioConfig) -> list[tuple[float, float]]:
    vf = cfg.vectorfield
    if cfg.scenario.kind == "cloud" or vf.radii:
        radii = vf.radii or [1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]
        cx, cy = cfg.environment.cloud_center
        points = []
        for r in radii:
            for k in range(vf.ring_angles):
                phi = 2.0 * math.pi * k / vf.ring_angles
                points.append((cx + r * math.cos(phi), cy + r * math.sin(phi)))
        return points
    if vf.x_values:
        xs = vf.x_values
    else:
        xs = [x / 2.0 for x in range(-12, 13) if x != 0]
    return [(x, y) for x in xs for y in vf.y_values]


def run_vector_field(
    cfg: ScenarioConfig,
    seed: int,
    points: Optional[Sequence[tuple[float, float]]] = None,
    period_cycles: Optional[int] = None,
) -> list[VectorFieldPoint]:
    """Preferred direction of a fresh swarm centered at each grid point.

    One single-period simulation per point; no movement is applied.
    """
    grid = list(points if points is not None else default_vector_grid(cfg))
    cycles = period_cycles if period_cycles is not None else cfg.vectorfield.period_cycles
    out = []
    for index, (x, y) in enumerate(grid):
        world = build_world(
            cfg, derive_seed(seed, "vectorfield", index, x, y), center=(x, y)
        )
        result = run_negotiation_period(world, cycles, cfg.scenario.mode)
        out.append(
            VectorFieldPoint(
                x=x,
                y=y,
                direction=result.collective_direction,
                resultant_length=result.resultant_length,
            )
        )
    return out


def decision_label(angle: float) -> str:
    """Left/right reading of an opinion in the two-sector convention."""
    return "right" if bin_of(angle, 2) == 0 else "left"


def expected_agent_decisions(pattern: Sequence[int], label: str) -> list[str]:
    """Per-agent expected decisions for a light layout.

    Unanimous layouts expect every agent on the labeled side; a split
    layout expects each agent to head for the brightness transition.
    """
    n = len(pattern)
    if label in ("left", "right"):
        return [label] * n
    transition = None
    for k in range(n - 1):
        if pattern[k] != pattern[k + 1]:
            transition = k
            break
    if transition is None:
        raise ValueError(f"split layout {pattern} has no brightness transition")
    return ["right" if i <= transition else "left" for i in range(n)]


@dataclass
class LabRun:
    pattern: list[int]
    repeat: int
    decisions: list[str]
    expected: list[str]

    @property
    def correct(self) -> bool:
        return self.decisions == self.expected


def _run_lab_period(world: World, cfg: ScenarioConfig) -> list[str]:
    result = run_negotiation_period(world, cfg.lab.period_cycles, FUSED_MODE)
    return [decision_label(angle) for angle in result.opinions]


def run_lab_replication(
    light_pattern: Sequence[int],
    repeats: int,
    seed: int = 0,
    cfg: Optional[ScenarioConfig] = None,
) -> list[list[str]]:
    """Final left/right decision of each agent, per independent repeat."""
    cfg = cfg if cfg is not None else lab_config()
    decisions = []
    for repeat in range(repeats):
        run_seed = derive_seed(seed, "lab", "".join(map(str, light_pattern)), repeat)
        world = build_world(cfg, run_seed, pattern=list(light_pattern))
        decisions.append(_run_lab_period(world, cfg))
    return decisions


def lab_config() -> ScenarioConfig:
    cfg = ScenarioConfig()
    cfg.scenario.kind = "lab"
    cfg.scenario.mode = "fused"
    return cfg


def run_lab_suite(cfg: ScenarioConfig, seed: int) -> list[LabRun]:
    """Every configured light layout, repeated; decisions judged per agent."""
    runs = []
    for pattern, label in zip(cfg.lab.patterns, cfg.lab.expected):
        expected = expected_agent_decisions(pattern, label)
        outcomes = run_lab_replication(pattern, cfg.lab.repeats, seed=seed, cfg=cfg)
        for repeat, decisions in enumerate(outcomes):
            runs.append(
                LabRun(
                    pattern=list(pattern),
                    repeat=repeat,
                    decisions=decisions,
                    expected=expected,
                )
            )
    return runs


@dataclass
class AlternatingRun:
    repeat: int
    first_decisions: list[str]
    second_decisions: list[str]
    first_ok: bool
    second_ok: bool

    @property
    def correct(self) -> bool:
        return self.first_ok and self.second_ok


def run_lab_alternating(
    cfg: ScenarioConfig,
    seed: int,
    pattern: Optional[Sequence[int]] = None,
    label: str = "left",
    repeats: int = 5,
) -> list[AlternatingRun]:
    """Consensus on one layout, then the mirrored layout: decisions must flip.

    The same world keeps running when the lights change, so agents carry
    their previous opinions into the second period and must overturn them.
    """
    base = list(pattern) if pattern is not None else list(cfg.lab.patterns[0])
    mirrored = base[::-1]
    first_expected = expected_agent_decisions(base, label)
    flip = {"left": "right", "right": "left"}
    second_expected = [flip[d] for d in first_expected]
    runs = []
    for repeat in range(repeats):
        run_seed = derive_seed(seed, "lab-alt", "".join(map(str, base)), repeat)
        world = build_world(cfg, run_seed, pattern=base)
        first = _run_lab_period(world, cfg)
        world.field = OneDimensionalPattern(
            brightness=tuple(float(v) for v in mirrored),
            cell_width=world.field.cell_width,
            origin_x=world.field.origin_x,
            noise_halfwidth=0.0,
        )
        second = _run_lab_period(world, cfg)
        runs.append(
            AlternatingRun(
                repeat=repeat,
                first_decisions=first,
                second_decisions=second,
                first_ok=first == first_expected,
                second_ok=second == second_expected,
            )
        )
    return runs
