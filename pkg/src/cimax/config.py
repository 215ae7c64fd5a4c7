"""Scenario configuration: TOML schema, defaults, validation, hashing.

A configuration file is a TOML document with the sections below; every
key is optional and falls back to the scenario kind's default. Unknown
sections or keys are rejected with the offending line where it can be
located in the source text.

    [scenario]   kind, mode, x_init, y_init, negotiation_period_cycles,
                 deadline_periods, success_border_threshold, success_x_min
    [swarm]      n, diameter, perception_range, step_length
    [protocol]   t_p_max, t_ref, t_delay, t_p_min
    [decision]   bins, absorb_rate, max_message_entries
    [environment] noise_halfwidth, border_x, low, high, gradient_onset,
                 gradient_slope, cloud_center, cloud_inner_radius,
                 cloud_outer_radius, cloud_inverted, pattern, cell_width,
                 pattern_origin_x
    [sweep]      x_init_values, runs_per_point
    [vectorfield] x_values, y_values, radii, ring_angles, period_cycles
    [lab]        agent_count, agent_spacing, patterns, expected, repeats,
                 cycle_nominal, cycle_jitter, period_cycles
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field
from typing import Optional

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .environment import (
    DiscreteBorder,
    EnvironmentField,
    LinearGradient,
    OneDimensionalPattern,
    RadialCloud,
)
from .protocol import ConfigurationError, ProtocolParams

SCENARIO_KINDS = ("discrete", "gradient", "cloud", "uniform", "lab")
MODES = ("phased", "fused")


@dataclass
class SwarmSection:
    n: int = 61
    diameter: float = 6.0
    perception_range: float = 1.0
    step_length: float = 0.33


@dataclass
class ProtocolSection:
    t_p_max: int = 300
    t_ref: int = 3
    t_delay: int = 1
    t_p_min: int = 1


@dataclass
class DecisionSection:
    bins: int = 4
    absorb_rate: float = 0.1
    max_message_entries: int = 0  # 0 = unlimited


@dataclass
class EnvironmentSection:
    noise_halfwidth: float = 0.5
    border_x: float = 0.0
    low: float = 0.0
    high: float = 5.0
    gradient_onset: float = 0.0
    gradient_slope: float = 5.0 / 3.0
    cloud_center: list[float] = field(default_factory=lambda: [0.0, 0.0])
    cloud_inner_radius: float = 3.0
    cloud_outer_radius: float = 4.5
    cloud_inverted: bool = False
    pattern: list[float] = field(default_factory=lambda: [1.0, 0.0, 0.0, 0.0])
    cell_width: float = 1.0
    pattern_origin_x: float = 0.0


@dataclass
class SweepSection:
    x_init_values: list[float] = field(
        default_factory=lambda: [-4.0, -3.5, -3.0, -2.5, -2.0, -1.5, -1.0, -0.5]
    )
    runs_per_point: int = 50


@dataclass
class VectorFieldSection:
    x_values: list[float] = field(default_factory=list)
    y_values: list[float] = field(default_factory=lambda: [-2.0, -1.0, 0.0, 1.0, 2.0])
    radii: list[float] = field(default_factory=list)
    ring_angles: int = 8
    period_cycles: int = 4


# Six default light layouts: border at one end gives a unanimous decision
# toward it, a centered border splits the swarm toward the border.
DEFAULT_LAB_PATTERNS = [
    [1, 0, 0, 0],
    [0, 1, 1, 1],
    [0, 0, 0, 1],
    [1, 1, 1, 0],
    [1, 1, 0, 0],
    [0, 0, 1, 1],
]
DEFAULT_LAB_EXPECTED = ["left", "left", "right", "right", "split", "split"]


@dataclass
class LabSection:
    agent_count: int = 4
    agent_spacing: float = 0.9
    patterns: list[list[int]] = field(
        default_factory=lambda: [list(p) for p in DEFAULT_LAB_PATTERNS]
    )
    expected: list[str] = field(default_factory=lambda: list(DEFAULT_LAB_EXPECTED))
    repeats: int = 5
    cycle_nominal: int = 55
    cycle_jitter: int = 15
    refractory_time: int = 4
    period_cycles: int = 10
    max_message_entries: int = 10


@dataclass
class ScenarioSection:
    kind: str = "discrete"
    mode: str = "phased"
    x_init: float = -2.5
    y_init: float = 0.0
    negotiation_period_cycles: int = 2
    deadline_periods: int = 50
    success_border_threshold: float = 0.33
    success_x_min: float = 2.33


@dataclass
class ScenarioConfig:
    scenario: ScenarioSection = field(default_factory=ScenarioSection)
    swarm: SwarmSection = field(default_factory=SwarmSection)
    protocol: ProtocolSection = field(default_factory=ProtocolSection)
    decision: DecisionSection = field(default_factory=DecisionSection)
    environment: EnvironmentSection = field(default_factory=EnvironmentSection)
    sweep: SweepSection = field(default_factory=SweepSection)
    vectorfield: VectorFieldSection = field(default_factory=VectorFieldSection)
    lab: LabSection = field(default_factory=LabSection)

    def to_dict(self) -> dict:
        return asdict(self)


_SECTIONS = {
    "scenario": ScenarioSection,
    "swarm": SwarmSection,
    "protocol": ProtocolSection,
    "decision": DecisionSection,
    "environment": EnvironmentSection,
    "sweep": SweepSection,
    "vectorfield": VectorFieldSection,
    "lab": LabSection,
}


class ConfigError(ValueError):
    """A configuration file failed parsing or validation."""


def _line_hint(source: str, token: str) -> str:
    for number, line in enumerate(source.splitlines(), start=1):
        stripped = line.strip()
        if stripped.startswith(f"{token}") and (
            stripped == f"[{token.strip('[]')}]" or stripped.startswith(f"{token} ") or stripped.startswith(f"{token}=")
        ):
            return f"line {number}: "
    return ""


def config_from_dict(data: dict, source: str = "") -> ScenarioConfig:
    """Build a configuration from parsed TOML, rejecting unknown keys."""
    cfg = ScenarioConfig()
    for section_name, values in data.items():
        if section_name not in _SECTIONS:
            hint = _line_hint(source, f"[{section_name}]")
            raise ConfigError(f"{hint}unknown section [{section_name}]")
        if not isinstance(values, dict):
            hint = _line_hint(source, section_name)
            raise ConfigError(
                f"{hint}{section_name} must be a table, got {type(values).__name__}"
            )
        section = getattr(cfg, section_name)
        for key, value in values.items():
            if key not in section.__dataclass_fields__:
                hint = _line_hint(source, key)
                raise ConfigError(f"{hint}unknown key {key!r} in [{section_name}]")
            default = getattr(section, key)
            if isinstance(default, bool):
                ok = isinstance(value, bool)
            elif isinstance(default, int):
                ok = isinstance(value, int) and not isinstance(value, bool)
            elif isinstance(default, float):
                ok = isinstance(value, (int, float)) and not isinstance(value, bool)
                value = float(value) if ok else value
            elif isinstance(default, str):
                ok = isinstance(value, str)
            elif isinstance(default, list):
                ok = isinstance(value, list)
            else:
                ok = True
            if not ok:
                hint = _line_hint(source, key)
                raise ConfigError(
                    f"{hint}key {key!r} in [{section_name}] has wrong type "
                    f"{type(value).__name__}"
                )
            setattr(section, key, value)
    return cfg


def load_config(path: str) -> ScenarioConfig:
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    source = raw.decode("utf-8", errors="replace")
    try:
        data = tomllib.loads(source)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    try:
        cfg = config_from_dict(data, source)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    return cfg


def validate_config(cfg: ScenarioConfig) -> list[str]:
    """All constraint violations in a configuration, empty when valid."""
    problems: list[str] = []
    s = cfg.scenario
    if s.kind not in SCENARIO_KINDS:
        problems.append(f"scenario.kind must be one of {SCENARIO_KINDS}, got {s.kind!r}")
    if s.mode not in MODES:
        problems.append(f"scenario.mode must be one of {MODES}, got {s.mode!r}")
    if s.negotiation_period_cycles < 1:
        problems.append("scenario.negotiation_period_cycles must be >= 1")
    if s.deadline_periods < 1:
        problems.append("scenario.deadline_periods must be >= 1")
    if cfg.swarm.n < 2:
        problems.append("swarm.n must be >= 2")
    if cfg.swarm.diameter <= 0:
        problems.append("swarm.diameter must be positive")
    if cfg.swarm.perception_range <= 0:
        problems.append("swarm.perception_range must be positive")
    if cfg.decision.bins < 1:
        problems.append("decision.bins must be >= 1")
    if not 0.0 < cfg.decision.absorb_rate <= 1.0:
        problems.append("decision.absorb_rate must be in (0, 1]")
    if cfg.decision.max_message_entries < 0:
        problems.append("decision.max_message_entries must be >= 0 (0 = unlimited)")
    if cfg.environment.noise_halfwidth < 0:
        problems.append("environment.noise_halfwidth must be >= 0")
    if cfg.environment.cloud_outer_radius <= cfg.environment.cloud_inner_radius:
        problems.append("environment.cloud_outer_radius must exceed cloud_inner_radius")
    try:
        params = build_params(cfg)
        hops = math.ceil(cfg.swarm.diameter / cfg.swarm.perception_range) + 1
        params.validate(swarm_hop_diameter=hops)
    except ConfigurationError as exc:
        problems.append(str(exc))
    if cfg.sweep.runs_per_point < 1:
        problems.append("sweep.runs_per_point must be >= 1")
    lab = cfg.lab
    if s.kind == "lab":
        if lab.agent_count < 2:
            problems.append("lab.agent_count must be >= 2")
        if len(lab.patterns) != len(lab.expected):
            problems.append("lab.patterns and lab.expected must have equal length")
        for i, pattern in enumerate(lab.patterns):
            if len(pattern) != lab.agent_count:
                problems.append(
                    f"lab.patterns[{i}] has {len(pattern)} cells for "
                    f"{lab.agent_count} agents"
                )
            if any(v not in (0, 1) for v in pattern):
                problems.append(f"lab.patterns[{i}] must contain only 0/1")
        for i, label in enumerate(lab.expected):
            if label not in ("left", "right", "split"):
                problems.append(
                    f"lab.expected[{i}] must be left/right/split, got {label!r}"
                )
        if lab.cycle_jitter < 0 or lab.cycle_jitter >= lab.cycle_nominal:
            problems.append("lab.cycle_jitter must be in [0, cycle_nominal)")
    return problems


def build_params(cfg: ScenarioConfig) -> ProtocolParams:
    if cfg.scenario.kind == "lab":
        lab = cfg.lab
        return ProtocolParams(
            t_p_max=lab.cycle_nominal + lab.cycle_jitter,
            t_ref=lab.refractory_time,
            t_delay=cfg.protocol.t_delay,
            t_p_min=lab.cycle_nominal - lab.cycle_jitter,
        )
    p = cfg.protocol
    return ProtocolParams(
        t_p_max=p.t_p_max, t_ref=p.t_ref, t_delay=p.t_delay, t_p_min=p.t_p_min
    )


def build_field(cfg: ScenarioConfig, pattern: Optional[list[int]] = None) -> EnvironmentField:
    env = cfg.environment
    kind = cfg.scenario.kind
    if kind == "discrete":
        return DiscreteBorder(
            border_x=env.border_x,
            low=env.low,
            high=env.high,
            noise_halfwidth=env.noise_halfwidth,
        )
    if kind == "gradient":
        return LinearGradient(
            onset_x=env.gradient_onset,
            slope=env.gradient_slope,
            low=env.low,
            noise_halfwidth=env.noise_halfwidth,
        )
    if kind == "cloud":
        return RadialCloud(
            center=(env.cloud_center[0], env.cloud_center[1]),
            inner_radius=env.cloud_inner_radius,
            outer_radius=env.cloud_outer_radius,
            low=env.low,
            high=env.high,
            inverted=env.cloud_inverted,
            noise_halfwidth=env.noise_halfwidth,
        )
    if kind == "uniform":
        # Constant base: a border pushed far outside any reachable position.
        return DiscreteBorder(
            border_x=math.inf, low=env.low, high=env.high,
            noise_halfwidth=env.noise_halfwidth,
        )
    if kind == "lab":
        # Binary on/off light sensors: noiseless by construction.
        cells = pattern if pattern is not None else cfg.environment.pattern
        return OneDimensionalPattern(
            brightness=tuple(float(v) for v in cells),
            cell_width=env.cell_width,
            origin_x=env.pattern_origin_x,
            noise_halfwidth=0.0,
        )
    raise ConfigError(f"unknown scenario kind {kind!r}")


def config_hash(cfg: ScenarioConfig) -> str:
    canonical = json.dumps(cfg.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()[:16]
