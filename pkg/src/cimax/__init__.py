"""CIMAX: collective information maximization for swarms.

Agents with short-range wave-relay communication gather each other's
measurements, score directions by measurement diversity (variance), and
negotiate a common heading that moves the swarm toward the most
informative region of its environment.
"""

from .decision import (
    DirectionWeights,
    Opinion,
    StoredObservation,
    absorb_opinion,
    bin_center,
    bin_of,
    circular_mean,
    direction_weights,
    evaluate,
    majority_direction,
    message_variance,
    signed_angle_difference,
    wrap_angle,
)
from .environment import (
    DiscreteBorder,
    EnvironmentField,
    LinearGradient,
    OneDimensionalPattern,
    RadialCloud,
    base,
    sample,
)
from .metrics import (
    BorderProximity,
    DiversityTrace,
    PositionThreshold,
    average_diversity,
    detect_success,
    shannon_entropy,
    wilson_interval,
)
from .negotiation import (
    DECISION,
    FUSED,
    PeriodResult,
    begin_phase,
    opinion_spread,
    run_negotiation_period,
)
from .protocol import (
    AgentState,
    ConfigurationError,
    Delivery,
    Message,
    Mode,
    ProtocolParams,
    arm_ping_timer,
    tick,
)
from .swarm import (
    GATHERING,
    DeliverySchedule,
    SwarmConfiguration,
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

__version__ = "0.1.0"
