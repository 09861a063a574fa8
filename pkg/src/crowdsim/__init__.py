"""Deterministic multi-agent crowd navigation simulator and training toolkit."""

from .core import (
    Action,
    AgentState,
    CoincidentPoints,
    EpisodeOutcome,
    EpisodeRecord,
    Frame,
    Vec2,
    min_segment_distance,
    unit_displacement,
)
from .engine import CrowdMixture, SimConfig, Simulation, assign_policies, run_episode
from .environments import (
    CrossingType,
    EnvPreset,
    PlacementFailure,
    ScenarioSpec,
    UnknownPreset,
    density,
    gen_circle_crossing,
    gen_square_crossing,
    generate,
    preset,
    sample_attributes,
)
from .learning import (
    LearnConfig,
    RewardParams,
    TrainingSchedule,
    ValueNet,
    featurize,
    il_warmstart,
    lookahead_value,
    reward,
    schedule_preset,
    train,
    value_backward,
    value_forward,
)
from .metrics import AggregateReport, EpisodeMetrics, aggregate, diverse4_eval, episode_metrics, evaluate
from .orca import HalfPlane, OrcaConfig, orca_halfplane, orca_velocity, solve_lp2, solve_lp3
from .policies import Observation, ObservedHuman, build_action_set, make_policy
from .social_force import SFParams, adjusted_displacement, goal_force, pairwise_repulsion, sf_velocity

__version__ = "0.1.0"
