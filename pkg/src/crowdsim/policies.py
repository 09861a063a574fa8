"""Robot policies and the observation/action-set types they share.

Rule-based policies (ORCA, Social Force, straight-and-stop, static) are thin
and stateless; the value policy scores a discrete action set with a one-step
lookahead against a learned value network.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Action, AgentState, Vec2
from .orca import OrcaConfig, orca_velocity, preferred_velocity
from .social_force import SFParams, sf_velocity


@dataclass(frozen=True, slots=True)
class ObservedHuman:
    """The part of a human another agent can see; goals stay private."""

    position: Vec2
    velocity: Vec2
    radius: float


def observed(state: AgentState) -> ObservedHuman:
    return ObservedHuman(state.position, state.velocity, state.radius)


@dataclass(frozen=True)
class Observation:
    """World snapshot handed to a policy: own full state, others observable only."""

    robot: AgentState
    humans: tuple[ObservedHuman, ...]
    t: float = 0.0


@dataclass(frozen=True)
class ActionSet:
    actions: tuple[Action, ...]


def build_action_set(v_pref: float, n_directions: int = 16) -> ActionSet:
    """The null action plus 5 speed increments times n_directions headings."""
    if n_directions < 4:
        raise ValueError("n_directions must be at least 4")
    actions = [Action(Vec2(0.0, 0.0))]
    for k in range(1, 6):
        speed = k / 5.0 * v_pref
        for j in range(n_directions):
            angle = 2.0 * math.pi * j / n_directions
            actions.append(Action(Vec2(speed * math.cos(angle), speed * math.sin(angle))))
    return ActionSet(tuple(actions))


def min_surface_distance(obs: Observation) -> float:
    """Closest robot-to-human surface distance in the snapshot; inf if alone."""
    best = math.inf
    for h in obs.humans:
        d = (h.position - obs.robot.position).norm() - h.radius - obs.robot.radius
        if d < best:
            best = d
    return best


class StaticPolicy:
    """Never moves."""

    def act(self, obs: Observation, rng: np.random.Generator) -> Action:
        return Action(Vec2(0.0, 0.0))


class StraightStopPolicy:
    """Heads straight for the goal; freezes whenever anyone is too close."""

    def __init__(self, stop_radius: float = 0.7):
        if stop_radius <= 0:
            raise ValueError("stop_radius must be positive")
        self.stop_radius = stop_radius

    def act(self, obs: Observation, rng: np.random.Generator) -> Action:
        if min_surface_distance(obs) < self.stop_radius:
            return Action(Vec2(0.0, 0.0))
        to_goal = obs.robot.goal - obs.robot.position
        dist = to_goal.norm()
        if dist < 1e-12:
            return Action(Vec2(0.0, 0.0))
        return Action(to_goal * (obs.robot.v_pref / dist))


class OrcaPolicy:
    """Delegates to the reciprocal collision avoidance solver unchanged."""

    def __init__(self, cfg: OrcaConfig | None = None, dt: float = 0.25):
        self.cfg = cfg if cfg is not None else OrcaConfig()
        self.dt = dt

    def act(self, obs: Observation, rng: np.random.Generator) -> Action:
        return orca_velocity(obs.robot, list(obs.humans), self.cfg, self.dt)


class SocialForcePolicy:
    """Delegates to the social-force integrator unchanged."""

    def __init__(self, params: SFParams | None = None, dt: float = 0.25):
        self.params = params if params is not None else SFParams()
        self.dt = dt

    def act(self, obs: Observation, rng: np.random.Generator) -> Action:
        if obs.robot.dist_to_goal() < 1e-9:
            return Action(Vec2(0.0, 0.0))
        return sf_velocity(obs.robot, list(obs.humans), self.params, self.dt)


class RandomPolicy:
    """Uniform draw from the action set; a floor for learned-policy comparisons."""

    def __init__(self, n_directions: int = 16):
        self.n_directions = n_directions

    def act(self, obs: Observation, rng: np.random.Generator) -> Action:
        actions = build_action_set(obs.robot.v_pref, self.n_directions).actions
        return actions[int(rng.integers(0, len(actions)))]


class ValuePolicy:
    """Greedy one-step lookahead over the action set against a value network.

    With epsilon > 0 the policy explores by taking a uniformly random action
    with that probability (used during training only).
    """

    def __init__(self, net, reward_params=None, dt: float = 0.25,
                 n_directions: int = 16, epsilon: float = 0.0):
        from .learning import RewardParams

        self.net = net
        self.reward_params = reward_params if reward_params is not None else RewardParams()
        self.dt = dt
        self.n_directions = n_directions
        self.epsilon = epsilon

    def act(self, obs: Observation, rng: np.random.Generator) -> Action:
        from .learning import lookahead_value

        actions = build_action_set(obs.robot.v_pref, self.n_directions).actions
        if self.epsilon > 0.0 and rng.uniform() < self.epsilon:
            return actions[int(rng.integers(0, len(actions)))]
        best_action = actions[0]
        best_value = -math.inf
        for action in actions:
            value = lookahead_value(self.net, obs, action, self.dt, self.reward_params)
            if value > best_value:
                best_value = value
                best_action = action
        return best_action


POLICY_IDS = ("orca", "social_force", "straight_stop", "static", "value")


def make_policy(policy_id: str, *, dt: float = 0.25, orca_cfg: OrcaConfig | None = None,
                sf_params: SFParams | None = None, stop_radius: float = 0.7,
                net=None, reward_params=None, n_directions: int = 16):
    """Policy registry used by the CLI and the evaluators."""
    if policy_id == "orca":
        return OrcaPolicy(orca_cfg, dt=dt)
    if policy_id == "social_force":
        return SocialForcePolicy(sf_params, dt=dt)
    if policy_id == "straight_stop":
        return StraightStopPolicy(stop_radius)
    if policy_id == "static":
        return StaticPolicy()
    if policy_id == "value":
        if net is None:
            raise ValueError("the value policy needs a network (pass --net)")
        return ValuePolicy(net, reward_params, dt=dt, n_directions=n_directions)
    raise ValueError(f"unknown policy id: {policy_id!r} (expected one of {POLICY_IDS})")


__all__ = [
    "ActionSet",
    "Observation",
    "ObservedHuman",
    "OrcaPolicy",
    "POLICY_IDS",
    "RandomPolicy",
    "SocialForcePolicy",
    "StaticPolicy",
    "StraightStopPolicy",
    "ValuePolicy",
    "build_action_set",
    "make_policy",
    "min_surface_distance",
    "observed",
    "preferred_velocity",
]
