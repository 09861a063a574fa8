"""Social Force pedestrian dynamics with radius-adjusted pair displacements.

Motion is driven by the sum of a goal-relaxation force, exponential pairwise
repulsion with an anisotropy factor that discounts traffic behind the agent,
and optional boundary/attractor terms (off by default; the six stock
environments are open space).

The classic formulation treats pedestrians as points. Agents here have bodies,
so the pair distance fed to the repulsion is surface distance, clamped from
below at a small positive floor so overlapping bodies never produce a negative
or unbounded distance:

    d_raw = |p_i - p_j| - r_i - r_j
    d     = max(epsilon, d_raw), direction preserved
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import AgentState, Action, Vec2, nearest_point_on_segment, unit_displacement


@dataclass(frozen=True)
class SFParams:
    tau: float = 0.5                 # s, relaxation time of the goal force
    V0: float = 2.1                  # m^2/s^2, repulsion strength
    sigma: float = 0.3               # m, repulsion range
    lambda_: float = 0.4             # anisotropy weight for forces behind the agent
    epsilon: float = 1e-6            # m, displacement floor
    speed_cap_factor: float = 1.3    # internal velocity cap, in units of v_pref
    boundary_segments: tuple[tuple[Vec2, Vec2], ...] = ()
    attractors: tuple[tuple[Vec2, float], ...] = ()

    def __post_init__(self) -> None:
        if self.tau <= 0:
            raise ValueError("tau must be positive")
        if self.V0 < 0:
            raise ValueError("V0 must be non-negative")
        if self.sigma <= 0:
            raise ValueError("sigma must be positive")
        if not 0.0 <= self.lambda_ <= 1.0:
            raise ValueError("lambda_ must be in [0, 1]")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be positive")
        if self.speed_cap_factor < 1.0:
            raise ValueError("speed_cap_factor must be >= 1")


def adjusted_displacement(p_i: Vec2, r_i: float, p_j: Vec2, r_j: float, epsilon: float) -> Vec2:
    """Radius-adjusted displacement from agent j to agent i.

    The scalar magnitude is clamped at epsilon; the direction is always the
    unit displacement, so the vector stays meaningful even for overlapping
    bodies.
    """
    u = unit_displacement(p_i, p_j)
    d = (p_i - p_j).norm() - r_i - r_j
    if d < epsilon:
        d = epsilon
    return u * d


def goal_force(state: AgentState, params: SFParams) -> Vec2:
    """Relaxation toward walking at v_pref straight at the goal."""
    e_goal = unit_displacement(state.goal, state.position)
    desired = e_goal * state.v_pref
    return (desired - state.velocity) * (1.0 / params.tau)


def _anisotropy(velocity: Vec2, u_ij: Vec2, lambda_: float) -> float:
    # phi is the angle between own velocity and the direction toward the other
    # agent (-u_ij); an agent reacts most to what it walks into.
    speed = velocity.norm()
    if speed < 1e-12:
        return 1.0  # no heading information: react fully
    cos_phi = velocity.dot(-1.0 * u_ij) / speed
    return lambda_ + (1.0 - lambda_) * 0.5 * (1.0 + cos_phi)


def pairwise_repulsion(self_state: AgentState, other: AgentState, params: SFParams) -> Vec2:
    """Exponential body-to-body repulsion, weighted down behind the agent."""
    u = unit_displacement(self_state.position, other.position)
    d = (self_state.position - other.position).norm() - self_state.radius - other.radius
    if d < params.epsilon:
        d = params.epsilon
    magnitude = (params.V0 / params.sigma) * math.exp(-d / params.sigma)
    w = _anisotropy(self_state.velocity, u, params.lambda_)
    return u * (magnitude * w)


def boundary_force(state: AgentState, segment: tuple[Vec2, Vec2], params: SFParams) -> Vec2:
    """Perpendicular exponential repulsion from the nearest point of a wall.

    Same strength/range as the pair term, no anisotropy (walls repel
    regardless of heading), with the agent's own radius subtracted from the
    distance.
    """
    q = nearest_point_on_segment(state.position, segment[0], segment[1])
    u = unit_displacement(state.position, q)
    d = (state.position - q).norm() - state.radius
    if d < params.epsilon:
        d = params.epsilon
    return u * ((params.V0 / params.sigma) * math.exp(-d / params.sigma))


def attractor_force(state: AgentState, point: Vec2, strength: float) -> Vec2:
    """Linear spring pulling toward a point of interest."""
    return (point - state.position) * strength


def total_force(self_state: AgentState, others: list[AgentState], params: SFParams) -> Vec2:
    f = goal_force(self_state, params)
    for other in others:
        f = f + pairwise_repulsion(self_state, other, params)
    for segment in params.boundary_segments:
        f = f + boundary_force(self_state, segment, params)
    for point, strength in params.attractors:
        f = f + attractor_force(self_state, point, strength)
    return f


def sf_velocity(self_state: AgentState, others: list[AgentState], params: SFParams, dt: float) -> Action:
    """Integrate the total force over one timestep and emit a velocity command.

    The integrated velocity is capped at speed_cap_factor * v_pref, then the
    emitted action is capped at v_pref (the engine contract).
    """
    f = total_force(self_state, others, params)
    v_new = self_state.velocity + f * dt
    v_new = v_new.clamped(params.speed_cap_factor * self_state.v_pref)
    return Action(v_new.clamped(self_state.v_pref))
