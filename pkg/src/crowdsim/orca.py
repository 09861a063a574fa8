"""Optimal reciprocal collision avoidance.

Each agent builds one half-plane constraint in velocity space per neighbor
from the truncated velocity obstacle, takes its share of the correction
needed to exit it, and then picks the feasible velocity closest to its
preferred velocity by incremental 2-D linear programming. When the
constraints admit no feasible velocity at all, a fallback program picks the
velocity of least penetration so the agent always keeps moving as safely as
it can.

The construction and both programs follow the standard published algorithm
(the same one the reference C++ library implements); everything here is
deterministic, including constraint ordering.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Action, AgentState, Vec2

_EPS = 1e-10


@dataclass(frozen=True, slots=True)
class HalfPlane:
    """Directed line in velocity space; the permitted side is to its left.

    A velocity v is feasible iff cross(direction, v - point) >= 0, i.e. iff
    it lies on or left of the line through `point` along `direction`.
    """

    point: Vec2
    direction: Vec2

    def penetration(self, v: Vec2) -> float:
        """Signed violation depth of v; positive means infeasible."""
        return self.direction.cross(self.point - v)


@dataclass(frozen=True)
class OrcaConfig:
    time_horizon: float = 5.0      # s, agent-agent anticipation window
    neighbor_dist: float = 10.0    # m, sensing radius
    max_neighbors: int = 10
    reciprocity_share: float = 0.5
    safety_margin: float = 0.01    # m, radius inflation inside the constraints only

    def __post_init__(self) -> None:
        if self.time_horizon <= 0:
            raise ValueError("time_horizon must be positive")
        if not 0.0 < self.reciprocity_share <= 1.0:
            raise ValueError("reciprocity_share must be in (0, 1]")
        if self.safety_margin < 0:
            raise ValueError("safety_margin must be non-negative")


def orca_halfplane(self_state: AgentState, other: AgentState, cfg: OrcaConfig, dt: float) -> HalfPlane:
    """Half-plane of velocities this agent may keep against one neighbor.

    Outside of contact this is the truncated velocity obstacle over
    cfg.time_horizon; u is the smallest change of relative velocity that
    exits it, and the agent takes reciprocity_share of u onto itself.
    Already-overlapping agents fall back to the constraint that resolves the
    overlap within one timestep.
    """
    rel_pos = other.position - self_state.position
    rel_vel = self_state.velocity - other.velocity
    dist_sq = rel_pos.norm_sq()
    # grazing trajectories are exact contacts under discrete stepping; a small
    # buffer on the constraint (not on the body) turns them into clean misses
    combined_r = self_state.radius + other.radius + 2.0 * cfg.safety_margin

    if dist_sq > combined_r * combined_r:
        inv_horizon = 1.0 / cfg.time_horizon
        # w points from the cutoff-disc center to the relative velocity
        w = rel_vel - rel_pos * inv_horizon
        w_len_sq = w.norm_sq()
        dot1 = w.dot(rel_pos)
        if dot1 < 0.0 and dot1 * dot1 > combined_r * combined_r * w_len_sq:
            # project on the cutoff disc
            w_len = math.sqrt(w_len_sq)
            unit_w = w * (1.0 / w_len)
            direction = Vec2(unit_w.y, -unit_w.x)
            u = unit_w * (combined_r * inv_horizon - w_len)
        else:
            # project on the nearer leg of the cone
            leg = math.sqrt(dist_sq - combined_r * combined_r)
            if rel_pos.cross(w) > 0.0:
                direction = Vec2(
                    rel_pos.x * leg - rel_pos.y * combined_r,
                    rel_pos.x * combined_r + rel_pos.y * leg,
                ) * (1.0 / dist_sq)
            else:
                direction = Vec2(
                    rel_pos.x * leg + rel_pos.y * combined_r,
                    -rel_pos.x * combined_r + rel_pos.y * leg,
                ) * (-1.0 / dist_sq)
            u = direction * rel_vel.dot(direction) - rel_vel
    else:
        # bodies overlap: demand a relative velocity that separates them
        # within one timestep
        inv_dt = 1.0 / dt
        w = rel_vel - rel_pos * inv_dt
        w_len = w.norm()
        if w_len < _EPS:
            # degenerate: relative velocity exactly matches the escape
            # velocity; push straight apart
            if dist_sq > _EPS * _EPS:
                unit_w = rel_pos * (-1.0 / math.sqrt(dist_sq))
            else:
                unit_w = Vec2(1.0, 0.0)
        else:
            unit_w = w * (1.0 / w_len)
        direction = Vec2(unit_w.y, -unit_w.x)
        u = unit_w * (combined_r * inv_dt - w_len)

    return HalfPlane(self_state.velocity + u * cfg.reciprocity_share, direction)


def _lp1(lines: list[HalfPlane], index: int, max_speed: float, opt_v: Vec2,
         opt_dir: bool, result: Vec2) -> tuple[bool, Vec2]:
    """1-D program on the boundary of lines[index], respecting lines[:index].

    Returns (feasible, new_result); on infeasibility the old result is kept.
    """
    line = lines[index]
    dot = line.point.dot(line.direction)
    discriminant = dot * dot - line.point.norm_sq() + max_speed * max_speed
    if discriminant < 0.0:
        # the whole line lies outside the speed disc
        return False, result
    sqrt_disc = math.sqrt(discriminant)
    t_left = -dot - sqrt_disc
    t_right = -dot + sqrt_disc

    for prev in lines[:index]:
        denominator = line.direction.cross(prev.direction)
        numerator = prev.direction.cross(line.point - prev.point)
        if abs(denominator) <= _EPS:
            if numerator < 0.0:
                return False, result  # parallel and on the forbidden side
            continue
        t = numerator / denominator
        if denominator >= 0.0:
            t_right = min(t_right, t)
        else:
            t_left = max(t_left, t)
        if t_left > t_right:
            return False, result

    if opt_dir:
        if opt_v.dot(line.direction) > 0.0:
            t = t_right
        else:
            t = t_left
    else:
        t = line.direction.dot(opt_v - line.point)
        t = min(t_right, max(t_left, t))
    return True, line.point + line.direction * t


def _lp2(lines: list[HalfPlane], max_speed: float, opt_v: Vec2,
         opt_dir: bool) -> tuple[Vec2, int]:
    """Incremental 2-D program over the speed disc and the given half-planes.

    Returns (result, satisfied_count). satisfied_count == len(lines) means
    full feasibility; otherwise it is the index of the first constraint that
    emptied the feasible set and result is the last feasible solution.
    """
    if opt_dir:
        result = opt_v * max_speed  # opt_v is a unit direction
    elif opt_v.norm_sq() > max_speed * max_speed:
        result = opt_v.unit() * max_speed
    else:
        result = opt_v

    for i, line in enumerate(lines):
        if line.penetration(result) > 0.0:
            ok, result_new = _lp1(lines, i, max_speed, opt_v, opt_dir, result)
            if not ok:
                return result, i
            result = result_new
    return result, len(lines)


def solve_lp2(constraints: list[HalfPlane], max_speed: float, preferred: Vec2) -> tuple[Vec2, int]:
    """Velocity in the disc-and-half-plane intersection closest to `preferred`.

    Constraints are processed incrementally in the given order. On
    infeasibility the returned count is the index of the first violated
    constraint and the velocity is the last feasible solution.
    """
    if max_speed <= 0:
        raise ValueError("max_speed must be positive")
    return _lp2(constraints, max_speed, preferred, opt_dir=False)


def solve_lp3(constraints: list[HalfPlane], max_speed: float, start_index: int, current: Vec2) -> Vec2:
    """Least-penetration fallback when full feasibility is impossible.

    Starting from the last feasible solution of the 2-D program, walks the
    remaining constraints and, for each newly most-violated one, re-optimizes
    along its boundary direction against the bisectors with all earlier
    constraints. The result minimizes the maximum signed penetration over the
    constraint set, subject to the speed disc.
    """
    distance = 0.0
    result = current
    for i in range(start_index, len(constraints)):
        line = constraints[i]
        if line.penetration(result) > distance:
            projected: list[HalfPlane] = []
            for prev in constraints[:i]:
                denominator = line.direction.cross(prev.direction)
                if abs(denominator) <= _EPS:
                    if line.direction.dot(prev.direction) > 0.0:
                        continue  # same direction: redundant
                    point = (line.point + prev.point) * 0.5
                else:
                    numerator = prev.direction.cross(line.point - prev.point)
                    point = line.point + line.direction * (numerator / denominator)
                diff = prev.direction - line.direction
                diff_norm = diff.norm()
                if diff_norm < 1e-9:
                    continue
                projected.append(HalfPlane(point, diff * (1.0 / diff_norm)))

            # optimize along the direction of steepest penetration decrease
            opt_dir = Vec2(-line.direction.y, line.direction.x)
            new_result, count = _lp2(projected, max_speed, opt_dir, opt_dir=True)
            if count >= len(projected):
                # a failure here can only come from rounding; keep the old
                # result in that case
                result = new_result
            distance = line.penetration(result)
    return result


def preferred_velocity(state: AgentState, dt: float) -> Vec2:
    """Straight-to-goal velocity, capped at v_pref and at goal arrival in dt."""
    to_goal = state.goal - state.position
    dist = to_goal.norm()
    if dist < 1e-12:
        return Vec2(0.0, 0.0)
    speed = min(state.v_pref, dist / dt)
    return to_goal * (speed / dist)


def orca_velocity(self_state: AgentState, neighbors: list[AgentState], cfg: OrcaConfig, dt: float) -> Action:
    """One full decision: constraints from the nearest neighbors, then LP."""
    dist_sqs = [(n.position - self_state.position).norm_sq() for n in neighbors]
    order = sorted(
        (i for i, d in enumerate(dist_sqs) if d <= cfg.neighbor_dist * cfg.neighbor_dist),
        key=lambda i: (dist_sqs[i], i),
    )[: cfg.max_neighbors]

    lines = [orca_halfplane(self_state, neighbors[i], cfg, dt) for i in order]
    pref = preferred_velocity(self_state, dt)
    velocity, count = _lp2(lines, self_state.v_pref, pref, opt_dir=False)
    if count < len(lines):
        velocity = solve_lp3(lines, self_state.v_pref, count, velocity)
    return Action(velocity.clamped(self_state.v_pref))
