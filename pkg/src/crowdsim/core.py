"""Shared geometric primitives, agent state types, and episode bookkeeping.

All types here are immutable values; every other module builds on them.
Positions and distances are in meters, velocities in m/s, times in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

COINCIDENT_EPS = 1e-9  # below numeric noise, above denormal range


class CoincidentPoints(ValueError):
    """Two points expected to be distinct are (numerically) identical."""


@dataclass(frozen=True, slots=True)
class Vec2:
    x: float
    y: float

    def __add__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other: "Vec2") -> "Vec2":
        return Vec2(self.x - other.x, self.y - other.y)

    def __mul__(self, k: float) -> "Vec2":
        return Vec2(self.x * k, self.y * k)

    __rmul__ = __mul__

    def __neg__(self) -> "Vec2":
        return Vec2(-self.x, -self.y)

    def dot(self, other: "Vec2") -> float:
        return self.x * other.x + self.y * other.y

    def cross(self, other: "Vec2") -> float:
        return self.x * other.y - self.y * other.x

    def norm(self) -> float:
        return math.hypot(self.x, self.y)

    def norm_sq(self) -> float:
        return self.x * self.x + self.y * self.y

    def unit(self) -> "Vec2":
        n = self.norm()
        if n < COINCIDENT_EPS:
            raise CoincidentPoints("cannot normalize a near-zero vector")
        return Vec2(self.x / n, self.y / n)

    def rotated(self, angle: float) -> "Vec2":
        c, s = math.cos(angle), math.sin(angle)
        return Vec2(c * self.x - s * self.y, s * self.x + c * self.y)

    def clamped(self, max_norm: float) -> "Vec2":
        n = self.norm()
        if n <= max_norm or n == 0.0:
            return self
        k = max_norm / n
        return Vec2(self.x * k, self.y * k)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x, self.y)


ZERO = Vec2(0.0, 0.0)


@dataclass(frozen=True, slots=True)
class AgentState:
    """Kinematic state plus physical attributes of one agent."""

    position: Vec2
    velocity: Vec2
    radius: float
    v_pref: float
    goal: Vec2
    reached_goal: bool = False

    def dist_to_goal(self) -> float:
        return (self.goal - self.position).norm()

    def moved(self, position: Vec2, velocity: Vec2, reached_goal: bool | None = None) -> "AgentState":
        if reached_goal is None:
            reached_goal = self.reached_goal
        return replace(self, position=position, velocity=velocity, reached_goal=reached_goal)


@dataclass(frozen=True, slots=True)
class Action:
    """Holonomic velocity command for the next timestep."""

    velocity: Vec2

    @property
    def speed(self) -> float:
        return self.velocity.norm()


STOP = Action(ZERO)

SUCCESS = "Success"
COLLISION = "Collision"
TIMEOUT = "Timeout"
OUTCOME_KINDS = (SUCCESS, COLLISION, TIMEOUT)


@dataclass(frozen=True, slots=True)
class EpisodeOutcome:
    kind: str  # one of OUTCOME_KINDS
    time_elapsed: float

    def __post_init__(self) -> None:
        if self.kind not in OUTCOME_KINDS:
            raise ValueError(f"unknown outcome kind: {self.kind!r}")


@dataclass(frozen=True, slots=True)
class Frame:
    """One timestamped snapshot: robot first, then all humans in roster order."""

    t: float
    agents: tuple[AgentState, ...]

    @property
    def robot(self) -> AgentState:
        return self.agents[0]

    @property
    def humans(self) -> tuple[AgentState, ...]:
        return self.agents[1:]


@dataclass(frozen=True)
class EpisodeRecord:
    """Full trajectory of one episode; every evaluation metric derives from this."""

    scenario: object  # environments.ScenarioSpec (kept loose to avoid a cycle)
    frames: tuple[Frame, ...]
    outcome: EpisodeOutcome
    robot_radius: float = 0.3
    robot_v_pref: float = 1.0
    dt: float = 0.25


def unit_displacement(p_i: Vec2, p_j: Vec2) -> Vec2:
    """Unit vector pointing from p_j toward p_i.

    Raises CoincidentPoints when the two points are closer than 1e-9 m.
    """
    dx = p_i.x - p_j.x
    dy = p_i.y - p_j.y
    n = math.hypot(dx, dy)
    if n < COINCIDENT_EPS:
        raise CoincidentPoints(f"points coincide: {p_i} vs {p_j}")
    return Vec2(dx / n, dy / n)


def min_segment_distance(p_a0: Vec2, p_a1: Vec2, p_b0: Vec2, p_b1: Vec2) -> float:
    """Minimum distance between two agents moving linearly over one timestep.

    Both agents are interpolated with the same parameter s in [0, 1], which
    matches simultaneous action application in the engine.
    """
    # relative position r(s) = p + s*d is a line segment; minimize |r(s)|
    px = p_a0.x - p_b0.x
    py = p_a0.y - p_b0.y
    dx = (p_a1.x - p_a0.x) - (p_b1.x - p_b0.x)
    dy = (p_a1.y - p_a0.y) - (p_b1.y - p_b0.y)
    d_sq = dx * dx + dy * dy
    if d_sq < 1e-18:
        return math.hypot(px, py)
    s = -(px * dx + py * dy) / d_sq
    if s < 0.0:
        s = 0.0
    elif s > 1.0:
        s = 1.0
    return math.hypot(px + s * dx, py + s * dy)


def pairwise_surface_distance(a: AgentState, b: AgentState) -> float:
    """Center distance minus both radii; negative when bodies overlap."""
    return (a.position - b.position).norm() - a.radius - b.radius


def nearest_point_on_segment(p: Vec2, seg_a: Vec2, seg_b: Vec2) -> Vec2:
    """Closest point to p on the segment [seg_a, seg_b]."""
    ab = seg_b - seg_a
    ab_sq = ab.norm_sq()
    if ab_sq < 1e-18:
        return seg_a
    t = (p - seg_a).dot(ab) / ab_sq
    t = min(1.0, max(0.0, t))
    return seg_a + ab * t
