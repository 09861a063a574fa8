"""Procedural crossing scenarios and the six stock environment presets.

Circle crossings place humans near the perimeter of a circle with goals on
the opposite side; square crossings place them in one half of a square with
goals in the other half, where they park as static obstacles on arrival.
Generation is a pure function of (preset, seed).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .core import Vec2

PERTURBATION = 0.5      # m, uniform per-axis noise on starts/goals
CLEARANCE = 0.2         # m, required surface gap between placements
MAX_PLACEMENT_TRIES = 10_000

ROBOT_RADIUS_DEFAULT = 0.3
ROBOT_V_PREF_DEFAULT = 1.0

POLICY_ORCA = "orca"
POLICY_SOCIAL_FORCE = "social_force"
POLICY_STATIC = "static"


class PlacementFailure(RuntimeError):
    """Rejection sampling could not place an agent within the try budget."""


class UnknownPreset(KeyError):
    pass


class CrossingType(Enum):
    CIRCLE = "circle"
    SQUARE = "square"


@dataclass(frozen=True)
class EnvPreset:
    name: str
    crossing: CrossingType
    n: int          # number of humans
    extent: float   # circle radius r or square width w, in meters

    def density(self) -> float:
        return density(self)


# name -> (crossing, n, extent); densities derive from these
_PRESETS = {
    "SimpleCircle": (CrossingType.CIRCLE, 5, 4.0),
    "SimpleSquare": (CrossingType.SQUARE, 10, 10.0),
    "LargeCircle": (CrossingType.CIRCLE, 12, 6.0),
    "LargeSquare": (CrossingType.SQUARE, 20, 14.0),
    "DenseCircle": (CrossingType.CIRCLE, 10, 4.0),
    "DenseSquare": (CrossingType.SQUARE, 20, 10.0),
}

DIVERSE4 = ("LargeCircle", "LargeSquare", "DenseCircle", "DenseSquare")


def preset(name: str) -> EnvPreset:
    try:
        crossing, n, extent = _PRESETS[name]
    except KeyError:
        raise UnknownPreset(f"unknown environment preset: {name!r}") from None
    return EnvPreset(name, crossing, n, extent)


def preset_names() -> tuple[str, ...]:
    return tuple(_PRESETS)


def density(p: EnvPreset) -> float:
    """Average crowd density in humans per square meter."""
    if p.crossing is CrossingType.CIRCLE:
        return p.n / (math.pi * p.extent * p.extent)
    return p.n / (p.extent * p.extent)


@dataclass(frozen=True)
class HumanSpec:
    start: Vec2
    goal: Vec2
    radius: float
    v_pref: float
    dynamics_policy_id: str = POLICY_ORCA
    static_after_goal: bool = False


@dataclass(frozen=True)
class ScenarioSpec:
    preset: EnvPreset
    robot_start: Vec2
    robot_goal: Vec2
    humans: tuple[HumanSpec, ...]
    seed: int


def sample_attributes(rng: np.random.Generator) -> tuple[float, float]:
    """Draw one human's body radius and preferred speed."""
    r = rng.uniform(0.3, 0.5)
    v_pref = rng.uniform(0.5, 1.5)
    return r, v_pref


def _clear(p: Vec2, r: float, placed: list[tuple[Vec2, float]]) -> bool:
    for q, r_other in placed:
        if (p - q).norm() <= r + r_other + CLEARANCE:
            return False
    return True


def _place(
    rng: np.random.Generator,
    draw,
    radius: float,
    starts: list[tuple[Vec2, float]],
    goals: list[tuple[Vec2, float]],
    robot_goal: tuple[Vec2, float],
) -> tuple[Vec2, Vec2]:
    """Rejection-sample one (start, goal) pair against everything placed so far.

    The start must clear all prior starts and the robot's goal (nobody may sit
    on it); the goal must clear all prior goals so agents that park never
    overlap.
    """
    for _ in range(MAX_PLACEMENT_TRIES):
        start, goal = draw(rng)
        if (
            _clear(start, radius, starts)
            and _clear(start, radius, [robot_goal])
            and _clear(goal, radius, goals)
        ):
            return start, goal
    raise PlacementFailure(
        f"no clear placement after {MAX_PLACEMENT_TRIES} tries "
        f"({len(starts)} agents already placed)"
    )


def gen_circle_crossing(env: EnvPreset, rng: np.random.Generator) -> ScenarioSpec:
    """Humans around the perimeter with roughly antipodal goals."""
    if env.crossing is not CrossingType.CIRCLE:
        raise ValueError(f"{env.name} is not a circle crossing")
    r_env = env.extent
    robot_start = Vec2(0.0, -r_env)
    robot_goal = Vec2(0.0, r_env)
    starts: list[tuple[Vec2, float]] = [(robot_start, ROBOT_RADIUS_DEFAULT)]
    goals: list[tuple[Vec2, float]] = [(robot_goal, ROBOT_RADIUS_DEFAULT)]

    humans = []
    for _ in range(env.n):
        radius, v_pref = sample_attributes(rng)

        def draw(rng: np.random.Generator) -> tuple[Vec2, Vec2]:
            theta = rng.uniform(0.0, 2.0 * math.pi)
            base = Vec2(r_env * math.cos(theta), r_env * math.sin(theta))
            start = base + Vec2(rng.uniform(-PERTURBATION, PERTURBATION),
                                rng.uniform(-PERTURBATION, PERTURBATION))
            goal = (-1.0 * base) + Vec2(rng.uniform(-PERTURBATION, PERTURBATION),
                                        rng.uniform(-PERTURBATION, PERTURBATION))
            return start, goal

        start, goal = _place(rng, draw, radius, starts, goals, goals[0])
        starts.append((start, radius))
        goals.append((goal, radius))
        humans.append(HumanSpec(start, goal, radius, v_pref, static_after_goal=False))

    return ScenarioSpec(env, robot_start, robot_goal, tuple(humans), seed=-1)


def gen_square_crossing(env: EnvPreset, rng: np.random.Generator) -> ScenarioSpec:
    """Humans crossing between the two halves of a square, parking on arrival."""
    if env.crossing is not CrossingType.SQUARE:
        raise ValueError(f"{env.name} is not a square crossing")
    w = env.extent
    robot_start = Vec2(0.0, -w / 2.0)
    robot_goal = Vec2(0.0, w / 2.0)
    starts: list[tuple[Vec2, float]] = [(robot_start, ROBOT_RADIUS_DEFAULT)]
    goals: list[tuple[Vec2, float]] = [(robot_goal, ROBOT_RADIUS_DEFAULT)]

    humans = []
    for _ in range(env.n):
        radius, v_pref = sample_attributes(rng)

        def draw(rng: np.random.Generator) -> tuple[Vec2, Vec2]:
            side = 1.0 if rng.uniform() < 0.5 else -1.0
            start = Vec2(side * rng.uniform(0.0, w / 2.0), rng.uniform(-w / 2.0, w / 2.0))
            goal = Vec2(-side * rng.uniform(0.0, w / 2.0), rng.uniform(-w / 2.0, w / 2.0))
            return start, goal

        start, goal = _place(rng, draw, radius, starts, goals, goals[0])
        starts.append((start, radius))
        goals.append((goal, radius))
        humans.append(HumanSpec(start, goal, radius, v_pref, static_after_goal=True))

    return ScenarioSpec(env, robot_start, robot_goal, tuple(humans), seed=-1)


def generate(env: EnvPreset, seed: int) -> ScenarioSpec:
    """Deterministic scenario for (preset, seed)."""
    rng = np.random.default_rng(seed)
    if env.crossing is CrossingType.CIRCLE:
        spec = gen_circle_crossing(env, rng)
    else:
        spec = gen_square_crossing(env, rng)
    return ScenarioSpec(spec.preset, spec.robot_start, spec.robot_goal, spec.humans, seed)


def scenario_to_dict(spec: ScenarioSpec) -> dict:
    return {
        "preset": spec.preset.name,
        "seed": spec.seed,
        "robot_start": list(spec.robot_start.as_tuple()),
        "robot_goal": list(spec.robot_goal.as_tuple()),
        "humans": [
            {
                "start": list(h.start.as_tuple()),
                "goal": list(h.goal.as_tuple()),
                "radius": h.radius,
                "v_pref": h.v_pref,
                "policy": h.dynamics_policy_id,
                "static_after_goal": h.static_after_goal,
            }
            for h in spec.humans
        ],
    }


def scenario_from_dict(data: dict) -> ScenarioSpec:
    humans = tuple(
        HumanSpec(
            start=Vec2(*h["start"]),
            goal=Vec2(*h["goal"]),
            radius=h["radius"],
            v_pref=h["v_pref"],
            dynamics_policy_id=h.get("policy", POLICY_ORCA),
            static_after_goal=h.get("static_after_goal", False),
        )
        for h in data["humans"]
    )
    return ScenarioSpec(
        preset=preset(data["preset"]),
        robot_start=Vec2(*data["robot_start"]),
        robot_goal=Vec2(*data["robot_goal"]),
        humans=humans,
        seed=data["seed"],
    )


def scenario_to_json(spec: ScenarioSpec) -> str:
    return json.dumps(scenario_to_dict(spec))


def scenario_from_json(text: str) -> ScenarioSpec:
    return scenario_from_dict(json.loads(text))
