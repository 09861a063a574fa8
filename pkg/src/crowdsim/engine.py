"""The simulation loop.

Every agent's policy is queried against the same pre-step snapshot, all
positions then advance simultaneously by one Euler step, and robot-human
contact is checked continuously along the step (two agents swapping positions
through each other within one dt is still a collision).

An episode ends with exactly one of Success (robot within its own radius of
the goal), Collision (robot touched a human), or Timeout.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .core import (
    COLLISION,
    SUCCESS,
    TIMEOUT,
    Action,
    AgentState,
    EpisodeOutcome,
    EpisodeRecord,
    Frame,
    Vec2,
    min_segment_distance,
)
from .environments import (
    POLICY_ORCA,
    POLICY_SOCIAL_FORCE,
    POLICY_STATIC,
    HumanSpec,
    ScenarioSpec,
    scenario_from_dict,
    scenario_to_dict,
)


@dataclass(frozen=True)
class SimConfig:
    dt: float = 0.25
    time_limit: float | None = None   # None: 25 s for Simple presets, 50 s otherwise
    discomfort_dist: float = 0.2
    robot_visible: bool = True

    def __post_init__(self) -> None:
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.time_limit is not None and self.time_limit <= self.dt:
            raise ValueError("time_limit must exceed dt")
        if self.discomfort_dist <= 0:
            raise ValueError("discomfort_dist must be positive")

    def resolve_time_limit(self, preset_name: str) -> float:
        if self.time_limit is not None:
            return self.time_limit
        return 25.0 if preset_name.startswith("Simple") else 50.0


@dataclass(frozen=True)
class CrowdMixture:
    orca_fraction: float = 1.0
    static_fraction: float = 0.0

    def __post_init__(self) -> None:
        if not 0.0 <= self.orca_fraction <= 1.0:
            raise ValueError("orca_fraction must be in [0, 1]")
        if not 0.0 <= self.static_fraction <= 1.0:
            raise ValueError("static_fraction must be in [0, 1]")


def assign_policies(spec: ScenarioSpec, mixture: CrowdMixture, rng: np.random.Generator) -> ScenarioSpec:
    """Independently assign each human a dynamics policy per the mixture."""
    humans = []
    for h in spec.humans:
        if rng.uniform() < mixture.static_fraction:
            policy = POLICY_STATIC
        elif rng.uniform() < mixture.orca_fraction:
            policy = POLICY_ORCA
        else:
            policy = POLICY_SOCIAL_FORCE
        humans.append(
            HumanSpec(h.start, h.goal, h.radius, h.v_pref, policy, h.static_after_goal)
        )
    return ScenarioSpec(spec.preset, spec.robot_start, spec.robot_goal, tuple(humans), spec.seed)


@dataclass(frozen=True)
class StepEvent:
    kind: str        # "collision" | "discomfort" | "human_collision"
    i: int           # agent index (0 = robot)
    j: int
    distance: float  # surface distance at the closest point of the step


def _check_action_speed(action: Action, v_pref: float, who: str) -> None:
    if action.speed > v_pref * (1.0 + 1e-9) + 1e-9:
        raise ValueError(
            f"{who} action speed {action.speed:.6f} exceeds v_pref {v_pref:.6f}"
        )


class Simulation:
    """Mutable episode state; policies themselves stay immutable."""

    def __init__(
        self,
        spec: ScenarioSpec,
        robot_policy,
        human_policies: dict[str, object],
        cfg: SimConfig,
        robot_radius: float = 0.3,
        robot_v_pref: float = 1.0,
        rng: np.random.Generator | None = None,
    ):
        from .policies import Observation, observed  # local import to avoid a cycle

        self._observation_cls = Observation
        self._observed = observed
        self.spec = spec
        self.cfg = cfg
        self.robot_policy = robot_policy
        self.human_policies = human_policies
        self.rng = rng if rng is not None else np.random.default_rng(0)
        self.t = 0.0
        self.robot = AgentState(
            position=spec.robot_start,
            velocity=Vec2(0.0, 0.0),
            radius=robot_radius,
            v_pref=robot_v_pref,
            goal=spec.robot_goal,
        )
        self.humans = [
            AgentState(h.start, Vec2(0.0, 0.0), h.radius, h.v_pref, h.goal)
            for h in spec.humans
        ]

    def _human_action(self, idx: int) -> Action:
        h = self.humans[idx]
        meta = self.spec.humans[idx]
        if meta.dynamics_policy_id == POLICY_STATIC or h.reached_goal:
            return Action(Vec2(0.0, 0.0))
        others = [self.humans[k] for k in range(len(self.humans)) if k != idx]
        if self.cfg.robot_visible:
            others.append(self.robot)
        obs = self._observation_cls(
            robot=h,
            humans=tuple(self._observed(o) for o in others),
            t=self.t,
        )
        policy = self.human_policies[meta.dynamics_policy_id]
        return policy.act(obs, self.rng)

    def observation(self):
        """Robot's view of the pre-step world."""
        return self._observation_cls(
            robot=self.robot,
            humans=tuple(self._observed(h) for h in self.humans),
            t=self.t,
        )

    def step(self, robot_action: Action | None = None) -> list[StepEvent]:
        """Advance one dt; returns contact events observed during the step."""
        if robot_action is None:
            robot_action = self.robot_policy.act(self.observation(), self.rng)
        _check_action_speed(robot_action, self.robot.v_pref, "robot")
        # all policies below read the same pre-step snapshot
        human_actions = [self._human_action(i) for i in range(len(self.humans))]
        for i, (h, a) in enumerate(zip(self.humans, human_actions)):
            _check_action_speed(a, h.v_pref, f"human {i}")

        dt = self.cfg.dt
        robot_next = self.robot.position + robot_action.velocity * dt
        human_next = [
            h.position + a.velocity * dt for h, a in zip(self.humans, human_actions)
        ]

        events: list[StepEvent] = []
        for i, h in enumerate(self.humans):
            d = (
                min_segment_distance(self.robot.position, robot_next, h.position, human_next[i])
                - self.robot.radius
                - h.radius
            )
            if d < 0.0:
                events.append(StepEvent("collision", 0, i + 1, d))
            elif d < self.cfg.discomfort_dist:
                events.append(StepEvent("discomfort", 0, i + 1, d))
        for i in range(len(self.humans)):
            for j in range(i + 1, len(self.humans)):
                d = (
                    min_segment_distance(
                        self.humans[i].position, human_next[i],
                        self.humans[j].position, human_next[j],
                    )
                    - self.humans[i].radius
                    - self.humans[j].radius
                )
                if d < 0.0:
                    # non-terminal: the robot is the unit under evaluation
                    events.append(StepEvent("human_collision", i + 1, j + 1, d))
                elif d < self.cfg.discomfort_dist:
                    events.append(StepEvent("discomfort", i + 1, j + 1, d))

        self.robot = self.robot.moved(robot_next, robot_action.velocity)
        for i, h in enumerate(self.humans):
            reached = h.reached_goal or (human_next[i] - h.goal).norm() < h.radius
            self.humans[i] = h.moved(human_next[i], human_actions[i].velocity, reached)
        self.t += dt
        return events

    def frame(self) -> Frame:
        return Frame(self.t, (self.robot, *self.humans))

    def robot_at_goal(self) -> bool:
        return (self.robot.position - self.robot.goal).norm() < self.robot.radius


def run_episode(
    spec: ScenarioSpec,
    robot_policy,
    cfg: SimConfig,
    rng: np.random.Generator | None = None,
    robot_radius: float = 0.3,
    robot_v_pref: float = 1.0,
    human_policies: dict[str, object] | None = None,
    step_callback=None,
) -> EpisodeRecord:
    """Run to termination and record every frame.

    Success is checked first, then collision, then the time limit; humans
    keep walking to their goals no matter what the robot does.
    """
    if human_policies is None:
        human_policies = default_human_policies(cfg.dt)
    sim = Simulation(
        spec, robot_policy, human_policies, cfg,
        robot_radius=robot_radius, robot_v_pref=robot_v_pref, rng=rng,
    )
    time_limit = cfg.resolve_time_limit(spec.preset.name)
    frames = [sim.frame()]
    outcome = None
    while outcome is None:
        events = sim.step()
        frames.append(sim.frame())
        if step_callback is not None:
            step_callback(sim, events)
        if sim.robot_at_goal():
            outcome = EpisodeOutcome(SUCCESS, sim.t)
        elif any(e.kind == "collision" for e in events):
            outcome = EpisodeOutcome(COLLISION, sim.t)
        elif sim.t >= time_limit - 1e-9:
            outcome = EpisodeOutcome(TIMEOUT, min(sim.t, time_limit))
    return EpisodeRecord(
        scenario=spec,
        frames=tuple(frames),
        outcome=outcome,
        robot_radius=robot_radius,
        robot_v_pref=robot_v_pref,
        dt=cfg.dt,
    )


def default_human_policies(dt: float, orca_cfg=None, sf_params=None) -> dict[str, object]:
    from .policies import OrcaPolicy, SocialForcePolicy, StaticPolicy

    return {
        POLICY_ORCA: OrcaPolicy(orca_cfg),
        POLICY_SOCIAL_FORCE: SocialForcePolicy(sf_params, dt=dt),
        POLICY_STATIC: StaticPolicy(),
    }


def _f9(x: float) -> float:
    """Round a float to 9 significant digits (shortest round-trip at that precision)."""
    return float(format(x, ".9g"))


def record_to_jsonl(rec: EpisodeRecord) -> str:
    """One header line (scenario + robot attributes), one line per frame, one footer."""
    header = {
        "scenario": scenario_to_dict(rec.scenario),
        "robot": {"radius": _f9(rec.robot_radius), "v_pref": _f9(rec.robot_v_pref)},
        "dt": _f9(rec.dt),
    }
    lines = [json.dumps(header)]
    for frame in rec.frames:
        agents = [
            {
                "id": i,
                "x": _f9(s.position.x),
                "y": _f9(s.position.y),
                "vx": _f9(s.velocity.x),
                "vy": _f9(s.velocity.y),
                "r": _f9(s.radius),
            }
            for i, s in enumerate(frame.agents)
        ]
        lines.append(json.dumps({"t": _f9(frame.t), "agents": agents}))
    lines.append(json.dumps({"outcome": rec.outcome.kind, "time": _f9(rec.outcome.time_elapsed)}))
    return "\n".join(lines) + "\n"


def record_from_jsonl(text: str) -> EpisodeRecord:
    lines = [line for line in text.splitlines() if line.strip()]
    if len(lines) < 3:
        raise ValueError("trajectory file needs a header, at least one frame, and a footer")
    header = json.loads(lines[0])
    scenario = scenario_from_dict(header["scenario"])
    robot_radius = header["robot"]["radius"]
    robot_v_pref = header["robot"]["v_pref"]
    dt = header["dt"]
    frames = []
    for line in lines[1:-1]:
        data = json.loads(line)
        agents = []
        for i, a in enumerate(data["agents"]):
            if i == 0:
                goal, v_pref = scenario.robot_goal, robot_v_pref
            else:
                goal, v_pref = scenario.humans[i - 1].goal, scenario.humans[i - 1].v_pref
            agents.append(
                AgentState(
                    position=Vec2(a["x"], a["y"]),
                    velocity=Vec2(a["vx"], a["vy"]),
                    radius=a["r"],
                    v_pref=v_pref,
                    goal=goal,
                )
            )
        frames.append(Frame(data["t"], tuple(agents)))
    footer = json.loads(lines[-1])
    outcome = EpisodeOutcome(footer["outcome"], footer["time"])
    return EpisodeRecord(scenario, tuple(frames), outcome, robot_radius, robot_v_pref, dt)
