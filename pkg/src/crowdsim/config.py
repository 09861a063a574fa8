"""Run configuration: one JSON document, validated up front.

Flags override individual keys by dotted path (e.g. ``--set orca.time_horizon=4``),
and the CROWDSIM_SEED environment variable overrides the configured seed.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

from .core import Vec2
from .engine import CrowdMixture, SimConfig
from .learning import LearnConfig, RewardParams, TrainingSchedule, schedule_preset, SCHEDULE_PRESETS
from .orca import OrcaConfig
from .social_force import SFParams


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class RobotConfig:
    radius: float = 0.3
    v_pref: float = 1.0
    policy: str = "orca"


@dataclass(frozen=True)
class EvalConfig:
    episodes_per_env: int = 50
    envs: str = "diverse4"
    mixture: CrowdMixture = field(default_factory=lambda: CrowdMixture(0.5, 0.0))
    save_trajectories: bool = False


@dataclass(frozen=True)
class TrainSection:
    schedule: str = "CD"              # schedule preset name
    episodes: int | None = None       # None: the preset's full budget
    static_fraction: float = 0.3


@dataclass(frozen=True)
class RunConfig:
    seed: int = 0
    sim: SimConfig = field(default_factory=SimConfig)
    orca: OrcaConfig = field(default_factory=OrcaConfig)
    social_force: SFParams = field(default_factory=SFParams)
    reward: RewardParams = field(default_factory=RewardParams)
    learning: LearnConfig = field(default_factory=LearnConfig)
    train: TrainSection = field(default_factory=TrainSection)
    eval: EvalConfig = field(default_factory=EvalConfig)
    robot: RobotConfig = field(default_factory=RobotConfig)
    out_dir: str = "out"
    stop_radius: float = 0.7          # straight-and-stop trigger distance

    def schedule(self) -> TrainingSchedule:
        sched = schedule_preset(self.train.schedule, self.train.static_fraction)
        if self.train.episodes is not None:
            sched = sched.scaled(self.train.episodes)
        return sched


_SECTION_KEYS = {
    "sim": ("dt", "time_limit", "discomfort_dist", "robot_visible"),
    "orca": ("time_horizon", "neighbor_dist", "max_neighbors", "reciprocity_share"),
    "social_force": ("tau", "V0", "sigma", "lambda", "epsilon", "speed_cap_factor",
                     "boundary_segments", "attractors"),
    "reward": ("success_reward", "collision_penalty", "discomfort_penalty_scale",
               "discomfort_dist", "gamma"),
    "learning": ("hidden_widths", "learning_rate", "batch_size", "replay_capacity",
                 "il_sweeps", "n_directions"),
    "train": ("schedule", "episodes", "static_fraction"),
    "eval": ("episodes_per_env", "envs", "mixture", "save_trajectories"),
    "robot": ("radius", "v_pref", "policy"),
}


def _check_keys(section: str, data: dict) -> None:
    allowed = _SECTION_KEYS[section]
    for key in data:
        if key not in allowed:
            raise ConfigError(f"unknown key {section}.{key!r} (allowed: {', '.join(allowed)})")


def _mixture_from(data) -> CrowdMixture:
    if isinstance(data, dict):
        return CrowdMixture(
            orca_fraction=float(data.get("orca_fraction", 0.5)),
            static_fraction=float(data.get("static_fraction", 0.0)),
        )
    if isinstance(data, (list, tuple)) and len(data) == 2:
        return CrowdMixture(float(data[0]), float(data[1]))
    raise ConfigError("mixture must be {orca_fraction, static_fraction} or [orca, static]")


def config_from_dict(data: dict) -> RunConfig:
    """Build and validate a RunConfig; raises ConfigError on any bad value."""
    known = ("seed", "out_dir", "stop_radius") + tuple(_SECTION_KEYS)
    for key in data:
        if key not in known:
            raise ConfigError(f"unknown config key {key!r}")
    try:
        sim_d = dict(data.get("sim", {}))
        _check_keys("sim", sim_d)
        sim = SimConfig(
            dt=float(sim_d.get("dt", 0.25)),
            time_limit=(None if sim_d.get("time_limit") is None else float(sim_d["time_limit"])),
            discomfort_dist=float(sim_d.get("discomfort_dist", 0.2)),
            robot_visible=bool(sim_d.get("robot_visible", True)),
        )
        orca_d = dict(data.get("orca", {}))
        _check_keys("orca", orca_d)
        orca = OrcaConfig(
            time_horizon=float(orca_d.get("time_horizon", 5.0)),
            neighbor_dist=float(orca_d.get("neighbor_dist", 10.0)),
            max_neighbors=int(orca_d.get("max_neighbors", 10)),
            reciprocity_share=float(orca_d.get("reciprocity_share", 0.5)),
        )
        sf_d = dict(data.get("social_force", {}))
        _check_keys("social_force", sf_d)
        sf = SFParams(
            tau=float(sf_d.get("tau", 0.5)),
            V0=float(sf_d.get("V0", 2.1)),
            sigma=float(sf_d.get("sigma", 0.3)),
            lambda_=float(sf_d.get("lambda", 0.4)),
            epsilon=float(sf_d.get("epsilon", 1e-6)),
            speed_cap_factor=float(sf_d.get("speed_cap_factor", 1.3)),
            boundary_segments=tuple(
                (Vec2(*a), Vec2(*b)) for a, b in sf_d.get("boundary_segments", [])
            ),
            attractors=tuple(
                (Vec2(*pt), float(s)) for pt, s in sf_d.get("attractors", [])
            ),
        )
        reward_d = dict(data.get("reward", {}))
        _check_keys("reward", reward_d)
        rew = RewardParams(
            success_reward=float(reward_d.get("success_reward", 1.0)),
            collision_penalty=float(reward_d.get("collision_penalty", -0.25)),
            discomfort_penalty_scale=float(reward_d.get("discomfort_penalty_scale", 0.5)),
            discomfort_dist=float(reward_d.get("discomfort_dist", 0.2)),
            gamma=float(reward_d.get("gamma", 0.9)),
        )
        learn_d = dict(data.get("learning", {}))
        _check_keys("learning", learn_d)
        learn = LearnConfig(
            hidden_widths=tuple(int(w) for w in learn_d.get("hidden_widths", (100, 100))),
            learning_rate=float(learn_d.get("learning_rate", 1e-3)),
            batch_size=int(learn_d.get("batch_size", 100)),
            replay_capacity=int(learn_d.get("replay_capacity", 100_000)),
            il_sweeps=int(learn_d.get("il_sweeps", 20)),
            n_directions=int(learn_d.get("n_directions", 16)),
        )
        train_d = dict(data.get("train", {}))
        _check_keys("train", train_d)
        train = TrainSection(
            schedule=str(train_d.get("schedule", "CD")),
            episodes=(None if train_d.get("episodes") is None else int(train_d["episodes"])),
            static_fraction=float(train_d.get("static_fraction", 0.3)),
        )
        if train.schedule not in SCHEDULE_PRESETS:
            raise ConfigError(
                f"unknown schedule preset {train.schedule!r} (expected one of {SCHEDULE_PRESETS})"
            )
        eval_d = dict(data.get("eval", {}))
        _check_keys("eval", eval_d)
        ev = EvalConfig(
            episodes_per_env=int(eval_d.get("episodes_per_env", 50)),
            envs=str(eval_d.get("envs", "diverse4")),
            mixture=_mixture_from(eval_d.get("mixture", {"orca_fraction": 0.5, "static_fraction": 0.0})),
            save_trajectories=bool(eval_d.get("save_trajectories", False)),
        )
        robot_d = dict(data.get("robot", {}))
        _check_keys("robot", robot_d)
        robot = RobotConfig(
            radius=float(robot_d.get("radius", 0.3)),
            v_pref=float(robot_d.get("v_pref", 1.0)),
            policy=str(robot_d.get("policy", "orca")),
        )
        cfg = RunConfig(
            seed=int(data.get("seed", 0)),
            sim=sim,
            orca=orca,
            social_force=sf,
            reward=rew,
            learning=learn,
            train=train,
            eval=ev,
            robot=robot,
            out_dir=str(data.get("out_dir", "out")),
            stop_radius=float(data.get("stop_radius", 0.7)),
        )
    except ConfigError:
        raise
    except (TypeError, ValueError, KeyError) as exc:
        raise ConfigError(f"invalid config value: {exc}") from exc
    if cfg.eval.episodes_per_env < 1:
        raise ConfigError("eval.episodes_per_env must be at least 1")
    if cfg.robot.radius <= 0 or cfg.robot.v_pref <= 0:
        raise ConfigError("robot radius and v_pref must be positive")
    return cfg


def _parse_override_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text  # bare strings need no quotes


def apply_overrides(data: dict, overrides: list[str]) -> dict:
    """Apply KEY.PATH=VALUE pairs onto a raw config dict."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key.path=value")
        path, _, raw = item.partition("=")
        keys = path.strip().split(".")
        target = data
        for key in keys[:-1]:
            target = target.setdefault(key, {})
            if not isinstance(target, dict):
                raise ConfigError(f"cannot descend into {path!r}")
        target[keys[-1]] = _parse_override_value(raw.strip())
    return data


def load_config(path: str | None, overrides: list[str] | None = None,
                env: dict | None = None) -> RunConfig:
    """Read the JSON file (if any), apply overrides and the seed env var."""
    env = env if env is not None else dict(os.environ)
    data: dict = {}
    if path is not None:
        try:
            data = json.loads(Path(path).read_text())
        except FileNotFoundError:
            raise ConfigError(f"config file not found: {path}")
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config file is not valid JSON: {exc}")
        if not isinstance(data, dict):
            raise ConfigError("config root must be a JSON object")
    if "CROWDSIM_SEED" in env:
        try:
            data["seed"] = int(env["CROWDSIM_SEED"])
        except ValueError:
            raise ConfigError("CROWDSIM_SEED must be an integer")
    if overrides:
        apply_overrides(data, overrides)
    return config_from_dict(data)
