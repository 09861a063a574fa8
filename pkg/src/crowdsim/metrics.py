"""Per-episode and aggregate evaluation measures, plus the benchmark driver.

The headline numbers per run: success/collision/timeout rates, mean time to
goal over successes, the time-weighted share of frames spent closer than the
comfort threshold to any human, and the episode-minimum robot-human surface
distance averaged across episodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import COLLISION, SUCCESS, TIMEOUT, EpisodeRecord
from .engine import CrowdMixture, SimConfig, assign_policies, run_episode
from .environments import DIVERSE4, generate, preset


class EmptyRecord(ValueError):
    pass


class EmptyList(ValueError):
    pass


@dataclass(frozen=True)
class EpisodeMetrics:
    outcome_kind: str
    time_to_goal: float | None       # only set on Success
    min_distance: float | None       # None when the episode has no humans
    discomfort_steps: int
    total_steps: int


@dataclass(frozen=True)
class AggregateReport:
    success_rate: float
    collision_rate: float
    timeout_rate: float
    mean_time: float | None
    std_time: float | None
    discomfort_rate: float
    mean_min_distance: float | None
    std_min_distance: float | None
    episode_count: int


def episode_metrics(rec: EpisodeRecord, cfg: SimConfig) -> EpisodeMetrics:
    """Distances are evaluated at frames; a collision pins the minimum at 0."""
    if not rec.frames:
        raise EmptyRecord("record has no frames")
    min_distance = math.inf
    discomfort_steps = 0
    has_humans = len(rec.frames[0].agents) > 1
    for frame in rec.frames:
        robot = frame.agents[0]
        frame_min = math.inf
        for human in frame.agents[1:]:
            d = (human.position - robot.position).norm() - human.radius - robot.radius
            if d < frame_min:
                frame_min = d
        if frame_min < cfg.discomfort_dist:
            discomfort_steps += 1
        if frame_min < min_distance:
            min_distance = frame_min
    if not has_humans:
        min_distance_out = None
    elif rec.outcome.kind == COLLISION:
        # the true continuous minimum went below zero even if no frame shows it
        min_distance_out = 0.0
    else:
        min_distance_out = max(0.0, min_distance)
    return EpisodeMetrics(
        outcome_kind=rec.outcome.kind,
        time_to_goal=rec.outcome.time_elapsed if rec.outcome.kind == SUCCESS else None,
        min_distance=min_distance_out,
        discomfort_steps=discomfort_steps,
        total_steps=len(rec.frames),
    )


def _mean_std(values: list[float]) -> tuple[float | None, float | None]:
    if not values:
        return None, None
    arr = np.asarray(values)
    return float(arr.mean()), float(arr.std())


def aggregate(ms: list[EpisodeMetrics]) -> AggregateReport:
    """Pool a batch of episodes.

    The discomfort rate is time-weighted across all episodes (total
    uncomfortable frames over total frames), not a mean of per-episode
    ratios. Mean time covers successful episodes only; the mean minimum
    distance covers every episode that had humans.
    """
    if not ms:
        raise EmptyList("no episodes to aggregate")
    n = len(ms)
    success = sum(1 for m in ms if m.outcome_kind == SUCCESS)
    collision = sum(1 for m in ms if m.outcome_kind == COLLISION)
    timeout = sum(1 for m in ms if m.outcome_kind == TIMEOUT)
    mean_time, std_time = _mean_std([m.time_to_goal for m in ms if m.time_to_goal is not None])
    mean_d, std_d = _mean_std([m.min_distance for m in ms if m.min_distance is not None])
    total_steps = sum(m.total_steps for m in ms)
    discomfort = sum(m.discomfort_steps for m in ms) / total_steps if total_steps else 0.0
    return AggregateReport(
        success_rate=success / n,
        collision_rate=collision / n,
        timeout_rate=timeout / n,
        mean_time=mean_time,
        std_time=std_time,
        discomfort_rate=discomfort,
        mean_min_distance=mean_d,
        std_min_distance=std_d,
        episode_count=n,
    )


@dataclass(frozen=True)
class EvalRun:
    """All artifacts of one evaluation sweep."""

    per_env: dict[str, AggregateReport]
    pooled: AggregateReport
    episodes: list[tuple[str, int, int, EpisodeMetrics]]  # (env, index, seed, metrics)
    records: list[EpisodeRecord]


def evaluate(
    robot_policy,
    env_names: list[str],
    mixture: CrowdMixture,
    episodes_per_env: int,
    seed: int,
    cfg: SimConfig | None = None,
    robot_radius: float = 0.3,
    robot_v_pref: float = 1.0,
    human_policies: dict[str, object] | None = None,
    keep_records: bool = False,
    progress=None,
) -> EvalRun:
    """Run seeded episodes over the given environments and aggregate.

    Episode j of environment k always runs with the derived seed
    seed + k * episodes_per_env + j, so results are reproducible and
    episodes are independent of execution order.
    """
    if episodes_per_env < 1:
        raise ValueError("episodes_per_env must be at least 1")
    cfg = cfg if cfg is not None else SimConfig()
    per_env: dict[str, AggregateReport] = {}
    episodes: list[tuple[str, int, int, EpisodeMetrics]] = []
    records: list[EpisodeRecord] = []
    all_metrics: list[EpisodeMetrics] = []
    for k, name in enumerate(env_names):
        env = preset(name)
        env_metrics = []
        for j in range(episodes_per_env):
            ep_seed = seed + k * episodes_per_env + j
            scenario = generate(env, ep_seed)
            rng = np.random.default_rng(ep_seed)
            scenario = assign_policies(scenario, mixture, rng)
            rec = run_episode(
                scenario, robot_policy, cfg, rng=rng,
                robot_radius=robot_radius, robot_v_pref=robot_v_pref,
                human_policies=human_policies,
            )
            m = episode_metrics(rec, cfg)
            env_metrics.append(m)
            episodes.append((name, j, ep_seed, m))
            if keep_records:
                records.append(rec)
            if progress is not None:
                progress(name, j)
        per_env[name] = aggregate(env_metrics)
        all_metrics.extend(env_metrics)
    return EvalRun(per_env, aggregate(all_metrics), episodes, records)


def diverse4_eval(
    robot_policy,
    mixture: CrowdMixture | None = None,
    episodes_per_env: int = 50,
    seed: int = 0,
    cfg: SimConfig | None = None,
    **kwargs,
) -> EvalRun:
    """The four held-out environments with a mixed dynamic crowd by default."""
    if mixture is None:
        mixture = CrowdMixture(orca_fraction=0.5, static_fraction=0.0)
    return evaluate(
        robot_policy, list(DIVERSE4), mixture, episodes_per_env, seed, cfg, **kwargs
    )


REPORT_COLUMNS = (
    "policy", "training", "env", "success", "collision", "timeout",
    "time_mean", "time_std", "discomfort", "dT_mean", "dT_std", "n",
)


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".9g")
    return str(x)


def report_csv_rows(run: EvalRun, policy_label: str, training_label: str = "-") -> list[list[str]]:
    """Rows in the standard report layout, one per environment plus a pooled row."""
    rows = []
    items = list(run.per_env.items()) + [("pooled", run.pooled)]
    for env_name, rep in items:
        rows.append([
            policy_label,
            training_label,
            env_name,
            _fmt(rep.success_rate),
            _fmt(rep.collision_rate),
            _fmt(rep.timeout_rate),
            _fmt(rep.mean_time),
            _fmt(rep.std_time),
            _fmt(rep.discomfort_rate),
            _fmt(rep.mean_min_distance),
            _fmt(rep.std_min_distance),
            _fmt(rep.episode_count),
        ])
    return rows
