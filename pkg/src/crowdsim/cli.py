"""Command-line entry points.

Commands: train, eval, replay, valuemap, gen-scenario. Every command is
deterministic given its config and seed; outputs are written atomically
(temp file, then rename). Exit codes: 0 ok, 1 runtime failure, 2 usage or
config error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import engine, learning, metrics, viz
from .config import ConfigError, RunConfig, load_config
from .engine import record_from_jsonl, record_to_jsonl
from .environments import DIVERSE4, UnknownPreset, generate, preset, preset_names, scenario_to_dict
from .learning import UnknownSchedule, net_from_json, net_to_json
from .metrics import report_csv_rows, REPORT_COLUMNS
from .policies import build_action_set, make_policy

EXIT_OK = 0
EXIT_RUNTIME = 1
EXIT_USAGE = 2


class CliError(Exception):
    def __init__(self, message: str, code: int = EXIT_USAGE):
        super().__init__(message)
        self.code = code


def _write_atomic(path: Path, data: str | bytes) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(path.name + ".tmp")
    mode = "wb" if isinstance(data, bytes) else "w"
    with open(tmp, mode, newline="" if mode == "w" else None) as f:
        f.write(data)
    os.replace(tmp, path)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, float):
        return format(x, ".9g")
    return str(x)


_ENV_ALIASES = {name.lower(): name for name in preset_names()}
_ENV_ALIASES.update({
    "simple-circle": "SimpleCircle",
    "simple-square": "SimpleSquare",
    "large-circle": "LargeCircle",
    "large-square": "LargeSquare",
    "dense-circle": "DenseCircle",
    "dense-square": "DenseSquare",
})


def resolve_envs(spec: str) -> list[str]:
    if spec.lower() == "diverse4":
        return list(DIVERSE4)
    names = []
    for token in spec.split(","):
        token = token.strip()
        if not token:
            continue
        name = _ENV_ALIASES.get(token.lower(), token)
        try:
            preset(name)
        except UnknownPreset:
            raise CliError(
                f"unknown environment {token!r} (expected diverse4 or one of "
                f"{', '.join(sorted(_ENV_ALIASES))})"
            )
        names.append(name)
    if not names:
        raise CliError("no environments selected")
    return names


def _build_robot_policy(cfg: RunConfig, policy_id: str, net_path: str | None):
    net = None
    if policy_id == "value":
        if net_path is None:
            raise CliError("--net is required for the value policy")
        try:
            net = net_from_json(Path(net_path).read_text())
        except FileNotFoundError:
            raise CliError(f"net file not found: {net_path}")
        except (ValueError, KeyError) as exc:
            raise CliError(f"could not load net: {exc}")
    try:
        return make_policy(
            policy_id,
            dt=cfg.sim.dt,
            orca_cfg=cfg.orca,
            sf_params=cfg.social_force,
            stop_radius=cfg.stop_radius,
            net=net,
            reward_params=cfg.reward,
            n_directions=cfg.learning.n_directions,
        )
    except ValueError as exc:
        raise CliError(str(exc))


def cmd_train(cfg: RunConfig, args) -> int:
    try:
        schedule = cfg.schedule()
    except UnknownSchedule as exc:
        raise CliError(f"unknown schedule preset: {exc}")
    out_dir = Path(cfg.out_dir)
    label = cfg.train.schedule.lower()

    def progress(kind, i):
        if args.verbose and kind == "episode" and (i + 1) % 50 == 0:
            print(f"episode {i + 1}/{schedule.total_episodes}", file=sys.stderr)

    net, log = learning.train(
        schedule,
        cfg.seed,
        learn=cfg.learning,
        cfg=cfg.sim,
        reward_params=cfg.reward,
        robot_radius=cfg.robot.radius,
        robot_v_pref=cfg.robot.v_pref,
        progress=progress,
    )
    _write_atomic(out_dir / f"{label}.json", net_to_json(net))
    rows = [
        [r.episode, r.phase, r.outcome, _fmt(r.episode_return), _fmt(r.loss), _fmt(r.epsilon)]
        for r in log
    ]
    _write_atomic(
        out_dir / f"{label}_training_log.csv",
        _csv_text(["episode", "phase", "outcome", "return", "loss", "epsilon"], rows),
    )
    viz.save_training_figure(
        [r.episode for r in log],
        [1.0 if r.outcome == "Success" else 0.0 for r in log],
        [r.loss for r in log],
        str(out_dir / f"{label}_training_curve.png"),
    )
    print(f"wrote {out_dir / (label + '.json')} and {out_dir / (label + '_training_log.csv')}")
    return EXIT_OK


def cmd_eval(cfg: RunConfig, args) -> int:
    policy_id = args.policy or cfg.robot.policy
    robot_policy = _build_robot_policy(cfg, policy_id, args.net)
    env_names = resolve_envs(args.envs or cfg.eval.envs)
    episodes = args.episodes or cfg.eval.episodes_per_env
    save_trajectories = args.save_trajectories or cfg.eval.save_trajectories
    out_dir = Path(cfg.out_dir)

    human_policies = engine.default_human_policies(cfg.sim.dt, cfg.orca, cfg.social_force)

    def progress(env_name, j):
        if args.verbose:
            print(f"{env_name} episode {j}", file=sys.stderr)

    run = metrics.evaluate(
        robot_policy,
        env_names,
        cfg.eval.mixture,
        episodes,
        cfg.seed,
        cfg=cfg.sim,
        robot_radius=cfg.robot.radius,
        robot_v_pref=cfg.robot.v_pref,
        human_policies=human_policies,
        keep_records=save_trajectories,
        progress=progress,
    )

    label = policy_id
    training = args.training_label
    report = _csv_text(REPORT_COLUMNS, report_csv_rows(run, label, training))
    _write_atomic(out_dir / "report.csv", report)

    lines = []
    for env_name, index, ep_seed, m in run.episodes:
        lines.append(json.dumps({
            "env": env_name,
            "episode": index,
            "seed": ep_seed,
            "outcome": m.outcome_kind,
            "time": None if m.time_to_goal is None else float(_fmt(m.time_to_goal)),
            "min_distance": None if m.min_distance is None else float(_fmt(m.min_distance)),
            "discomfort_steps": m.discomfort_steps,
            "total_steps": m.total_steps,
        }))
    _write_atomic(out_dir / "episodes.jsonl", "\n".join(lines) + "\n")

    viz.save_report_figure(run.per_env, run.pooled, str(out_dir / "report.png"), label)

    if save_trajectories:
        traj_dir = out_dir / "trajectories"
        for (env_name, index, ep_seed, _), rec in zip(run.episodes, run.records):
            _write_atomic(traj_dir / f"{env_name}_{index:04d}.jsonl", record_to_jsonl(rec))

    for env_name, rep in list(run.per_env.items()) + [("pooled", run.pooled)]:
        print(
            f"{env_name}: success {rep.success_rate:.2f} collision {rep.collision_rate:.2f} "
            f"timeout {rep.timeout_rate:.2f} n={rep.episode_count}"
        )
    return EXIT_OK


def cmd_replay(cfg: RunConfig, args) -> int:
    try:
        rec = record_from_jsonl(Path(args.trajectory).read_text())
    except FileNotFoundError:
        raise CliError(f"trajectory file not found: {args.trajectory}")
    except (ValueError, KeyError) as exc:
        raise CliError(f"could not parse trajectory: {exc}")
    out_dir = Path(args.svg)
    indices = args.frame if args.frame else list(range(len(rec.frames)))
    for index in indices:
        if not 0 <= index < len(rec.frames):
            raise CliError(
                f"frame {index} out of range (record has {len(rec.frames)} frames)"
            )
    for index in indices:
        _write_atomic(out_dir / f"frame_{index:04d}.svg", viz.frame_svg(rec, index))
    print(f"wrote {len(indices)} SVG frame(s) to {out_dir}")
    return EXIT_OK


def cmd_valuemap(cfg: RunConfig, args) -> int:
    try:
        net = net_from_json(Path(args.net).read_text())
    except FileNotFoundError:
        raise CliError(f"net file not found: {args.net}")
    except (ValueError, KeyError) as exc:
        raise CliError(f"could not load net: {exc}")
    try:
        rec = record_from_jsonl(Path(args.trajectory).read_text())
    except FileNotFoundError:
        raise CliError(f"trajectory file not found: {args.trajectory}")
    except (ValueError, KeyError) as exc:
        raise CliError(f"could not parse trajectory: {exc}")
    if not 0 <= args.frame < len(rec.frames):
        raise CliError(f"frame {args.frame} out of range (record has {len(rec.frames)} frames)")

    obs = frame_observation(rec, args.frame)
    actions = build_action_set(obs.robot.v_pref, cfg.learning.n_directions).actions
    rows = []
    values = []
    for action in actions:
        value = learning.lookahead_value(net, obs, action, rec.dt, cfg.reward)
        speed = action.velocity.norm()
        direction = math.atan2(action.velocity.y, action.velocity.x) if speed > 1e-12 else 0.0
        rows.append([_fmt(speed), _fmt(direction), _fmt(value)])
        values.append(value)
    out_dir = Path(cfg.out_dir)
    _write_atomic(out_dir / "valuemap.csv", _csv_text(["speed", "direction", "value"], rows))
    best = int(np.argmax(values))
    viz.save_valuemap_figure(
        [(float(r[0]), float(r[1]), float(r[2])) for r in rows],
        str(out_dir / "valuemap.png"),
        best_index=best,
    )
    print(f"wrote {out_dir / 'valuemap.csv'} ({len(rows)} actions, argmax row {best})")
    return EXIT_OK


def frame_observation(rec, frame_index: int):
    """Rebuild the robot's observation at a recorded frame."""
    from .policies import Observation, observed

    frame = rec.frames[frame_index]
    return Observation(
        robot=frame.agents[0],
        humans=tuple(observed(h) for h in frame.agents[1:]),
        t=frame.t,
    )


def cmd_gen_scenario(cfg: RunConfig, args) -> int:
    name = resolve_envs(args.env)[0]
    scenario = generate(preset(name), cfg.seed)
    text = json.dumps(scenario_to_dict(scenario), indent=2) + "\n"
    if args.out:
        _write_atomic(Path(args.out), text)
        print(f"wrote {args.out}")
    else:
        print(text, end="")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="crowdsim",
        description="Crowd navigation simulator: train, evaluate, and inspect robot policies.",
    )
    parser.add_argument("-c", "--config", help="JSON config file")
    parser.add_argument("--set", action="append", default=[], metavar="KEY.PATH=VALUE",
                        help="override a config key by dotted path (repeatable)")
    parser.add_argument("--seed", type=int, help="override the run seed")
    parser.add_argument("--out", dest="out_dir", help="override the output directory")
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="train a value-network policy")
    p_train.add_argument("--preset", help="schedule preset: BL, C, D, or CD")
    p_train.add_argument("--episodes", type=int, help="scale the schedule to this many episodes")

    p_eval = sub.add_parser("eval", help="evaluate a robot policy over seeded episodes")
    p_eval.add_argument("--policy", help="orca | social_force | straight_stop | static | value")
    p_eval.add_argument("--envs", help="diverse4, a preset name, or a comma list")
    p_eval.add_argument("--episodes", type=int, help="episodes per environment")
    p_eval.add_argument("--net", help="net JSON (for --policy value)")
    p_eval.add_argument("--save-trajectories", action="store_true",
                        help="also write one trajectory JSONL per episode")
    p_eval.add_argument("--training-label", default="-",
                        help="free-form training column for the report CSV")

    p_replay = sub.add_parser("replay", help="render trajectory frames to SVG")
    p_replay.add_argument("trajectory", help="trajectory JSONL file")
    p_replay.add_argument("--svg", required=True, help="output directory for SVG frames")
    p_replay.add_argument("--frame", type=int, action="append",
                          help="frame index to render (repeatable; default: all)")

    p_map = sub.add_parser("valuemap", help="export lookahead values over the action set")
    p_map.add_argument("--net", required=True, help="net JSON file")
    p_map.add_argument("--trajectory", required=True, help="trajectory JSONL file")
    p_map.add_argument("--frame", type=int, required=True, help="frame index")

    p_gen = sub.add_parser("gen-scenario", help="generate a scenario JSON for (preset, seed)")
    p_gen.add_argument("--env", required=True, help="environment preset name")
    p_gen.add_argument("--out", help="output file (default: stdout)")

    return parser


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)

    overrides = list(args.set)
    if args.seed is not None:
        overrides.append(f"seed={args.seed}")
    if args.out_dir is not None:
        overrides.append(f"out_dir={args.out_dir}")
    if args.command == "train":
        if args.preset is not None:
            overrides.append(f"train.schedule={args.preset}")
        if args.episodes is not None:
            overrides.append(f"train.episodes={args.episodes}")

    try:
        cfg = load_config(args.config, overrides)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    handlers = {
        "train": cmd_train,
        "eval": cmd_eval,
        "replay": cmd_replay,
        "valuemap": cmd_valuemap,
        "gen-scenario": cmd_gen_scenario,
    }
    try:
        return handlers[args.command](cfg, args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except UnknownSchedule as exc:
        print(f"error: unknown schedule preset {exc}", file=sys.stderr)
        return EXIT_USAGE
    except Exception as exc:  # runtime failure, not a usage problem
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
