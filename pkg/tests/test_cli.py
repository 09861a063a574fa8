import csv
import json
import xml.etree.ElementTree as ET
from pathlib import Path

import numpy as np
import pytest

from crowdsim.cli import main, resolve_envs
from crowdsim.engine import CrowdMixture, SimConfig, assign_policies, record_to_jsonl, run_episode
from crowdsim.environments import generate, preset
from crowdsim.learning import FEATURE_DIM, net_to_json, new_net
from crowdsim.policies import OrcaPolicy


def write_trajectory(tmp_path, seed=3, env="SimpleCircle") -> Path:
    spec = generate(preset(env), seed)
    rng = np.random.default_rng(seed)
    spec = assign_policies(spec, CrowdMixture(1.0, 0.0), rng)
    rec = run_episode(spec, OrcaPolicy(), SimConfig(), rng)
    path = tmp_path / "traj.jsonl"
    path.write_text(record_to_jsonl(rec))
    return path


def write_net(tmp_path, seed=0) -> Path:
    net = new_net(FEATURE_DIM, (8,), rng=np.random.default_rng(seed))
    path = tmp_path / "net.json"
    path.write_text(net_to_json(net))
    return path


class TestResolveEnvs:
    def test_diverse4(self):
        assert resolve_envs("diverse4") == [
            "LargeCircle", "LargeSquare", "DenseCircle", "DenseSquare",
        ]

    def test_kebab_names(self):
        assert resolve_envs("simple-circle") == ["SimpleCircle"]
        assert resolve_envs("SimpleSquare,dense-circle") == ["SimpleSquare", "DenseCircle"]

    def test_unknown(self):
        from crowdsim.cli import CliError

        with pytest.raises(CliError):
            resolve_envs("mega-hexagon")


class TestTrainCommand:
    def test_tiny_run_writes_artifacts(self, tmp_path):
        code = main([
            "--out", str(tmp_path), "--seed", "1",
            "--set", "learning.hidden_widths=[8]",
            "--set", "learning.batch_size=16",
            "--set", "learning.il_sweeps=1",
            "train", "--preset", "CD", "--episodes", "4",
        ])
        assert code == 0
        net_file = tmp_path / "cd.json"
        log_file = tmp_path / "cd_training_log.csv"
        assert net_file.exists() and log_file.exists()
        assert (tmp_path / "cd_training_curve.png").exists()
        rows = list(csv.reader(log_file.open()))
        assert rows[0] == ["episode", "phase", "outcome", "return", "loss", "epsilon"]
        assert len(rows) == 5  # header + 4 episodes
        data = json.loads(net_file.read_text())
        assert set(data.keys()) == {"widths", "weights", "biases"}

    def test_unknown_schedule_preset_exits_2(self, tmp_path, capsys):
        code = main(["--out", str(tmp_path), "train", "--preset", "ZZ"])
        assert code == 2
        assert "unknown schedule preset" in capsys.readouterr().err

    def test_byte_identical_rerun(self, tmp_path):
        args = [
            "--seed", "3",
            "--set", "learning.hidden_widths=[8]",
            "--set", "learning.batch_size=16",
            "--set", "learning.il_sweeps=1",
            "train", "--preset", "BL", "--episodes", "3",
        ]
        assert main(["--out", str(tmp_path / "a")] + args) == 0
        assert main(["--out", str(tmp_path / "b")] + args) == 0
        log_a = (tmp_path / "a" / "bl_training_log.csv").read_bytes()
        log_b = (tmp_path / "b" / "bl_training_log.csv").read_bytes()
        assert log_a == log_b
        assert (tmp_path / "a" / "bl.json").read_bytes() == (tmp_path / "b" / "bl.json").read_bytes()


class TestEvalCommand:
    def test_eval_writes_report_and_jsonl(self, tmp_path):
        code = main([
            "--out", str(tmp_path), "--seed", "9",
            "eval", "--policy", "orca", "--envs", "simple-circle", "--episodes", "3",
        ])
        assert code == 0
        rows = list(csv.reader((tmp_path / "report.csv").open()))
        assert rows[0][:3] == ["policy", "training", "env"]
        assert len(rows) == 3  # header + env row + pooled row
        assert rows[1][2] == "SimpleCircle"
        assert rows[2][2] == "pooled"
        lines = (tmp_path / "episodes.jsonl").read_text().strip().split("\n")
        assert len(lines) == 3
        parsed = json.loads(lines[0])
        assert parsed["env"] == "SimpleCircle"
        assert (tmp_path / "report.png").exists()

    def test_eval_deterministic_outputs(self, tmp_path):
        args = ["--seed", "4", "eval", "--policy", "straight_stop",
                "--envs", "simple-circle", "--episodes", "2"]
        assert main(["--out", str(tmp_path / "a")] + args) == 0
        assert main(["--out", str(tmp_path / "b")] + args) == 0
        for name in ("report.csv", "episodes.jsonl"):
            assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()

    def test_eval_value_policy_needs_net(self, tmp_path, capsys):
        code = main(["--out", str(tmp_path), "eval", "--policy", "value",
                     "--envs", "simple-circle", "--episodes", "1"])
        assert code == 2

    def test_eval_value_policy_with_net(self, tmp_path):
        net_path = write_net(tmp_path)
        code = main([
            "--out", str(tmp_path), "--seed", "2",
            "eval", "--policy", "value", "--net", str(net_path),
            "--envs", "simple-circle", "--episodes", "1",
        ])
        assert code == 0

    def test_save_trajectories(self, tmp_path):
        code = main([
            "--out", str(tmp_path), "--seed", "11",
            "eval", "--policy", "orca", "--envs", "simple-circle", "--episodes", "2",
            "--save-trajectories",
        ])
        assert code == 0
        files = sorted((tmp_path / "trajectories").glob("*.jsonl"))
        assert len(files) == 2


class TestReplayCommand:
    def test_renders_all_frames(self, tmp_path):
        traj = write_trajectory(tmp_path)
        out = tmp_path / "svg"
        code = main(["replay", str(traj), "--svg", str(out)])
        assert code == 0
        frames = json.loads(traj.read_text().splitlines()[1])
        svgs = sorted(out.glob("frame_*.svg"))
        n_lines = len(traj.read_text().strip().splitlines())
        assert len(svgs) == n_lines - 2  # header and footer lines are not frames

    def test_single_frame_radii_match_record(self, tmp_path):
        traj = write_trajectory(tmp_path)
        out = tmp_path / "svg"
        code = main(["replay", str(traj), "--svg", str(out), "--frame", "0"])
        assert code == 0
        svg = out / "frame_0000.svg"
        tree = ET.parse(svg)
        ns = {"s": "http://www.w3.org/2000/svg"}
        circles = tree.findall(".//s:circle", ns)
        frame0 = json.loads(traj.read_text().splitlines()[1])
        recorded = sorted(a["r"] for a in frame0["agents"])
        rendered = sorted(float(c.get("r")) for c in circles)
        assert rendered == pytest.approx(recorded)

    def test_out_of_range_frame_exits_2(self, tmp_path, capsys):
        traj = write_trajectory(tmp_path)
        n_frames = len(traj.read_text().strip().splitlines()) - 2
        code = main(["replay", str(traj), "--svg", str(tmp_path / "svg"),
                     "--frame", str(n_frames + 4)])
        assert code == 2
        assert "out of range" in capsys.readouterr().err

    def test_missing_file_exits_2(self, tmp_path):
        code = main(["replay", str(tmp_path / "nope.jsonl"), "--svg", str(tmp_path)])
        assert code == 2


class TestValuemapCommand:
    def test_rows_cover_action_set(self, tmp_path):
        traj = write_trajectory(tmp_path)
        net = write_net(tmp_path)
        code = main(["--out", str(tmp_path), "valuemap",
                     "--net", str(net), "--trajectory", str(traj), "--frame", "0"])
        assert code == 0
        rows = list(csv.reader((tmp_path / "valuemap.csv").open()))
        assert rows[0] == ["speed", "direction", "value"]
        assert len(rows) - 1 == 81  # null action + 5 speeds x 16 directions
        assert (tmp_path / "valuemap.png").exists()

    def test_argmax_matches_value_policy(self, tmp_path):
        from crowdsim.cli import frame_observation
        from crowdsim.engine import record_from_jsonl
        from crowdsim.learning import net_from_json
        from crowdsim.policies import ValuePolicy

        traj = write_trajectory(tmp_path, seed=8)
        net_path = write_net(tmp_path, seed=5)
        code = main(["--out", str(tmp_path), "valuemap",
                     "--net", str(net_path), "--trajectory", str(traj), "--frame", "2"])
        assert code == 0
        rows = list(csv.reader((tmp_path / "valuemap.csv").open()))[1:]
        values = [float(r[2]) for r in rows]
        best = int(np.argmax(values))

        rec = record_from_jsonl(traj.read_text())
        net = net_from_json(net_path.read_text())
        obs = frame_observation(rec, 2)
        policy = ValuePolicy(net, dt=rec.dt)
        chosen = policy.act(obs, np.random.default_rng(0))
        import math

        speed = chosen.velocity.norm()
        direction = math.atan2(chosen.velocity.y, chosen.velocity.x) if speed > 1e-12 else 0.0
        # CSV values carry 9 significant digits
        assert float(rows[best][0]) == pytest.approx(speed, abs=1e-7)
        assert float(rows[best][1]) == pytest.approx(direction, abs=1e-7)

    def test_bad_frame_exits_2(self, tmp_path):
        traj = write_trajectory(tmp_path)
        net = write_net(tmp_path)
        code = main(["--out", str(tmp_path), "valuemap",
                     "--net", str(net), "--trajectory", str(traj), "--frame", "100000"])
        assert code == 2


class TestGenScenario:
    def test_writes_scenario_json(self, tmp_path):
        out = tmp_path / "scenario.json"
        code = main(["--seed", "5", "gen-scenario", "--env", "dense-square", "--out", str(out)])
        assert code == 0
        data = json.loads(out.read_text())
        assert data["preset"] == "DenseSquare"
        assert data["seed"] == 5
        assert len(data["humans"]) == 20

    def test_unknown_env_exits_2(self, tmp_path):
        code = main(["gen-scenario", "--env", "pentagon", "--out", str(tmp_path / "x.json")])
        assert code == 2


def test_crowdsim_seed_env_var(tmp_path, monkeypatch):
    monkeypatch.setenv("CROWDSIM_SEED", "123")
    out = tmp_path / "scenario.json"
    code = main(["gen-scenario", "--env", "simple-circle", "--out", str(out)])
    assert code == 0
    assert json.loads(out.read_text())["seed"] == 123
