import math

import numpy as np
import pytest

from crowdsim.core import AgentState, Vec2
from crowdsim.orca import OrcaConfig, orca_velocity
from crowdsim.policies import (
    Observation,
    ObservedHuman,
    OrcaPolicy,
    RandomPolicy,
    SocialForcePolicy,
    StaticPolicy,
    StraightStopPolicy,
    build_action_set,
    make_policy,
    min_surface_distance,
    observed,
)
from crowdsim.social_force import SFParams, sf_velocity

RNG = np.random.default_rng(0)


def obs_with(humans, robot=None, v_pref=1.0):
    if robot is None:
        robot = AgentState(Vec2(0, 0), Vec2(0, 0), 0.3, v_pref, Vec2(0, 4))
    return Observation(robot=robot, humans=tuple(humans), t=0.0)


def human(px, py, vx=0.0, vy=0.0, r=0.3):
    return ObservedHuman(Vec2(px, py), Vec2(vx, vy), r)


class TestActionSet:
    def test_count(self):
        s = build_action_set(1.0, 16)
        assert len(s.actions) == 81
        assert s.actions[0].velocity.norm() == 0.0

    def test_speed_increments(self):
        s = build_action_set(1.0, 16)
        speeds = sorted({round(a.velocity.norm(), 9) for a in s.actions})
        assert speeds == [0.0, 0.2, 0.4, 0.6, 0.8, 1.0]

    def test_closed_under_rotation(self):
        n = 8
        s = build_action_set(1.0, n)
        vecs = {(round(a.velocity.x, 9), round(a.velocity.y, 9)) for a in s.actions}
        step = 2 * math.pi / n
        rotated = {
            (round(v.x * math.cos(step) - v.y * math.sin(step), 9),
             round(v.x * math.sin(step) + v.y * math.cos(step), 9))
            for v in (a.velocity for a in s.actions)
        }
        assert vecs == rotated

    def test_scales_with_v_pref(self):
        s = build_action_set(1.5, 16)
        assert max(a.velocity.norm() for a in s.actions) == pytest.approx(1.5)

    def test_minimum_directions(self):
        with pytest.raises(ValueError):
            build_action_set(1.0, 3)


class TestStaticPolicy:
    def test_always_zero(self):
        p = StaticPolicy()
        act = p.act(obs_with([human(1, 1)]), RNG)
        assert act.velocity.norm() == 0.0


class TestStraightStop:
    def test_goes_when_clear(self):
        p = StraightStopPolicy(0.7)
        act = p.act(obs_with([human(0, 1.6)]), RNG)  # surface distance 1.0
        assert act.velocity.y == pytest.approx(1.0)
        assert act.velocity.x == pytest.approx(0.0)

    def test_stops_when_close(self):
        p = StraightStopPolicy(0.7)
        act = p.act(obs_with([human(0, 1.1)]), RNG)  # surface distance 0.5
        assert act.velocity.norm() == 0.0

    def test_min_surface_distance(self):
        obs = obs_with([human(0, 1.6), human(1.1, 0)])
        assert min_surface_distance(obs) == pytest.approx(0.5)

    def test_attains_success_on_orca_crowd(self):
        # the flow of reciprocal-avoidance humans opens around a stopped robot
        from crowdsim.engine import CrowdMixture, SimConfig, assign_policies, run_episode
        from crowdsim.environments import generate, preset

        wins = 0
        for seed in range(20):
            spec = generate(preset("SimpleCircle"), seed)
            rng = np.random.default_rng(seed)
            spec = assign_policies(spec, CrowdMixture(1.0, 0.0), rng)
            rec = run_episode(spec, StraightStopPolicy(0.7), SimConfig(), rng)
            wins += rec.outcome.kind == "Success"
        assert wins > 0


class TestWrapperParity:
    def test_orca_policy_matches_module(self):
        robot = AgentState(Vec2(0, -2), Vec2(0.2, 0.5), 0.3, 1.0, Vec2(0, 4))
        humans = [human(0.5, 0.0, -0.3, 0.1), human(-1.0, 1.0, 0.2, -0.2)]
        obs = obs_with(humans, robot=robot)
        p = OrcaPolicy(OrcaConfig(), dt=0.25)
        a = p.act(obs, RNG)
        b = orca_velocity(robot, humans, OrcaConfig(), 0.25)
        assert (a.velocity.x, a.velocity.y) == (b.velocity.x, b.velocity.y)

    def test_sf_policy_matches_module(self):
        robot = AgentState(Vec2(0, -2), Vec2(0.2, 0.5), 0.3, 1.0, Vec2(0, 4))
        humans = [human(0.5, 0.0, -0.3, 0.1)]
        obs = obs_with(humans, robot=robot)
        p = SocialForcePolicy(SFParams(), dt=0.25)
        a = p.act(obs, RNG)
        b = sf_velocity(robot, humans, SFParams(), 0.25)
        assert (a.velocity.x, a.velocity.y) == (b.velocity.x, b.velocity.y)


class TestRandomPolicy:
    def test_draws_from_action_set(self):
        p = RandomPolicy()
        allowed = {
            (round(a.velocity.x, 12), round(a.velocity.y, 12))
            for a in build_action_set(1.0, 16).actions
        }
        rng = np.random.default_rng(3)
        for _ in range(50):
            act = p.act(obs_with([]), rng)
            assert (round(act.velocity.x, 12), round(act.velocity.y, 12)) in allowed

    def test_deterministic_given_rng(self):
        p = RandomPolicy()
        a = [p.act(obs_with([]), np.random.default_rng(9)).velocity for _ in range(3)]
        assert all((v.x, v.y) == (a[0].x, a[0].y) for v in a)


class TestMakePolicy:
    def test_ids(self):
        for pid in ("orca", "social_force", "straight_stop", "static"):
            assert make_policy(pid) is not None

    def test_value_requires_net(self):
        with pytest.raises(ValueError):
            make_policy("value")

    def test_unknown_id(self):
        with pytest.raises(ValueError):
            make_policy("teleport")

    def test_policy_speed_contract(self):
        # every rule-based policy respects the robot's preferred speed
        rng = np.random.default_rng(33)
        for pid in ("orca", "social_force", "straight_stop", "static"):
            p = make_policy(pid)
            for _ in range(30):
                robot = AgentState(
                    Vec2(rng.uniform(-2, 2), rng.uniform(-2, 2)),
                    Vec2(rng.uniform(-1, 1), rng.uniform(-1, 1)),
                    0.3, rng.uniform(0.5, 1.5),
                    Vec2(rng.uniform(-4, 4), rng.uniform(-4, 4)),
                )
                if robot.dist_to_goal() < 1e-6:
                    continue
                humans = [human(rng.uniform(-2, 2), rng.uniform(-2, 2))]
                humans = [h for h in humans if (h.position - robot.position).norm() > 1e-6]
                act = p.act(obs_with(humans, robot=robot), rng)
                assert act.velocity.norm() <= robot.v_pref + 1e-9


def test_observed_strips_goal():
    state = AgentState(Vec2(1, 2), Vec2(0.1, 0.2), 0.4, 1.2, Vec2(9, 9))
    o = observed(state)
    assert not hasattr(o, "goal")
    assert o.position == state.position
    assert o.velocity == state.velocity
    assert o.radius == state.radius
