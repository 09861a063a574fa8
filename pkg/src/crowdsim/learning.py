"""Desk-scale value learning for the robot policy.

A small feedforward network (rectifier hidden layers, linear scalar output,
manual analytic gradients) approximates the state value. The robot-centric
featurization makes the value invariant to global translation and rotation.
Training follows the usual two-stage recipe: regression to discounted
returns of collision-avoidance demonstrations, then temporal-difference
learning with an epsilon-greedy rollout policy over a replay buffer, with
the environment and crowd composition driven by a phased schedule.
"""

from __future__ import annotations

import json
import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .core import COLLISION, SUCCESS, TIMEOUT, Action, EpisodeRecord, min_segment_distance
from .engine import CrowdMixture, SimConfig, Simulation, assign_policies, default_human_policies
from .environments import generate, preset
from .policies import Observation, ObservedHuman, ValuePolicy

K_HUMAN_SLOTS = 10
SLOT_WIDTH = 8   # rel pos (2), rel vel (2), radius, radius sum, surface dist, presence
BASE_WIDTH = 5   # goal distance, v_pref, own radius, own velocity (2)
FEATURE_DIM = BASE_WIDTH + K_HUMAN_SLOTS * SLOT_WIDTH


class ShapeMismatch(ValueError):
    pass


class EmptyDemos(ValueError):
    pass


@dataclass(frozen=True)
class RewardParams:
    success_reward: float = 1.0
    collision_penalty: float = -0.25
    discomfort_penalty_scale: float = 0.5   # 1/m
    discomfort_dist: float = 0.2            # m
    gamma: float = 0.9

    def __post_init__(self) -> None:
        if self.success_reward <= 0:
            raise ValueError("success_reward must be positive")
        if self.collision_penalty >= 0:
            raise ValueError("collision_penalty must be negative")
        if not 0.0 < self.gamma < 1.0:
            raise ValueError("gamma must be in (0, 1)")


def _min_step_distance(prev: Observation, next_obs: Observation) -> float:
    """Closest robot-human surface distance anywhere along the step."""
    best = math.inf
    for h_prev, h_next in zip(prev.humans, next_obs.humans):
        d = (
            min_segment_distance(
                prev.robot.position, next_obs.robot.position,
                h_prev.position, h_next.position,
            )
            - prev.robot.radius
            - h_prev.radius
        )
        if d < best:
            best = d
    return best


def reached_goal(obs: Observation) -> bool:
    return (obs.robot.position - obs.robot.goal).norm() < obs.robot.radius


def reward(prev: Observation, action: Action, next_obs: Observation, dt: float,
           p: RewardParams) -> float:
    """Sparse terminal reward plus a proximity penalty inside the comfort band.

    Distances are taken along the whole step, consistent with the engine's
    continuous collision check.
    """
    if reached_goal(next_obs):
        return p.success_reward
    d_min = _min_step_distance(prev, next_obs)
    if d_min < 0.0:
        return p.collision_penalty
    if d_min < p.discomfort_dist:
        return p.discomfort_penalty_scale * (d_min - p.discomfort_dist) * dt
    return 0.0


def is_terminal(prev: Observation, next_obs: Observation) -> bool:
    return reached_goal(next_obs) or _min_step_distance(prev, next_obs) < 0.0


def featurize(obs: Observation) -> np.ndarray:
    """Robot-centric features: frame rotated so the goal sits on the +x axis.

    Humans occupy K_HUMAN_SLOTS fixed slots sorted by surface distance
    (nearest first), each with a trailing presence flag; missing slots stay
    zero, extra humans are dropped.
    """
    robot = obs.robot
    gx = robot.goal.x - robot.position.x
    gy = robot.goal.y - robot.position.y
    d_goal = math.hypot(gx, gy)
    if d_goal > 1e-12:
        c, s = gx / d_goal, gy / d_goal
    else:
        c, s = 1.0, 0.0
    # rotate by -angle(goal): (x, y) -> (c x + s y, -s x + c y)
    out = [0.0] * FEATURE_DIM
    out[0] = d_goal
    out[1] = robot.v_pref
    out[2] = robot.radius
    out[3] = c * robot.velocity.x + s * robot.velocity.y
    out[4] = -s * robot.velocity.x + c * robot.velocity.y

    ranked = sorted(
        (
            (
                (h.position - robot.position).norm() - h.radius - robot.radius,
                h,
            )
            for h in obs.humans
        ),
        key=lambda pair: pair[0],
    )[:K_HUMAN_SLOTS]
    for k, (surface, h) in enumerate(ranked):
        base = BASE_WIDTH + k * SLOT_WIDTH
        px = h.position.x - robot.position.x
        py = h.position.y - robot.position.y
        vx = h.velocity.x - robot.velocity.x
        vy = h.velocity.y - robot.velocity.y
        out[base + 0] = c * px + s * py
        out[base + 1] = -s * px + c * py
        out[base + 2] = c * vx + s * vy
        out[base + 3] = -s * vx + c * vy
        out[base + 4] = h.radius
        out[base + 5] = h.radius + robot.radius
        out[base + 6] = surface
        out[base + 7] = 1.0
    return np.asarray(out, dtype=np.float64)


class ValueNet:
    """Fully-connected scalar-output network with analytic gradients."""

    def __init__(self, widths: list[int], rng: np.random.Generator | None = None):
        if len(widths) < 2 or widths[-1] != 1:
            raise ValueError("widths must be [input, hidden..., 1]")
        if any(w < 1 for w in widths):
            raise ValueError("all widths must be positive")
        self.widths = list(widths)
        if rng is None:
            rng = np.random.default_rng(0)
        self.weights = [
            rng.normal(0.0, 1.0 / math.sqrt(n_in), size=(n_out, n_in))
            for n_in, n_out in zip(widths[:-1], widths[1:])
        ]
        self.biases = [np.zeros(n_out) for n_out in widths[1:]]

    @property
    def input_dim(self) -> int:
        return self.widths[0]

    def forward_batch(self, x: np.ndarray) -> np.ndarray:
        """(B, input_dim) -> (B,) values."""
        a = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ w.T + b, 0.0)
        return (a @ self.weights[-1].T + self.biases[-1]).ravel()

    def _forward_cached(self, x: np.ndarray):
        activations = [x]
        a = x
        for w, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ w.T + b, 0.0)
            activations.append(a)
        out = (a @ self.weights[-1].T + self.biases[-1]).ravel()
        return out, activations

    def _backprop(self, activations: list[np.ndarray], delta_out: np.ndarray):
        """Gradients for a (B,) upstream derivative on the scalar output."""
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        delta = delta_out[:, None]  # (B, 1)
        for layer in range(len(self.weights) - 1, -1, -1):
            grads_w[layer] = delta.T @ activations[layer]
            grads_b[layer] = delta.sum(axis=0)
            if layer > 0:
                delta = (delta @ self.weights[layer]) * (activations[layer] > 0.0)
        return grads_w, grads_b

    def sgd_step(self, x: np.ndarray, y: np.ndarray, lr: float) -> float:
        """One plain gradient-descent step on mean squared error; returns the loss."""
        pred, activations = self._forward_cached(x)
        err = pred - y
        loss = float(np.mean(err * err))
        grads_w, grads_b = self._backprop(activations, 2.0 * err / len(y))
        for w, gw in zip(self.weights, grads_w):
            w -= lr * gw
        for b, gb in zip(self.biases, grads_b):
            b -= lr * gb
        return loss

    def to_dict(self) -> dict:
        return {
            "widths": self.widths,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "ValueNet":
        net = cls(data["widths"])
        net.weights = [np.asarray(w, dtype=np.float64) for w in data["weights"]]
        net.biases = [np.asarray(b, dtype=np.float64) for b in data["biases"]]
        for w, b, n_in, n_out in zip(net.weights, net.biases, net.widths[:-1], net.widths[1:]):
            if w.shape != (n_out, n_in) or b.shape != (n_out,):
                raise ShapeMismatch("stored parameter shapes disagree with widths")
        return net


def new_net(input_dim: int = FEATURE_DIM, hidden_widths=(100, 100),
            rng: np.random.Generator | None = None) -> ValueNet:
    return ValueNet([input_dim, *hidden_widths, 1], rng=rng)


def value_forward(net: ValueNet, features: np.ndarray) -> float:
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (net.input_dim,):
        raise ShapeMismatch(f"expected {net.input_dim} features, got {features.shape}")
    return float(net.forward_batch(features[None, :])[0])


def value_backward(net: ValueNet, features: np.ndarray):
    """Exact gradient of the scalar output w.r.t. every weight and bias.

    Returns (grads_weights, grads_biases) with the same shapes as the
    parameters.
    """
    features = np.asarray(features, dtype=np.float64)
    if features.shape != (net.input_dim,):
        raise ShapeMismatch(f"expected {net.input_dim} features, got {features.shape}")
    _, activations = net._forward_cached(features[None, :])
    grads_w, grads_b = net._backprop(activations, np.ones(1))
    return grads_w, grads_b


def net_to_json(net: ValueNet) -> str:
    return json.dumps(net.to_dict())


def net_from_json(text: str) -> ValueNet:
    return ValueNet.from_dict(json.loads(text))


def discount_factor(p: RewardParams, dt: float, v_pref: float) -> float:
    """Per-step discount gamma^(dt * v_pref), normalizing across preferred speeds."""
    return p.gamma ** (dt * v_pref)


def propagate(obs: Observation, action: Action, dt: float) -> Observation:
    """One-step prediction: robot takes the action, humans hold their velocity."""
    robot = obs.robot.moved(obs.robot.position + action.velocity * dt, action.velocity)
    humans = tuple(
        ObservedHuman(h.position + h.velocity * dt, h.velocity, h.radius)
        for h in obs.humans
    )
    return Observation(robot, humans, obs.t + dt)


def lookahead_value(net: ValueNet, obs: Observation, action: Action, dt: float,
                    p: RewardParams) -> float:
    """Reward of the predicted transition plus the discounted next-state value."""
    next_obs = propagate(obs, action, dt)
    r = reward(obs, action, next_obs, dt, p)
    if is_terminal(obs, next_obs):
        return r
    return r + discount_factor(p, dt, obs.robot.v_pref) * value_forward(net, featurize(next_obs))


@dataclass(frozen=True)
class Experience:
    features: np.ndarray
    td_target: float


class ReplayBuffer:
    """Bounded FIFO buffer of training experiences."""

    def __init__(self, capacity: int):
        if capacity < 1:
            raise ValueError("capacity must be positive")
        self.capacity = capacity
        self._items: deque[Experience] = deque(maxlen=capacity)

    def push(self, exp: Experience) -> None:
        self._items.append(exp)

    def __len__(self) -> int:
        return len(self._items)

    def sample(self, rng: np.random.Generator, batch_size: int):
        idx = rng.integers(0, len(self._items), size=batch_size)
        x = np.stack([self._items[i].features for i in idx])
        y = np.asarray([self._items[i].td_target for i in idx])
        return x, y


@dataclass(frozen=True)
class Phase:
    start: int            # first episode of the phase, inclusive
    end: int              # last episode, exclusive
    preset_name: str
    mixture: CrowdMixture


@dataclass(frozen=True)
class TrainingSchedule:
    phases: tuple[Phase, ...]
    total_episodes: int
    epsilon_start: float = 0.5
    epsilon_end: float = 0.1
    epsilon_decay_episodes: int = 4000
    il_episodes: int = 300

    def __post_init__(self) -> None:
        expected = 0
        for phase in self.phases:
            if phase.start != expected or phase.end <= phase.start:
                raise ValueError("phases must partition [0, total_episodes)")
            expected = phase.end
        if expected != self.total_episodes:
            raise ValueError("phases must cover exactly total_episodes")

    def phase_for(self, episode: int) -> Phase:
        for phase in self.phases:
            if phase.start <= episode < phase.end:
                return phase
        raise IndexError(f"episode {episode} outside [0, {self.total_episodes})")

    def phase_index(self, episode: int) -> int:
        return self.phases.index(self.phase_for(episode))

    def epsilon_at(self, episode: int) -> float:
        frac = min(1.0, episode / self.epsilon_decay_episodes)
        return self.epsilon_start + (self.epsilon_end - self.epsilon_start) * frac

    def scaled(self, total_episodes: int) -> "TrainingSchedule":
        """Shrink or stretch the schedule, keeping phase proportions.

        The imitation-learning episode count is left alone; it is a warm
        start, not part of the phased budget.
        """
        if total_episodes == self.total_episodes:
            return self
        ratio = total_episodes / self.total_episodes
        boundaries = [round(p.end * ratio) for p in self.phases]
        boundaries[-1] = total_episodes
        phases = []
        start = 0
        for phase, end in zip(self.phases, boundaries):
            if end > start:
                phases.append(Phase(start, end, phase.preset_name, phase.mixture))
                start = end
        return TrainingSchedule(
            tuple(phases),
            total_episodes,
            self.epsilon_start,
            self.epsilon_end,
            max(1, round(self.epsilon_decay_episodes * ratio)),
            self.il_episodes,
        )


SCHEDULE_PRESETS = ("BL", "C", "D", "CD")


class UnknownSchedule(KeyError):
    pass


def schedule_preset(name: str, static_fraction: float = 0.3) -> TrainingSchedule:
    """The four training regimes, 10000 episodes each.

    BL trains only on the simple circle crossing with a uniform crowd; D
    mixes the two pedestrian models from the start; C switches environment
    type halfway and parks part of the crowd; CD does both.
    """
    all_orca = CrowdMixture(1.0, 0.0)
    mixed = CrowdMixture(0.5, 0.0)
    if name == "BL":
        phases = (Phase(0, 10000, "SimpleCircle", all_orca),)
    elif name == "D":
        phases = (Phase(0, 10000, "SimpleCircle", mixed),)
    elif name == "C":
        phases = (
            Phase(0, 5000, "SimpleCircle", all_orca),
            Phase(5000, 10000, "SimpleSquare", CrowdMixture(1.0, static_fraction)),
        )
    elif name == "CD":
        phases = (
            Phase(0, 5000, "SimpleCircle", all_orca),
            Phase(5000, 10000, "SimpleSquare", CrowdMixture(0.5, static_fraction)),
        )
    else:
        raise UnknownSchedule(f"unknown schedule preset: {name!r}")
    return TrainingSchedule(phases, 10000)


@dataclass(frozen=True)
class LearnConfig:
    hidden_widths: tuple[int, ...] = (100, 100)
    learning_rate: float = 1e-3
    batch_size: int = 100
    replay_capacity: int = 100_000
    il_sweeps: int = 20
    n_directions: int = 16


def demo_dataset(demos: list[EpisodeRecord], p: RewardParams):
    """Features and discounted returns-to-go for every non-final demo frame."""
    features = []
    targets = []
    for rec in demos:
        disc = discount_factor(p, rec.dt, rec.robot_v_pref)
        observations = [
            Observation(
                robot=frame.robot,
                humans=tuple(ObservedHuman(h.position, h.velocity, h.radius) for h in frame.humans),
                t=frame.t,
            )
            for frame in rec.frames
        ]
        rewards = [
            reward(observations[i], Action(rec.frames[i + 1].robot.velocity), observations[i + 1], rec.dt, p)
            for i in range(len(observations) - 1)
        ]
        g = 0.0
        returns = [0.0] * len(rewards)
        for i in range(len(rewards) - 1, -1, -1):
            g = rewards[i] + disc * g
            returns[i] = g
        for i in range(len(rewards)):
            features.append(featurize(observations[i]))
            targets.append(returns[i])
    if not features:
        raise EmptyDemos("no demonstration transitions to fit")
    return np.stack(features), np.asarray(targets)


def il_warmstart(net: ValueNet, demos: list[EpisodeRecord], p: RewardParams,
                 rng: np.random.Generator, sweeps: int = 20, batch_size: int = 100,
                 learning_rate: float = 1e-3) -> tuple[ValueNet, list[float]]:
    """Fit the net to demonstration returns by mini-batch gradient descent.

    Returns the net and the mean loss of each sweep.
    """
    if not demos:
        raise EmptyDemos("no demonstrations given")
    x, y = demo_dataset(demos, p)
    n = len(y)
    sweep_losses = []
    for _ in range(sweeps):
        order = rng.permutation(n)
        for lo in range(0, n, batch_size):
            idx = order[lo:lo + batch_size]
            net.sgd_step(x[idx], y[idx], learning_rate)
        err = net.forward_batch(x) - y
        sweep_losses.append(float(np.mean(err * err)))
    return net, sweep_losses


@dataclass(frozen=True)
class TrainLogRow:
    episode: int
    phase: int
    outcome: str
    episode_return: float
    loss: float
    epsilon: float


def _rollout_training_episode(
    net: ValueNet,
    scenario,
    mixture: CrowdMixture,
    epsilon: float,
    ep_rng: np.random.Generator,
    master_rng: np.random.Generator,
    buffer: ReplayBuffer,
    p: RewardParams,
    cfg: SimConfig,
    learn: LearnConfig,
    robot_radius: float,
    robot_v_pref: float,
):
    scenario = assign_policies(scenario, mixture, ep_rng)
    policy = ValuePolicy(net, p, dt=cfg.dt, n_directions=learn.n_directions, epsilon=epsilon)
    sim = Simulation(
        scenario, policy, default_human_policies(cfg.dt), cfg,
        robot_radius=robot_radius, robot_v_pref=robot_v_pref, rng=ep_rng,
    )
    time_limit = cfg.resolve_time_limit(scenario.preset.name)
    disc = discount_factor(p, cfg.dt, robot_v_pref)

    total_reward = 0.0
    losses = []
    outcome = None
    while outcome is None:
        obs = sim.observation()
        action = policy.act(obs, ep_rng)
        features = featurize(obs)
        events = sim.step(action)
        next_obs = sim.observation()
        r = reward(obs, action, next_obs, cfg.dt, p)
        total_reward += r

        success = sim.robot_at_goal()
        collided = any(e.kind == "collision" for e in events)
        if success or collided:
            target = r
        else:
            target = r + disc * value_forward(net, featurize(next_obs))
        buffer.push(Experience(features, target))

        if len(buffer) >= learn.batch_size:
            x, y = buffer.sample(master_rng, learn.batch_size)
            losses.append(net.sgd_step(x, y, learn.learning_rate))

        if success:
            outcome = SUCCESS
        elif collided:
            outcome = COLLISION
        elif sim.t >= time_limit - 1e-9:
            outcome = TIMEOUT
    return outcome, total_reward, (float(np.mean(losses)) if losses else math.nan)


def train(
    schedule: TrainingSchedule,
    seed: int,
    learn: LearnConfig | None = None,
    cfg: SimConfig | None = None,
    reward_params: RewardParams | None = None,
    robot_radius: float = 0.3,
    robot_v_pref: float = 1.0,
    progress=None,
) -> tuple[ValueNet, list[TrainLogRow]]:
    """Imitation warm-start followed by phased temporal-difference training.

    Fully deterministic for a given seed: the master stream drives the
    network initialization, demo fitting, and replay sampling, while episode
    e always derives its own stream from seed + 1 + e.
    """
    from .policies import OrcaPolicy

    learn = learn if learn is not None else LearnConfig()
    cfg = cfg if cfg is not None else SimConfig()
    p = reward_params if reward_params is not None else RewardParams()

    master = np.random.default_rng(seed)
    net = new_net(FEATURE_DIM, learn.hidden_widths, rng=master)

    buffer = ReplayBuffer(learn.replay_capacity)
    if schedule.il_episodes > 0:
        from .engine import run_episode

        first = schedule.phases[0]
        demos = []
        for i in range(schedule.il_episodes):
            demo_seed = seed + 1 + schedule.total_episodes + i
            scenario = generate(preset(first.preset_name), demo_seed)
            ep_rng = np.random.default_rng(demo_seed)
            scenario = assign_policies(scenario, first.mixture, ep_rng)
            demos.append(
                run_episode(
                    scenario, OrcaPolicy(dt=cfg.dt), cfg, rng=ep_rng,
                    robot_radius=robot_radius, robot_v_pref=robot_v_pref,
                )
            )
        il_warmstart(net, demos, p, master, sweeps=learn.il_sweeps,
                     batch_size=learn.batch_size, learning_rate=learn.learning_rate)
        # keep the demonstration experiences available to the TD phase so
        # fresh minibatches stay anchored to expert behavior
        demo_x, demo_y = demo_dataset(demos, p)
        for row, target in zip(demo_x, demo_y):
            buffer.push(Experience(row, float(target)))
        if progress is not None:
            progress("warmstart", schedule.il_episodes)
    log: list[TrainLogRow] = []
    for episode in range(schedule.total_episodes):
        phase = schedule.phase_for(episode)
        epsilon = schedule.epsilon_at(episode)
        ep_seed = seed + 1 + episode
        scenario = generate(preset(phase.preset_name), ep_seed)
        ep_rng = np.random.default_rng(ep_seed)
        outcome, episode_return, loss = _rollout_training_episode(
            net, scenario, phase.mixture, epsilon, ep_rng, master, buffer,
            p, cfg, learn, robot_radius, robot_v_pref,
        )
        log.append(TrainLogRow(episode, schedule.phase_index(episode), outcome,
                               episode_return, loss, epsilon))
        if progress is not None:
            progress("episode", episode)
    return net, log
