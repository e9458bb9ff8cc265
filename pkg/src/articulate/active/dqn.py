"""Deep Q-learning over the viewpoint environment."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .. import tensor as T
from ..errors import ConfigError
from ..synth.render import N_VIEWPOINTS
from ..tensor import MLP, OptimizerConfig, ParameterRegistry, Tensor, optimizer_step
from .env import ActiveEnv, EnvState

MASKED = -1e9


@dataclass(frozen=True)
class AgentConfig:
    episodes: int = 2000
    hidden: int = 64
    lr: float = 1e-3
    gamma: float = 0.95
    batch_size: int = 64
    replay_capacity: int = 10_000
    target_sync: int = 250
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_frames: int = 4000
    n_train_scenes: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.episodes < 1 or self.batch_size < 1 or self.replay_capacity < self.batch_size:
            raise ConfigError("agent config: episodes/batch/replay sizes out of range")
        if not (0 <= self.gamma < 1 and 0 <= self.eps_end <= self.eps_start <= 1):
            raise ConfigError("agent config: gamma or epsilon out of range")


@dataclass(frozen=True)
class Transition:
    state: np.ndarray
    action: int
    reward: float
    next_state: np.ndarray
    next_mask: np.ndarray
    done: bool


@dataclass(frozen=True)
class Episode:
    episode: int
    scene_seed: int
    steps: int
    reward: float
    cause: str
    actions: tuple[int, ...]
    rewards: tuple[float, ...]

    def log_line(self) -> str:
        return f"{self.episode}\t{self.steps}\t{self.reward:.9g}\t{self.cause}"


class QNetwork:
    """MLP (state -> hidden -> hidden -> 16) with a target copy."""

    def __init__(self, state_dim: int, hidden: int = 64, seed: int = 0):
        self.state_dim = state_dim
        rng = np.random.default_rng(seed)
        self.reg = ParameterRegistry()
        self.mlp = MLP(self.reg, "q", (state_dim, hidden, hidden, N_VIEWPOINTS), "q", rng)
        self.target = {n: e.tensor.data.copy() for n, e in self.reg.params.items()}
        self.syncs = 0

    def __call__(self, x) -> Tensor:
        return self.mlp(T.as_tensor(x))

    def q_values(self, x) -> np.ndarray:
        with T.no_grad():
            return self(np.atleast_2d(x)).data

    def target_q_values(self, x) -> np.ndarray:
        live = {n: e.tensor.data for n, e in self.reg.params.items()}
        for n, e in self.reg.params.items():
            e.tensor.data = self.target[n]
        try:
            return self.q_values(x)
        finally:
            for n, e in self.reg.params.items():
                e.tensor.data = live[n]

    def sync(self) -> None:
        self.target = {n: e.tensor.data.copy() for n, e in self.reg.params.items()}
        self.syncs += 1

    def greedy(self, x, mask) -> np.ndarray:
        """Highest-Q reachable action per row (ties to the lowest id)."""
        q = np.where(np.atleast_2d(mask), self.q_values(x), -np.inf)
        return np.argmax(q, axis=1)


class ReplayBuffer:
    def __init__(self, capacity: int):
        self.capacity = capacity
        self.items: list[Transition] = []
        self.head = 0

    def __len__(self):
        return len(self.items)

    def add(self, t: Transition) -> None:
        if len(self.items) < self.capacity:
            self.items.append(t)
        else:
            self.items[self.head] = t
        self.head = (self.head + 1) % self.capacity

    def sample(self, rng, n: int) -> list[Transition]:
        return [self.items[i] for i in rng.integers(len(self.items), size=n)]


def huber(d: Tensor, delta: float = 1.0) -> Tensor:
    a = T.abs_(d)
    q = T.clip(a, 0.0, delta)
    return T.mean(0.5 * q * q + delta * (a - q))


def epsilon(frame: int, cfg: AgentConfig) -> float:
    frac = min(frame / max(cfg.eps_frames, 1), 1.0)
    return cfg.eps_start + frac * (cfg.eps_end - cfg.eps_start)


def td_update(net: QNetwork, batch: list[Transition], cfg: AgentConfig) -> float:
    s = np.stack([t.state for t in batch])
    s2 = np.stack([t.next_state for t in batch])
    a = np.array([t.action for t in batch])
    r = np.array([t.reward for t in batch])
    done = np.array([t.done for t in batch], dtype=float)
    mask2 = np.stack([t.next_mask for t in batch])
    q_next = np.where(mask2, net.target_q_values(s2), MASKED).max(axis=1)
    target = r + cfg.gamma * (1.0 - done) * q_next
    onehot = np.eye(N_VIEWPOINTS)[a]
    q_sa = T.sum_(net(s) * Tensor(onehot), axis=1)
    loss = huber(q_sa - Tensor(target))
    T.backward(loss)
    optimizer_step(net.reg, cfg.lr, OptimizerConfig())
    return loss.item()


def train_scene_seeds(cfg: AgentConfig) -> np.ndarray:
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0x7A1]))
    return rng.choice(2**30, size=cfg.n_train_scenes, replace=False) + 2**30


def dqn_train(env: ActiveEnv, cfg: AgentConfig = AgentConfig(), log=None) -> tuple[QNetwork, list[Episode]]:
    """Epsilon-greedy DQN with uniform replay and a periodically synced target."""
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, 0xD09]))
    seeds = train_scene_seeds(cfg)
    probe = env.reset(int(seeds[0]))
    net = QNetwork(len(probe.vector()), cfg.hidden, cfg.seed)
    buf = ReplayBuffer(cfg.replay_capacity)
    frame = 0
    episodes = []
    for ep in range(cfg.episodes):
        seed = int(seeds[int(rng.integers(len(seeds)))])
        state = env.reset(seed)
        actions, rewards = [], []
        while not state.done:
            reachable = np.flatnonzero(state.reachable_mask)
            if rng.random() < epsilon(frame, cfg):
                action = int(reachable[int(rng.integers(len(reachable)))])
            else:
                action = int(net.greedy(state.vector(), state.reachable_mask)[0])
            nxt, reward, done, _ = env.step(state, action)
            buf.add(Transition(state.vector(), action, reward, nxt.vector(), nxt.reachable_mask.copy(), done))
            actions.append(action)
            rewards.append(reward)
            state = nxt
            frame += 1
            if len(buf) >= cfg.batch_size:
                td_update(net, buf.sample(rng, cfg.batch_size), cfg)
            if frame % cfg.target_sync == 0:
                net.sync()
        e = Episode(ep, seed, len(actions), float(sum(rewards)), state.cause, tuple(actions), tuple(rewards))
        episodes.append(e)
        if log is not None:
            log(e.log_line())
    return net, episodes


def moving_average(x, window: int = 100) -> np.ndarray:
    """Trailing mean over up to ``window`` values."""
    x = np.asarray(x, dtype=float)
    c = np.concatenate([[0.0], np.cumsum(x)])
    idx = np.arange(1, len(x) + 1)
    lo = np.maximum(idx - window, 0)
    return (c[idx] - c[lo]) / (idx - lo)


def greedy_policy(net: QNetwork):
    def act(state: EnvState) -> int:
        return int(net.greedy(state.vector(), state.reachable_mask)[0])
    return act
