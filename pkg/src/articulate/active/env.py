"""Viewpoint-selection environment over the 16-view camera ring.

The state is the frozen perception model's CLS feature plus a one-hot
camera position. Each action moves the camera to a viewpoint; the reward
combines the change in perception score with a point-count term, with
+10 on success and -10 when the step budget runs out.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from ..errors import ConfigError, GraphError
from ..synth.render import N_VIEWPOINTS, camera_pose, render
from ..synth.scene import CATEGORIES, Scene, generate_scene

SUCCESS, STEP_LIMIT = "success", "step-limit"
SUCCESS_BONUS, FAILURE_PENALTY = 10.0, -10.0


@dataclass(frozen=True)
class EnvConfig:
    lambda_s: float = 1.0
    lambda_n: float = 0.1
    max_steps: int = 5
    max_unreachable: int = 4
    success_threshold: float = 0.5
    resolution: int = 64
    n_points: int = 256
    categories: tuple[str, ...] = CATEGORIES

    def __post_init__(self):
        if not 0 <= self.max_unreachable < N_VIEWPOINTS:
            raise ConfigError("max_unreachable must leave at least one reachable viewpoint")
        if self.max_steps < 1:
            raise ConfigError("max_steps must be >= 1")


@dataclass(frozen=True)
class View:
    """Perception of one scene from one viewpoint."""

    cls: np.ndarray
    score: float
    points: int
    pred: dict = field(default_factory=dict, compare=False)
    gt: object = None


@dataclass(frozen=True)
class EnvState:
    scene_seed: int
    feature: np.ndarray  # f_CLS, 2K
    position: int
    reachable_mask: np.ndarray  # 16 bools
    step_count: int
    score: float
    points: int
    done: bool = False
    cause: str | None = None

    @property
    def position_onehot(self) -> np.ndarray:
        x = np.zeros(N_VIEWPOINTS)
        x[self.position] = 1.0
        return x

    def vector(self) -> np.ndarray:
        return np.concatenate([self.feature, self.position_onehot])


def scene_for_seed(seed: int, categories=CATEGORIES) -> Scene:
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x5CE]))
    return generate_scene(categories[int(rng.integers(len(categories)))], int(seed))


def step_reward(s_old: float, s_new: float, n_old: int, n_new: int, lambda_s: float, lambda_n: float) -> float:
    """Shaping reward before any terminal bonus."""
    r_score = s_new - s_old
    if n_old == 0:
        r_num = 1.0 if n_new > 0 else -1.0
    else:
        r_num = (n_new - n_old) / n_old - 1.0
    return lambda_s * r_score + lambda_n * r_num


class ActiveEnv:
    """``perceive`` maps a list of observations to a dict with at least
    ``cls`` (B, 2K) and ``gamma`` (B,). Views are cached per (scene, viewpoint)."""

    def __init__(self, perceive, config: EnvConfig = EnvConfig(), select: int | str = "movable"):
        self.perceive = perceive
        self.config = config
        self.select = select
        self._scenes: dict[int, Scene] = {}
        self._views: dict[tuple[int, int], View] = {}

    def register(self, key: int, scene: Scene) -> None:
        """Use an explicit scene under ``key`` instead of deriving one from a seed."""
        self._scenes[key] = scene

    def scene(self, seed: int) -> Scene:
        if seed not in self._scenes:
            self._scenes[seed] = scene_for_seed(seed, self.config.categories)
        return self._scenes[seed]

    def observe(self, seed: int, viewpoint: int):
        scene = self.scene(seed)
        pose = camera_pose(viewpoint, scene, self.config.resolution)
        render_seed = int(np.random.SeedSequence([int(seed), int(viewpoint)]).generate_state(1)[0])
        return render(scene, pose, self.config.resolution, select=self.select, n_points=self.config.n_points,
                      seed=render_seed)

    def views(self, seed: int, viewpoints=range(N_VIEWPOINTS)) -> list[View]:
        """Perceive (and cache) the scene from each requested viewpoint."""
        todo = [v for v in viewpoints if (seed, v) not in self._views]
        if todo:
            obs = [self.observe(seed, v) for v in todo]
            out = self.perceive(obs)
            for i, (v, o) in enumerate(zip(todo, obs)):
                pred = {k: np.asarray(out[k][i]) for k in out}
                self._views[(seed, v)] = View(cls=pred["cls"], score=float(pred["gamma"]),
                                              points=o.raw_point_count, pred=pred, gt=o.ground_truth)
        return [self._views[(seed, v)] for v in viewpoints]

    def view(self, seed: int, viewpoint: int) -> View:
        return self.views(seed, [viewpoint])[0]

    def reset(self, seed: int, start: int | None = None) -> EnvState:
        rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xA11]))
        k = int(rng.integers(0, self.config.max_unreachable + 1))
        mask = np.ones(N_VIEWPOINTS, bool)
        mask[rng.choice(N_VIEWPOINTS, size=k, replace=False)] = False
        reachable = np.flatnonzero(mask)
        pos = int(reachable[int(rng.integers(len(reachable)))])
        if start is not None:
            if not mask[start]:
                raise ValueError(f"start viewpoint {start} is unreachable")
            pos = int(start)
        v = self.view(seed, pos)
        return EnvState(scene_seed=int(seed), feature=v.cls, position=pos, reachable_mask=mask, step_count=0,
                        score=v.score, points=v.points)

    def step(self, state: EnvState, action: int) -> tuple[EnvState, float, bool, str | None]:
        if state.done:
            raise GraphError("step() called on a finished episode")
        if not 0 <= int(action) < N_VIEWPOINTS:
            raise ValueError(f"action must be in [0, {N_VIEWPOINTS}), got {action}")
        c = self.config
        target = int(action) if state.reachable_mask[action] else state.position
        v = self.view(state.scene_seed, target)
        reward = step_reward(state.score, v.score, state.points, v.points, c.lambda_s, c.lambda_n)
        steps = state.step_count + 1
        done, cause = False, None
        if v.score > c.success_threshold:
            done, cause = True, SUCCESS
            reward += SUCCESS_BONUS
        elif steps >= c.max_steps:
            done, cause = True, STEP_LIMIT
            reward += FAILURE_PENALTY
        nxt = replace(state, feature=v.cls, position=target, step_count=steps, score=v.score, points=v.points,
                      done=done, cause=cause)
        return nxt, reward, done, cause


def env_reset(env: ActiveEnv, seed: int) -> EnvState:
    return env.reset(seed)


def env_step(env: ActiveEnv, state: EnvState, action: int):
    return env.step(state, action)


def oracle_best_action(env: ActiveEnv, state: EnvState) -> tuple[int, float]:
    """Reachable viewpoint with the highest perception score (ties to the lowest id)."""
    reachable = [int(a) for a in np.flatnonzero(state.reachable_mask)]
    scores = [v.score for v in env.views(state.scene_seed, reachable)]
    best = int(np.argmax(scores))
    return reachable[best], scores[best]
