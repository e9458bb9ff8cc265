"""Run configuration: a flat ``key = value`` text file with range checks."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

from ..active import AgentConfig, EnvConfig
from ..errors import ConfigError
from ..percept import PerceptConfig
from ..synth import CATEGORIES, DatasetConfig
from ..train import Stage, StageConfig


@dataclass(frozen=True)
class RunConfig:
    # data
    resolution: int = 64
    n_points: int = 256
    train_size: int = 64
    val_size: int = 8
    test_size: int = 8
    data_seed: int = 1
    categories: tuple[str, ...] = CATEGORIES
    prismatic_ratio: float = 0.5
    immovable_ratio: float = 0.25
    poor_view_ratio: float = 0.25
    depth_noise: float = 0.0
    # model
    K: int = 32
    n_scales: int = 4
    layers: int = 2
    heads: int = 4
    second_kernel: int = 1
    use_mldm: bool = True
    normalize_votes: bool = False
    model_seed: int = 0
    # perception training
    epochs_stage1: int = 40
    epochs_stage2: int = 80
    epochs_stage3: int = 40
    batch_size: int = 16
    lr: float = 1e-3
    train_seed: int = 0
    mov_rehearsal: float = 1.0
    score_split: str = "train"
    score_ori_deg: float = 10.0
    score_pos: float = 0.1
    score_state_deg: float = 10.0
    score_state_m: float = 0.05
    # active sensing
    lambda_s: float = 1.0
    lambda_n: float = 0.1
    max_steps: int = 5
    max_unreachable: int = 4
    success_threshold: float = 0.5
    episodes: int = 2000
    dqn_hidden: int = 64
    dqn_lr: float = 1e-3
    dqn_gamma: float = 0.95
    dqn_batch: int = 64
    replay_capacity: int = 10_000
    target_sync: int = 250
    eps_start: float = 1.0
    eps_end: float = 0.05
    eps_frames: int = 4000
    n_train_scenes: int = 64
    dqn_seed: int = 0
    # evaluation
    eval_split: str = "test"

    def __post_init__(self):
        for key, (lo, hi) in RANGES.items():
            v = getattr(self, key)
            if (lo is not None and v < lo) or (hi is not None and v > hi):
                raise ConfigError(f"{key} = {v} out of range [{lo}, {hi}]")
        bad = [c for c in self.categories if c not in CATEGORIES]
        if bad or not self.categories:
            raise ConfigError(f"categories must be a non-empty subset of {CATEGORIES}, got {self.categories}")
        if (2 * self.K) % self.heads:
            raise ConfigError(f"2*K = {2 * self.K} must be divisible by heads = {self.heads}")
        if self.second_kernel % 2 == 0:
            raise ConfigError("second_kernel must be odd")
        if self.score_split not in ("train", "val", "train+val"):
            raise ConfigError("score_split must be train, val or train+val")
        if self.eval_split not in ("train", "val", "test"):
            raise ConfigError("eval_split must be train, val or test")
        if self.eps_end > self.eps_start:
            raise ConfigError("eps_end must not exceed eps_start")
        if self.replay_capacity < self.dqn_batch:
            raise ConfigError("replay_capacity must be at least dqn_batch")

    # ------------------------------------------------------------ views

    def dataset(self) -> DatasetConfig:
        return DatasetConfig(train=self.train_size, val=self.val_size, test=self.test_size, seed=self.data_seed,
                             categories=self.categories, prismatic_ratio=self.prismatic_ratio,
                             immovable_ratio=self.immovable_ratio, poor_view_ratio=self.poor_view_ratio,
                             resolution=self.resolution, n_points=self.n_points, depth_noise=self.depth_noise)

    def percept(self) -> PerceptConfig:
        return PerceptConfig(K=self.K, n_scales=self.n_scales, layers=self.layers, heads=self.heads,
                             n_points=self.n_points, resolution=self.resolution, second_kernel=self.second_kernel,
                             use_mldm=self.use_mldm, normalize_votes=self.normalize_votes, seed=self.model_seed)

    def stage(self, stage: int) -> StageConfig:
        stage = Stage(stage)
        epochs = {Stage.MOVABILITY: self.epochs_stage1, Stage.PARAMETERS: self.epochs_stage2,
                  Stage.SCORING: self.epochs_stage3}[stage]
        return StageConfig(stage=stage, epochs=epochs, batch_size=self.batch_size, lr=self.lr, seed=self.train_seed,
                           score_ori_deg=self.score_ori_deg, score_pos=self.score_pos,
                           score_state_deg=self.score_state_deg, score_state_m=self.score_state_m,
                           mov_rehearsal=self.mov_rehearsal)

    def env(self) -> EnvConfig:
        return EnvConfig(lambda_s=self.lambda_s, lambda_n=self.lambda_n, max_steps=self.max_steps,
                         max_unreachable=self.max_unreachable, success_threshold=self.success_threshold,
                         resolution=self.resolution, n_points=self.n_points, categories=self.categories)

    def agent(self) -> AgentConfig:
        return AgentConfig(episodes=self.episodes, hidden=self.dqn_hidden, lr=self.dqn_lr, gamma=self.dqn_gamma,
                           batch_size=self.dqn_batch, replay_capacity=self.replay_capacity,
                           target_sync=self.target_sync, eps_start=self.eps_start, eps_end=self.eps_end,
                           eps_frames=self.eps_frames, n_train_scenes=self.n_train_scenes, seed=self.dqn_seed)

    # ------------------------------------------------------------- text

    def to_text(self) -> str:
        return "".join(f"{f.name} = {format_value(getattr(self, f.name))}\n" for f in fields(self))

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:12]


RANGES = {
    "resolution": (16, 512), "n_points": (8, 100_000), "train_size": (1, None), "val_size": (0, None),
    "test_size": (0, None), "prismatic_ratio": (0.0, 1.0), "immovable_ratio": (0.0, 1.0),
    "poor_view_ratio": (0.0, 1.0), "depth_noise": (0.0, 0.1), "K": (1, 1024), "n_scales": (1, 4),
    "layers": (0, 16), "heads": (1, 64), "second_kernel": (1, 7), "epochs_stage1": (0, 10_000),
    "epochs_stage2": (0, 10_000), "epochs_stage3": (0, 10_000), "batch_size": (1, 4096), "lr": (1e-8, 1.0),
    "mov_rehearsal": (0.0, 100.0), "score_ori_deg": (0.0, 180.0), "score_pos": (0.0, None),
    "score_state_deg": (0.0, 360.0), "score_state_m": (0.0, None), "lambda_s": (0.0, None),
    "lambda_n": (0.0, None), "max_steps": (1, 100), "max_unreachable": (0, 15), "success_threshold": (0.0, 1.0),
    "episodes": (1, 1_000_000), "dqn_hidden": (1, 4096), "dqn_lr": (1e-8, 1.0), "dqn_gamma": (0.0, 0.999),
    "dqn_batch": (1, 4096), "replay_capacity": (1, 10_000_000), "target_sync": (1, None),
    "eps_start": (0.0, 1.0), "eps_end": (0.0, 1.0), "eps_frames": (1, None), "n_train_scenes": (1, 100_000),
    "data_seed": (0, None), "model_seed": (0, None), "train_seed": (0, None), "dqn_seed": (0, None),
}


def format_value(v) -> str:
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, tuple):
        return ",".join(v)
    return repr(v) if isinstance(v, float) else str(v)


def _parse_value(key: str, raw: str, kind):
    try:
        if kind is bool or kind == "bool":
            low = raw.lower()
            if low in ("true", "yes", "1", "on"):
                return True
            if low in ("false", "no", "0", "off"):
                return False
            raise ValueError(raw)
        if kind is int or kind == "int":
            return int(raw)
        if kind is float or kind == "float":
            return float(raw)
        if "tuple" in str(kind):
            return tuple(x.strip() for x in raw.split(",") if x.strip())
        return raw
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {raw!r} as {getattr(kind, '__name__', kind)}") from None


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    types = {f.name: f.type for f in fields(RunConfig)}
    values = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key, raw = key.strip(), raw.strip()
        if not sep or not key:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value'")
        if key not in types:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        values[key] = _parse_value(key, raw, types[key])
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    if path is None:
        return RunConfig()
    p = Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from None
    return parse_config(text, str(p))


def with_overrides(cfg: RunConfig, **kw) -> RunConfig:
    return replace(cfg, **kw)
