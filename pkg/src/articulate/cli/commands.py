"""Subcommand implementations. Each returns a process exit code."""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from ..active import ActiveEnv, QNetwork, dqn_train, greedy_policy
from ..errors import ConfigError, MissingPrerequisiteError
from ..percept import PerceptionModel, load_model, save_model
from ..synth import Dataset, make_dataset, plan_split
from ..synth.scene import generate_scene
from ..tensor import checkpoint
from ..train import Stage, load_split, run_stage, samples_from
from .config import RunConfig
from .evaluation import MetricsTable, active_evaluate, reduction_ratios, reduction_text, results_from

EXIT_OK, EXIT_USAGE, EXIT_MISSING, EXIT_SENSING = 0, 1, 2, 3


class RunPaths:
    """Artifact layout under ``<root>/<config digest>/``."""

    def __init__(self, cfg: RunConfig, root="runs"):
        self.dir = Path(root) / cfg.digest()
        self.data = self.dir / "data"
        self.metrics = self.dir / "metrics.log"
        self.policy = self.dir / "policy.ntar"
        self.rewards = self.dir / "rewards.log"

    def stage(self, k: int) -> Path:
        return self.dir / f"percept_stage{int(k)}.ntar"

    def prepare(self, cfg: RunConfig) -> None:
        self.dir.mkdir(parents=True, exist_ok=True)
        (self.dir / "config.txt").write_text(cfg.to_text())


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def perceiver(model: PerceptionModel):
    def perceive(observations):
        rgb = np.stack([o.rgb for o in observations]).astype(np.float64)
        cloud = np.stack([o.cloud for o in observations]).astype(np.float64)
        return model.predict(rgb, cloud)
    return perceive


def _require_dataset(paths: RunPaths) -> Dataset:
    if not (paths.data / "index.txt").exists():
        raise MissingPrerequisiteError(f"no dataset at {paths.data}; run gen-data first")
    return Dataset(paths.data)


def _require_stage(paths: RunPaths, cfg: RunConfig, k: int) -> PerceptionModel:
    path = paths.stage(k)
    if not path.exists():
        raise MissingPrerequisiteError(f"stage {k} checkpoint missing ({path}); run 'train --stage {k}' first")
    model, _ = load_model(path, expect=cfg.percept())
    return model


# --------------------------------------------------------------- gen-data

def cmd_gen_data(cfg: RunConfig, paths: RunPaths, out=None) -> int:
    target = Path(out) if out is not None else paths.data
    if out is None:
        paths.prepare(cfg)
    counts = make_dataset(cfg.dataset(), target)
    for split, n in counts.items():
        print(f"{split}\t{n}")
    print(f"total\t{sum(counts.values())}\t{target}")
    return EXIT_OK


# ------------------------------------------------------------------ train

def _score_samples(cfg: RunConfig, ds: Dataset):
    splits = cfg.score_split.split("+")
    ids = [i for s in splits for i in ds.split(s)]
    return samples_from((ds[i] for i in ids), ids)


def cmd_train(cfg: RunConfig, paths: RunPaths, stage: int) -> int:
    stage = Stage(stage)
    ds = _require_dataset(paths)
    if stage == Stage.MOVABILITY:
        model = PerceptionModel(cfg.percept())
    else:
        model = _require_stage(paths, cfg, int(stage) - 1)
    train = _score_samples(cfg, ds) if stage == Stage.SCORING else load_split(ds, "train")
    val = load_split(ds, "val") if ds.split("val") and stage != Stage.SCORING else None
    paths.prepare(cfg)
    with open(paths.metrics, "a") as log:
        def emit(line):
            log.write(line + "\n")
            log.flush()
        run_stage(model, train, cfg.stage(stage), val, emit)
    digest = save_model(model, paths.stage(stage), int(stage))
    print(f"stage {int(stage)} checkpoint {paths.stage(stage)} sha256 {digest}")
    return EXIT_OK


# -------------------------------------------------------------- train-dqn

def save_policy(net: QNetwork, path) -> str:
    digest = checkpoint.save(path, net.reg.snapshot())
    Path(str(path) + ".manifest").write_text(f"state_dim = {net.state_dim}\nhidden = {net.mlp.layers[0].w.shape[1]}\n"
                                             f"sha256 = {digest}\n")
    return digest


def load_policy(path) -> QNetwork:
    mpath = Path(str(path) + ".manifest")
    if not Path(path).exists() or not mpath.exists():
        raise MissingPrerequisiteError(f"policy checkpoint {path} missing; run train-dqn first")
    m = dict((k.strip(), v.strip()) for k, _, v in (ln.partition("=") for ln in mpath.read_text().splitlines()))
    net = QNetwork(int(m["state_dim"]), int(m["hidden"]))
    net.reg.load(checkpoint.load(path))
    net.sync()
    return net


def cmd_train_dqn(cfg: RunConfig, paths: RunPaths) -> int:
    model = _require_stage(paths, cfg, 3)
    env = ActiveEnv(perceiver(model), cfg.env())
    paths.prepare(cfg)
    with open(paths.rewards, "w") as log:
        log.write("episode\tsteps\treward\tcause\n")
        net, episodes = dqn_train(env, cfg.agent(), lambda line: log.write(line + "\n"))
    digest = save_policy(net, paths.policy)
    succ = np.mean([e.cause == "success" for e in episodes[-len(episodes) // 4:]])
    print(f"episodes {len(episodes)} final-quarter success {succ:.3f} policy sha256 {digest}")
    return EXIT_OK


# ------------------------------------------------------------------- eval

def eval_samples(cfg: RunConfig, ds: Dataset, split: str):
    """Movable-part samples of ``split`` with their plans (scenes re-derived from the config seed)."""
    ids = ds.split(split)
    plans = plan_split(cfg.dataset(), split)
    if len(plans) != len(ids) or any(ds.category(i) != p.category for i, p in zip(ids, plans)):
        raise ConfigError(f"dataset at {ds.path} was not generated from this config")
    keep = [(i, p) for i, p in zip(ids, plans) if p.movable]
    return [i for i, _ in keep], [p for _, p in keep]


def cmd_eval(cfg: RunConfig, paths: RunPaths, active: bool, checkpoint_path=None, dataset_path=None) -> int:
    ds = Dataset(dataset_path) if dataset_path else _require_dataset(paths)
    if checkpoint_path:
        model, _ = load_model(checkpoint_path, expect=cfg.percept())
    else:
        model = _require_stage(paths, cfg, 3)
    ids, plans = eval_samples(cfg, ds, cfg.eval_split)
    if not ids:
        raise ConfigError(f"split {cfg.eval_split!r} has no movable-part samples")
    data = samples_from((ds[i] for i in ids), ids)
    cats = [p.category for p in plans]
    pred = model.predict(data.rgb, data.cloud)
    base = results_from(pred, data.gt(), cats)
    mffp = MetricsTable.from_results(base)
    paths.prepare(cfg)
    (paths.dir / "eval_off.tsv").write_text(mffp.to_text())
    print("MFFP (no active sensing)")
    print(mffp.to_text(), end="")
    if not active:
        return EXIT_OK
    net = load_policy(paths.policy)
    env = ActiveEnv(perceiver(model), cfg.env())
    keys = list(range(len(plans)))
    for k, p in zip(keys, plans):
        env.register(k, generate_scene(p.category, p.scene_seed))
    starts = [ds[i].viewpoint_id for i in ids]
    out = active_evaluate(env, greedy_policy(net), keys, cats, starts, pred, base, cfg.success_threshold)
    mars, floor = MetricsTable.from_results(out.mars), MetricsTable.from_results(out.floor)
    (paths.dir / "eval_on.tsv").write_text(mars.to_text())
    (paths.dir / "eval_floor.tsv").write_text(floor.to_text())
    ratios = reduction_text(reduction_ratios(mffp, mars))
    (paths.dir / "reduction.tsv").write_text(ratios)
    print(f"MARS (one sensing step on {len(out.moved)} low-score samples)")
    print(mars.to_text(), end="")
    print("oracle-viewpoint floor")
    print(floor.to_text(), end="")
    print("error relative to MFFP (%)")
    print(ratios, end="")
    return EXIT_OK
