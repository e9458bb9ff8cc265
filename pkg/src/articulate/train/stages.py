"""Three-stage training schedule: movability, joint parameters, perception score."""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .. import tensor as T
from ..errors import ConfigError
from ..metrics import sample_errors, success_labels
from ..percept.model import ENCODER_GROUPS, HEAD_MOV, HEAD_PARA, HEAD_SCORE, HEAD_TYPE, PerceptionModel, Prediction
from ..tensor import OptimizerConfig, Tensor, optimizer_step
from .losses import LossReport, loss_bce, loss_para


class Stage(enum.IntEnum):
    MOVABILITY = 1
    PARAMETERS = 2
    SCORING = 3


TRAINED_GROUPS = {
    Stage.MOVABILITY: ENCODER_GROUPS + (HEAD_MOV,),
    Stage.PARAMETERS: ENCODER_GROUPS + (HEAD_TYPE, HEAD_PARA),
    Stage.SCORING: (HEAD_SCORE,),
}
DEFAULT_EPOCHS = {Stage.MOVABILITY: 40, Stage.PARAMETERS: 80, Stage.SCORING: 40}


@dataclass(frozen=True)
class StageConfig:
    stage: Stage
    epochs: int | None = None
    batch_size: int = 16
    lr: float = 1e-3
    seed: int = 0
    optimizer: OptimizerConfig = OptimizerConfig()
    # success thresholds used to label samples for the score head
    score_ori_deg: float = 10.0
    score_pos: float = 0.1
    score_state_deg: float = 10.0
    score_state_m: float = 0.05
    # weight of the movability loss kept alive during stage 2 (0 disables it)
    mov_rehearsal: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "stage", Stage(self.stage))
        if self.epochs is None:
            object.__setattr__(self, "epochs", DEFAULT_EPOCHS[self.stage])
        if self.epochs < 0 or self.batch_size < 1 or not self.lr > 0:
            raise ConfigError(f"invalid stage config {self}")

    @property
    def trained_groups(self) -> tuple[str, ...]:
        if self.stage == Stage.PARAMETERS and self.mov_rehearsal > 0:
            return TRAINED_GROUPS[self.stage] + (HEAD_MOV,)
        return TRAINED_GROUPS[self.stage]

    @property
    def frozen_groups(self) -> tuple[str, ...]:
        all_groups = ENCODER_GROUPS + (HEAD_MOV, HEAD_TYPE, HEAD_PARA, HEAD_SCORE)
        return tuple(g for g in all_groups if g not in self.trained_groups)


@dataclass
class Samples:
    """Arrays for a set of observations, ground truth in the camera frame."""

    rgb: np.ndarray
    cloud: np.ndarray
    movable: np.ndarray
    joint_type: np.ndarray
    h: np.ndarray
    u: np.ndarray
    v: np.ndarray
    state_max: np.ndarray
    raw_points: np.ndarray
    ids: np.ndarray = field(default=None)

    def __len__(self):
        return len(self.v)

    def subset(self, idx) -> "Samples":
        idx = np.asarray(idx, dtype=int)
        return Samples(**{k: getattr(self, k)[idx] for k in self.__dataclass_fields__})

    def gt(self, idx=slice(None)) -> dict:
        return {"joint_type": self.joint_type[idx], "h": self.h[idx], "u": self.u[idx], "v": self.v[idx]}


def samples_from(observations, ids=None) -> Samples:
    obs = list(observations)
    if not obs:
        raise ConfigError("empty split: no samples to train on")
    return Samples(
        rgb=np.stack([o.rgb for o in obs]).astype(np.float64),
        cloud=np.stack([o.cloud for o in obs]).astype(np.float64),
        movable=np.array([float(o.movable_selected) for o in obs]),
        joint_type=np.array([int(o.ground_truth.joint_type) for o in obs]),
        h=np.stack([o.ground_truth.position for o in obs]).astype(np.float64),
        u=np.stack([o.ground_truth.orientation for o in obs]).astype(np.float64),
        v=np.array([o.ground_truth.state for o in obs], dtype=np.float64),
        state_max=np.array([o.state_max for o in obs], dtype=np.float64),
        raw_points=np.array([o.raw_point_count for o in obs]),
        ids=np.arange(len(obs)) if ids is None else np.asarray(ids))


def load_split(dataset, split: str) -> Samples:
    ids = dataset.split(split)
    return samples_from((dataset[i] for i in ids), ids)


def movable_only(s: Samples) -> Samples:
    return s.subset(np.flatnonzero(s.movable > 0.5))


def _batches(n: int, size: int, rng):
    order = rng.permutation(n)
    return [order[i:i + size] for i in range(0, n, size)]


def _fmt(x: float) -> str:
    return f"{x:.9g}"


def log_line(stage: Stage, epoch: int, train: LossReport, val: LossReport | None) -> str:
    keys = ("l_mov", "l_type", "l_ori", "l_pos", "l_state", "l_score", "l_para")
    fields = [f"stage={int(stage)}", f"epoch={epoch}"] + [f"{k}={_fmt(getattr(train, k))}" for k in keys]
    if val is not None:
        fields += [f"val_{k}={_fmt(getattr(val, k))}" for k in keys]
    return "\t".join(fields)


PARA_KEYS = ("l_type", "l_ori", "l_pos", "l_state")


def _accumulate(total: LossReport, rep: LossReport) -> None:
    """Sample-weighted running sums; parameter losses count only the rows they saw."""
    n_para = rep.extras.get("para_rows", rep.batch)
    for k in PARA_KEYS:
        setattr(total, k, getattr(total, k) + getattr(rep, k) * n_para)
    for k in ("l_mov", "l_score"):
        setattr(total, k, getattr(total, k) + getattr(rep, k) * rep.batch)
    total.batch += rep.batch
    total.extras["para_rows"] = total.extras.get("para_rows", 0) + n_para


def _average(total: LossReport) -> LossReport:
    out = LossReport(batch=total.batch)
    n_para = max(total.extras.get("para_rows", 0), 1)
    for k in PARA_KEYS:
        setattr(out, k, getattr(total, k) / n_para)
    for k in ("l_mov", "l_score"):
        setattr(out, k, getattr(total, k) / max(total.batch, 1))
    out.l_para = out.l_type + out.l_ori + out.l_pos + out.l_state
    return out


def _select(pred: Prediction, rows) -> Prediction:
    return Prediction(**{k: getattr(pred, k)[rows] for k in pred.__dataclass_fields__})


def _stage_loss(model: PerceptionModel, stage: Stage, data: Samples, idx,
                mov_weight: float = 0.0) -> tuple[Tensor, LossReport]:
    """Stage loss on rows ``idx``. For stage 2 the joint-parameter loss only
    sees movable rows; ``mov_weight`` adds the movability loss over all rows."""
    if stage == Stage.MOVABILITY:
        cls, _, _, _ = model.encode(data.rgb[idx], data.cloud[idx])
        loss = loss_bce(model.decode_movability(cls), data.movable[idx])
        return loss, LossReport(l_mov=loss.item(), batch=len(idx))
    pred = model(data.rgb[idx], data.cloud[idx])
    rows = np.flatnonzero(data.movable[idx] > 0.5)
    loss = rep = None
    if len(rows):
        sel = pred if len(rows) == len(idx) else _select(pred, rows)
        loss, rep = loss_para(sel, data.gt(np.asarray(idx)[rows]))
    rep = rep or LossReport()
    rep.batch = len(idx)
    rep.extras["para_rows"] = len(rows)
    if mov_weight > 0:
        l_mov = loss_bce(pred.tau, data.movable[idx])
        rep.l_mov = l_mov.item()
        term = l_mov * mov_weight
        loss = term if loss is None else loss + term
    return loss, rep


def evaluate_stage(model: PerceptionModel, stage: Stage, data: Samples, batch: int = 32,
                   mov_weight: float = 0.0) -> LossReport:
    """Mean losses with inference-mode batch norm."""
    model.train(False)
    total = LossReport()
    with T.no_grad():
        for s in range(0, len(data), batch):
            idx = np.arange(s, min(s + batch, len(data)))
            _, rep = _stage_loss(model, stage, data, idx, mov_weight)
            _accumulate(total, rep)
    return _average(total)


def score_labels(model: PerceptionModel, data: Samples, cfg: StageConfig) -> np.ndarray:
    """1 where the frozen model's joint estimate meets every success threshold."""
    pred = model.predict(data.rgb, data.cloud)
    errs = sample_errors(pred, data.gt())
    return success_labels(errs, data.joint_type, cfg.score_ori_deg, cfg.score_pos, cfg.score_state_deg,
                          cfg.score_state_m)


def run_stage(model: PerceptionModel, train: Samples, cfg: StageConfig, val: Samples | None = None,
              log=None) -> list[str]:
    """Train one stage in place and return its metrics-log lines.

    Stage 2 fits joint parameters on movable-part samples only; with
    ``mov_rehearsal`` > 0 the batches also carry immovable samples for the
    movability loss so that head does not drift. Stage 3 labels samples with the
    frozen model's success, caches the (frozen) CLS features, and fits the
    score head on them; nothing outside that head changes.
    """
    stage = cfg.stage
    mov_weight = cfg.mov_rehearsal if stage == Stage.PARAMETERS else 0.0
    if stage == Stage.PARAMETERS and mov_weight == 0:
        train = movable_only(train)
        val = movable_only(val) if val is not None else None
    if len(train) == 0:
        raise ConfigError(f"stage {int(stage)}: empty training split")
    if stage == Stage.PARAMETERS and not (train.movable > 0.5).any():
        raise ConfigError("stage 2: no movable-part samples in the training split")
    if val is not None and len(val) == 0:
        val = None
    model.reg.set_trainable(cfg.trained_groups)
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, int(stage)]))
    lines = []

    if stage == Stage.SCORING:
        return _run_scoring(model, train, cfg, val, rng, log)

    for epoch in range(1, cfg.epochs + 1):
        model.train(True)
        total = LossReport()
        for idx in _batches(len(train), cfg.batch_size, rng):
            loss, rep = _stage_loss(model, stage, train, idx, mov_weight)
            T.backward(loss)
            optimizer_step(model.reg, cfg.lr, cfg.optimizer)
            _accumulate(total, rep)
        vrep = evaluate_stage(model, stage, val, mov_weight=mov_weight) if val is not None else None
        lines.append(log_line(stage, epoch, _average(total), vrep))
        if log is not None:
            log(lines[-1])
    model.train(False)
    return lines


def _cls_features(model: PerceptionModel, data: Samples) -> np.ndarray:
    return model.predict(data.rgb, data.cloud)["cls"]


def _run_scoring(model, train, cfg, val, rng, log):
    model.train(False)
    feats, labels = _cls_features(model, train), score_labels(model, train, cfg)
    vfeats = vlabels = None
    if val is not None:
        vfeats, vlabels = _cls_features(model, val), score_labels(model, val, cfg)
    lines = []
    for epoch in range(1, cfg.epochs + 1):
        total = LossReport()
        for idx in _batches(len(labels), cfg.batch_size, rng):
            loss = loss_bce(model.decode_score(Tensor(feats[idx])), labels[idx])
            T.backward(loss)
            optimizer_step(model.reg, cfg.lr, cfg.optimizer)
            _accumulate(total, LossReport(l_score=loss.item(), batch=len(idx)))
        vrep = None
        if vfeats is not None:
            with T.no_grad():
                vl = loss_bce(model.decode_score(Tensor(vfeats)), vlabels).item()
            vrep = LossReport(l_score=vl, batch=len(vlabels))
        lines.append(log_line(Stage.SCORING, epoch, _average(total), vrep))
        if log is not None:
            log(lines[-1])
    return lines
