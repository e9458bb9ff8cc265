"""Training losses. All take batched tensors (leading batch axis) and
return the batch mean as a scalar tensor."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .. import tensor as T
from ..tensor import Tensor

BCE_CLAMP = 1e-7
ARCCOS_LIMIT = 1.0 - 1e-7


@dataclass
class Diagnostics:
    zero_votes: int = 0


DIAGNOSTICS = Diagnostics()


def _batched(x, trailing: int):
    x = T.as_tensor(x)
    return T.reshape(x, (1,) + x.shape) if x.ndim == trailing else x


def loss_ori(votes_u, gt_u) -> Tensor:
    """Mean angle between each normalised vote and the unit ground-truth axis.

    A zero-length vote counts as orthogonal (pi/2) and is tallied in
    ``DIAGNOSTICS.zero_votes``.
    """
    vu = _batched(votes_u, 2)
    B, N, _ = vu.shape
    gu = np.asarray(gt_u, float).reshape(B, 1, 3)
    n = T.norm(vu, axis=-1)  # (B, N)
    zero = n.data == 0
    if zero.any():
        DIAGNOSTICS.zero_votes += int(zero.sum())
    dot = T.sum_(vu * Tensor(np.broadcast_to(gu, (B, N, 3))), axis=-1) / (n + Tensor(zero.astype(float)))
    return T.mean(T.arccos(dot, ARCCOS_LIMIT))


def loss_pos(votes_h, gt_h, gt_u) -> Tensor:
    """Mean distance from each position vote to the ground-truth axis line."""
    vh = _batched(votes_h, 2)
    B, N, _ = vh.shape
    gh = np.broadcast_to(np.asarray(gt_h, float).reshape(B, 1, 3), (B, N, 3))
    gu = np.broadcast_to(np.asarray(gt_u, float).reshape(B, 1, 3), (B, N, 3))
    return T.mean(T.norm(T.cross(vh - Tensor(gh), Tensor(gu)), axis=-1))


def loss_state(v_pred, v_gt) -> Tensor:
    v = T.as_tensor(v_pred)
    return T.mean(T.abs_(v - Tensor(np.asarray(v_gt, float).reshape(v.shape))))


def loss_bce(p, label) -> Tensor:
    p = T.clip(T.as_tensor(p), BCE_CLAMP, 1 - BCE_CLAMP)
    y = np.asarray(label, float).reshape(p.shape)
    return T.mean(-(Tensor(y) * T.log(p) + Tensor(1 - y) * T.log(1.0 - p)))


@dataclass
class LossReport:
    l_mov: float = 0.0
    l_type: float = 0.0
    l_ori: float = 0.0
    l_pos: float = 0.0
    l_state: float = 0.0
    l_score: float = 0.0
    l_para: float = 0.0
    batch: int = 0
    extras: dict = field(default_factory=dict)


def loss_para(pred, gt) -> tuple[Tensor, LossReport]:
    """Joint-parameter objective: type + orientation + position + state."""
    l_type = loss_bce(pred.rho, gt["joint_type"])
    l_ori = loss_ori(pred.vote_u, gt["u"])
    l_pos = loss_pos(pred.vote_h, gt["h"], gt["u"])
    l_state = loss_state(pred.v, gt["v"])
    total = l_type + l_ori + l_pos + l_state
    rep = LossReport(l_type=l_type.item(), l_ori=l_ori.item(), l_pos=l_pos.item(), l_state=l_state.item(),
                     batch=len(gt["v"]))
    rep.l_para = rep.l_type + rep.l_ori + rep.l_pos + rep.l_state
    return total, rep
