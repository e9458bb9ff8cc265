"""Per-sample joint-estimation errors, shared by stage-3 labelling and eval."""

from __future__ import annotations

import numpy as np

from .geom import JointType, angle_between, point_to_axis_distance


def orientation_error(u_pred, u_gt) -> float:
    """Radians in [0, pi]."""
    return angle_between(u_pred, u_gt)


def position_error(h_pred, h_gt, u_gt, joint_type) -> float:
    """Axis distance for revolute joints, Euclidean distance for prismatic ones."""
    if JointType(int(joint_type)) == JointType.REVOLUTE:
        u = np.asarray(u_gt, float)
        return point_to_axis_distance(h_pred, h_gt, u / np.linalg.norm(u))
    return float(np.linalg.norm(np.asarray(h_pred, float) - np.asarray(h_gt, float)))


def state_error(v_pred, v_gt) -> float:
    """Radians for revolute joints, meters for prismatic ones."""
    return abs(float(v_pred) - float(v_gt))


def sample_errors(pred: dict, gt: dict) -> dict[str, np.ndarray]:
    """Vectorised over samples. ``pred`` holds h, u, v, rho; ``gt`` holds h, u, v, joint_type."""
    n = len(gt["v"])
    ori = np.array([orientation_error(pred["u"][i], gt["u"][i]) for i in range(n)])
    pos = np.array([position_error(pred["h"][i], gt["h"][i], gt["u"][i], gt["joint_type"][i]) for i in range(n)])
    axis = np.array([position_error(pred["h"][i], gt["h"][i], gt["u"][i], JointType.REVOLUTE) for i in range(n)])
    st = np.abs(np.asarray(pred["v"], float) - np.asarray(gt["v"], float))
    type_ok = (np.asarray(pred["rho"]) > 0.5).astype(int) == np.asarray(gt["joint_type"]).astype(int)
    return {"orientation": ori, "position": pos, "axis_distance": axis, "state": st, "type_ok": type_ok}


def success_labels(errors: dict, joint_type, ori_deg=10.0, pos_tol=0.1, state_deg=10.0, state_m=0.05) -> np.ndarray:
    """1 where the estimate is good enough to act on, else 0.

    Position is judged by the distance to the ground-truth axis line for both
    joint types: that is what the position loss trains, and a prismatic
    manipulation depends only on the axis direction.
    """
    jt = np.asarray(joint_type).astype(int)
    state_tol = np.where(jt == int(JointType.REVOLUTE), np.deg2rad(state_deg), state_m)
    ok = (errors["orientation"] < np.deg2rad(ori_deg)) & (errors["axis_distance"] < pos_tol) & (errors["state"] < state_tol)
    return ok.astype(np.float64)
