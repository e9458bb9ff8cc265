"""Perceive, gate on movability and score, optionally re-view, then manipulate the part cloud."""

from __future__ import annotations

import re
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from ..active import ActiveEnv, EnvState
from ..errors import ConfigError
from ..geom import JointParams, JointType, apply_transform, manipulation_matrix

_COMMAND = re.compile(r"^\s*(?:open|set|move)?\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*"
                      r"(m|cm|mm|deg|degrees?|°|rad|radians?)?\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class Command:
    value: float  # radians or meters
    unit: str  # "angle", "length" or "native"


def parse_command(text: str) -> Command:
    """'open 0.2 m' -> 0.2 (length); 'open 100°' -> 1.745... (angle, radians)."""
    m = _COMMAND.match(text)
    if not m:
        raise ConfigError(f"cannot parse manipulation command {text!r}")
    value = float(m.group(1))
    unit = (m.group(2) or "").lower()
    if unit in ("deg", "degree", "degrees", "°"):
        return Command(float(np.deg2rad(value)), "angle")
    if unit in ("rad", "radian", "radians"):
        return Command(value, "angle")
    if unit in ("m", "cm", "mm"):
        return Command(value * {"m": 1.0, "cm": 0.01, "mm": 0.001}[unit], "length")
    return Command(value, "native")


@dataclass
class PipelineResult:
    status: str  # "manipulated", "immovable", "sensing-failure"
    trace: list[str] = field(default_factory=list)
    before: np.ndarray | None = None
    after: np.ndarray | None = None
    joint: JointParams | None = None


def _joint_from(pred: dict) -> JointParams:
    jt = JointType.PRISMATIC if float(pred["rho"]) > 0.5 else JointType.REVOLUTE
    u = np.asarray(pred["u"], float)
    return JointParams(jt, np.asarray(pred["h"], float), u / np.linalg.norm(u), float(pred["v"]))


def run_pipeline(env: ActiveEnv, policy, seed: int, command: Command, threshold: float = 0.5,
                 budget: int = 5, oracle_params: bool = False) -> PipelineResult:
    """Fig.-1 style flow on scene ``seed``; ``policy`` maps an EnvState to a viewpoint."""
    state = env.reset(seed)
    res = PipelineResult(status="")
    view = env.view(seed, state.position)
    res.trace.append("step\tviewpoint\ttau\tgamma\tpoints\tdecision")

    def note(step, decision):
        res.trace.append(f"{step}\t{state.position}\t{float(view.pred['tau']):.6f}\t{view.score:.6f}\t"
                         f"{view.points}\t{decision}")

    if float(view.pred["tau"]) <= 0.5:
        note(0, "immovable")
        res.status = "immovable"
        return res
    step = 0
    while view.score <= threshold:
        if step >= budget:
            note(step, "sensing-failure")
            res.status = "sensing-failure"
            return res
        note(step, "re-view")
        state, _, _, _ = _move(env, state, int(policy(state)))
        view = env.view(seed, state.position)
        step += 1
    joint = view.gt if oracle_params else _joint_from(view.pred)
    unit_ok = command.unit == "native" or (command.unit == "angle") == joint.is_revolute
    if not unit_ok:
        raise ConfigError(f"command unit ({command.unit}) does not match the "
                          f"{'revolute' if joint.is_revolute else 'prismatic'} joint")
    note(step, f"manipulate {'revolute' if joint.is_revolute else 'prismatic'} v={joint.state:.6f} "
               f"target={command.value:.6f}")
    cloud = env.observe(seed, state.position).cloud.astype(np.float64)
    res.before = cloud
    res.after = apply_transform(manipulation_matrix(joint, command.value), cloud)
    res.joint = joint
    res.status = "manipulated"
    return res


def _move(env: ActiveEnv, state: EnvState, action: int):
    """Move without the episode step limit (the pipeline keeps its own budget)."""
    return env.step(replace(state, step_count=0, done=False), action)


def write_outputs(res: PipelineResult, out_dir) -> None:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "trace.tsv").write_text("\n".join(res.trace) + f"\nstatus\t{res.status}\n")
    if res.before is not None:
        np.savetxt(out / "before.xyz", res.before, fmt="%.9g")
        np.savetxt(out / "after.xyz", res.after, fmt="%.9g")
