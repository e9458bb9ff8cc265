"""Per-category joint-estimation metrics, with and without one active-sensing step."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..active import ActiveEnv, EnvState
from ..geom import JointType
from ..metrics import sample_errors
from ..synth.render import N_VIEWPOINTS
from ..synth.scene import Category

COLUMNS = ("category", "n", "position", "orientation_deg", "state", "type_acc_pct")


@dataclass
class SampleResult:
    category: str
    joint_type: int
    position: float
    orientation: float  # radians
    state: float  # radians or meters
    type_ok: bool


@dataclass
class MetricsTable:
    """Per-category means; revolute states in degrees, prismatic ones in scene units."""

    rows: dict[str, dict[str, float]] = field(default_factory=dict)

    @classmethod
    def from_results(cls, results: list[SampleResult]) -> "MetricsTable":
        table = cls()
        cats = [c for c in (x.value for x in Category) if any(r.category == c for r in results)]
        for c in cats:
            rs = [r for r in results if r.category == c]
            revolute = rs[0].joint_type == int(JointType.REVOLUTE)
            state = np.mean([r.state for r in rs])
            table.rows[c] = {
                "n": len(rs),
                "position": float(np.mean([r.position for r in rs])),
                "orientation_deg": float(np.rad2deg(np.mean([r.orientation for r in rs]))),
                "state": float(np.rad2deg(state) if revolute else state),
                "type_acc_pct": 100.0 * float(np.mean([r.type_ok for r in rs])),
            }
        # unweighted category means, split by joint type
        for name, jt in (("avg-revolute", JointType.REVOLUTE), ("avg-prismatic", JointType.PRISMATIC)):
            members = [c for c in cats if Category(c).joint_type == jt]
            if members:
                table.rows[name] = {k: float(np.mean([table.rows[c][k] for c in members]))
                                    for k in COLUMNS[1:]}
                table.rows[name]["n"] = int(sum(table.rows[c]["n"] for c in members))
        return table

    def to_text(self) -> str:
        lines = ["\t".join(COLUMNS)]
        for name, r in self.rows.items():
            lines.append("\t".join([name, str(int(r["n"]))] + [f"{r[k]:.6f}" for k in COLUMNS[2:]]))
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str, source: str = "<table>") -> "MetricsTable":
        table = cls()
        lines = text.splitlines()
        if not lines:
            return table
        if tuple(lines[0].split("\t")) != COLUMNS:
            raise ValueError(f"{source}:1: unexpected header")
        for lineno, line in enumerate(lines[1:], 2):
            parts = line.split("\t")
            if len(parts) != len(COLUMNS):
                raise ValueError(f"{source}:{lineno}: expected {len(COLUMNS)} fields, got {len(parts)}")
            try:
                table.rows[parts[0]] = {"n": int(parts[1]), **{k: float(v) for k, v in zip(COLUMNS[2:], parts[2:])}}
            except ValueError:
                raise ValueError(f"{source}:{lineno}: non-numeric field") from None
        return table


def results_from(pred: dict, gt: dict, categories) -> list[SampleResult]:
    errs = sample_errors(pred, gt)
    return [SampleResult(str(categories[i]), int(gt["joint_type"][i]), float(errs["position"][i]),
                         float(errs["orientation"][i]), float(errs["state"][i]), bool(errs["type_ok"][i]))
            for i in range(len(gt["v"]))]


def _view_result(view, category: str) -> SampleResult:
    gt = view.gt
    pred = {k: view.pred[k][None] for k in ("h", "u", "v", "rho")}
    g = {"joint_type": np.array([int(gt.joint_type)]), "h": gt.position[None], "u": gt.orientation[None],
         "v": np.array([gt.state])}
    return results_from(pred, g, [category])[0]


@dataclass
class ActiveOutcome:
    mffp: list[SampleResult]
    mars: list[SampleResult]
    floor: list[SampleResult]
    moved: list[int]  # indices of samples that took a sensing step
    actions: list[int]


def active_evaluate(env: ActiveEnv, policy, keys, categories, start_views, pred: dict, base: list[SampleResult],
                    threshold: float = 0.5) -> ActiveOutcome:
    """One policy step for every sample whose score is at or below ``threshold``.

    ``keys`` are scene keys registered in ``env``. The floor result for a
    moved sample is the best state error over all viewpoints, a lower bound
    that no single-step policy can beat.
    """
    mars, floor, moved, actions = list(base), list(base), [], []
    for i, key in enumerate(keys):
        if pred["gamma"][i] > threshold:
            continue
        state = EnvState(scene_seed=key, feature=pred["cls"][i], position=int(start_views[i]),
                         reachable_mask=np.ones(N_VIEWPOINTS, bool), step_count=0, score=float(pred["gamma"][i]),
                         points=0)
        action = int(policy(state))
        mars[i] = _view_result(env.view(key, action), categories[i])
        views = env.views(key)
        candidates = [_view_result(v, categories[i]) for v in views] + [base[i], mars[i]]
        floor[i] = min(candidates, key=lambda r: r.state)
        moved.append(i)
        actions.append(action)
    return ActiveOutcome(mffp=list(base), mars=mars, floor=floor, moved=moved, actions=actions)


def reduction_ratios(mffp: MetricsTable, mars: MetricsTable) -> dict[str, dict[str, float]]:
    """MARS error as a percentage of MFFP error (MFFP = 100)."""
    out = {}
    for name, r in mffp.rows.items():
        if name not in mars.rows:
            continue
        out[name] = {}
        for k in ("position", "orientation_deg", "state"):
            base = r[k]
            out[name][k] = 100.0 * mars.rows[name][k] / base if base > 0 else 100.0
    return out


def reduction_text(ratios: dict[str, dict[str, float]]) -> str:
    lines = ["category\tmetric\tmffp_pct\tmars_pct"]
    for name, r in ratios.items():
        for k, v in r.items():
            lines.append(f"{name}\t{k}\t100.000000\t{v:.6f}")
    return "\n".join(lines) + "\n"
