"""Procedural single-joint articulated objects built from cuboids.

World frame: z up, the object stands on z = 0 and its front faces +x.
Every object is stored in its closed configuration; the movable part is
posed by applying the joint's screw motion for the current state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace

import numpy as np

from ..geom import JointParams, JointType, RigidTransform, manipulation_matrix


class Category(str, enum.Enum):
    CABINET_DOOR = "cabinet-door"
    LAPTOP = "laptop"
    DRAWER = "drawer"
    SLIDER = "slider"

    @property
    def joint_type(self) -> JointType:
        return JointType.REVOLUTE if self in (Category.CABINET_DOOR, Category.LAPTOP) else JointType.PRISMATIC


CATEGORIES = tuple(c.value for c in Category)


@dataclass(frozen=True)
class Part:
    center: np.ndarray
    half_extents: np.ndarray
    color: np.ndarray
    movable: bool
    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))

    def transformed(self, t: RigidTransform) -> "Part":
        return replace(self, center=t.rotation @ self.center + t.translation, rotation=t.rotation @ self.rotation)

    def corners(self) -> np.ndarray:
        signs = np.array([[sx, sy, sz] for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)], dtype=float)
        return self.center + (signs * self.half_extents) @ self.rotation.T


@dataclass(frozen=True)
class Scene:
    category: Category
    parts: tuple[Part, ...]  # closed configuration
    joint: JointParams  # world frame, state = current opening
    state_max: float
    seed: int

    @property
    def movable_index(self) -> int:
        return next(i for i, p in enumerate(self.parts) if p.movable)

    @property
    def fixed_indices(self) -> list[int]:
        return [i for i, p in enumerate(self.parts) if not p.movable]

    @property
    def closed_joint(self) -> JointParams:
        return self.joint.with_state(0.0)

    def opening_transform(self) -> RigidTransform:
        return manipulation_matrix(self.closed_joint, self.joint.state)

    def posed_parts(self) -> tuple[Part, ...]:
        t = self.opening_transform()
        return tuple(p.transformed(t) if p.movable else p for p in self.parts)

    def centroid(self) -> np.ndarray:
        pts = np.concatenate([p.corners() for p in self.parts])
        return 0.5 * (pts.min(axis=0) + pts.max(axis=0))


def _box(lo, hi, color, movable=False) -> Part:
    lo, hi = np.asarray(lo, float), np.asarray(hi, float)
    return Part(center=0.5 * (lo + hi), half_extents=0.5 * (hi - lo), color=np.asarray(color, float),
                movable=movable)


def _tint(rng, base) -> np.ndarray:
    return np.clip(np.asarray(base) + rng.uniform(-0.08, 0.08, size=3), 0.05, 1.0)


# Per-category dimension ranges (meters) and state limits. The joint state is
# drawn uniformly on [0, state_max].
RANGES = {
    Category.CABINET_DOOR: dict(width=(0.6, 0.9), depth=(0.4, 0.6), height=(0.7, 1.0), state_max=np.pi / 2),
    Category.LAPTOP: dict(width=(0.35, 0.5), depth=(0.25, 0.35), table=(0.45, 0.55), state_max=2.0),
    Category.DRAWER: dict(width=(0.5, 0.8), depth=(0.4, 0.55), height=(0.5, 0.8), state_max=0.3),
    Category.SLIDER: dict(width=(0.8, 1.1), height=(0.5, 0.8), state_max=0.35),
}

PLINTH = 0.06


def _cabinet_door(rng):
    r = RANGES[Category.CABINET_DOOR]
    W, D, H = (rng.uniform(*r[k]) for k in ("width", "depth", "height"))
    body_c, door_c, base_c = _tint(rng, (0.55, 0.4, 0.25)), _tint(rng, (0.85, 0.7, 0.45)), _tint(rng, (0.3, 0.3, 0.3))
    plinth = _box((-D / 2, -W / 2, 0), (D / 2, W / 2, PLINTH), base_c)
    body = _box((-D / 2, -W / 2, PLINTH), (D / 2, W / 2, PLINTH + H), body_c)
    door = _box((D / 2, -W / 2, PLINTH), (D / 2 + 0.02, W / 2, PLINTH + H), door_c, movable=True)
    # hinge on the door's inner left edge; -z makes positive angles swing outwards
    joint = (JointType.REVOLUTE, (D / 2, -W / 2, PLINTH + H / 2), (0.0, 0.0, -1.0))
    return [plinth, body, door], joint, r["state_max"]


def _laptop(rng):
    r = RANGES[Category.LAPTOP]
    W, D, Ht = (rng.uniform(*r[k]) for k in ("width", "depth", "table"))
    table = _box((-0.4, -0.45, 0), (0.4, 0.45, Ht), _tint(rng, (0.45, 0.5, 0.55)))
    base = _box((-D / 2, -W / 2, Ht), (D / 2, W / 2, Ht + 0.02), _tint(rng, (0.2, 0.2, 0.25)))
    top = Ht + 0.02
    lid = _box((-D / 2, -W / 2, top), (D / 2, W / 2, top + 0.015), _tint(rng, (0.75, 0.75, 0.8)), movable=True)
    # back-edge hinge along y; -y lifts the lid towards +z
    joint = (JointType.REVOLUTE, (-D / 2, 0.0, top), (0.0, -1.0, 0.0))
    return [table, base, lid], joint, r["state_max"]


def _drawer(rng):
    r = RANGES[Category.DRAWER]
    W, D, H = (rng.uniform(*r[k]) for k in ("width", "depth", "height"))
    plinth = _box((-D / 2, -W / 2, 0), (D / 2, W / 2, PLINTH), _tint(rng, (0.3, 0.3, 0.3)))
    body = _box((-D / 2, -W / 2, PLINTH), (D / 2, W / 2, PLINTH + H), _tint(rng, (0.35, 0.5, 0.6)))
    dh = 0.35 * H
    z1 = PLINTH + H - 0.04
    # front protrudes 1 cm so it never z-fights with the body face
    drawer = _box((D / 2 + 0.01 - (D - 0.05), -W / 2 + 0.03, z1 - dh), (D / 2 + 0.01, W / 2 - 0.03, z1),
                  _tint(rng, (0.9, 0.85, 0.6)), movable=True)
    joint = (JointType.PRISMATIC, drawer.center, (1.0, 0.0, 0.0))
    return [plinth, body, drawer], joint, min(r["state_max"], 0.8 * (D - 0.05))


def _slider(rng):
    r = RANGES[Category.SLIDER]
    W, H = (rng.uniform(*r[k]) for k in ("width", "height"))
    base = _box((-0.15, -W / 2, 0), (0.15, W / 2, PLINTH), _tint(rng, (0.3, 0.3, 0.3)))
    frame = _box((-0.025, -W / 2, PLINTH), (0.025, W / 2, PLINTH + H), _tint(rng, (0.6, 0.6, 0.5)))
    panel = _box((0.03, -W / 2 + 0.02, PLINTH + 0.02), (0.05, -0.01, PLINTH + H - 0.02),
                 _tint(rng, (0.3, 0.6, 0.8)), movable=True)
    joint = (JointType.PRISMATIC, panel.center, (0.0, 1.0, 0.0))
    return [base, frame, panel], joint, r["state_max"]


_BUILDERS = {Category.CABINET_DOOR: _cabinet_door, Category.LAPTOP: _laptop,
             Category.DRAWER: _drawer, Category.SLIDER: _slider}


def generate_scene(category, seed: int) -> Scene:
    """Deterministic scene for ``(category, seed)``."""
    try:
        cat = Category(category)
    except ValueError:
        raise ValueError(f"unknown category {category!r}; expected one of {CATEGORIES}") from None
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), list(Category).index(cat)]))
    parts, (jtype, pos, ori), state_max = _BUILDERS[cat](rng)
    state = rng.uniform(0.0, state_max)
    joint = JointParams(jtype, np.array(pos, float), np.array(ori, float), state)
    return Scene(category=cat, parts=tuple(parts), joint=joint, state_max=float(state_max), seed=int(seed))
