"""On-disk dataset: a text index plus one file of fixed-size binary records.

Index line: ``record_id<TAB>category<TAB>split<TAB>byte_offset``.
Record (little-endian, 32-bit scalars)::

    'MARS' | version u32 | H i32 | W i32 | N i32
    rgb H*W*3 f32 | depth H*W f32 | part_mask H*W i32 | cloud N*3 f32
    raw_point_count i32 | viewpoint_id i32
    joint_type i32 | position 3 f32 | orientation 3 f32 | state f32 | movable i32 | state_max f32
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ..geom import JointParams
from .render import N_VIEWPOINTS, Observation, camera_pose, part_pixel_counts, render
from .scene import CATEGORIES, Category, generate_scene

MAGIC = b"MARS"
VERSION = 1
SPLITS = ("train", "val", "test")
INDEX_NAME = "index.txt"
DATA_NAME = "data.bin"
# number of lowest-visibility (but non-empty) viewpoints counted as "poor"
POOR_VIEWS = 4


def record_dtype(H: int, W: int, N: int) -> np.dtype:
    return np.dtype([
        ("magic", "S4"), ("version", "<u4"), ("H", "<i4"), ("W", "<i4"), ("N", "<i4"),
        ("rgb", "<f4", (H, W, 3)), ("depth", "<f4", (H, W)), ("part_mask", "<i4", (H, W)),
        ("cloud", "<f4", (N, 3)), ("raw_point_count", "<i4"), ("viewpoint_id", "<i4"),
        ("joint_type", "<i4"), ("position", "<f4", (3,)), ("orientation", "<f4", (3,)), ("state", "<f4"),
        ("movable", "<i4"), ("state_max", "<f4"),
    ])


@dataclass(frozen=True)
class DatasetConfig:
    train: int = 64
    val: int = 8
    test: int = 8
    seed: int = 1
    categories: tuple[str, ...] = CATEGORIES
    prismatic_ratio: float = 0.5
    immovable_ratio: float = 0.25
    poor_view_ratio: float = 0.25
    resolution: int = 64
    n_points: int = 256
    depth_noise: float = 0.0

    def split_size(self, split: str) -> int:
        return getattr(self, split)


@dataclass(frozen=True)
class RecordPlan:
    split: str
    index: int
    category: str
    scene_seed: int
    movable: bool
    poor_view: bool
    render_seed: int
    part_choice: float = field(default=0.0)
    view_choice: float = field(default=0.0)


def _exact_flags(rng, n, ratio) -> np.ndarray:
    k = int(round(ratio * n))
    flags = np.zeros(n, bool)
    flags[:k] = True
    return rng.permutation(flags)


def plan_split(config: DatasetConfig, split: str) -> list[RecordPlan]:
    """Deterministic per-record recipe; eval re-derives scenes from it."""
    n = config.split_size(split)
    cats = [Category(c) for c in config.categories]
    pris = [c.value for c in cats if c.joint_type == 1]
    revo = [c.value for c in cats if c.joint_type == 0]
    rng = np.random.default_rng(np.random.SeedSequence([config.seed, SPLITS.index(split)]))
    ratio = config.prismatic_ratio if pris and revo else (1.0 if pris else 0.0)
    is_pris = _exact_flags(rng, n, ratio)
    immovable = _exact_flags(rng, n, config.immovable_ratio)
    poor = _exact_flags(rng, n, config.poor_view_ratio)
    plans = []
    for i in range(n):
        pool = pris if is_pris[i] else revo
        cat = pool[int(rng.integers(len(pool)))]
        plans.append(RecordPlan(split=split, index=i, category=cat, scene_seed=int(rng.integers(2**31 - 1)),
                                movable=not immovable[i], poor_view=bool(poor[i]),
                                render_seed=int(rng.integers(2**31 - 1)),
                                part_choice=float(rng.random()), view_choice=float(rng.random())))
    return plans


def choose_viewpoint(counts: np.ndarray, poor: bool, u: float) -> int:
    """Pick among the POOR_VIEWS lowest-visibility visible views, or among the rest."""
    visible = [int(v) for v in np.argsort(counts, kind="stable") if counts[v] > 0]
    low, rest = visible[:POOR_VIEWS], visible[POOR_VIEWS:]
    pool = low if poor or not rest else rest
    return pool[min(int(u * len(pool)), len(pool) - 1)]


def realize(config: DatasetConfig, plan: RecordPlan) -> Observation:
    scene = generate_scene(plan.category, plan.scene_seed)
    if plan.movable:
        part = scene.movable_index
    else:
        fixed = scene.fixed_indices
        part = fixed[min(int(plan.part_choice * len(fixed)), len(fixed) - 1)]
    counts = part_pixel_counts(scene, config.resolution, part)
    vid = choose_viewpoint(counts, plan.poor_view, plan.view_choice)
    pose = camera_pose(vid, scene, config.resolution)
    return render(scene, pose, config.resolution, select=part, n_points=config.n_points,
                  seed=plan.render_seed, depth_noise=config.depth_noise)


def to_record(obs: Observation, dtype: np.dtype) -> np.ndarray:
    rec = np.zeros((), dtype=dtype)
    H, W = obs.depth.shape
    gt = obs.ground_truth
    rec["magic"], rec["version"], rec["H"], rec["W"], rec["N"] = MAGIC, VERSION, H, W, len(obs.cloud)
    rec["rgb"], rec["depth"], rec["part_mask"], rec["cloud"] = obs.rgb, obs.depth, obs.part_mask, obs.cloud
    rec["raw_point_count"], rec["viewpoint_id"] = obs.raw_point_count, obs.viewpoint_id
    rec["joint_type"], rec["position"], rec["orientation"] = int(gt.joint_type), gt.position, gt.orientation
    rec["state"], rec["movable"], rec["state_max"] = gt.state, int(obs.movable_selected), obs.state_max
    return rec


def from_record(rec) -> Observation:
    if bytes(rec["magic"]) != MAGIC:
        raise ValueError("record does not start with the MARS magic")
    if int(rec["version"]) != VERSION:
        raise ValueError(f"unsupported record version {int(rec['version'])}")
    gt = JointParams(int(rec["joint_type"]), rec["position"].astype(np.float64),
                     rec["orientation"].astype(np.float64), float(rec["state"]))
    return Observation(
        rgb=np.array(rec["rgb"], np.float32), depth=np.array(rec["depth"], np.float32),
        cloud=np.array(rec["cloud"], np.float32), raw_point_count=int(rec["raw_point_count"]),
        part_mask=np.array(rec["part_mask"], np.int32), viewpoint_id=int(rec["viewpoint_id"]),
        ground_truth=gt, movable_selected=bool(rec["movable"]), state_max=float(rec["state_max"]))


def make_dataset(config: DatasetConfig, path) -> dict[str, int]:
    """Render every planned record and write index + data files under ``path``."""
    path = Path(path)
    try:
        path.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create dataset directory {path}: {exc}") from exc
    dtype = record_dtype(config.resolution, config.resolution, config.n_points)
    counts = {}
    lines = []
    rid = 0
    data_path, index_path = path / DATA_NAME, path / INDEX_NAME
    try:
        with open(data_path, "wb") as fh:
            for split in SPLITS:
                plans = plan_split(config, split)
                counts[split] = len(plans)
                for plan in plans:
                    obs = realize(config, plan)
                    lines.append(f"{rid}\t{plan.category}\t{split}\t{rid * dtype.itemsize}\n")
                    fh.write(to_record(obs, dtype).tobytes())
                    rid += 1
        index_path.write_text("".join(lines))
    except OSError as exc:
        raise OSError(f"writing dataset under {path} failed: {exc}") from exc
    return counts


@dataclass(frozen=True)
class IndexEntry:
    record_id: int
    category: str
    split: str
    offset: int


class Dataset:
    """Read-only view over a dataset directory (records are memory-mapped)."""

    def __init__(self, path):
        self.path = Path(path)
        index_path = self.path / INDEX_NAME
        if not index_path.exists():
            raise FileNotFoundError(f"no dataset index at {index_path}")
        self.entries = []
        for lineno, line in enumerate(index_path.read_text().splitlines(), 1):
            fields = line.split("\t")
            if len(fields) != 4:
                raise ValueError(f"{index_path}:{lineno}: expected 4 tab-separated fields")
            self.entries.append(IndexEntry(int(fields[0]), fields[1], fields[2], int(fields[3])))
        raw = np.fromfile(self.path / DATA_NAME, dtype=np.uint8, count=40)
        if len(raw) < 20 or raw[:4].tobytes() != MAGIC:
            raise ValueError(f"{self.path / DATA_NAME}: missing MARS header")
        H, W, N = np.frombuffer(raw[8:20].tobytes(), "<i4")
        self.dtype = record_dtype(int(H), int(W), int(N))
        self.records = np.memmap(self.path / DATA_NAME, dtype=self.dtype, mode="r")
        if len(self.records) != len(self.entries):
            raise ValueError(f"index lists {len(self.entries)} records, data file holds {len(self.records)}")

    def __len__(self):
        return len(self.entries)

    def split(self, name: str) -> list[int]:
        return [e.record_id for e in self.entries if e.split == name]

    def __getitem__(self, i: int) -> Observation:
        e = self.entries[i]
        return from_record(self.records[e.offset // self.dtype.itemsize])

    def category(self, i: int) -> str:
        return self.entries[i].category

    def split_index(self, i: int) -> int:
        """Position of record ``i`` within its own split (matches plan_split order)."""
        e = self.entries[i]
        return sum(1 for x in self.entries[:i] if x.split == e.split)
