import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from articulate.geom import JointType, apply_transform, point_to_axis_distance
from articulate.synth import DatasetConfig, Dataset, from_record, make_dataset, plan_split, realize, record_dtype, to_record
from articulate.synth.render import N_VIEWPOINTS, camera_pose, part_pixel_counts, render, viewpoint_angles
from articulate.synth.scene import CATEGORIES, Category, generate_scene


def _scene_equal(a, b):
    if a.category != b.category or a.state_max != b.state_max or len(a.parts) != len(b.parts):
        return False
    for p, q in zip(a.parts, b.parts):
        for f in ("center", "half_extents", "color", "rotation"):
            if not np.array_equal(getattr(p, f), getattr(q, f)):
                return False
    ja, jb = a.joint, b.joint
    return (ja.joint_type == jb.joint_type and np.array_equal(ja.position, jb.position)
            and np.array_equal(ja.orientation, jb.orientation) and ja.state == jb.state)


def test_generate_scene_deterministic():
    assert _scene_equal(generate_scene("drawer", 7), generate_scene("drawer", 7))
    assert not _scene_equal(generate_scene("drawer", 7), generate_scene("drawer", 8))


def test_cabinet_door_has_vertical_revolute_joint():
    for seed in range(10):
        j = generate_scene("cabinet-door", seed).joint
        assert j.joint_type == JointType.REVOLUTE
        assert abs(abs(j.orientation[2]) - 1) < 1e-12


def test_unknown_category_rejected():
    with pytest.raises(ValueError, match="unknown category"):
        generate_scene("fridge", 0)


def test_laptop_states_uniform():
    states = np.array([generate_scene("laptop", s).joint.state for s in range(1000)])
    smax = generate_scene("laptop", 0).state_max
    assert states.min() >= 0 and states.max() <= smax
    assert stats.kstest(states / smax, "uniform").pvalue > 0.01


@pytest.mark.parametrize("category", CATEGORIES)
def test_scene_structure(category):
    for seed in range(5):
        s = generate_scene(category, seed)
        assert sum(p.movable for p in s.parts) == 1 and len(s.fixed_indices) >= 1
        assert 0 <= s.joint.state <= s.state_max
        assert s.joint.joint_type == Category(category).joint_type
        mov = s.parts[s.movable_index]
        corners = mov.corners()
        if s.joint.is_revolute:
            # hinge runs along an edge: two corners lie on the axis
            d = [point_to_axis_distance(c, s.joint.position, s.joint.orientation) for c in corners]
            assert sum(x < 1e-9 for x in d) >= 2
        else:
            # prismatic axis parallel to a face normal of the part
            assert np.isclose(np.abs(mov.rotation.T @ s.joint.orientation).max(), 1.0, atol=1e-12)


@pytest.mark.parametrize("category", CATEGORIES)
def test_posed_part_is_screw_motion_of_closed_part(category):
    s = generate_scene(category, 3)
    t = s.opening_transform()
    closed = s.parts[s.movable_index].corners()
    posed = s.posed_parts()[s.movable_index].corners()
    assert np.abs(apply_transform(t, closed) - posed).max() < 1e-12


def test_camera_pose_ring():
    s = generate_scene("drawer", 1)
    a0, _ = viewpoint_angles(0)
    a8, _ = viewpoint_angles(8)
    assert a8 - a0 == pytest.approx(np.pi, abs=1e-15)
    p, q = camera_pose(5, s), camera_pose(5, s)
    assert np.array_equal(p.extrinsic.matrix, q.extrinsic.matrix)
    centers = np.array([camera_pose(v, s).center for v in range(N_VIEWPOINTS)])
    gaps = np.linalg.norm(centers[:, None] - centers[None], axis=-1) + np.eye(N_VIEWPOINTS)
    assert gaps.min() > 1e-3
    with pytest.raises(ValueError):
        camera_pose(16, s)
    with pytest.raises(ValueError):
        camera_pose(-1, s)


def test_camera_faces_centroid():
    s = generate_scene("laptop", 2)
    for v in range(N_VIEWPOINTS):
        cam = apply_transform(camera_pose(v, s).extrinsic, s.centroid()[None])[0]
        assert abs(cam[0]) < 1e-9 and abs(cam[1]) < 1e-9 and cam[2] > 0


def _front_face_depth_oracle(scene, pose, res):
    """Ray/plane intersection depth for every pixel, against the drawer front plane."""
    mov = scene.posed_parts()[scene.movable_index]
    x_front = mov.center[0] + mov.half_extents[0]
    K = pose.intrinsics
    r, c = np.mgrid[0:res, 0:res]
    d_cam = np.stack([(c + 0.5 - K.cx) / K.focal, (r + 0.5 - K.cy) / K.focal, np.ones_like(r, float)], -1)
    R = pose.extrinsic.rotation
    d_world = d_cam @ R  # rows are R^T d
    origin = pose.center
    t = (x_front - origin[0]) / d_world[..., 0]
    hit = origin + t[..., None] * d_world
    lo, hi = mov.center - mov.half_extents, mov.center + mov.half_extents
    inside = ((hit[..., 1] > lo[1] + 0.01) & (hit[..., 1] < hi[1] - 0.01)
              & (hit[..., 2] > lo[2] + 0.01) & (hit[..., 2] < hi[2] - 0.01))
    return t, inside


def test_drawer_front_face_depth_matches_plane_oracle():
    s = generate_scene("drawer", 4)
    res = 64
    pose = camera_pose(0, s, res)
    obs = render(s, pose, res)
    assert obs.raw_point_count > 0
    t, inside = _front_face_depth_oracle(s, pose, res)
    px = inside & (obs.part_mask == s.movable_index)
    assert px.sum() > 20
    assert np.abs(obs.depth[px] - t[px]).max() < 1e-5


def test_occluded_viewpoint_sees_fewer_points():
    s = generate_scene("drawer", 4)
    front = render(s, camera_pose(0, s), 64)
    back = render(s, camera_pose(8, s), 64)
    assert back.raw_point_count < front.raw_point_count
    assert back.degenerate and not front.degenerate
    assert not back.cloud.any()


@pytest.mark.parametrize("category", CATEGORIES)
def test_movable_part_visible_from_some_viewpoint(category):
    for seed in range(4):
        assert part_pixel_counts(generate_scene(category, seed), 64).sum() > 0


def test_render_deterministic_and_seeded():
    s = generate_scene("slider", 5)
    pose = camera_pose(2, s)
    a, b = render(s, pose, seed=3), render(s, pose, seed=3)
    for f in ("rgb", "depth", "cloud", "part_mask"):
        assert np.array_equal(getattr(a, f), getattr(b, f))
    c = render(s, pose, seed=4)
    assert not np.array_equal(a.cloud, c.cloud)


def test_render_rejects_low_resolution():
    s = generate_scene("slider", 5)
    with pytest.raises(ValueError):
        render(s, camera_pose(0, s, 8), 8)


@settings(max_examples=20, deadline=None)
@given(st.sampled_from(CATEGORIES), st.integers(0, 10_000), st.integers(0, N_VIEWPOINTS - 1))
def test_cloud_back_projection_consistency(category, seed, vid):
    s = generate_scene(category, seed)
    pose = camera_pose(vid, s, 32)
    obs = render(s, pose, 32, n_points=64)
    assert obs.rgb.min() >= 0 and obs.rgb.max() <= 1
    if obs.degenerate:
        return
    pts = obs.cloud.astype(np.float64)
    assert (pts[:, 2] > 0).all()
    uv = pose.intrinsics.project(pts)
    col, row = np.floor(uv[:, 0]).astype(int), np.floor(uv[:, 1]).astype(int)
    assert np.abs(uv - np.stack([col + 0.5, row + 0.5], -1)).max() < 0.5
    assert np.abs(obs.depth[row, col] - pts[:, 2]).max() < 1e-6
    # every source pixel is within two pixels of the selected part
    near = np.zeros_like(obs.part_mask, bool)
    ys, xs = np.nonzero(obs.part_mask == obs.selected_part)
    for dy in range(-2, 3):
        for dx in range(-2, 3):
            near[np.clip(ys + dy, 0, 31), np.clip(xs + dx, 0, 31)] = True
    assert near[row, col].all()


@settings(max_examples=50, deadline=None)
@given(st.sampled_from(CATEGORIES), st.integers(0, 10_000), st.integers(0, N_VIEWPOINTS - 1))
def test_ground_truth_frame_round_trip(category, seed, vid):
    s = generate_scene(category, seed)
    pose = camera_pose(vid, s)
    cam = s.joint.transformed(pose.extrinsic)
    assert abs(np.linalg.norm(cam.orientation) - 1) < 1e-12
    back = cam.transformed(pose.extrinsic.inverse())
    assert np.abs(back.position - s.joint.position).max() < 1e-9
    assert np.abs(back.orientation - s.joint.orientation).max() < 1e-9


def test_dataset_is_deterministic_with_configured_ratio(tmp_path):
    cfg = DatasetConfig(train=64, val=8, test=8, seed=1, resolution=32, n_points=64)
    assert make_dataset(cfg, tmp_path / "a") == {"train": 64, "val": 8, "test": 8}
    make_dataset(cfg, tmp_path / "b")
    for name in ("index.txt", "data.bin"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    ds = Dataset(tmp_path / "a")
    assert len(ds) == 80
    train = [ds[i] for i in ds.split("train")]
    prismatic = sum(o.ground_truth.joint_type == JointType.PRISMATIC for o in train)
    assert prismatic == 32
    assert sum(not o.movable_selected for o in train) == 16


def test_record_round_trip(tmp_path):
    cfg = DatasetConfig(train=6, val=1, test=1, resolution=32, n_points=64)
    make_dataset(cfg, tmp_path)
    ds = Dataset(tmp_path)
    for i, plan in enumerate(plan_split(cfg, "train")):
        obs, back = realize(cfg, plan), ds[ds.split("train")[i]]
        for f in ("rgb", "depth", "cloud", "part_mask"):
            assert np.array_equal(getattr(obs, f), getattr(back, f))
        assert (obs.raw_point_count, obs.viewpoint_id, obs.movable_selected) == \
               (back.raw_point_count, back.viewpoint_id, back.movable_selected)
        g, h = obs.ground_truth, back.ground_truth
        assert g.joint_type == h.joint_type
        # labels are stored as 32-bit floats
        assert np.array_equal(np.float32(g.position), h.position)
        assert np.array_equal(np.float32(g.orientation), h.orientation)
        assert np.float32(g.state) == h.state and np.float32(obs.state_max) == back.state_max


def test_record_layout():
    dt = record_dtype(2, 2, 3)
    # header 20 + rgb 48 + depth 16 + mask 16 + cloud 36 + counts 8 + labels 4+12+12+4+4+4
    assert dt.itemsize == 20 + 48 + 16 + 16 + 36 + 8 + 40
    rec = np.zeros((), dt)
    rec["magic"] = b"XXXX"
    with pytest.raises(ValueError, match="magic"):
        from_record(rec)


def test_dataset_missing_index(tmp_path):
    with pytest.raises(FileNotFoundError):
        Dataset(tmp_path)


def test_to_record_matches_header():
    s = generate_scene("laptop", 1)
    obs = render(s, camera_pose(1, s, 16), 16, n_points=8)
    rec = to_record(obs, record_dtype(16, 16, 8))
    assert bytes(rec["magic"]) == b"MARS" and int(rec["H"]) == 16 and int(rec["N"]) == 8
