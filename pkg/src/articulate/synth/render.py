"""Pinhole camera ring, z-buffer rasterizer, and depth back-projection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_dilation

from ..geom import JointParams, RigidTransform, look_at
from .scene import Scene

N_VIEWPOINTS = 16
BACKGROUND = -1


@dataclass(frozen=True)
class CameraRig:
    """Viewpoint ring geometry. Even ids sit at the low elevation, odd at the high one."""

    radius: float = 2.6
    elevation_low: float = np.deg2rad(15.0)
    elevation_high: float = np.deg2rad(40.0)
    fov: float = np.deg2rad(32.0)


@dataclass(frozen=True)
class Intrinsics:
    focal: float
    cx: float
    cy: float

    def project(self, pts_cam: np.ndarray) -> np.ndarray:
        """Camera-frame points to continuous pixel coordinates (u = column, v = row)."""
        z = pts_cam[..., 2]
        return np.stack([self.focal * pts_cam[..., 0] / z + self.cx, self.focal * pts_cam[..., 1] / z + self.cy], -1)


@dataclass(frozen=True)
class CameraPose:
    viewpoint_id: int
    extrinsic: RigidTransform  # world -> camera
    intrinsics: Intrinsics

    @property
    def center(self) -> np.ndarray:
        return self.extrinsic.inverse().translation


def intrinsics_for(resolution: int, rig: CameraRig = CameraRig()) -> Intrinsics:
    f = 0.5 * resolution / np.tan(0.5 * rig.fov)
    return Intrinsics(focal=f, cx=resolution / 2.0, cy=resolution / 2.0)


def viewpoint_angles(viewpoint_id: int, rig: CameraRig = CameraRig()) -> tuple[float, float]:
    if not 0 <= int(viewpoint_id) < N_VIEWPOINTS:
        raise ValueError(f"viewpoint_id must be in [0, {N_VIEWPOINTS}), got {viewpoint_id}")
    az = 2 * np.pi * viewpoint_id / N_VIEWPOINTS
    el = rig.elevation_high if viewpoint_id % 2 else rig.elevation_low
    return az, el


def camera_pose(viewpoint_id: int, scene: Scene, resolution: int = 64, rig: CameraRig = CameraRig()) -> CameraPose:
    az, el = viewpoint_angles(viewpoint_id, rig)
    target = scene.centroid()
    eye = target + rig.radius * np.array([np.cos(el) * np.cos(az), np.cos(el) * np.sin(az), np.sin(el)])
    return CameraPose(int(viewpoint_id), look_at(eye, target), intrinsics_for(resolution, rig))


@dataclass
class Observation:
    rgb: np.ndarray  # (H, W, 3) float32 in [0, 1]
    depth: np.ndarray  # (H, W) float32 meters, 0 = no hit
    cloud: np.ndarray  # (N, 3) float32 camera frame
    raw_point_count: int
    part_mask: np.ndarray  # (H, W) int32, -1 background
    viewpoint_id: int
    ground_truth: JointParams  # camera frame
    movable_selected: bool
    state_max: float
    selected_part: int = -1
    pose: CameraPose | None = None

    @property
    def degenerate(self) -> bool:
        return self.raw_point_count == 0


# face k of a cuboid: (axis, sign); the normal is sign * local axis
_FACES = [(a, s) for a in range(3) for s in (-1.0, 1.0)]
_LIGHT = np.array([0.5, 0.3, 0.8]) / np.linalg.norm([0.5, 0.3, 0.8])
AMBIENT = 0.35


def _face_corners(center, half, rot, axis, sign):
    u_ax, v_ax = [a for a in range(3) if a != axis]
    local = []
    for su, sv in ((-1, -1), (1, -1), (1, 1), (-1, 1)):
        p = np.zeros(3)
        p[axis] = sign * half[axis]
        p[u_ax] = su * half[u_ax]
        p[v_ax] = sv * half[v_ax]
        local.append(p)
    return center + np.array(local) @ rot.T


def rasterize(scene: Scene, pose: CameraPose, resolution: int):
    """Depth (camera z), part-index and shaded colour buffers."""
    H = W = int(resolution)
    K = pose.intrinsics
    E = pose.extrinsic
    depth = np.full((H, W), np.inf)
    mask = np.full((H, W), BACKGROUND, dtype=np.int32)
    rgb = np.zeros((H, W, 3))
    cols = np.arange(W) + 0.5
    rows = np.arange(H) + 0.5
    cam_center = pose.center
    for idx, part in enumerate(scene.posed_parts()):
        for axis, sign in _FACES:
            n_world = sign * part.rotation[:, axis]
            corners = _face_corners(part.center, part.half_extents, part.rotation, axis, sign)
            if np.dot(n_world, corners.mean(axis=0) - cam_center) >= 0:
                continue  # back face
            pc = corners @ E.rotation.T + E.translation
            if (pc[:, 2] <= 1e-3).any():
                continue
            uv = K.project(pc)
            c0 = max(int(np.floor(uv[:, 0].min() - 0.5)), 0)
            c1 = min(int(np.ceil(uv[:, 0].max() - 0.5)), W - 1)
            r0 = max(int(np.floor(uv[:, 1].min() - 0.5)), 0)
            r1 = min(int(np.ceil(uv[:, 1].max() - 0.5)), H - 1)
            if c0 > c1 or r0 > r1:
                continue
            pu, pv = np.meshgrid(cols[c0:c1 + 1], rows[r0:r1 + 1])
            # convex-quad inside test: same side of all four edges
            e = np.roll(uv, -1, axis=0) - uv
            side = e[:, 0, None, None] * (pv[None] - uv[:, 1, None, None]) - \
                e[:, 1, None, None] * (pu[None] - uv[:, 0, None, None])
            inside = (side >= 0).all(axis=0) | (side <= 0).all(axis=0)
            if not inside.any():
                continue
            # exact planar depth along each pixel ray
            n_cam = E.rotation @ n_world
            ray = np.stack([(pu - K.cx) / K.focal, (pv - K.cy) / K.focal, np.ones_like(pu)], -1)
            denom = ray @ n_cam
            with np.errstate(divide="ignore", invalid="ignore"):
                z = np.dot(n_cam, pc[0]) / denom
            win_d = depth[r0:r1 + 1, c0:c1 + 1]
            hit = inside & (np.abs(denom) > 1e-12) & (z > 0) & (z < win_d)
            if not hit.any():
                continue
            win_d[hit] = z[hit]
            mask[r0:r1 + 1, c0:c1 + 1][hit] = idx
            shade = AMBIENT + (1 - AMBIENT) * max(0.0, float(np.dot(n_world, _LIGHT)))
            rgb[r0:r1 + 1, c0:c1 + 1][hit] = part.color * shade
    depth[~np.isfinite(depth)] = 0.0
    return depth, mask, np.clip(rgb, 0.0, 1.0)


def back_project(depth: np.ndarray, pixels: np.ndarray, K: Intrinsics) -> np.ndarray:
    """Camera-frame points for (row, col) pixel indices with their depth."""
    r, c = pixels[:, 0], pixels[:, 1]
    z = depth[r, c].astype(np.float64)
    return np.stack([(c + 0.5 - K.cx) * z / K.focal, (r + 0.5 - K.cy) * z / K.focal, z], -1)


def render(scene: Scene, pose: CameraPose, resolution: int = 64, *, select: int | str = "movable",
           n_points: int = 256, seed: int = 0, depth_noise: float = 0.0) -> Observation:
    """Render ``scene`` from ``pose`` and cut out the selected part's cloud.

    ``select`` is "movable" or an explicit part index. The cloud covers the
    part's pixels plus a 2-pixel dilation, restricted to valid depth, then is
    subsampled (or padded by resampling) to exactly ``n_points``.
    """
    if resolution < 16:
        raise ValueError(f"resolution must be >= 16, got {resolution}")
    sel = scene.movable_index if select == "movable" else int(select)
    if not 0 <= sel < len(scene.parts):
        raise ValueError(f"part index {sel} out of range for {len(scene.parts)} parts")
    rng = np.random.default_rng(seed)
    depth, mask, rgb = rasterize(scene, pose, resolution)
    if depth_noise > 0:
        hit = depth > 0
        depth[hit] += rng.normal(0.0, depth_noise, size=int(hit.sum()))
    depth32 = depth.astype(np.float32)

    part_px = mask == sel
    roi = binary_dilation(part_px, structure=np.ones((3, 3), bool), iterations=2) if part_px.any() else part_px
    roi &= depth32 > 0
    pixels = np.argwhere(roi)
    count = len(pixels)
    if count >= n_points:
        pick = rng.choice(count, n_points, replace=False)
    elif count > 0:
        pick = np.concatenate([np.arange(count), rng.choice(count, n_points - count, replace=True)])
    else:
        pick = None
    if pick is None:
        cloud = np.zeros((n_points, 3), np.float32)
    else:
        cloud = back_project(depth32, pixels[pick], pose.intrinsics).astype(np.float32)

    gt = scene.joint.transformed(pose.extrinsic)
    return Observation(
        rgb=rgb.astype(np.float32), depth=depth32, cloud=cloud, raw_point_count=int(count),
        part_mask=mask, viewpoint_id=pose.viewpoint_id, ground_truth=gt,
        movable_selected=bool(scene.parts[sel].movable), state_max=scene.state_max,
        selected_part=sel, pose=pose)


def part_pixel_counts(scene: Scene, resolution: int = 64, part: int | None = None) -> np.ndarray:
    """Visible pixel count of one part (default: the movable one) from each of the 16 viewpoints."""
    part = scene.movable_index if part is None else part
    out = np.zeros(N_VIEWPOINTS, dtype=np.int64)
    for vid in range(N_VIEWPOINTS):
        _, mask, _ = rasterize(scene, camera_pose(vid, scene, resolution), resolution)
        out[vid] = int((mask == part).sum())
    return out
