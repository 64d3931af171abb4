"""Pinhole camera model and a software rasterizer with perspective-correct
barycentrics.

Covered pixels get the nearest surface fragment (depth test, no culling so
inconsistent winding from reconstructed meshes is harmless). World positions
are perspective-correct interpolations of the triangle vertices, which equals
the ray-triangle intersection point.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from .mesh import TriMesh

_NEAR = 1e-6


@dataclass(frozen=True)
class Camera:
    """Camera-to-world rigid transform + pinhole intrinsics.

    Convention (synthetic-dataset JSON): camera looks down -Z, +X right,
    +Y up; `focal` in pixels, principal point at (cx, cy) in pixel units.
    """

    c2w: np.ndarray   # (4, 4)
    focal: float
    width: int
    height: int
    cx: float = None  # type: ignore[assignment]
    cy: float = None  # type: ignore[assignment]

    def __post_init__(self):
        c2w = np.asarray(self.c2w, dtype=np.float64).reshape(4, 4)
        R = c2w[:3, :3]
        if not np.allclose(R @ R.T, np.eye(3), atol=1e-6):
            raise ValueError("camera rotation must be orthonormal")
        if self.focal <= 0:
            raise ValueError("focal must be positive")
        object.__setattr__(self, "c2w", c2w)
        if self.cx is None:
            object.__setattr__(self, "cx", self.width / 2.0)
        if self.cy is None:
            object.__setattr__(self, "cy", self.height / 2.0)

    @property
    def origin(self) -> np.ndarray:
        return self.c2w[:3, 3]

    @property
    def w2c(self) -> np.ndarray:
        R = self.c2w[:3, :3].T
        t = -R @ self.c2w[:3, 3]
        m = np.eye(4)
        m[:3, :3] = R
        m[:3, 3] = t
        return m

    def ray_directions(self, pixels: np.ndarray) -> np.ndarray:
        """Unit world-space ray directions through pixel centers (row, col)."""
        pixels = np.atleast_2d(pixels).astype(np.float64)
        x = (pixels[:, 1] + 0.5 - self.cx) / self.focal
        y = -(pixels[:, 0] + 0.5 - self.cy) / self.focal
        d_cam = np.stack([x, y, -np.ones_like(x)], axis=1)
        d_world = d_cam @ self.c2w[:3, :3].T
        return d_world / np.linalg.norm(d_world, axis=1, keepdims=True)

    def content_key(self) -> str:
        return f"{self.c2w.tobytes().hex()[:32]}_{self.focal:.6f}_{self.width}x{self.height}"


def camera_from_frame(transform_matrix, camera_angle_x: float, width: int, height: int) -> Camera:
    """Camera from the synthetic-dataset convention: 4x4 c2w + horizontal fov."""
    focal = 0.5 * width / math.tan(0.5 * camera_angle_x)
    return Camera(np.asarray(transform_matrix, dtype=np.float64), focal, width, height)


def orbit_camera(azimuth: float, elevation: float, radius: float, fov_deg: float,
                 width: int, height: int, target=(0.0, 0.0, 0.0)) -> Camera:
    """Z-up orbit rig: angles in radians, fov is the horizontal field of view."""
    target = np.asarray(target, dtype=np.float64)
    pos = target + radius * np.array([
        math.cos(elevation) * math.cos(azimuth),
        math.cos(elevation) * math.sin(azimuth),
        math.sin(elevation)])
    fwd = target - pos
    fwd /= np.linalg.norm(fwd)
    up = np.array([0.0, 0.0, 1.0])
    if abs(np.dot(fwd, up)) > 0.999:
        up = np.array([0.0, 1.0, 0.0])
    right = np.cross(fwd, up)
    right /= np.linalg.norm(right)
    cam_up = np.cross(right, fwd)
    c2w = np.eye(4)
    c2w[:3, 0] = right
    c2w[:3, 1] = cam_up
    c2w[:3, 2] = -fwd
    c2w[:3, 3] = pos
    return Camera(c2w, 0.5 * width / math.tan(0.5 * math.radians(fov_deg)), width, height)


def load_camera_json(path, width: int = None, height: int = None):
    """Parse a synthetic-dataset transforms JSON into a list of (name, Camera)."""
    with open(path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)
    angle = float(meta["camera_angle_x"])
    out = []
    for frame in meta["frames"]:
        w = width or int(frame.get("w", meta.get("w", 0)))
        h = height or int(frame.get("h", meta.get("h", 0)))
        out.append((frame["file_path"],
                    camera_from_frame(frame["transform_matrix"], angle, w, h)))
    return out


class FragmentBuffer:
    """Per-pixel first-hit records for one camera.

    face_id is -1 where nothing is covered. Barycentrics are perspective
    correct and sum to 1 on covered pixels.
    """

    def __init__(self, cam: Camera):
        h, w = cam.height, cam.width
        self.cam = cam
        self.face_id = np.full((h, w), -1, dtype=np.int32)
        self.bary = np.zeros((h, w, 3), dtype=np.float64)
        self.depth = np.full((h, w), np.inf, dtype=np.float64)
        self.world_pos = np.zeros((h, w, 3), dtype=np.float64)
        self.view_dir = np.zeros((h, w, 3), dtype=np.float64)

    @property
    def mask(self) -> np.ndarray:
        return self.face_id >= 0

    def covered(self):
        """Flattened arrays over covered pixels: (pixels, face, bary, pos, dir)."""
        r, c = np.nonzero(self.mask)
        return (np.stack([r, c], axis=1), self.face_id[r, c], self.bary[r, c],
                self.world_pos[r, c], self.view_dir[r, c])


def rasterize(mesh: TriMesh, cam: Camera) -> FragmentBuffer:
    """Z-buffered triangle fill with pixel-center sampling.

    Triangles with any vertex at or behind the near plane are skipped
    (orbit-style cameras outside the object never trigger this).
    """
    buf = FragmentBuffer(cam)
    if mesh.n_faces == 0:
        return buf

    w2c = cam.w2c
    v_cam = mesh.vertices @ w2c[:3, :3].T + w2c[:3, 3]
    z = -v_cam[:, 2]  # positive depth in front of the camera
    sx = cam.cx + cam.focal * v_cam[:, 0] / np.maximum(z, _NEAR)
    sy = cam.cy - cam.focal * v_cam[:, 1] / np.maximum(z, _NEAR)

    faces = mesh.faces
    tz = z[faces]
    visible = np.flatnonzero((tz > _NEAR).all(axis=1))

    H, W = cam.height, cam.width
    fb_depth = buf.depth
    for fi in visible:
        ia, ib, ic = faces[fi]
        ax, ay, bx, by, cx_, cy_ = sx[ia], sy[ia], sx[ib], sy[ib], sx[ic], sy[ic]
        min_x = max(int(math.floor(min(ax, bx, cx_) - 0.5)), 0)
        max_x = min(int(math.ceil(max(ax, bx, cx_) + 0.5)), W - 1)
        min_y = max(int(math.floor(min(ay, by, cy_) - 0.5)), 0)
        max_y = min(int(math.ceil(max(ay, by, cy_) + 0.5)), H - 1)
        if min_x > max_x or min_y > max_y:
            continue

        area = (bx - ax) * (cy_ - ay) - (by - ay) * (cx_ - ax)
        if abs(area) < 1e-12:
            continue

        px = np.arange(min_x, max_x + 1, dtype=np.float64) + 0.5
        py = np.arange(min_y, max_y + 1, dtype=np.float64) + 0.5
        PX, PY = np.meshgrid(px, py)

        # signed edge functions, normalized so inside is positive
        sgn = 1.0 if area > 0 else -1.0
        e0 = sgn * ((cx_ - bx) * (PY - by) - (cy_ - by) * (PX - bx))
        e1 = sgn * ((ax - cx_) * (PY - cy_) - (ay - cy_) * (PX - cx_))
        e2 = sgn * ((bx - ax) * (PY - ay) - (by - ay) * (PX - ax))

        inside = _fill_test(e0, sgn, bx, by, cx_, cy_) \
            & _fill_test(e1, sgn, cx_, cy_, ax, ay) \
            & _fill_test(e2, sgn, ax, ay, bx, by)
        if not inside.any():
            continue

        abs_area = abs(area)
        l0 = e0[inside] / abs_area
        l1 = e1[inside] / abs_area
        l2 = e2[inside] / abs_area

        inv_z = l0 / tz[fi, 0] + l1 / tz[fi, 1] + l2 / tz[fi, 2]
        depth = 1.0 / inv_z
        w0 = (l0 / tz[fi, 0]) * depth
        w1 = (l1 / tz[fi, 1]) * depth
        w2 = (l2 / tz[fi, 2]) * depth

        rows, cols = np.nonzero(inside)
        rows = rows + min_y
        cols = cols + min_x
        closer = depth < fb_depth[rows, cols]
        if not closer.any():
            continue
        rows, cols, depth = rows[closer], cols[closer], depth[closer]
        w0, w1, w2 = w0[closer], w1[closer], w2[closer]

        fb_depth[rows, cols] = depth
        buf.face_id[rows, cols] = fi
        buf.bary[rows, cols, 0] = w0
        buf.bary[rows, cols, 1] = w1
        buf.bary[rows, cols, 2] = w2
        pos = (w0[:, None] * mesh.vertices[ia]
               + w1[:, None] * mesh.vertices[ib]
               + w2[:, None] * mesh.vertices[ic])
        buf.world_pos[rows, cols] = pos

    mask = buf.mask
    if mask.any():
        d = buf.world_pos[mask] - cam.origin
        buf.view_dir[mask] = d / np.linalg.norm(d, axis=1, keepdims=True)
    return buf


def _fill_test(e: np.ndarray, sgn: float, x0, y0, x1, y1) -> np.ndarray:
    """Top-left rule: strictly-inside pixels always pass; pixels exactly on an
    edge pass only when that edge is a top or left edge of the (CCW) triangle."""
    dx = sgn * (x1 - x0)
    dy = sgn * (y1 - y0)
    top_left = (dy < 0) or (dy == 0 and dx < 0)
    return (e > 0) | ((e == 0) & top_left)


def interpolate(bary: np.ndarray, attrs: np.ndarray, renormalize: bool = False) -> np.ndarray:
    """Perspective-correct attribute interpolation.

    `bary` is (..., 3) fragment weights, `attrs` is (..., 3, D) per-vertex
    attributes for the fragment's face. Normals should set `renormalize`.
    """
    bary = np.asarray(bary)
    attrs = np.asarray(attrs)
    out = np.einsum("...i,...ij->...j", bary, attrs)
    if renormalize:
        out = out / np.maximum(np.linalg.norm(out, axis=-1, keepdims=True), 1e-20)
    return out
