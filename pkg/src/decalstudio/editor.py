"""Instant decal blending: direct texel overwrite in the baked albedo map.

A 4-point homography maps the decal's unit square onto the anchor quad in UV
space; every texel whose center falls inside the quad is alpha-composited
with a bilinear decal tap. No optimization runs; the texture net itself is
never touched, so reverting just re-evaluates it over the quad.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .images import srgb_to_linear
from .scene import Scene
from .uvparam import bilinear_sample


class GeometryError(ValueError):
    """Anchor quad is degenerate (collinear / non-convex / self-intersecting)."""


class EditStateError(RuntimeError):
    """Edit requested before the scene caches were baked."""


@dataclass
class DecalSpec:
    """Decal image (RGBA, float [0,1]) + four ordered UV anchors.

    Anchors are the images of the unit-square corners (0,0), (1,0), (1,1),
    (0,1) and must form a strictly convex quad inside [0,1]^2.
    """

    image: np.ndarray
    anchors: np.ndarray            # (4, 2)
    roughness_override: float | None = None

    def __post_init__(self):
        self.image = np.asarray(self.image, dtype=np.float64)
        if self.image.ndim != 3 or self.image.shape[2] not in (3, 4):
            raise ValueError("decal image must be (H, W, 3|4)")
        if self.image.shape[2] == 3:
            self.image = np.concatenate(
                [self.image, np.ones_like(self.image[..., :1])], axis=2)
        self.anchors = np.asarray(self.anchors, dtype=np.float64).reshape(4, 2)
        if (self.anchors < -1e-9).any() or (self.anchors > 1 + 1e-9).any():
            raise GeometryError("anchors must lie in [0,1]^2")
        _require_convex(self.anchors)
        if self.roughness_override is not None and not (
                0.0 <= self.roughness_override <= 1.0):
            raise ValueError("roughness override must be in [0,1]")


def _require_convex(quad: np.ndarray) -> None:
    crosses = []
    for i in range(4):
        a, b, c = quad[i], quad[(i + 1) % 4], quad[(i + 2) % 4]
        crosses.append(np.cross(b - a, c - b))
    crosses = np.asarray(crosses)
    if np.any(np.abs(crosses) < 1e-12) or not (np.all(crosses > 0) or np.all(crosses < 0)):
        raise GeometryError("anchors must form a strictly convex quad")


def homography_from_unit_square(quad: np.ndarray) -> np.ndarray:
    """3x3 projective map sending (0,0),(1,0),(1,1),(0,1) to the quad rows."""
    src = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]])
    A = np.zeros((8, 8))
    b = np.zeros(8)
    for i, ((x, y), (u, v)) in enumerate(zip(src, quad)):
        A[2 * i] = [x, y, 1, 0, 0, 0, -u * x, -u * y]
        A[2 * i + 1] = [0, 0, 0, x, y, 1, -v * x, -v * y]
        b[2 * i] = u
        b[2 * i + 1] = v
    try:
        h = np.linalg.solve(A, b)
    except np.linalg.LinAlgError as e:
        raise GeometryError(f"degenerate anchor quad: {e}") from e
    return np.append(h, 1.0).reshape(3, 3)


def _points_in_quad(pts: np.ndarray, quad: np.ndarray) -> np.ndarray:
    sign = None
    inside = np.ones(len(pts), dtype=bool)
    for i in range(4):
        a, b = quad[i], quad[(i + 1) % 4]
        cr = (b[0] - a[0]) * (pts[:, 1] - a[1]) - (b[1] - a[1]) * (pts[:, 0] - a[0])
        edge_sign = np.cross(quad[(i + 1) % 4] - quad[i], quad[(i + 2) % 4] - quad[(i + 1) % 4])
        if sign is None:
            sign = 1.0 if edge_sign > 0 else -1.0
        inside &= (cr * sign) >= 0
    return inside


def _quad_texels(scene: Scene, quad: np.ndarray):
    """(rows, cols, uv) of texel centers inside the quad."""
    res = scene.texture_res
    lo = np.clip(np.floor(quad.min(axis=0) * (res - 1)).astype(int), 0, res - 1)
    hi = np.clip(np.ceil(quad.max(axis=0) * (res - 1)).astype(int), 0, res - 1)
    cols, rows = np.meshgrid(np.arange(lo[0], hi[0] + 1), np.arange(lo[1], hi[1] + 1))
    cols = cols.ravel()
    rows = rows.ravel()
    uv = np.stack([cols / (res - 1), rows / (res - 1)], axis=1)
    keep = _points_in_quad(uv, quad)
    return rows[keep], cols[keep], uv[keep]


def apply_decal(scene: Scene, spec: DecalSpec, record: bool = True) -> dict:
    """Composite the decal into the baked texture map; returns the edit record.

    O(decal pixels + in-quad texels); zero optimizer steps. The optional
    roughness override rewrites the activated roughness of every vertex whose
    chart UV falls inside the quad.
    """
    if not scene.baked:
        raise EditStateError("apply_decal needs baked caches (run bake first)")
    rows, cols, uv = _quad_texels(scene, spec.anchors)
    if len(rows):
        h_inv = np.linalg.inv(homography_from_unit_square(spec.anchors))
        p = np.column_stack([uv, np.ones(len(uv))]) @ h_inv.T
        st = p[:, :2] / p[:, 2:3]
        dh, dw = spec.image.shape[:2]
        x = np.clip(st[:, 0], 0.0, 1.0) * (dw - 1)
        y = np.clip(st[:, 1], 0.0, 1.0) * (dh - 1)
        taps = bilinear_sample(spec.image, x, y)
        rgb = srgb_to_linear(taps[:, :3])
        alpha = taps[:, 3:4]
        tex = scene.texture_map.copy()
        tex[rows, cols] = alpha * rgb + (1.0 - alpha) * tex[rows, cols]
        scene.texture_map = tex  # swapped atomically: readers see old or new

    if spec.roughness_override is not None:
        _override_roughness(scene, spec.anchors, spec.roughness_override)

    edit = {"kind": "decal", "anchors": spec.anchors.tolist(),
            "roughness_override": spec.roughness_override,
            "image": np.ascontiguousarray(spec.image),
            "id": len(scene.edits)}
    if record:
        scene.edits.append(edit)
    scene.bump_edit_version()
    return edit


def apply_roughness(scene: Scene, anchors, value: float, record: bool = True) -> dict:
    if not (0.0 <= value <= 1.0):
        raise ValueError("roughness value must be in [0,1]")
    anchors = np.asarray(anchors, dtype=np.float64).reshape(4, 2)
    _require_convex(anchors)
    if not scene.baked:
        raise EditStateError("roughness edit needs baked caches")
    _override_roughness(scene, anchors, value)
    edit = {"kind": "roughness", "anchors": anchors.tolist(), "value": value,
            "id": len(scene.edits)}
    if record:
        scene.edits.append(edit)
    scene.bump_edit_version()
    return edit


def _override_roughness(scene: Scene, quad: np.ndarray, value: float) -> None:
    if scene.chart is None:
        return
    region = scene.chart.region_vertices
    inside = _points_in_quad(scene.chart.vertex_uv[region], quad)
    vids = region[inside]
    v = float(np.clip(value, 1e-6, 1.0 - 1e-6))
    raw = scene.appearance.raw_roughness
    raw[vids] = np.log(v / (1.0 - v))


def revert_region(scene: Scene, anchors, record: bool = True) -> dict:
    """Recompute in-quad texels from the texture net; restore base roughness."""
    anchors = np.asarray(anchors, dtype=np.float64).reshape(4, 2)
    _require_convex(anchors)
    if not scene.baked:
        raise EditStateError("revert needs baked caches")
    from .nn import encode

    rows, cols, uv = _quad_texels(scene, anchors)
    if len(rows):
        enc = encode(uv).astype(scene.texture_net.dtype)
        logits = scene.texture_net.forward(enc)
        tex = scene.texture_map.copy()
        tex[rows, cols] = 1.0 / (1.0 + np.exp(-np.asarray(logits, dtype=np.float64)))
        scene.texture_map = tex

    if scene.base_raw_roughness is not None and scene.chart is not None:
        region = scene.chart.region_vertices
        inside = _points_in_quad(scene.chart.vertex_uv[region], anchors)
        vids = region[inside]
        scene.appearance.raw_roughness[vids] = scene.base_raw_roughness[vids]

    edit = {"kind": "revert", "anchors": anchors.tolist(), "id": len(scene.edits)}
    if record:
        scene.edits.append(edit)
    scene.bump_edit_version()
    return edit


def replay_edits(scene: Scene, edits: list[dict]) -> None:
    """Re-apply an ordered edit log (checkpoint replay)."""
    for e in edits:
        if e["kind"] == "decal":
            apply_decal(scene, DecalSpec(e["image"], np.asarray(e["anchors"]),
                                         e.get("roughness_override")), record=True)
        elif e["kind"] == "roughness":
            apply_roughness(scene, np.asarray(e["anchors"]), e["value"], record=True)
        elif e["kind"] == "revert":
            revert_region(scene, np.asarray(e["anchors"]), record=True)
        else:
            raise ValueError(f"unknown edit kind {e['kind']!r}")
