"""Synthetic ground-truth scene for round-trip evaluation.

A textured sphere resting on a plane, with known smooth materials, a known
environment, a shadow band painted into the per-vertex shadow logits inside
the chart region, and the engine itself as the renderer. Training a fresh
scene on these renders must recover the appearance.
"""

import numpy as np

from decalstudio import ibl
from decalstudio.mesh import TriMesh, build_mesh, select_region
from decalstudio.raster import orbit_camera
from decalstudio.scene import Scene, create_scene, render_image
from decalstudio.trainer import Dataset
from decalstudio.uvparam import parameterize_region

SPHERE_RADIUS = 0.8
TARGET = (0.0, 0.0, 0.7)


def sphere_plane_mesh(n_lat: int = 22, n_lon: int = 34, plane_n: int = 9) -> TriMesh:
    verts = [[0.0, 0.0, 2 * SPHERE_RADIUS], [0.0, 0.0, 0.0]]  # top/bottom poles
    for i in range(1, n_lat):
        theta = np.pi * i / n_lat
        for j in range(n_lon):
            phi = 2 * np.pi * j / n_lon
            verts.append([SPHERE_RADIUS * np.sin(theta) * np.cos(phi),
                          SPHERE_RADIUS * np.sin(theta) * np.sin(phi),
                          SPHERE_RADIUS * (1 + np.cos(theta))])
    faces = []

    def ring(i, j):
        return 2 + (i - 1) * n_lon + (j % n_lon)

    for j in range(n_lon):
        faces.append([0, ring(1, j), ring(1, j + 1)])
        faces.append([1, ring(n_lat - 1, j + 1), ring(n_lat - 1, j)])
    for i in range(1, n_lat - 1):
        for j in range(n_lon):
            a, b = ring(i, j), ring(i, j + 1)
            c, d = ring(i + 1, j + 1), ring(i + 1, j)
            faces += [[a, b, c], [a, c, d]]

    base = len(verts)
    half = 1.7
    xs = np.linspace(-half, half, plane_n)
    for y in xs:
        for x in xs:
            verts.append([x, y, 0.0])
    for j in range(plane_n - 1):
        for i in range(plane_n - 1):
            a = base + j * plane_n + i
            b, c, d = a + 1, a + plane_n + 1, a + plane_n
            faces += [[a, b, c], [a, c, d]]
    return build_mesh(np.asarray(verts), np.asarray(faces))


def pick_region(mesh: TriMesh, budget: int = 300) -> TriMesh:
    centroids = mesh.vertices[mesh.faces].mean(axis=1)
    score = centroids @ np.array([1.0, 0.15, 0.25]) \
        - 2.0 * np.abs(centroids[:, 2] - SPHERE_RADIUS)
    on_sphere = np.linalg.norm(
        centroids - [0, 0, SPHERE_RADIUS], axis=1) < SPHERE_RADIUS * 1.01
    score[~on_sphere] = -np.inf
    return select_region(mesh, int(np.argmax(score)), budget)


def gt_texture(res: int = 256) -> np.ndarray:
    ii, jj = np.meshgrid(np.arange(res), np.arange(res))
    u = ii / (res - 1)
    v = jj / (res - 1)
    r = 0.30 + 0.50 * np.exp(-((u - 0.30) ** 2 + (v - 0.40) ** 2) / 0.08)
    g = 0.25 + 0.45 * np.exp(-((u - 0.70) ** 2 + (v - 0.30) ** 2) / 0.10)
    b = 0.28 + 0.40 * (0.5 * u + 0.5 * (1 - v))
    return np.clip(np.stack([r, g, b], axis=-1), 0.05, 0.95)


def gt_env_raw(height: int = 64) -> np.ndarray:
    dirs = ibl.texel_dirs(height, 2 * height)
    axis = np.array([0.5, 0.4, 0.77])
    axis /= np.linalg.norm(axis)
    lobe = np.exp(-(1.0 - dirs @ axis) / 0.25)
    r = 0.35 + 0.30 * dirs[..., 2] + 0.70 * lobe
    g = 0.33 + 0.25 * dirs[..., 2] + 0.55 * lobe
    b = 0.35 + 0.30 * dirs[..., 2] + 0.35 * lobe
    return ibl.inv_softplus(np.clip(np.stack([r, g, b], axis=-1), 0.05, None))


BAND_U = (0.42, 0.62)
BAND_SIGMA = 0.25


def logit(p):
    return np.log(p / (1.0 - p))


def band_vertices(chart) -> np.ndarray:
    u = chart.vertex_uv[chart.region_vertices, 0]
    return chart.region_vertices[(u >= BAND_U[0]) & (u <= BAND_U[1])]


def make_gt_scene(mesh: TriMesh, chart, env_height: int = 64,
                  n_levels: int = 5, texture_res: int = 256,
                  with_band: bool = True) -> Scene:
    scene = create_scene(mesh, chart, texture_res=texture_res,
                         env_height=env_height, n_levels=n_levels, seed=777)
    v = mesh.vertices
    albedo = np.stack([
        0.45 + 0.25 * np.sin(2.1 * v[:, 0] + 1.0),
        0.40 + 0.25 * np.cos(1.7 * v[:, 1] - 0.5),
        0.42 + 0.22 * np.sin(1.3 * v[:, 2] + 0.7)], axis=1)
    scene.appearance.raw_albedo[:] = logit(np.clip(albedo, 0.08, 0.92))
    rough = np.clip(0.5 + 0.15 * np.cos(2.0 * v[:, 2]), 0.2, 0.8)
    scene.appearance.raw_roughness[:] = logit(rough)
    scene.appearance.raw_metalness[:] = logit(0.10)
    scene.appearance.shadow_logit[:] = 2.0
    if with_band:
        scene.appearance.shadow_logit[band_vertices(chart)] = logit(BAND_SIGMA)
    scene.env.raw[:] = gt_env_raw(env_height)
    scene.env.lut = ibl.bake_lut()
    ibl.prefilter(scene.env)
    scene.texture_map = gt_texture(texture_res)
    scene.base_raw_roughness = scene.appearance.raw_roughness.copy()
    return scene


def make_cameras(n: int, width: int = 128, height: int = 128, seed: int = 5,
                 radius: float = 3.3):
    rng = np.random.Generator(np.random.PCG64(seed))
    cams = []
    for i in range(n):
        az = 2 * np.pi * i / n + rng.uniform(-0.05, 0.05)
        el = 0.25 + 0.55 * ((i * 7) % n) / n
        cams.append(orbit_camera(az, el, radius, 45.0, width, height,
                                 target=TARGET))
    return cams


def render_dataset(scene: Scene, cams, split: str = "train") -> Dataset:
    images = [render_image(scene, c, mode="infer") for c in cams]
    return Dataset(cams, images, [None] * len(cams),
                   [f"{split}_{i:03d}" for i in range(len(cams))], split=split)


def chart_texel_mask(mesh: TriMesh, chart, res: int) -> np.ndarray:
    """Texels whose center lies inside a chart triangle (strict coverage)."""
    mask = np.zeros((res, res), dtype=bool)
    tris = chart.vertex_uv[mesh.faces[mesh.face_in_uv_area]] * (res - 1)
    for tri in tris:
        lo = np.clip(np.floor(tri.min(axis=0)).astype(int), 0, res - 1)
        hi = np.clip(np.ceil(tri.max(axis=0)).astype(int), 0, res - 1)
        if (hi < lo).any():
            continue
        xs = np.arange(lo[0], hi[0] + 1)
        ys = np.arange(lo[1], hi[1] + 1)
        X, Y = np.meshgrid(xs, ys)
        p = np.stack([X.ravel(), Y.ravel()], axis=1).astype(float)
        d = tri[1:] - tri[0]
        det = d[0, 0] * d[1, 1] - d[0, 1] * d[1, 0]
        if abs(det) < 1e-12:
            continue
        rel = p - tri[0]
        w1 = (rel[:, 0] * d[1, 1] - rel[:, 1] * d[1, 0]) / det
        w2 = (-rel[:, 0] * d[0, 1] + rel[:, 1] * d[0, 0]) / det
        inside = (w1 >= 0) & (w2 >= 0) & (w1 + w2 <= 1)
        mask[Y.ravel()[inside], X.ravel()[inside]] = True
    return mask


def build_round_trip(env_height: int = 64, n_levels: int = 5,
                     texture_res: int = 256, n_train: int = 60,
                     n_test: int = 10, with_band: bool = True):
    """(mesh, chart, gt_scene, train_ds, test_cams, gt_test_images)."""
    mesh = pick_region(sphere_plane_mesh(), budget=300)
    chart = parameterize_region(mesh, resolution=texture_res)
    gt = make_gt_scene(mesh, chart, env_height, n_levels, texture_res,
                       with_band=with_band)
    train_cams = make_cameras(n_train, seed=5)
    test_cams = make_cameras(n_test, seed=6)
    train_ds = render_dataset(gt, train_cams, "train")
    gt_test = [render_image(gt, c, mode="infer") for c in test_cams]
    return mesh, chart, gt, train_ds, test_cams, gt_test
