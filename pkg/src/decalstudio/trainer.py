"""Dataset ingestion, pixel-batch optimization, and inference-cache baking.

Training samples a batch of covered pixels across all training views each
iteration, shades them, and steps Adam on the MSE against the ground truth.
Two parameter groups: vertex features + environment map (fast lr) and the
two nets (slow lr). Background pixels never contribute to the loss.
"""

from __future__ import annotations

import csv
import json
import os
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import ibl
from .images import load_image, srgb_to_linear
from .mesh import TriMesh
from .nn import AdamState, adam_step, encode
from .raster import Camera, camera_from_frame, rasterize
from .scene import Scene, scene_params
from .shading import FragmentBatch, fragment_batch, gather_features, shade, shade_backward


class DatasetError(IOError):
    """Missing or unreadable dataset pieces."""


class TrainingDiverged(RuntimeError):
    """Non-finite loss; carries the iteration and batch indices."""


@dataclass
class Dataset:
    cameras: list[Camera]
    images: list[np.ndarray]     # (H, W, 3) linear RGB over black
    masks: list[np.ndarray | None]
    names: list[str]
    split: str = "train"

    def __len__(self):
        return len(self.cameras)


@dataclass
class TrainConfig:
    iterations: int = 20_000
    batch_size: int = 4096
    lr_net: float = 5e-4
    lr_features: float = 5e-3
    texture_res: int = 1024
    env_height: int = ibl.DEFAULT_ENV_HEIGHT
    n_levels: int = ibl.DEFAULT_N_LEVELS
    seed: int = 0
    log_every: int = 500

    def __post_init__(self):
        if self.iterations < 0 or self.batch_size < 1:
            raise ValueError("iterations must be >= 0 and batch_size >= 1")
        if self.lr_net < 0 or self.lr_features < 0:
            raise ValueError("learning rates must be non-negative")


def ingest(root, split: str = "train", width: int | None = None,
           height: int | None = None) -> Dataset:
    """Load a synthetic-convention dataset directory.

    Expects transforms_<split>.json with camera_angle_x and per-frame 4x4
    camera-to-world matrices; images are 8-bit sRGB, composited over black
    through their alpha channel when present.
    """
    root = Path(root)
    meta_path = root / f"transforms_{split}.json"
    if not meta_path.exists():
        raise DatasetError(f"missing camera file {meta_path}")
    with open(meta_path, "r", encoding="utf-8") as fh:
        meta = json.load(fh)

    cams, images, masks, names = [], [], [], []
    for frame in meta["frames"]:
        rel = frame["file_path"]
        img_path = root / rel
        if not img_path.exists() and not img_path.suffix:
            img_path = img_path.with_suffix(".png")
        try:
            data = load_image(img_path)
        except Exception as e:
            raise DatasetError(f"unreadable image {img_path}: {e}") from e
        alpha = data[..., 3] if data.shape[-1] == 4 else None
        rgb = srgb_to_linear(data[..., :3])
        if alpha is not None:
            rgb = rgb * alpha[..., None]
        h, w = rgb.shape[:2]
        cams.append(camera_from_frame(frame["transform_matrix"],
                                      float(meta["camera_angle_x"]), w, h))
        images.append(rgb)
        masks.append(alpha)
        names.append(rel)
    if not images:
        raise DatasetError(f"{meta_path}: no frames")
    shapes = {im.shape for im in images}
    if len(shapes) != 1:
        raise DatasetError(f"mixed image resolutions: {sorted(shapes)}")
    return Dataset(cams, images, masks, names, split=split)


# ---------------------------------------------------------------------------
# fragment pooling

def build_fragment_pool(scene: Scene, dataset: Dataset,
                        cache_dir=None) -> tuple[FragmentBatch, np.ndarray]:
    """Rasterize every training view and pool covered pixels into one batch.

    Returns (pool, gt_rgb). Buffers are cached on disk keyed by mesh+camera
    content when a cache directory is given.
    """
    batches, gts = [], []
    for cam, img in zip(dataset.cameras, dataset.images):
        buf = _cached_rasterize(scene.mesh, cam, cache_dir)
        b = fragment_batch(buf, scene.mesh, scene.chart)
        batches.append(b)
        gts.append(img[b.pixels[:, 0], b.pixels[:, 1]])
    pool = FragmentBatch(
        np.concatenate([b.vert_ids for b in batches]),
        np.concatenate([b.bary for b in batches]),
        np.concatenate([b.world_pos for b in batches]),
        np.concatenate([b.view_dir for b in batches]),
        np.concatenate([b.normal for b in batches]),
        np.concatenate([b.uv for b in batches]),
        np.concatenate([b.in_uv_area for b in batches]))
    pool.ensure_encodings(scene.texture_net.dtype)
    return pool, np.concatenate(gts)


def _cached_rasterize(mesh: TriMesh, cam: Camera, cache_dir):
    if cache_dir is None:
        return rasterize(mesh, cam)
    import hashlib

    from .raster import FragmentBuffer

    key = hashlib.sha256((mesh.content_hash() + cam.content_key()).encode()) \
        .hexdigest()[:24]
    path = Path(cache_dir) / f"frags_{key}.npz"
    if path.exists():
        data = np.load(path)
        fb = FragmentBuffer(cam)
        fb.face_id = data["face_id"]
        fb.bary = data["bary"]
        fb.depth = data["depth"]
        fb.world_pos = data["world_pos"]
        fb.view_dir = data["view_dir"]
        return fb
    os.makedirs(cache_dir, exist_ok=True)
    fb = rasterize(mesh, cam)
    np.savez_compressed(path, face_id=fb.face_id, bary=fb.bary, depth=fb.depth,
                        world_pos=fb.world_pos, view_dir=fb.view_dir)
    return fb


# ---------------------------------------------------------------------------
# optimization loop

def train(scene: Scene, dataset: Dataset, config: TrainConfig,
          pool: FragmentBatch | None = None, gt: np.ndarray | None = None,
          cache_dir=None) -> list[float]:
    """Run the optimization; returns the per-iteration loss history."""
    if pool is None:
        pool, gt = build_fragment_pool(scene, dataset, cache_dir)
    n_frag = len(pool)
    if n_frag == 0:
        raise DatasetError("no covered pixels to supervise")

    if scene.env.train_ops is None:
        ibl.build_train_ops(scene.env)
    if scene.env.lut is None:
        scene.env.lut = ibl.bake_lut()
    ibl.refresh_train_mips(scene.env)

    feat_params, net_params = scene_params(scene)
    feat_state = AdamState.for_params(feat_params)
    net_state = AdamState.for_params(net_params)
    rng = np.random.Generator(np.random.PCG64(config.seed))

    history: list[float] = []
    for it in range(config.iterations):
        idx = rng.integers(0, n_frag, size=min(config.batch_size, n_frag))
        batch = pool.subset(idx)
        target = gt[idx]

        features, fcache = gather_features(batch, scene.appearance,
                                           texture_net=scene.texture_net)
        result = shade(batch, features, fcache, scene.env,
                       refl_net=scene.refl_net, use_refl_net=scene.use_refl_net)
        diff = result.rgb - target
        loss = float(np.mean(diff * diff))
        if not np.isfinite(loss):
            raise TrainingDiverged(
                f"non-finite loss at iteration {it}; batch head {idx[:8].tolist()}")
        history.append(loss)

        rgb_grad = (2.0 / diff.size) * diff
        grads = shade_backward(result, rgb_grad, scene.appearance, scene.env,
                               texture_net=scene.texture_net,
                               refl_net=scene.refl_net)

        feat_grads = [grads["raw_albedo"], grads["raw_roughness"],
                      grads["raw_metalness"], grads["shadow_logit"],
                      grads["env_raw"]]
        net_grads = _net_grads(scene, grads)
        if config.lr_features > 0:
            adam_step(feat_params, feat_grads, feat_state, config.lr_features)
        if config.lr_net > 0:
            adam_step(net_params, net_grads, net_state, config.lr_net)
        scene.counters["adam_steps"] = scene.counters.get("adam_steps", 0) + 1

        ibl.refresh_train_mips(scene.env)

    return history


def _net_grads(scene: Scene, grads: dict) -> list[np.ndarray]:
    out = []
    for key, net in (("texture_net", scene.texture_net), ("refl_net", scene.refl_net)):
        g = grads.get(key)
        if g is None:
            g = [(np.zeros_like(w), np.zeros_like(b))
                 for w, b in zip(net.weights, net.biases)]
        out.extend(net.flat_grads(g))
    return out


def evaluate_loss(scene: Scene, pool: FragmentBatch, gt: np.ndarray) -> float:
    features, fcache = gather_features(pool, scene.appearance,
                                       texture_net=scene.texture_net)
    result = shade(pool, features, fcache, scene.env,
                   refl_net=scene.refl_net, use_refl_net=scene.use_refl_net)
    return float(np.mean((result.rgb - gt) ** 2))


def bake_inference_caches(scene: Scene) -> Scene:
    """Evaluate the texture net on the full texel grid and bake env caches.

    After this, rendering in 'infer' mode never touches the texture net.
    """
    res = scene.texture_res
    ii, jj = np.meshgrid(np.arange(res), np.arange(res))  # jj rows (v), ii cols (u)
    uv = np.stack([ii.ravel() / (res - 1), jj.ravel() / (res - 1)], axis=1)
    enc = encode(uv).astype(scene.texture_net.dtype)
    tex = np.zeros((res * res, 3))
    chunk = 65536
    for lo in range(0, len(enc), chunk):
        logits = scene.texture_net.forward(enc[lo:lo + chunk])
        tex[lo:lo + chunk] = 1.0 / (1.0 + np.exp(-np.asarray(logits, dtype=np.float64)))
    scene.texture_map = tex.reshape(res, res, 3)
    scene.base_raw_roughness = scene.appearance.raw_roughness.copy()
    ibl.prefilter(scene.env)
    if scene.env.lut is None:
        scene.env.lut = ibl.bake_lut()
    scene.bump_edit_version()
    return scene


def save_history_csv(history: list[float], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["iteration", "loss"])
        for i, v in enumerate(history):
            writer.writerow([i, f"{v:.9g}"])
