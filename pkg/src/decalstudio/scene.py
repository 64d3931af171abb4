"""Scene state (mesh + chart + learnables + baked caches), checkpointing and
full-frame rendering.

Checkpoints are a single versioned binary container: magic, version, a JSON
manifest describing each array (name/dtype/shape/offset) plus scene metadata,
then the raw array bytes. Writing is deterministic so save/load/save round
trips are byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, field

import numpy as np

from . import ibl, shading
from .ibl import EnvLight
from .mesh import TriMesh
from .nn import Mlp, encoded_dim, HIDDEN_WIDTH
from .raster import Camera, FragmentBuffer, rasterize
from .shading import VertexAppearance, fragment_batch, gather_features, shade
from .uvparam import UvChart

MAGIC = b"DSCK"
VERSION = 1


class CheckpointError(IOError):
    """Unreadable, truncated, or version-mismatched checkpoint."""


@dataclass
class Scene:
    mesh: TriMesh
    chart: UvChart | None
    appearance: VertexAppearance
    texture_net: Mlp
    refl_net: Mlp
    env: EnvLight
    texture_res: int = 1024
    use_refl_net: bool = True
    seed: int = 0

    texture_map: np.ndarray | None = None       # (res, res, 3) linear albedo
    base_raw_roughness: np.ndarray | None = None
    edits: list = field(default_factory=list)
    counters: dict = field(default_factory=lambda: {"adam_steps": 0})

    @property
    def baked(self) -> bool:
        return self.texture_map is not None and self.env.mip_chain is not None \
            and self.env.lut is not None

    def bump_edit_version(self):
        self.counters["edit_version"] = self.counters.get("edit_version", 0) + 1


def create_scene(mesh: TriMesh, chart: UvChart | None = None,
                 texture_res: int = 1024,
                 env_height: int = ibl.DEFAULT_ENV_HEIGHT,
                 n_levels: int = ibl.DEFAULT_N_LEVELS,
                 seed: int = 0, use_refl_net: bool = True,
                 net_dtype=np.float32) -> Scene:
    tex_net = Mlp([encoded_dim(2), HIDDEN_WIDTH, HIDDEN_WIDTH, 3],
                  seed=seed + 1, dtype=net_dtype)
    refl_net = Mlp([2 * encoded_dim(3), HIDDEN_WIDTH, HIDDEN_WIDTH, 3],
                   seed=seed + 2, zero_init_final=True, dtype=net_dtype)
    env = EnvLight.create(env_height, n_levels)
    return Scene(mesh, chart, VertexAppearance.create(mesh.n_vertices),
                 tex_net, refl_net, env, texture_res=texture_res,
                 use_refl_net=use_refl_net, seed=seed)


def scene_params(scene: Scene):
    """(feature_params, net_params) in the two optimizer groups."""
    features = scene.appearance.params() + [scene.env.raw]
    nets = scene.texture_net.parameters() + scene.refl_net.parameters()
    return features, nets


def render_image(scene: Scene, cam: Camera, mode: str = "infer",
                 buf: FragmentBuffer | None = None) -> np.ndarray:
    """Linear-radiance render over black background.

    mode 'infer' reads the baked texture map; 'train' evaluates the texture
    net live (used for consistency checks and loss evaluation).
    """
    if buf is None:
        buf = rasterize(scene.mesh, cam)
    img = np.zeros((cam.height, cam.width, 3))
    if not buf.mask.any():
        return img
    batch = fragment_batch(buf, scene.mesh, scene.chart)
    if mode == "infer":
        if not scene.baked:
            raise RuntimeError("scene caches not baked; run bake first")
        features, fcache = gather_features(batch, scene.appearance,
                                           texture_map=scene.texture_map)
    else:
        features, fcache = gather_features(batch, scene.appearance,
                                           texture_net=scene.texture_net)
    res = shade(batch, features, fcache, scene.env,
                refl_net=scene.refl_net, use_refl_net=scene.use_refl_net)
    img[batch.pixels[:, 0], batch.pixels[:, 1]] = res.rgb
    return img


def scene_cache_key(scene: Scene, cam: Camera) -> str:
    h = hashlib.sha256()
    h.update(scene.mesh.content_hash().encode())
    h.update(cam.content_key().encode())
    return h.hexdigest()[:24]


# ---------------------------------------------------------------------------
# checkpoint container

def _collect_arrays(scene: Scene) -> dict[str, np.ndarray]:
    arrays: dict[str, np.ndarray] = {
        "mesh.vertices": scene.mesh.vertices,
        "mesh.faces": scene.mesh.faces,
        "mesh.normals": scene.mesh.vertex_normals,
        "mesh.uv_flags": scene.mesh.face_in_uv_area,
        "app.raw_albedo": scene.appearance.raw_albedo,
        "app.raw_roughness": scene.appearance.raw_roughness,
        "app.raw_metalness": scene.appearance.raw_metalness,
        "app.shadow_logit": scene.appearance.shadow_logit,
        "env.raw": scene.env.raw,
    }
    if scene.env.lut is not None:
        arrays["env.lut"] = scene.env.lut
    if scene.env.mip_chain is not None:
        for k, lvl in enumerate(scene.env.mip_chain):
            arrays[f"env.mip{k}"] = lvl
    if scene.chart is not None:
        arrays["chart.uv"] = scene.chart.vertex_uv
        arrays["chart.region"] = scene.chart.region_vertices
    for tag, net in (("tex", scene.texture_net), ("refl", scene.refl_net)):
        for li, (w, b) in enumerate(zip(net.weights, net.biases)):
            arrays[f"net.{tag}.w{li}"] = w
            arrays[f"net.{tag}.b{li}"] = b
    if scene.texture_map is not None:
        arrays["cache.texture_map"] = scene.texture_map
    if scene.base_raw_roughness is not None:
        arrays["cache.base_raw_roughness"] = scene.base_raw_roughness
    for ei, edit in enumerate(scene.edits):
        if edit.get("image") is not None:
            arrays[f"edit{ei}.image"] = edit["image"]
    return arrays


def save_checkpoint(scene: Scene, path) -> None:
    arrays = _collect_arrays(scene)
    manifest: dict = {"arrays": [], "meta": {
        "texture_res": scene.texture_res,
        "use_refl_net": scene.use_refl_net,
        "seed": scene.seed,
        "n_levels": scene.env.n_levels,
        "prefilter_samples": scene.env.prefilter_samples,
        "net_dtype": scene.texture_net.dtype.name,
        "net_seeds": [scene.texture_net.seed, scene.refl_net.seed],
        "chart_margin": None if scene.chart is None else scene.chart.margin,
        "chart_energy": None if scene.chart is None else scene.chart.arap_energy,
        "counters": scene.counters,
        "edits": [{k: v for k, v in e.items() if k != "image"}
                  for e in scene.edits],
    }}
    offset = 0
    blobs = []
    for name in sorted(arrays):
        a = np.ascontiguousarray(arrays[name])
        manifest["arrays"].append({"name": name, "dtype": a.dtype.name,
                                   "shape": list(a.shape), "offset": offset,
                                   "nbytes": a.nbytes})
        blobs.append(a.tobytes())
        offset += a.nbytes
    mjson = json.dumps(manifest, sort_keys=True).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", VERSION, len(mjson)))
        fh.write(mjson)
        for b in blobs:
            fh.write(b)


def load_checkpoint(path) -> Scene:
    with open(path, "rb") as fh:
        head = fh.read(12)
        if len(head) < 12 or head[:4] != MAGIC:
            raise CheckpointError(f"{path}: not a scene checkpoint")
        version, mlen = struct.unpack("<II", head[4:12])
        if version != VERSION:
            raise CheckpointError(
                f"{path}: checkpoint version {version}, expected {VERSION}")
        mjson = fh.read(mlen)
        if len(mjson) < mlen:
            raise CheckpointError(f"{path}: truncated manifest")
        manifest = json.loads(mjson.decode("utf-8"))
        payload = fh.read()

    arrays: dict[str, np.ndarray] = {}
    for rec in manifest["arrays"]:
        lo, hi = rec["offset"], rec["offset"] + rec["nbytes"]
        if hi > len(payload):
            raise CheckpointError(f"{path}: truncated array {rec['name']}")
        arrays[rec["name"]] = np.frombuffer(
            payload[lo:hi], dtype=rec["dtype"]).reshape(rec["shape"]).copy()

    meta = manifest["meta"]
    mesh = TriMesh(arrays["mesh.vertices"], arrays["mesh.faces"],
                   arrays["mesh.normals"], arrays["mesh.uv_flags"])
    chart = None
    if "chart.uv" in arrays:
        chart = UvChart(arrays["chart.uv"], arrays["chart.region"],
                        margin=meta["chart_margin"],
                        arap_energy=meta["chart_energy"])
    app = VertexAppearance(arrays["app.raw_albedo"], arrays["app.raw_roughness"],
                           arrays["app.raw_metalness"], arrays["app.shadow_logit"])

    dtype = np.dtype(meta["net_dtype"])
    tex_net = Mlp([encoded_dim(2), HIDDEN_WIDTH, HIDDEN_WIDTH, 3],
                  seed=meta["net_seeds"][0], dtype=dtype)
    refl_net = Mlp([2 * encoded_dim(3), HIDDEN_WIDTH, HIDDEN_WIDTH, 3],
                   seed=meta["net_seeds"][1], dtype=dtype)
    for tag, net in (("tex", tex_net), ("refl", refl_net)):
        for li in range(net.n_layers):
            net.weights[li] = arrays[f"net.{tag}.w{li}"].astype(dtype)
            net.biases[li] = arrays[f"net.{tag}.b{li}"].astype(dtype)

    env = EnvLight(arrays["env.raw"], n_levels=meta["n_levels"],
                   prefilter_samples=meta["prefilter_samples"])
    if "env.lut" in arrays:
        env.lut = arrays["env.lut"]
    mips = [arrays[f"env.mip{k}"] for k in range(meta["n_levels"])
            if f"env.mip{k}" in arrays]
    if len(mips) == meta["n_levels"]:
        env.mip_chain = mips

    edits = []
    for ei, e in enumerate(meta["edits"]):
        e = dict(e)
        if f"edit{ei}.image" in arrays:
            e["image"] = arrays[f"edit{ei}.image"]
        edits.append(e)

    scene = Scene(mesh, chart, app, tex_net, refl_net, env,
                  texture_res=meta["texture_res"],
                  use_refl_net=meta["use_refl_net"], seed=meta["seed"],
                  edits=edits, counters=dict(meta["counters"]))
    if "cache.texture_map" in arrays:
        scene.texture_map = arrays["cache.texture_map"]
    if "cache.base_raw_roughness" in arrays:
        scene.base_raw_roughness = arrays["cache.base_raw_roughness"]
    return scene
