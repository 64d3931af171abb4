"""Per-fragment forward shading and its exact backward pass.

Forward model per fragment:
    albedo   a  = sigmoid(interp raw) outside the chart, sigmoid(F_t(enc(uv)))
                  inside it
    rho/m    from sigmoid of interpolated raws; shadow s = sigmoid(interp tau)
    diffuse  = a (1 - m)
    specular = exp(F_r(enc(x), enc(r))) * L_mip(r, rho) * (f0 F1 + F2)
    rgb      = s * (diffuse + specular)

The backward distributes pixel gradients to vertex raws (through the
barycentric weights), both nets, and the raw environment texels (through the
mip taps and the per-level prefilter operators).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import ibl
from .ibl import EnvLight
from .mesh import TriMesh
from .nn import Mlp, encode
from .raster import FragmentBuffer
from .uvparam import UvChart, bilinear_sample

DEFAULT_SHADOW_LOGIT = 2.0


def sigmoid(x):
    return 1.0 / (1.0 + np.exp(-x))


def sigmoid_grad_from_value(s):
    return s * (1.0 - s)


@dataclass
class VertexAppearance:
    """Learnable per-vertex raws; activations keep values inside (0,1)."""

    raw_albedo: np.ndarray     # (V, 3)
    raw_roughness: np.ndarray  # (V,)
    raw_metalness: np.ndarray  # (V,)
    shadow_logit: np.ndarray   # (V,)

    @classmethod
    def create(cls, n_vertices: int, shadow_logit: float = DEFAULT_SHADOW_LOGIT):
        return cls(np.zeros((n_vertices, 3)), np.zeros(n_vertices),
                   np.zeros(n_vertices), np.full(n_vertices, shadow_logit))

    def params(self) -> list[np.ndarray]:
        return [self.raw_albedo, self.raw_roughness, self.raw_metalness, self.shadow_logit]

    @property
    def albedo(self):
        return sigmoid(self.raw_albedo)

    @property
    def roughness(self):
        return sigmoid(self.raw_roughness)

    @property
    def metalness(self):
        return sigmoid(self.raw_metalness)


@dataclass
class FragmentBatch:
    """Flattened fragment records plus lazily-built encoded net inputs."""

    vert_ids: np.ndarray    # (N, 3) int
    bary: np.ndarray        # (N, 3)
    world_pos: np.ndarray   # (N, 3)
    view_dir: np.ndarray    # (N, 3) camera -> surface
    normal: np.ndarray      # (N, 3) unit
    uv: np.ndarray          # (N, 2) chart UV (0 outside)
    in_uv_area: np.ndarray  # (N,) bool
    pixels: np.ndarray | None = None  # (N, 2) row/col, when from a buffer

    enc_uv: np.ndarray | None = field(default=None, repr=False)
    enc_xr: np.ndarray | None = field(default=None, repr=False)
    refl_dir: np.ndarray | None = field(default=None, repr=False)

    def __len__(self):
        return len(self.vert_ids)

    def ensure_encodings(self, dtype=np.float64):
        if self.refl_dir is None:
            wo = -self.view_dir
            self.refl_dir = ibl.reflect(wo, self.normal)
        if self.enc_uv is None:
            self.enc_uv = encode(self.uv).astype(dtype)
        if self.enc_xr is None:
            self.enc_xr = np.concatenate(
                [encode(self.world_pos), encode(self.refl_dir)], axis=-1).astype(dtype)
        return self

    def subset(self, idx: np.ndarray) -> "FragmentBatch":
        return FragmentBatch(
            self.vert_ids[idx], self.bary[idx], self.world_pos[idx],
            self.view_dir[idx], self.normal[idx], self.uv[idx],
            self.in_uv_area[idx],
            None if self.pixels is None else self.pixels[idx],
            None if self.enc_uv is None else self.enc_uv[idx],
            None if self.enc_xr is None else self.enc_xr[idx],
            None if self.refl_dir is None else self.refl_dir[idx])


def fragment_batch(buf: FragmentBuffer, mesh: TriMesh,
                   chart: UvChart | None) -> FragmentBatch:
    """Gather covered pixels of a fragment buffer into a shading batch."""
    pixels, face_id, bary, pos, vdir = buf.covered()
    vert_ids = mesh.faces[face_id]
    normal = np.einsum("ni,nij->nj", bary, mesh.vertex_normals[vert_ids])
    normal /= np.maximum(np.linalg.norm(normal, axis=1, keepdims=True), 1e-20)
    in_area = mesh.face_in_uv_area[face_id]
    if chart is not None:
        uv = np.einsum("ni,nij->nj", bary, chart.vertex_uv[vert_ids])
        uv[~in_area] = 0.0
    else:
        uv = np.zeros((len(face_id), 2))
        in_area = np.zeros(len(face_id), dtype=bool)
    return FragmentBatch(vert_ids, bary, pos, vdir, normal, uv, in_area, pixels)


def gather_features(batch: FragmentBatch, appearance: VertexAppearance,
                    texture_net: Mlp | None = None,
                    texture_map: np.ndarray | None = None):
    """Fragment features: (albedo, rho, m, shadow) with caches for backward.

    Albedo inside the UV area comes from the neural texture (or, at
    inference, the baked texture map); everything else from interpolated
    vertex raws.
    """
    w = batch.bary
    ids = batch.vert_ids
    raw_a = np.einsum("ni,nic->nc", w, appearance.raw_albedo[ids])
    raw_r = np.einsum("ni,ni->n", w, appearance.raw_roughness[ids])
    raw_m = np.einsum("ni,ni->n", w, appearance.raw_metalness[ids])
    raw_t = np.einsum("ni,ni->n", w, appearance.shadow_logit[ids])

    albedo = sigmoid(raw_a)
    cache = {"albedo_vert": albedo, "tex_cache": None, "tex_logits": None,
             "uv_rows": None}

    uv_rows = np.flatnonzero(batch.in_uv_area)
    if len(uv_rows):
        if texture_net is not None:
            batch.ensure_encodings(texture_net.dtype)
            logits, tex_cache = texture_net.forward(batch.enc_uv[uv_rows],
                                                    keep_cache=True)
            tex_albedo = sigmoid(np.asarray(logits, dtype=np.float64))
            cache["tex_cache"] = tex_cache
            cache["tex_logits"] = logits
        elif texture_map is not None:
            res = texture_map.shape[0]
            tx = batch.uv[uv_rows, 0] * (res - 1)
            ty = batch.uv[uv_rows, 1] * (res - 1)
            tex_albedo = bilinear_sample(texture_map, tx, ty)
        else:
            raise ValueError("UV-area fragments need a texture net or baked map")
        albedo = albedo.copy()
        albedo[uv_rows] = tex_albedo
        cache["uv_rows"] = uv_rows

    features = {
        "albedo": albedo,
        "roughness": sigmoid(raw_r),
        "metalness": sigmoid(raw_m),
        "shadow": sigmoid(raw_t),
    }
    return features, cache


@dataclass
class ShadingResult:
    rgb: np.ndarray
    c_diffuse: np.ndarray
    c_specular: np.ndarray
    c_lr: np.ndarray
    l_specular: np.ndarray
    m_specular: np.ndarray
    sigma_tau: np.ndarray
    cache: dict = field(repr=False, default_factory=dict)


def shade(batch: FragmentBatch, features: dict, feat_cache: dict,
          env: EnvLight, refl_net: Mlp | None = None,
          use_refl_net: bool = True) -> ShadingResult:
    """Forward shading for a fragment batch; caches all backward inputs."""
    a = features["albedo"]
    rho = features["roughness"]
    m = features["metalness"]
    s = features["shadow"]

    batch.ensure_encodings(refl_net.dtype if refl_net is not None else np.float64)
    wo = -batch.view_dir
    cos_theta = np.clip(np.einsum("ni,ni->n", batch.normal, wo), 0.0, 1.0)

    f0 = ibl.base_reflectance(a, m)
    l_spec, mip_cache = ibl.sample_mips(env, batch.refl_dir, rho)
    f1, f2, df1, df2 = ibl.lut_lookup(env.lut, cos_theta, rho)
    m_spec = f0 * f1[:, None] + f2[:, None]

    if use_refl_net and refl_net is not None:
        lr_out, lr_cache = refl_net.forward(batch.enc_xr, keep_cache=True)
        c_lr = np.exp(np.asarray(lr_out, dtype=np.float64))
    else:
        lr_cache = None
        c_lr = np.ones_like(l_spec)

    c_spec = c_lr * l_spec * m_spec
    c_diff = a * (1.0 - m[:, None])
    rgb = s[:, None] * (c_diff + c_spec)

    cache = {
        "features": features, "feat_cache": feat_cache, "batch": batch,
        "f0": f0, "f1": f1, "f2": f2, "df1": df1, "df2": df2,
        "mip_cache": mip_cache, "lr_cache": lr_cache,
    }
    return ShadingResult(rgb, c_diff, c_spec, c_lr, l_spec, m_spec, s, cache)


def shade_backward(result: ShadingResult, rgb_grad: np.ndarray,
                   appearance: VertexAppearance, env: EnvLight,
                   texture_net: Mlp | None = None, refl_net: Mlp | None = None,
                   want_env_grad: bool = True) -> dict:
    """Exact gradients of sum(rgb * rgb_grad) for every learnable class."""
    cache = result.cache
    if not cache:
        raise ValueError("shading cache missing; shade() must be rerun")
    batch: FragmentBatch = cache["batch"]
    feats = cache["features"]
    a, rho, m, s = (feats["albedo"], feats["roughness"],
                    feats["metalness"], feats["shadow"])
    rgb_grad = np.asarray(rgb_grad, dtype=np.float64)

    g_sum = rgb_grad * s[:, None]            # d/d(c_diff + c_spec)
    g_shadow = np.einsum("nc,nc->n", rgb_grad, result.c_diffuse + result.c_specular)

    g_cdiff = g_sum
    g_cspec = g_sum
    g_albedo = g_cdiff * (1.0 - m[:, None])
    g_m = -np.einsum("nc,nc->n", g_cdiff, a)

    g_mspec = g_cspec * result.c_lr * result.l_specular
    g_lspec = g_cspec * result.c_lr * result.m_specular
    g_f0 = g_mspec * cache["f1"][:, None]
    g_f1 = np.einsum("nc,nc->n", g_mspec, cache["f0"])
    g_f2 = g_mspec.sum(axis=1)

    # f0 = 0.04 (1 - m) + m a
    g_albedo = g_albedo + g_f0 * m[:, None]
    g_m = g_m + np.einsum("nc,nc->n", g_f0, a - ibl.F0_DIELECTRIC)

    mip_grads, g_rho_mips = ibl.mips_backward(env, cache["mip_cache"], g_lspec)
    g_rho = g_rho_mips + g_f1 * cache["df1"] + g_f2 * cache["df2"]

    grads: dict = {}
    ids = batch.vert_ids
    w = batch.bary

    def scatter_scalar(g_frag):
        out = np.zeros(len(appearance.raw_roughness))
        np.add.at(out, ids.ravel(), (w * g_frag[:, None]).ravel())
        return out

    grads["shadow_logit"] = scatter_scalar(g_shadow * sigmoid_grad_from_value(s))
    grads["raw_roughness"] = scatter_scalar(g_rho * sigmoid_grad_from_value(rho))
    grads["raw_metalness"] = scatter_scalar(g_m * sigmoid_grad_from_value(m))

    # albedo routes through the texture net inside the UV area
    uv_rows = cache["feat_cache"]["uv_rows"]
    g_albedo_vert = g_albedo
    if uv_rows is not None and len(uv_rows):
        g_albedo_vert = g_albedo.copy()
        g_albedo_vert[uv_rows] = 0.0
        if texture_net is not None and cache["feat_cache"]["tex_cache"] is not None:
            g_logits = g_albedo[uv_rows] * sigmoid_grad_from_value(a[uv_rows])
            _, net_grads = texture_net.backward(
                cache["feat_cache"]["tex_cache"],
                g_logits.astype(texture_net.dtype))
            grads["texture_net"] = net_grads
    a_vert = cache["feat_cache"]["albedo_vert"]
    g_raw_a = g_albedo_vert * sigmoid_grad_from_value(a_vert)
    out_a = np.zeros_like(appearance.raw_albedo)
    np.add.at(out_a, ids.ravel(), (w[:, :, None] * g_raw_a[:, None, :]).reshape(-1, 3))
    grads["raw_albedo"] = out_a

    if refl_net is not None and cache["lr_cache"] is not None:
        g_lr_out = g_cspec * result.l_specular * result.m_specular * result.c_lr
        _, net_grads = refl_net.backward(cache["lr_cache"],
                                         g_lr_out.astype(refl_net.dtype))
        grads["refl_net"] = net_grads

    if want_env_grad:
        grads["env_raw"] = ibl.env_raw_grad(env, mip_grads)
    return grads
