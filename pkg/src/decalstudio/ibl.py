"""Environment lighting under the split-sum factorization.

A learnable equirectangular HDR map (radiance = softplus(raw)) is prefiltered
into a roughness mip chain by GGX importance sampling; the ambient-BRDF
integral is baked into a (cos_theta, roughness) lookup table. A brute-force
Monte-Carlo integrator of the unsplit specular integral serves as the
validation oracle for everything here.

Conventions: world Z-up; equirect row v = colatitude/pi (v=0 at +Z), column
u = (atan2(y, x) + pi) / (2 pi). alpha = roughness^2; Smith G uses the
Schlick-GGX form with k = alpha / 2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix

RHO_MIN = 0.01
F0_DIELECTRIC = 0.04

DEFAULT_ENV_HEIGHT = 128
DEFAULT_N_LEVELS = 6
DEFAULT_PREFILTER_SAMPLES = 256
TRAIN_PREFILTER_SAMPLES = 32
DEFAULT_LUT_RES = 64
DEFAULT_LUT_SAMPLES = 1024
PREFILTER_SEED = 7001
LUT_SEED = 7002


# ---------------------------------------------------------------------------
# directions <-> equirect grid

def softplus(x: np.ndarray) -> np.ndarray:
    return np.logaddexp(0.0, x)


def softplus_grad(x: np.ndarray) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-x))


def inv_softplus(y: np.ndarray) -> np.ndarray:
    y = np.asarray(y, dtype=np.float64)
    return np.where(y > 30.0, y, np.log(np.expm1(np.maximum(y, 1e-12))))


def dir_from_uv(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    theta = v * np.pi
    phi = u * 2.0 * np.pi - np.pi
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta)], axis=-1)


def uv_from_dir(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    d = np.asarray(d)
    theta = np.arccos(np.clip(d[..., 2], -1.0, 1.0))
    phi = np.arctan2(d[..., 1], d[..., 0])
    return (phi + np.pi) / (2.0 * np.pi), theta / np.pi


def texel_dirs(h: int, w: int) -> np.ndarray:
    u = (np.arange(w) + 0.5) / w
    v = (np.arange(h) + 0.5) / h
    U, V = np.meshgrid(u, v)
    return dir_from_uv(U, V)


def texel_solid_angles(h: int, w: int) -> np.ndarray:
    theta = (np.arange(h) + 0.5) / h * np.pi
    dw = (2.0 * np.pi / w) * (np.pi / h) * np.sin(theta)
    return np.repeat(dw[:, None], w, axis=1)


def equirect_taps(h: int, w: int, dirs: np.ndarray):
    """Bilinear footprint of each direction: flat indices (N,4), weights (N,4).

    Longitude wraps; latitude clamps at the poles.
    """
    u, v = uv_from_dir(np.asarray(dirs).reshape(-1, 3))
    x = u * w - 0.5
    y = np.clip(v * h - 0.5, 0.0, h - 1.0)
    x0 = np.floor(x)
    fx = x - x0
    y0f = np.floor(y)
    fy = y - y0f
    c0 = (x0.astype(np.int64)) % w
    c1 = (c0 + 1) % w
    r0 = y0f.astype(np.int64)
    r1 = np.minimum(r0 + 1, h - 1)
    idx = np.stack([r0 * w + c0, r0 * w + c1, r1 * w + c0, r1 * w + c1], axis=1)
    wts = np.stack([(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy], axis=1)
    return idx, wts


def sample_equirect(grid: np.ndarray, dirs: np.ndarray) -> np.ndarray:
    h, w = grid.shape[:2]
    idx, wts = equirect_taps(h, w, dirs)
    flat = grid.reshape(h * w, -1)
    out = np.einsum("nk,nkc->nc", wts, flat[idx])
    return out.reshape(np.asarray(dirs).shape[:-1] + (grid.shape[2],))


# ---------------------------------------------------------------------------
# microfacet terms

def eval_ggx_D(n_dot_h, rho):
    """GGX normal distribution, alpha = rho^2; rho is clamped to RHO_MIN."""
    alpha = np.maximum(np.asarray(rho, dtype=np.float64), RHO_MIN) ** 2
    a2 = alpha * alpha
    c = np.clip(np.asarray(n_dot_h, dtype=np.float64), 0.0, 1.0)
    d = c * c * (a2 - 1.0) + 1.0
    return a2 / (np.pi * d * d)


def eval_fresnel(cos_theta, f0):
    """Schlick approximation: f0 + (1 - f0) (1 - cos)^5, componentwise."""
    c = np.clip(np.asarray(cos_theta, dtype=np.float64), 0.0, 1.0)
    f0 = np.asarray(f0, dtype=np.float64)
    fc = (1.0 - c) ** 5
    if f0.ndim > 0 and f0.shape[-1:] == (3,) and np.ndim(c) == f0.ndim - 1:
        fc = fc[..., None]
    return f0 + (1.0 - f0) * fc


def smith_g(n_dot_i, n_dot_o, rho):
    """Separable Smith shadowing, Schlick-GGX form with k = alpha / 2."""
    alpha = np.maximum(np.asarray(rho, dtype=np.float64), RHO_MIN) ** 2
    k = alpha / 2.0

    def g1(c):
        c = np.clip(c, 1e-8, 1.0)
        return c / (c * (1.0 - k) + k)

    return g1(np.asarray(n_dot_i)) * g1(np.asarray(n_dot_o))


def base_reflectance(albedo, metalness):
    """f0 = 0.04 (1 - m) + m * a."""
    albedo = np.asarray(albedo, dtype=np.float64)
    m = np.asarray(metalness, dtype=np.float64)
    if albedo.ndim > 0 and albedo.shape[-1:] == (3,) and np.ndim(m) == albedo.ndim - 1:
        m = m[..., None]
    return F0_DIELECTRIC * (1.0 - m) + m * albedo


def sample_ggx_half(u1: np.ndarray, u2: np.ndarray, rho) -> np.ndarray:
    """Half vectors h ~ D(h) (n.h) in the tangent frame (n = +z)."""
    alpha = max(float(np.maximum(rho, RHO_MIN)) ** 2, 1e-8)
    ct = np.sqrt((1.0 - u1) / (1.0 + (alpha * alpha - 1.0) * u1))
    st = np.sqrt(np.maximum(1.0 - ct * ct, 0.0))
    phi = 2.0 * np.pi * u2
    return np.stack([st * np.cos(phi), st * np.sin(phi), ct], axis=-1)


def tangent_frames(n: np.ndarray):
    """Orthonormal (t, b) completing each unit normal."""
    n = np.atleast_2d(n)
    up = np.where(np.abs(n[:, 2:3]) < 0.999,
                  np.array([0.0, 0.0, 1.0]), np.array([1.0, 0.0, 0.0]))
    t = np.cross(up, n)
    t /= np.linalg.norm(t, axis=1, keepdims=True)
    b = np.cross(n, t)
    return t, b


def reflect(d: np.ndarray, n: np.ndarray) -> np.ndarray:
    """Mirror d about n: 2 (d.n) n - d."""
    dn = np.sum(d * n, axis=-1, keepdims=True)
    return 2.0 * dn * n - d


@dataclass
class MicrofacetParams:
    albedo: np.ndarray  # (3,) in [0,1]
    roughness: float    # [0,1]
    metalness: float    # [0,1]

    def f0(self) -> np.ndarray:
        return base_reflectance(self.albedo, self.metalness)


# ---------------------------------------------------------------------------
# environment light

@dataclass
class EnvLight:
    """Learnable equirect radiance field with baked split-sum products.

    `raw` is the optimized tensor; displayed/integrated radiance is
    softplus(raw) so it stays positive with live gradients near zero.
    """

    raw: np.ndarray                       # (H, W, 3)
    n_levels: int = DEFAULT_N_LEVELS
    mip_chain: list[np.ndarray] | None = None
    lut: np.ndarray | None = None          # (R, R, 2) indexed [cos, rho]
    prefilter_samples: int = DEFAULT_PREFILTER_SAMPLES
    train_ops: list | None = field(default=None, repr=False)

    def __post_init__(self):
        self.raw = np.asarray(self.raw, dtype=np.float64)
        if self.raw.ndim != 3 or self.raw.shape[2] != 3:
            raise ValueError("raw map must be (H, W, 3)")

    @classmethod
    def create(cls, height: int = DEFAULT_ENV_HEIGHT, n_levels: int = DEFAULT_N_LEVELS,
               init_radiance: float = 0.5) -> "EnvLight":
        raw = np.full((height, 2 * height, 3), float(inv_softplus(init_radiance)))
        return cls(raw, n_levels=n_levels)

    @property
    def radiance(self) -> np.ndarray:
        return softplus(self.raw)

    def level_shape(self, k: int) -> tuple[int, int]:
        h, w = self.raw.shape[:2]
        return max(h >> k, 2), max(w >> k, 4)

    def level_roughness(self, k: int) -> float:
        return k / (self.n_levels - 1)


def _radical_inverse(i: np.ndarray) -> np.ndarray:
    bits = i.astype(np.uint32)
    bits = (bits << np.uint32(16)) | (bits >> np.uint32(16))
    bits = ((bits & np.uint32(0x55555555)) << np.uint32(1)) | \
           ((bits & np.uint32(0xAAAAAAAA)) >> np.uint32(1))
    bits = ((bits & np.uint32(0x33333333)) << np.uint32(2)) | \
           ((bits & np.uint32(0xCCCCCCCC)) >> np.uint32(2))
    bits = ((bits & np.uint32(0x0F0F0F0F)) << np.uint32(4)) | \
           ((bits & np.uint32(0xF0F0F0F0)) >> np.uint32(4))
    bits = ((bits & np.uint32(0x00FF00FF)) << np.uint32(8)) | \
           ((bits & np.uint32(0xFF00FF00)) >> np.uint32(8))
    return bits.astype(np.float64) * 2.3283064365386963e-10


def _level_sample_set(n_samples: int, seed: int):
    """Seed-shifted Hammersley points: low discrepancy keeps the filtered
    estimates stable enough for per-level monotonicity properties."""
    rng = np.random.Generator(np.random.PCG64(seed))
    off1, off2 = rng.random(2)
    i = np.arange(n_samples)
    u1 = ((i + 0.5) / n_samples + off1) % 1.0
    u2 = (_radical_inverse(i) + off2) % 1.0
    return u1, u2


def prefilter(env: EnvLight, n_levels: int | None = None,
              samples_per_texel: int | None = None,
              seed: int = PREFILTER_SEED) -> list[np.ndarray]:
    """GGX-filtered mip chain of the current radiance map.

    Level k (half resolution per level) holds, per texel direction r, the
    importance-sampled radiance average at roughness k/(n_levels-1) with the
    usual (n.l) sample weights. Level 0 is the base map. Deterministic for a
    fixed seed; stores the chain on `env` and returns it.
    """
    n_levels = n_levels or env.n_levels
    if n_levels < 2:
        raise ValueError("need at least 2 mip levels")
    samples = samples_per_texel or env.prefilter_samples
    radiance = env.radiance
    chain = [radiance.copy()]
    for k in range(1, n_levels):
        chain.append(_prefilter_level(env, radiance, k, n_levels, samples, seed + k))
    env.mip_chain = chain
    env.n_levels = n_levels
    return chain


def _level_dirs_and_samples(env: EnvLight, k: int, n_levels: int,
                            samples: int, seed: int):
    hk, wk = env.level_shape(k)
    rho = k / (n_levels - 1)
    dirs = texel_dirs(hk, wk).reshape(-1, 3)
    u1, u2 = _level_sample_set(samples, seed)
    h_local = sample_ggx_half(u1, u2, rho)  # (S, 3)
    t, b = tangent_frames(dirs)
    return hk, wk, dirs, t, b, h_local


def _prefilter_level(env: EnvLight, radiance: np.ndarray, k: int, n_levels: int,
                     samples: int, seed: int) -> np.ndarray:
    h, w = radiance.shape[:2]
    hk, wk, dirs, t, b, h_local = _level_dirs_and_samples(env, k, n_levels, samples, seed)
    flat = radiance.reshape(h * w, 3)
    acc = np.zeros((len(dirs), 3))
    wsum = np.zeros(len(dirs))
    for j in range(samples):
        hx, hy, hz = h_local[j]
        h_world = hx * t + hy * b + hz * dirs
        wi = reflect(dirs, h_world)
        nl = np.maximum(np.sum(wi * dirs, axis=1), 0.0)
        idx, wts = equirect_taps(h, w, wi)
        acc += nl[:, None] * np.einsum("nk,nkc->nc", wts, flat[idx])
        wsum += nl
    out = acc / np.maximum(wsum, 1e-12)[:, None]
    return out.reshape(hk, wk, 3)


def build_train_ops(env: EnvLight, samples_per_texel: int = TRAIN_PREFILTER_SAMPLES,
                    seed: int = PREFILTER_SEED) -> list:
    """Sparse linear operators mip_k = S_k @ radiance for in-the-loop filtering.

    The prefilter is linear in radiance once the sample set is fixed, so each
    level is one sparse matrix; the transpose routes gradients back to the
    base map. Level 0 is the identity (represented as None).
    """
    h, w = env.raw.shape[:2]
    ops: list = [None]
    for k in range(1, env.n_levels):
        hk, wk, dirs, t, b, h_local = _level_dirs_and_samples(
            env, k, env.n_levels, samples_per_texel, seed + k)
        n_t = len(dirs)
        rows, cols, vals = [], [], []
        wsum = np.zeros(n_t)
        for j in range(samples_per_texel):
            hx, hy, hz = h_local[j]
            h_world = hx * t + hy * b + hz * dirs
            wi = reflect(dirs, h_world)
            nl = np.maximum(np.sum(wi * dirs, axis=1), 0.0)
            idx, wts = equirect_taps(h, w, wi)
            rows.append(np.repeat(np.arange(n_t), 4))
            cols.append(idx.ravel())
            vals.append((nl[:, None] * wts).ravel())
            wsum += nl
        mat = coo_matrix((np.concatenate(vals),
                          (np.concatenate(rows), np.concatenate(cols))),
                         shape=(n_t, h * w)).tocsr()
        inv = 1.0 / np.maximum(wsum, 1e-12)
        mat = mat.multiply(inv[:, None]).tocsr()
        ops.append(mat)
    env.train_ops = ops
    return ops


def refresh_train_mips(env: EnvLight) -> None:
    """Recompute the mip chain through the cached sparse operators."""
    if env.train_ops is None:
        raise RuntimeError("call build_train_ops first")
    radiance = env.radiance
    flat = radiance.reshape(-1, 3)
    chain = [radiance]
    for k in range(1, env.n_levels):
        hk, wk = env.level_shape(k)
        chain.append((env.train_ops[k] @ flat).reshape(hk, wk, 3))
    env.mip_chain = chain


def bake_lut(resolution: int = DEFAULT_LUT_RES, samples: int = DEFAULT_LUT_SAMPLES,
             seed: int = LUT_SEED) -> np.ndarray:
    """Ambient-BRDF table over (cos_theta, roughness): the f0 coefficient and
    the constant term of the importance-sampled specular integral."""
    if resolution < 16:
        raise ValueError("LUT resolution must be >= 16")
    lut = np.zeros((resolution, resolution, 2))
    n = np.array([0.0, 0.0, 1.0])
    for j in range(resolution):
        rho = (j + 0.5) / resolution
        u1, u2 = _level_sample_set(samples, seed + j)
        h = sample_ggx_half(u1, u2, rho)  # (S, 3), frame n = +z
        for i in range(resolution):
            nv = (i + 0.5) / resolution
            v = np.array([np.sqrt(max(1.0 - nv * nv, 0.0)), 0.0, nv])
            wi = 2.0 * (h @ v)[:, None] * h - v
            nl = wi[:, 2]
            keep = nl > 0.0
            if not keep.any():
                continue
            nh = np.clip(h[keep, 2], 1e-8, 1.0)
            vh = np.clip(np.sum(h[keep] * v, axis=1), 1e-8, 1.0)
            g = smith_g(nl[keep], nv, rho)
            g_vis = g * vh / (nh * max(nv, 1e-8))
            fc = (1.0 - vh) ** 5
            lut[i, j, 0] = np.sum((1.0 - fc) * g_vis) / samples
            lut[i, j, 1] = np.sum(fc * g_vis) / samples
    return lut


def lut_lookup(lut: np.ndarray, cos_theta, rho):
    """Bilinear (F1, F2) plus their derivative w.r.t. roughness.

    Returns (f1, f2, df1_drho, df2_drho), each shaped like the inputs.
    """
    r = lut.shape[0]
    c = np.clip(np.asarray(cos_theta, dtype=np.float64), 0.0, 1.0)
    p = np.clip(np.asarray(rho, dtype=np.float64), 0.0, 1.0)
    x = np.clip(c * r - 0.5, 0.0, r - 1.0)
    y = np.clip(p * r - 0.5, 0.0, r - 1.0)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, r - 1)
    y1 = np.minimum(y0 + 1, r - 1)
    fx = x - x0
    fy = y - y0
    g00 = lut[x0, y0]
    g10 = lut[x1, y0]
    g01 = lut[x0, y1]
    g11 = lut[x1, y1]
    val = (g00 * ((1 - fx) * (1 - fy))[..., None] + g10 * (fx * (1 - fy))[..., None]
           + g01 * ((1 - fx) * fy)[..., None] + g11 * (fx * fy)[..., None])
    # derivative along the rho axis of the bilinear patch, chain-ruled to rho units
    in_cell = ((p * r - 0.5) > 0.0) & ((p * r - 0.5) < r - 1.0)
    dval = ((g01 - g00) * (1 - fx)[..., None] + (g11 - g10) * fx[..., None]) * r
    dval = dval * in_cell[..., None]
    return val[..., 0], val[..., 1], dval[..., 0], dval[..., 1]


def sample_mips(env: EnvLight, r_dirs: np.ndarray, rho: np.ndarray):
    """Trilinear prefiltered-radiance lookup with the tap record for backprop.

    Returns (values (N,3), cache) where the cache holds per-fragment level
    indices, bilinear taps/weights and the radiance difference across levels
    (the roughness derivative direction).
    """
    if env.mip_chain is None:
        raise RuntimeError("environment mips not baked")
    r_dirs = np.atleast_2d(r_dirs)
    rho = np.clip(np.atleast_1d(np.asarray(rho, dtype=np.float64)), 0.0, 1.0)
    K = env.n_levels
    lvl = rho * (K - 1)
    k0 = np.minimum(np.floor(lvl).astype(np.int64), K - 2)
    t = lvl - k0

    vals = np.zeros((len(r_dirs), 3))
    per_level = []
    v_lo = np.zeros_like(vals)
    v_hi = np.zeros_like(vals)
    for k in range(K):
        sel = np.flatnonzero((k0 == k) | (k0 + 1 == k))
        if len(sel) == 0:
            per_level.append(None)
            continue
        hk, wk = env.mip_chain[k].shape[:2]
        idx, wts = equirect_taps(hk, wk, r_dirs[sel])
        v = np.einsum("nk,nkc->nc", wts, env.mip_chain[k].reshape(hk * wk, 3)[idx])
        lo = k0[sel] == k
        contrib = np.where(lo[:, None], (1.0 - t[sel])[:, None], t[sel][:, None])
        vals[sel] += contrib * v
        v_lo[sel[lo]] = v[lo]
        v_hi[sel[~lo]] = v[~lo]
        per_level.append((sel, idx, wts, contrib))
    cache = {"per_level": per_level, "k0": k0, "t": t,
             "dv_dlvl": v_hi - v_lo, "n": len(r_dirs)}
    return vals, cache


def mips_backward(env: EnvLight, cache, grad_vals: np.ndarray):
    """Scatter value gradients to per-level mip grids and the rho direction.

    Returns (mip_grads list over levels aligned with env.mip_chain,
    grad_rho (N,)).
    """
    K = env.n_levels
    mip_grads = [None] * K
    for k in range(K):
        rec = cache["per_level"][k]
        if rec is None:
            continue
        sel, idx, wts, contrib = rec
        hk, wk = env.mip_chain[k].shape[:2]
        g = np.zeros((hk * wk, 3))
        # (N,4) taps x (N,3) grads weighted by level contribution
        gv = grad_vals[sel] * contrib
        np.add.at(g, idx.ravel(),
                  (wts[:, :, None] * gv[:, None, :]).reshape(-1, 3))
        mip_grads[k] = g.reshape(hk, wk, 3)
    grad_rho = np.sum(grad_vals * cache["dv_dlvl"], axis=1) * (K - 1)
    return mip_grads, grad_rho


def env_raw_grad(env: EnvLight, mip_grads) -> np.ndarray:
    """Push mip-level gradients through the prefilter operators and softplus."""
    if env.train_ops is None:
        raise RuntimeError("training operators not built")
    h, w = env.raw.shape[:2]
    g_rad = np.zeros((h * w, 3))
    for k, g in enumerate(mip_grads):
        if g is None:
            continue
        if k == 0:
            g_rad += g.reshape(h * w, 3)
        else:
            g_rad += env.train_ops[k].T @ g.reshape(-1, 3)
    return g_rad.reshape(h, w, 3) * softplus_grad(env.raw)


def split_sum_specular(env: EnvLight, r_dirs: np.ndarray, rho, f0,
                       cos_theta) -> np.ndarray:
    """Prefiltered radiance times the ambient BRDF: L(r, rho) * (f0 F1 + F2)."""
    if env.lut is None:
        raise RuntimeError("LUT not baked")
    r_dirs = np.atleast_2d(r_dirs)
    rho = np.broadcast_to(np.asarray(rho, dtype=np.float64), (len(r_dirs),))
    f0 = np.broadcast_to(np.asarray(f0, dtype=np.float64), (len(r_dirs), 3))
    cos_theta = np.broadcast_to(np.asarray(cos_theta, dtype=np.float64), (len(r_dirs),))
    l_spec, _ = sample_mips(env, r_dirs, rho)
    f1, f2, _, _ = lut_lookup(env.lut, cos_theta, rho)
    m_spec = f0 * f1[:, None] + f2[:, None]
    return l_spec * m_spec


def reference_specular(env: EnvLight, n: np.ndarray, wo: np.ndarray,
                       params: MicrofacetParams, n_samples: int = 100_000,
                       seed: int = 0):
    """Monte-Carlo estimate of the unsplit specular integral (importance
    sampled over the GGX half-vector distribution). Returns (rgb, stderr).
    Linear in the radiance map; used only to validate the split-sum path.
    """
    if n_samples < 1:
        raise ValueError("n_samples must be positive")
    n = np.asarray(n, dtype=np.float64)
    wo = np.asarray(wo, dtype=np.float64)
    rho = float(params.roughness)
    f0 = params.f0()
    rng = np.random.Generator(np.random.PCG64(seed))
    u1 = rng.random(n_samples)
    u2 = rng.random(n_samples)
    h_local = sample_ggx_half(u1, u2, rho)
    t, b = tangent_frames(n[None])
    h = h_local[:, 0:1] * t + h_local[:, 1:2] * b + h_local[:, 2:3] * n
    wi = 2.0 * (h @ wo)[:, None] * h - wo

    nl = wi @ n
    nv = max(float(n @ wo), 1e-8)
    keep = nl > 0.0
    contrib = np.zeros((n_samples, 3))
    if keep.any():
        hk = h[keep]
        wik = wi[keep]
        nh = np.clip(hk @ n, 1e-8, 1.0)
        vh = np.clip(np.sum(hk * wo, axis=1), 1e-8, 1.0)
        radiance_flat = env.radiance
        L = sample_equirect(radiance_flat, wik)
        F = eval_fresnel(vh, np.broadcast_to(f0, (len(hk), 3)))
        G = smith_g(nl[keep], nv, rho)
        contrib[keep] = L * F * (G * vh / (nh * nv))[:, None]
    est = contrib.mean(axis=0)
    stderr = contrib.std(axis=0, ddof=1) / np.sqrt(n_samples)
    return est, stderr


# ---------------------------------------------------------------------------
# HDR image IO (Radiance format via OpenCV)

def load_hdr(path) -> np.ndarray:
    import cv2

    img = cv2.imread(str(path), cv2.IMREAD_UNCHANGED)
    if img is None:
        raise IOError(f"cannot read HDR image {path}")
    return np.ascontiguousarray(img[..., ::-1].astype(np.float64))


def save_hdr(path, rgb: np.ndarray) -> None:
    import cv2

    arr = np.ascontiguousarray(np.asarray(rgb, dtype=np.float32)[..., ::-1])
    if not cv2.imwrite(str(path), arr):
        raise IOError(f"cannot write HDR image {path}")
