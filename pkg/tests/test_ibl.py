import numpy as np
import pytest

from decalstudio import ibl
from decalstudio.ibl import (EnvLight, MicrofacetParams, bake_lut, eval_fresnel,
                             eval_ggx_D, lut_lookup, prefilter,
                             reference_specular, sample_mips,
                             split_sum_specular)

from conftest import smooth_env


class TestGgxD:
    def test_peak_rough_one(self):
        assert eval_ggx_D(1.0, 1.0) == pytest.approx(1.0 / np.pi)

    def test_grazing_half_vector(self):
        rho = 0.5
        a2 = rho ** 4
        assert eval_ggx_D(0.0, rho) == pytest.approx(a2 / np.pi)

    def test_normalization_by_quadrature(self):
        """integral of D(h) (n.h) over the hemisphere = 1 (uniform MC)."""
        rng = np.random.Generator(np.random.PCG64(0))
        n = 2_000_000
        z = rng.random(n)           # cos(theta) uniform
        for rho in (0.3, 0.6, 1.0):
            vals = eval_ggx_D(z, rho) * z
            est = vals.mean() * 2 * np.pi  # hemisphere area x mean
            assert est == pytest.approx(1.0, rel=0.01)

    def test_rho_zero_clamped(self):
        assert np.isfinite(eval_ggx_D(0.5, 0.0))
        assert eval_ggx_D(0.5, 0.0) == eval_ggx_D(0.5, ibl.RHO_MIN)


class TestFresnel:
    def test_normal_incidence(self):
        f0 = np.array([0.04, 0.5, 1.0])
        assert np.allclose(eval_fresnel(1.0, f0), f0)

    def test_grazing(self):
        assert np.allclose(eval_fresnel(0.0, np.array([0.04, 0.5, 0.9])), 1.0)

    def test_half_angle_value(self):
        assert eval_fresnel(0.5, 0.04) == pytest.approx(0.04 + 0.96 * 0.5 ** 5)


class TestPrefilter:
    def test_constant_map_stays_constant(self):
        env = EnvLight(ibl.inv_softplus(np.full((32, 64, 3), 0.7)), n_levels=5)
        chain = prefilter(env, samples_per_texel=64)
        for lvl in chain:
            assert np.allclose(lvl, 0.7, atol=1e-3)

    def test_bright_texel_max_decreases(self):
        rad = np.full((32, 64, 3), 0.05)
        rad[10, 20] = 50.0
        env = EnvLight(ibl.inv_softplus(rad), n_levels=5)
        chain = prefilter(env, samples_per_texel=256)
        maxes = [lvl.max() for lvl in chain]
        assert all(b <= a + 1e-9 for a, b in zip(maxes, maxes[1:]))

    def test_matches_quadrature_oracle_at_mid_roughness(self):
        """Importance-sampled prefilter vs dense quadrature of the same
        reflected-lobe kernel: D(r.h(w)) (r.w)+ over all texel directions."""
        env = smooth_env(height=64, n_levels=3)
        chain = prefilter(env, samples_per_texel=512)
        k = 1  # roughness 0.5 with 3 levels
        rho = env.level_roughness(k)
        hk, wk = chain[k].shape[:2]
        rad = env.radiance
        h, w = rad.shape[:2]
        all_dirs = ibl.texel_dirs(h, w).reshape(-1, 3)
        dw = ibl.texel_solid_angles(h, w).reshape(-1)
        rng = np.random.Generator(np.random.PCG64(3))
        for _ in range(6):
            r_idx = rng.integers(0, hk * wk)
            r = ibl.texel_dirs(hk, wk).reshape(-1, 3)[r_idx]
            half = r[None] + all_dirs
            half /= np.linalg.norm(half, axis=1, keepdims=True)
            kern = eval_ggx_D(half @ r, rho) * np.maximum(all_dirs @ r, 0.0) * dw
            oracle = (kern[:, None] * rad.reshape(-1, 3)).sum(0) / kern.sum()
            got = chain[k].reshape(-1, 3)[r_idx]
            assert np.linalg.norm(got - oracle) / np.linalg.norm(oracle) < 0.05

    def test_deterministic(self):
        env1 = smooth_env(32, n_levels=4)
        env2 = smooth_env(32, n_levels=4)
        c1 = prefilter(env1, samples_per_texel=32)
        c2 = prefilter(env2, samples_per_texel=32)
        for a, b in zip(c1, c2):
            assert np.array_equal(a, b)


class TestLut:
    def test_energy_bound(self, baked_lut):
        s = baked_lut[..., 0] + baked_lut[..., 1]
        assert (baked_lut >= 0).all()
        assert s.max() <= 1.0 + 1e-2

    def test_mirror_limit(self):
        lut = bake_lut(32, 4096)
        f1, f2, _, _ = lut_lookup(lut, 1.0, ibl.RHO_MIN)
        assert f1 > 0.9
        assert f2 < 0.05

    def test_deterministic(self):
        assert np.array_equal(bake_lut(16, 128, seed=9), bake_lut(16, 128, seed=9))

    def test_resolution_guard(self):
        with pytest.raises(ValueError):
            bake_lut(8)


class TestSplitSum:
    def test_constant_env_reduces_to_lut(self, baked_lut):
        env = EnvLight(ibl.inv_softplus(np.full((16, 32, 3), 2.0)), n_levels=4)
        prefilter(env, samples_per_texel=64)
        env.lut = baked_lut
        r = np.array([[0.0, 0.0, 1.0]])
        for rho, ct in ((0.2, 0.8), (0.7, 0.3)):
            f0 = np.array([[0.04, 0.5, 1.0]])
            out = split_sum_specular(env, r, rho, f0, ct)[0]
            f1, f2, _, _ = lut_lookup(env.lut, ct, rho)
            assert np.allclose(out, 2.0 * (f0[0] * f1 + f2), atol=2e-3)

    def test_zero_f0_nonnegative(self, baked_lut):
        env = EnvLight(ibl.inv_softplus(np.full((16, 32, 3), 1.0)), n_levels=4)
        prefilter(env, samples_per_texel=64)
        env.lut = baked_lut
        out = split_sum_specular(env, np.array([[0, 0, 1.0]]), 0.5,
                                 np.zeros((1, 3)), 0.6)[0]
        f1, f2, _, _ = lut_lookup(env.lut, 0.6, 0.5)
        assert np.allclose(out, f2, atol=1e-3)
        assert (out >= 0).all()

    def test_linear_in_radiance(self, baked_lut):
        env1 = smooth_env(32, n_levels=4)
        rad = env1.radiance
        env2 = EnvLight(ibl.inv_softplus(3.0 * rad), n_levels=4)
        for e in (env1, env2):
            prefilter(e, samples_per_texel=64)
            e.lut = baked_lut
        r = np.array([[0.3, 0.4, np.sqrt(1 - 0.25)]])
        a = split_sum_specular(env1, r, 0.4, np.array([[0.5, 0.5, 0.5]]), 0.7)
        b = split_sum_specular(env2, r, 0.4, np.array([[0.5, 0.5, 0.5]]), 0.7)
        assert np.allclose(b, 3.0 * a, rtol=1e-9)


class TestReference:
    def test_zero_radiance(self, baked_lut):
        env = EnvLight(np.full((16, 32, 3), -60.0), n_levels=4)
        p = MicrofacetParams(np.array([0.5, 0.5, 0.5]), 0.4, 0.5)
        est, err = reference_specular(env, np.array([0, 0, 1.0]),
                                      np.array([0, 0.3, 0.954]), p, 20_000)
        assert np.allclose(est, 0.0, atol=1e-12)

    def test_linearity_in_map(self):
        env1 = smooth_env(32, n_levels=4)
        env2 = EnvLight(ibl.inv_softplus(2.0 * env1.radiance), n_levels=4)
        n = np.array([0, 0, 1.0])
        wo = np.array([0.4, 0, np.sqrt(1 - 0.16)])
        p = MicrofacetParams(np.array([0.8, 0.6, 0.4]), 0.5, 1.0)
        a, _ = reference_specular(env1, n, wo, p, 50_000, seed=4)
        b, _ = reference_specular(env2, n, wo, p, 50_000, seed=4)
        assert np.allclose(b, 2.0 * a, rtol=1e-9)

    def test_split_sum_agrees_at_mid_roughness(self, baked_lut):
        env = smooth_env(64, n_levels=6)
        prefilter(env, samples_per_texel=256)
        env.lut = baked_lut
        n = np.array([0.0, 0.0, 1.0])
        wo = np.array([0.35, 0.1, np.sqrt(1 - 0.1325)])
        p = MicrofacetParams(np.array([0.7, 0.6, 0.5]), 0.5, 1.0)
        ref, err = reference_specular(env, n, wo, p, 100_000, seed=0)
        r = ibl.reflect(wo[None], n[None])
        split = split_sum_specular(env, r, p.roughness, p.f0()[None], n @ wo)[0]
        assert np.linalg.norm(split - ref) / np.linalg.norm(ref) < 0.10


class TestEnvGrads:
    def test_train_mips_match_direct_prefilter(self):
        env = smooth_env(32, n_levels=4)
        ibl.build_train_ops(env, samples_per_texel=32)
        ibl.refresh_train_mips(env)
        direct = prefilter(EnvLight(env.raw.copy(), n_levels=4),
                           samples_per_texel=32)
        for a, b in zip(env.mip_chain, direct):
            # same seed, same sample set -> same linear map
            assert np.allclose(a, b, atol=1e-12)

    def test_operator_transpose_is_adjoint(self):
        env = smooth_env(16, n_levels=3)
        ibl.build_train_ops(env, samples_per_texel=16)
        rng = np.random.Generator(np.random.PCG64(0))
        S = env.train_ops[1]
        x = rng.normal(size=S.shape[1])
        y = rng.normal(size=S.shape[0])
        assert np.dot(S @ x, y) == pytest.approx(np.dot(x, S.T @ y), rel=1e-12)


class TestHdrIO:
    def test_roundtrip(self, tmp_path):
        rad = np.abs(smooth_env(16).radiance) * 3.0
        p = tmp_path / "env.hdr"
        ibl.save_hdr(p, rad)
        back = ibl.load_hdr(p)
        assert back.shape == rad.shape
        assert np.abs(back - rad).max() / rad.max() < 0.02  # RGBE quantization
