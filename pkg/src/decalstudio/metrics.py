"""Reconstruction PSNR and the chart-warping metric.

Warping is measured as the variance of geodesic-to-UV distance ratios over
uniformly sampled vertex pairs in the chart region. Ratios are normalized by
their mean before the variance so a uniformly scaled chart scores exactly
zero; the raw variance is reported alongside for transparency. Geodesics are
graph geodesics (see mesh module), a consistent overestimate.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, asdict

import numpy as np

from .mesh import TriMesh, geodesic_matrix
from .uvparam import UvChart


def psnr(img_a: np.ndarray, img_b: np.ndarray) -> float:
    """10 log10(1 / MSE) for [0,1] images; identical images give +inf."""
    a = np.asarray(img_a, dtype=np.float64)
    b = np.asarray(img_b, dtype=np.float64)
    if a.shape != b.shape:
        raise ValueError(f"shape mismatch {a.shape} vs {b.shape}")
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)


@dataclass
class WarpReport:
    n_pairs: int
    variance: float            # of mean-normalized ratios
    raw_variance: float
    mean_ratio: float
    resampled: int

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def to_table(self) -> str:
        rows = [("pairs", self.n_pairs),
                ("variance (mean-normalized)", f"{self.variance:.3e}"),
                ("variance (raw)", f"{self.raw_variance:.3e}"),
                ("mean ratio", f"{self.mean_ratio:.6g}"),
                ("degenerate pairs resampled", self.resampled)]
        width = max(len(k) for k, _ in rows)
        return "\n".join(f"{k:<{width}}  {v}" for k, v in rows)


def warping_variance(mesh: TriMesh, chart: UvChart, n_pairs: int = 10_000,
                     seed: int = 0) -> WarpReport:
    """Variance of geodesic/UV distance ratios over sampled region pairs.

    Pairs with near-zero UV distance are resampled (counted in the report).
    Deterministic for a fixed seed.
    """
    if n_pairs < 2:
        raise ValueError("n_pairs must be >= 2")
    region = chart.region_vertices
    if len(region) < 2:
        raise ValueError("chart region has fewer than 2 vertices")
    rng = np.random.Generator(np.random.PCG64(seed))

    ratios = np.empty(0)
    resampled = 0
    need = n_pairs
    uv = chart.vertex_uv
    dist_cache: dict[int, np.ndarray] = {}
    while need > 0:
        a = region[rng.integers(0, len(region), size=need)]
        b = region[rng.integers(0, len(region), size=need)]
        ok = a != b
        resampled += int(np.sum(~ok))
        a, b = a[ok], b[ok]
        d = np.linalg.norm(uv[a] - uv[b], axis=1)
        fine = d >= 1e-9
        resampled += int(np.sum(~fine))
        a, b, d = a[fine], b[fine], d[fine]
        if len(a) == 0:
            continue
        g = np.empty(len(a))
        for src in np.unique(a):
            if src not in dist_cache:
                dist_cache[int(src)] = geodesic_matrix(mesh, np.array([src]))[0]
            sel = a == src
            g[sel] = dist_cache[int(src)][b[sel]]
        if not np.isfinite(g).all():
            raise ValueError("disconnected vertex pair in chart region")
        ratios = np.concatenate([ratios, g / d])
        need = n_pairs - len(ratios)

    mean = float(ratios.mean())
    normalized = ratios / mean
    return WarpReport(n_pairs=n_pairs,
                      variance=float(normalized.var()),
                      raw_variance=float(ratios.var()),
                      mean_ratio=mean,
                      resampled=resampled)
