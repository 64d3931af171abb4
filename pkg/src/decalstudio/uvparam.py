"""Disk-topology UV parameterization for the selected mesh region.

Tutte embedding (uniform weights, boundary on a circle) provides a bijective
init; the local/global rigid-fit solver then alternates per-triangle 2x2
rotation fits (SVD of the Jacobian) with a global cotangent-weighted sparse
solve until the distortion energy plateaus. The final chart is rigid-aligned
and uniformly rescaled into [margin, 1-margin]^2.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix, csc_matrix
from scipy.sparse.linalg import splu

from .mesh import TriMesh, build_mesh


class TopologyError(ValueError):
    """Region is not a disk (wrong boundary loop count or nonzero genus)."""


class NumericError(RuntimeError):
    """Singular or non-finite linear system in the parameterization solve."""


@dataclass
class UvChart:
    """Per-vertex UV coordinates for the full mesh.

    Non-region vertices carry the (0,0) sentinel. `region_vertices` indexes
    the vertices that have a real UV.
    """

    vertex_uv: np.ndarray          # (V, 2) float64
    region_vertices: np.ndarray    # (Vr,) int64, sorted
    margin: float
    arap_energy: float

    clamp_events: int = field(default=0, compare=False)

    def region_uv(self) -> np.ndarray:
        return self.vertex_uv[self.region_vertices]


def extract_region(mesh: TriMesh):
    """Sub-mesh of the flagged faces.

    Returns (sub_mesh, vert_map) where vert_map[i] is the original index of
    sub-mesh vertex i. The sub-mesh keeps UV flags all true.
    """
    faces = mesh.faces[mesh.face_in_uv_area]
    if len(faces) == 0:
        raise ValueError("mesh has no UV-area faces")
    vert_map = np.unique(faces)
    inv = np.full(mesh.n_vertices, -1, dtype=np.int64)
    inv[vert_map] = np.arange(len(vert_map))
    sub = build_mesh(mesh.vertices[vert_map], inv[faces],
                     normals=mesh.vertex_normals[vert_map], prune=False)
    sub = TriMesh(sub.vertices, sub.faces, sub.vertex_normals,
                  np.ones(len(sub.faces), dtype=bool))
    return sub, vert_map


def _boundary_loops(faces: np.ndarray, n_vertices: int):
    edge_count: dict[tuple[int, int], int] = {}
    for a, b, c in faces:
        for u, v in ((a, b), (b, c), (c, a)):
            k = (min(u, v), max(u, v))
            edge_count[k] = edge_count.get(k, 0) + 1
    boundary = [e for e, n in edge_count.items() if n == 1]
    if not boundary:
        return [], len(edge_count)

    nbr: dict[int, list[int]] = {}
    for u, v in boundary:
        nbr.setdefault(u, []).append(v)
        nbr.setdefault(v, []).append(u)
    for v, ns in nbr.items():
        if len(ns) != 2:
            raise TopologyError(f"non-manifold boundary at vertex {v}")

    loops = []
    visited: set[int] = set()
    for start in sorted(nbr):
        if start in visited:
            continue
        loop = [start]
        visited.add(start)
        prev, cur = None, start
        while True:
            nxt = [w for w in sorted(nbr[cur]) if w != prev]
            nxt = nxt[0] if nxt else prev
            if nxt == start:
                break
            loop.append(nxt)
            visited.add(nxt)
            prev, cur = cur, nxt
        loops.append(loop)
    return loops, len(edge_count)


def _require_disk(sub: TriMesh) -> list[int]:
    loops, n_edges = _boundary_loops(sub.faces, sub.n_vertices)
    if not loops:
        raise TopologyError("region has no boundary loop (closed surface)")
    if len(loops) > 1:
        raise TopologyError(f"region has {len(loops)} boundary loops, expected 1")
    euler = sub.n_vertices - n_edges + sub.n_faces
    if euler != 1:
        raise TopologyError(f"region is not a disk (Euler characteristic {euler})")
    return loops[0]


def tutte_embed(sub: TriMesh) -> UvChart:
    """Boundary on the unit circle (arc-length spaced), interior from the
    uniform-weight Laplace system. Bijective for disk topology."""
    loop = _require_disk(sub)
    n = sub.n_vertices

    pts = sub.vertices[loop]
    seg = np.linalg.norm(np.roll(pts, -1, axis=0) - pts, axis=1)
    t = np.concatenate([[0.0], np.cumsum(seg)[:-1]]) / max(seg.sum(), 1e-300)
    angles = 2.0 * np.pi * t
    uv = np.zeros((n, 2))
    uv[loop, 0] = np.cos(angles)
    uv[loop, 1] = np.sin(angles)

    interior = np.setdiff1d(np.arange(n), np.asarray(loop))
    if len(interior) > 0:
        rows, cols, vals = [], [], []
        rhs = np.zeros((len(interior), 2))
        pos = np.full(n, -1, dtype=np.int64)
        pos[interior] = np.arange(len(interior))
        on_boundary = np.zeros(n, dtype=bool)
        on_boundary[loop] = True

        neigh: dict[int, set[int]] = {int(i): set() for i in interior}
        for a, b, c in sub.faces:
            for u, v in ((a, b), (b, c), (c, a)):
                for x, y in ((u, v), (v, u)):
                    if not on_boundary[x]:
                        neigh[int(x)].add(int(y))
        for i in interior:
            ns = sorted(neigh[int(i)])
            rows.append(pos[i]); cols.append(pos[i]); vals.append(float(len(ns)))
            for j in ns:
                if on_boundary[j]:
                    rhs[pos[i]] += uv[j]
                else:
                    rows.append(pos[i]); cols.append(pos[j]); vals.append(-1.0)
        A = csc_matrix(coo_matrix((vals, (rows, cols)),
                                  shape=(len(interior), len(interior))))
        try:
            lu = splu(A)
        except RuntimeError as e:
            raise NumericError(f"Tutte system is singular: {e}") from e
        uv[interior, 0] = lu.solve(rhs[:, 0])
        uv[interior, 1] = lu.solve(rhs[:, 1])

    return UvChart(uv, np.arange(n, dtype=np.int64), margin=0.0,
                   arap_energy=float(rigid_fit_energy(sub, uv)))


def _local_frames(sub: TriMesh) -> np.ndarray:
    """Isometric 2D coordinates of each triangle: (T, 3, 2)."""
    p0 = sub.vertices[sub.faces[:, 0]]
    e1 = sub.vertices[sub.faces[:, 1]] - p0
    e2 = sub.vertices[sub.faces[:, 2]] - p0
    l1 = np.linalg.norm(e1, axis=1)
    l1 = np.maximum(l1, 1e-300)
    x2 = np.einsum("ij,ij->i", e1, e2) / l1
    y2 = np.linalg.norm(np.cross(e1, e2), axis=1) / l1
    X = np.zeros((len(sub.faces), 3, 2))
    X[:, 1, 0] = l1
    X[:, 2, 0] = x2
    X[:, 2, 1] = y2
    return X


def _cot_weights(X: np.ndarray) -> np.ndarray:
    """Cotangents opposite each in-triangle edge (0-1, 1-2, 2-0): (T, 3)."""
    cots = np.zeros((len(X), 3))
    for k, (i, j, o) in enumerate(((0, 1, 2), (1, 2, 0), (2, 0, 1))):
        a = X[:, i] - X[:, o]
        b = X[:, j] - X[:, o]
        cross = np.abs(a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0])
        cots[:, k] = np.einsum("ij,ij->i", a, b) / np.maximum(cross, 1e-300)
    return cots


def _jacobians(X: np.ndarray, uv_tri: np.ndarray) -> np.ndarray:
    """2x2 maps from local triangle frame to UV: (T, 2, 2)."""
    du = np.stack([uv_tri[:, 1] - uv_tri[:, 0], uv_tri[:, 2] - uv_tri[:, 0]], axis=2)
    dx = np.stack([X[:, 1] - X[:, 0], X[:, 2] - X[:, 0]], axis=2)
    try:
        return du @ np.linalg.inv(dx)
    except np.linalg.LinAlgError as e:
        raise NumericError(f"degenerate triangle frame: {e}") from e


def _best_rotations(J: np.ndarray) -> np.ndarray:
    U, _, Vt = np.linalg.svd(J)
    R = U @ Vt
    neg = np.linalg.det(R) < 0
    if neg.any():
        U = U.copy()
        U[neg, :, 1] *= -1.0
        R[neg] = U[neg] @ Vt[neg]
    return R


_EDGES = ((0, 1), (1, 2), (2, 0))


def _energy(X, cots, uv_tri, R) -> float:
    e = 0.0
    for k, (i, j) in enumerate(_EDGES):
        d_uv = uv_tri[:, i] - uv_tri[:, j]
        d_x = np.einsum("tab,tb->ta", R, X[:, i] - X[:, j])
        e += 0.5 * np.sum(cots[:, k] * np.sum((d_uv - d_x) ** 2, axis=1))
    return float(e)


def rigid_fit_energy(sub: TriMesh, uv: np.ndarray) -> float:
    """Distortion energy of a chart with per-triangle optimal rotations."""
    X = _local_frames(sub)
    cots = _cot_weights(X)
    uv_tri = uv[sub.faces]
    R = _best_rotations(_jacobians(X, uv_tri))
    return _energy(X, cots, uv_tri, R)


def arap_solve(sub: TriMesh, init: UvChart, max_iters: int = 100,
               tol: float = 1e-6, margin: float = 2.0 / 1024.0) -> UvChart:
    """Minimize rigid-fit distortion from a given chart.

    Stops when the relative energy decrease falls below `tol` or after
    `max_iters` local/global rounds. The energy is asserted non-increasing.
    Returned chart is normalized into [margin, 1-margin]^2; `arap_energy`
    refers to the solver frame (pre-normalization).
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    n = sub.n_vertices
    uv = init.vertex_uv[:n].copy()
    X = _local_frames(sub)
    cots = _cot_weights(X)
    faces = sub.faces

    rows, cols, vals = [], [], []
    for k, (i, j) in enumerate(_EDGES):
        w = cots[:, k]
        fi, fj = faces[:, i], faces[:, j]
        rows.extend([fi, fj, fi, fj])
        cols.extend([fi, fj, fj, fi])
        vals.extend([w, w, -w, -w])
    L = coo_matrix((np.concatenate(vals),
                    (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()

    # pin vertex 0 to remove the translation null space
    free = np.arange(1, n)
    try:
        lu = splu(csc_matrix(L[free][:, free]))
    except RuntimeError as e:
        raise NumericError(f"global system is singular: {e}") from e
    L_fc = L[free][:, [0]]

    energy = _energy(X, cots, uv[faces], _best_rotations(_jacobians(X, uv[faces])))
    for _ in range(max_iters):
        uv_tri = uv[faces]
        R = _best_rotations(_jacobians(X, uv_tri))

        b = np.zeros((n, 2))
        for k, (i, j) in enumerate(_EDGES):
            rx = np.einsum("tab,tb->ta", R, X[:, i] - X[:, j]) * cots[:, k, None]
            np.add.at(b, faces[:, i], rx)
            np.add.at(b, faces[:, j], -rx)

        rhs = b[free] - L_fc @ uv[[0]]
        new_uv = uv.copy()
        new_uv[free, 0] = lu.solve(rhs[:, 0])
        new_uv[free, 1] = lu.solve(rhs[:, 1])
        if not np.isfinite(new_uv).all():
            raise NumericError("non-finite UVs in global solve")

        new_energy = _energy(X, cots, new_uv[faces],
                             _best_rotations(_jacobians(X, new_uv[faces])))
        if new_energy > energy + 1e-9 * max(1.0, energy):
            break  # numerically stagnant; keep the best iterate
        uv = new_uv
        prev, energy = energy, new_energy
        if prev - energy < tol * max(prev, 1e-300):
            break

    return UvChart(_normalize_chart(uv, margin), np.arange(n, dtype=np.int64),
                   margin=margin, arap_energy=energy)


def _normalize_chart(uv: np.ndarray, margin: float) -> np.ndarray:
    """Rigid-align via PCA then uniformly scale/center into [margin, 1-margin]^2."""
    c = uv.mean(axis=0)
    centered = uv - c
    cov = centered.T @ centered
    _, vecs = np.linalg.eigh(cov)
    axes = vecs[:, ::-1]  # principal axis first
    if np.linalg.det(axes) < 0:
        axes[:, 1] *= -1.0
    aligned = centered @ axes
    lo, hi = aligned.min(axis=0), aligned.max(axis=0)
    extent = float(max(hi[0] - lo[0], hi[1] - lo[1], 1e-300))
    s = (1.0 - 2.0 * margin) / extent
    out = (aligned - (lo + hi) / 2.0) * s + 0.5
    return out


def parameterize_region(mesh: TriMesh, resolution: int = 1024,
                        max_iters: int = 100, tol: float = 1e-6) -> UvChart:
    """Full pipeline for the flagged region of `mesh`; margin = 2 texels."""
    sub, vert_map = extract_region(mesh)
    margin = 2.0 / resolution
    chart = arap_solve(sub, tutte_embed(sub), max_iters=max_iters, tol=tol,
                       margin=margin)
    full_uv = np.zeros((mesh.n_vertices, 2))
    full_uv[vert_map] = chart.vertex_uv
    return UvChart(full_uv, vert_map.astype(np.int64), margin=margin,
                   arap_energy=chart.arap_energy)


def uv_to_texel(uv, resolution: int, chart: UvChart | None = None) -> np.ndarray:
    """Continuous texel coordinates (u*(W-1), v*(H-1)); out-of-range UVs are
    clamped and counted on the chart when one is supplied."""
    uv = np.asarray(uv, dtype=np.float64)
    clipped = np.clip(uv, 0.0, 1.0)
    if chart is not None:
        chart.clamp_events += int(np.sum(np.any(clipped != uv, axis=-1)))
    return clipped * (resolution - 1)


def bilinear_sample(grid: np.ndarray, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Bilinear taps into grid[y, x] with clamped borders; x/y are continuous."""
    h, w = grid.shape[:2]
    x = np.clip(np.asarray(x, dtype=np.float64), 0.0, w - 1.0)
    y = np.clip(np.asarray(y, dtype=np.float64), 0.0, h - 1.0)
    x0 = np.floor(x).astype(np.int64)
    y0 = np.floor(y).astype(np.int64)
    x1 = np.minimum(x0 + 1, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    fx = (x - x0)[..., None] if grid.ndim == 3 else (x - x0)
    fy = (y - y0)[..., None] if grid.ndim == 3 else (y - y0)
    g00, g10 = grid[y0, x0], grid[y0, x1]
    g01, g11 = grid[y1, x0], grid[y1, x1]
    return (g00 * (1 - fx) * (1 - fy) + g10 * fx * (1 - fy)
            + g01 * (1 - fx) * fy + g11 * fx * fy)


def count_chart_overlaps(sub: TriMesh, uv: np.ndarray, eps: float = 1e-12) -> int:
    """Pairs of UV triangles with overlapping interiors (separating-axis test).

    Shared-edge adjacency does not count. O(F^2) with a bbox prefilter;
    intended for chart validation on test-scale regions.
    """
    tris = uv[sub.faces]  # (T, 3, 2)
    lo = tris.min(axis=1)
    hi = tris.max(axis=1)
    count = 0
    T = len(tris)
    for a in range(T):
        for b in range(a + 1, T):
            if (lo[a] > hi[b] + eps).any() or (lo[b] > hi[a] + eps).any():
                continue
            if _tri_overlap(tris[a], tris[b], eps):
                count += 1
    return count


def _tri_overlap(t1: np.ndarray, t2: np.ndarray, eps: float) -> bool:
    for tri in (t1, t2):
        edges = np.roll(tri, -1, axis=0) - tri
        normals = np.stack([-edges[:, 1], edges[:, 0]], axis=1)
        for nrm in normals:
            p1 = t1 @ nrm
            p2 = t2 @ nrm
            if p1.max() <= p2.min() + eps or p2.max() <= p1.min() + eps:
                return False
    return True
