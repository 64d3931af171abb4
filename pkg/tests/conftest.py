import numpy as np
import pytest

from decalstudio import ibl
from decalstudio.mesh import TriMesh, build_mesh


def _gridded(nx: int, ny: int, dx: float, dy: float, warp, union_jack: bool) -> TriMesh:
    xs = np.arange(nx) * dx
    ys = np.arange(ny) * dy
    X, Y = np.meshgrid(xs, ys)

    def vid(i, j):
        return j * nx + i

    verts = list(np.stack([X.ravel(), Y.ravel()], axis=1))
    faces = []
    for j in range(ny - 1):
        for i in range(nx - 1):
            a, b = vid(i, j), vid(i + 1, j)
            c, d = vid(i + 1, j + 1), vid(i, j + 1)
            if union_jack:
                verts.append(np.array([(i + 0.5) * dx, (j + 0.5) * dy]))
                e = len(verts) - 1
                faces += [[a, b, e], [b, c, e], [c, d, e], [d, a, e]]
            else:
                faces += [[a, b, c], [a, c, d]]
    if warp is None:
        pts3 = np.asarray([[x, y, 0.0] for x, y in verts])
    else:
        pts3 = np.asarray([warp(x, y) for x, y in verts])
    return build_mesh(pts3, np.asarray(faces))


def grid_patch(nx: int, ny: int, spacing: float = 1.0, warp=None,
               union_jack: bool = False) -> TriMesh:
    """Flat (or warped) rectangular grid patch.

    `warp` maps (x, y) -> 3D point; union_jack adds a center vertex per quad
    (four triangles) so graph geodesics have 8 step directions.
    """
    return _gridded(nx, ny, spacing, spacing, warp, union_jack)


def quarter_cylinder(n_arc: int = 24, n_len: int = 40, radius: float = 1.0,
                     length: float = 2.0, union_jack: bool = True) -> TriMesh:
    """Developable test patch: quarter cylinder shell (x is arc length)."""

    def warp(x, y):
        ang = x / radius
        return np.array([radius * np.sin(ang), y, radius * (1 - np.cos(ang))])

    arc = radius * (np.pi / 2)
    return _gridded(n_arc, n_len, arc / (n_arc - 1), length / (n_len - 1),
                    warp, union_jack)


def hemisphere_patch(n: int = 12) -> TriMesh:
    """Curved (non-developable) cap: upper hemisphere over a grid disk."""

    def warp(x, y):
        u = (x - (n - 1) / 2) / (n - 1) * 1.2
        v = (y - (n - 1) / 2) / (n - 1) * 1.2
        r2 = u * u + v * v
        return np.array([u, v, np.sqrt(max(1.0 - r2, 0.05))])

    return _gridded(n, n, 1.0, 1.0, warp, union_jack=False)


def unit_cube() -> TriMesh:
    v = np.array([[x, y, z] for x in (0, 1) for y in (0, 1) for z in (0, 1)],
                 dtype=float)
    f = [[0, 1, 3], [0, 3, 2], [4, 6, 7], [4, 7, 5],
         [0, 4, 5], [0, 5, 1], [2, 3, 7], [2, 7, 6],
         [0, 2, 6], [0, 6, 4], [1, 5, 7], [1, 7, 3]]
    return build_mesh(v, np.asarray(f))


def smooth_env(height: int = 64, n_levels: int = 6, contrast: float = 0.6,
               base=(0.6, 0.55, 0.5)) -> ibl.EnvLight:
    """Low-frequency positive analytic radiance field."""
    dirs = ibl.texel_dirs(height, 2 * height)
    r = base[0] + contrast * (0.35 * dirs[..., 2] + 0.10 * dirs[..., 0])
    g = base[1] + contrast * (0.25 * dirs[..., 2] - 0.08 * dirs[..., 1])
    b = base[2] + contrast * (0.20 * dirs[..., 1] + 0.05 * dirs[..., 0])
    rad = np.stack([r, g, b], axis=-1)
    return ibl.EnvLight(ibl.inv_softplus(rad), n_levels=n_levels)


@pytest.fixture(scope="session")
def baked_lut():
    return ibl.bake_lut(64, 1024)
