"""Triangle mesh container, OBJ-style IO, region selection and graph geodesics."""

from __future__ import annotations

import hashlib
import logging
from collections import deque
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

log = logging.getLogger(__name__)

_DEGENERATE_AREA = 1e-14


class MeshError(ValueError):
    """Malformed mesh input or invalid mesh query."""


@dataclass
class TriMesh:
    """Indexed triangle mesh with unit vertex normals and a per-face region flag.

    `face_in_uv_area` marks the edge-connected face subset that carries the
    texture chart; it is all-false on load and populated by `select_region`
    (or a sidecar file).
    """

    vertices: np.ndarray        # (V, 3) float64
    faces: np.ndarray           # (F, 3) int32
    vertex_normals: np.ndarray  # (V, 3) float64, unit
    face_in_uv_area: np.ndarray  # (F,) bool

    _adjacency: list[list[int]] | None = field(default=None, repr=False, compare=False)
    _edge_graph: object = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        self.vertices = np.ascontiguousarray(self.vertices, dtype=np.float64)
        self.faces = np.ascontiguousarray(self.faces, dtype=np.int32)
        if self.faces.size and (self.faces.min() < 0 or self.faces.max() >= len(self.vertices)):
            raise MeshError("face index out of range")
        self.vertex_normals = np.ascontiguousarray(self.vertex_normals, dtype=np.float64)
        norms = np.linalg.norm(self.vertex_normals, axis=1)
        if norms.size and not np.allclose(norms, 1.0, atol=1e-6):
            raise MeshError("vertex normals must be unit length")
        self.face_in_uv_area = np.ascontiguousarray(self.face_in_uv_area, dtype=bool)
        if len(self.face_in_uv_area) != len(self.faces):
            raise MeshError("face flag array size mismatch")
        for a in (self.vertices, self.faces, self.vertex_normals, self.face_in_uv_area):
            a.flags.writeable = False

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_faces(self) -> int:
        return len(self.faces)

    def face_adjacency(self) -> list[list[int]]:
        """Faces sharing an edge, neighbor lists sorted by face index."""
        if self._adjacency is None:
            edge_faces: dict[tuple[int, int], list[int]] = {}
            for fi, (a, b, c) in enumerate(self.faces):
                for u, v in ((a, b), (b, c), (c, a)):
                    edge_faces.setdefault((min(u, v), max(u, v)), []).append(fi)
            adj: list[list[int]] = [[] for _ in range(self.n_faces)]
            for flist in edge_faces.values():
                for f in flist:
                    adj[f].extend(g for g in flist if g != f)
            object.__setattr__(self, "_adjacency", [sorted(set(a)) for a in adj])
        return self._adjacency

    def uv_area_vertices(self) -> np.ndarray:
        """Sorted indices of vertices touched by at least one flagged face."""
        if not self.face_in_uv_area.any():
            return np.empty(0, dtype=np.int64)
        return np.unique(self.faces[self.face_in_uv_area])

    def content_hash(self) -> str:
        h = hashlib.sha256()
        h.update(self.vertices.tobytes())
        h.update(self.faces.tobytes())
        return h.hexdigest()[:16]


def _face_normals_areas(vertices: np.ndarray, faces: np.ndarray):
    v0, v1, v2 = (vertices[faces[:, i]] for i in range(3))
    cross = np.cross(v1 - v0, v2 - v0)
    double_area = np.linalg.norm(cross, axis=1)
    return cross, double_area * 0.5


def compute_vertex_normals(vertices: np.ndarray, faces: np.ndarray) -> np.ndarray:
    """Area-weighted vertex normals (unnormalized face cross products summed)."""
    cross, _ = _face_normals_areas(vertices, faces)
    normals = np.zeros_like(vertices)
    for i in range(3):
        np.add.at(normals, faces[:, i], cross)
    lens = np.linalg.norm(normals, axis=1, keepdims=True)
    # isolated/flat-degenerate vertices get an arbitrary unit normal
    bad = lens[:, 0] < 1e-20
    normals[bad] = (0.0, 0.0, 1.0)
    lens[bad] = 1.0
    return normals / lens


def build_mesh(vertices, faces, normals=None, prune: bool = True) -> TriMesh:
    """Construct a TriMesh; drops degenerate faces and unreferenced vertices."""
    vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
    faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
    if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
        raise MeshError(
            f"face index out of range (max {faces.max()}, {len(vertices)} vertices)")

    if prune and faces.size:
        _, areas = _face_normals_areas(vertices, faces)
        degen = (areas < _DEGENERATE_AREA) \
            | (faces[:, 0] == faces[:, 1]) | (faces[:, 1] == faces[:, 2]) | (faces[:, 0] == faces[:, 2])
        if degen.any():
            log.warning("dropping %d degenerate triangle(s)", int(degen.sum()))
            faces = faces[~degen]
            if normals is None:
                pass  # recomputed below on pruned set
        used = np.zeros(len(vertices), dtype=bool)
        used[faces.ravel()] = True
        if not used.all():
            remap = np.cumsum(used) - 1
            vertices = vertices[used]
            if normals is not None:
                normals = np.asarray(normals, dtype=np.float64)[used]
            faces = remap[faces]

    if normals is None:
        normals = compute_vertex_normals(vertices, faces)
    else:
        normals = np.asarray(normals, dtype=np.float64).reshape(-1, 3)
        normals = normals / np.maximum(np.linalg.norm(normals, axis=1, keepdims=True), 1e-20)

    _warn_nonmanifold(faces)
    return TriMesh(vertices, faces, normals, np.zeros(len(faces), dtype=bool))


def _warn_nonmanifold(faces: np.ndarray) -> None:
    edge_count: dict[tuple[int, int], int] = {}
    for a, b, c in faces:
        for u, v in ((a, b), (b, c), (c, a)):
            k = (min(u, v), max(u, v))
            edge_count[k] = edge_count.get(k, 0) + 1
    over = sum(1 for n in edge_count.values() if n > 2)
    if over:
        log.warning("mesh has %d non-manifold edge(s)", over)


def load_mesh(path) -> TriMesh:
    """Load an OBJ-style indexed triangle mesh (v / vn / f lines).

    Vertex normals in the file are used when present for every vertex,
    otherwise area-weighted normals are computed. Faces must be triangles.
    """
    vertices, normals, faces = [], [], []
    normal_idx = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            tag = parts[0]
            try:
                if tag == "v":
                    vertices.append([float(x) for x in parts[1:4]])
                    if len(parts) < 4:
                        raise ValueError("short vertex")
                elif tag == "vn":
                    normals.append([float(x) for x in parts[1:4]])
                elif tag == "f":
                    if len(parts) != 4:
                        raise ValueError("only triangle faces are supported")
                    tri = []
                    for tok in parts[1:]:
                        fields = tok.split("/")
                        vi = int(fields[0])
                        tri.append(vi - 1 if vi > 0 else len(vertices) + vi)
                        if len(fields) >= 3 and fields[2]:
                            normal_idx[tri[-1]] = int(fields[2]) - 1
                    faces.append(tri)
            except (ValueError, IndexError) as e:
                raise MeshError(f"{path}:{lineno}: malformed line: {e}") from e

    if not vertices or not faces:
        raise MeshError(f"{path}: no geometry found")
    vertices = np.asarray(vertices, dtype=np.float64)
    faces_arr = np.asarray(faces, dtype=np.int64)
    if faces_arr.min() < 0 or faces_arr.max() >= len(vertices):
        raise MeshError(
            f"{path}: face index out of range (max {faces_arr.max() + 1}, {len(vertices)} vertices)")

    vn = None
    if normals and len(normal_idx) == len(vertices):
        vn = np.zeros((len(vertices), 3))
        for vi, ni in normal_idx.items():
            vn[vi] = normals[ni]
    elif normals and len(normals) == len(vertices) and not normal_idx:
        vn = np.asarray(normals, dtype=np.float64)
    return build_mesh(vertices, faces_arr, vn)


def save_mesh(mesh: TriMesh, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for v in mesh.vertices:
            fh.write(f"v {v[0]:.9g} {v[1]:.9g} {v[2]:.9g}\n")
        for n in mesh.vertex_normals:
            fh.write(f"vn {n[0]:.9g} {n[1]:.9g} {n[2]:.9g}\n")
        for a, b, c in mesh.faces + 1:
            fh.write(f"f {a}//{a} {b}//{b} {c}//{c}\n")


def save_region(mesh: TriMesh, path) -> None:
    """Sidecar region file: one flagged face index per line."""
    with open(path, "w", encoding="utf-8") as fh:
        for fi in np.flatnonzero(mesh.face_in_uv_area):
            fh.write(f"{fi}\n")


def load_region(mesh: TriMesh, path) -> TriMesh:
    with open(path, "r", encoding="utf-8") as fh:
        idx = [int(line) for line in fh if line.strip()]
    flags = np.zeros(mesh.n_faces, dtype=bool)
    try:
        flags[idx] = True
    except IndexError as e:
        raise MeshError(f"{path}: region face index out of range") from e
    out = TriMesh(mesh.vertices, mesh.faces, mesh.vertex_normals, flags)
    _check_region_connected(out)
    return out


def _check_region_connected(mesh: TriMesh) -> None:
    flagged = np.flatnonzero(mesh.face_in_uv_area)
    if len(flagged) == 0:
        return
    adj = mesh.face_adjacency()
    inset = set(flagged.tolist())
    seen = {int(flagged[0])}
    queue = deque(seen)
    while queue:
        f = queue.popleft()
        for g in adj[f]:
            if g in inset and g not in seen:
                seen.add(g)
                queue.append(g)
    if len(seen) != len(inset):
        raise MeshError("UV-area faces are not edge-connected")


def select_region(mesh: TriMesh, seed_face: int, max_faces: int) -> TriMesh:
    """Flood-fill across shared edges from `seed_face` until `max_faces` collected.

    Traversal order is breadth-first with neighbor lists sorted by face index,
    so the result does not depend on face enumeration order.
    """
    if not (0 <= seed_face < mesh.n_faces):
        raise MeshError(f"invalid seed face {seed_face}")
    if max_faces < 1:
        raise MeshError("max_faces must be >= 1")
    adj = mesh.face_adjacency()
    selected = {int(seed_face)}
    queue = deque([int(seed_face)])
    while queue and len(selected) < max_faces:
        f = queue.popleft()
        for g in adj[f]:
            if g not in selected:
                selected.add(g)
                queue.append(g)
                if len(selected) >= max_faces:
                    break
    flags = np.zeros(mesh.n_faces, dtype=bool)
    flags[sorted(selected)] = True
    return TriMesh(mesh.vertices, mesh.faces, mesh.vertex_normals, flags)


def _edge_graph(mesh: TriMesh, restrict_to_region: bool):
    faces = mesh.faces[mesh.face_in_uv_area] if restrict_to_region else mesh.faces
    ij = np.concatenate([faces[:, [0, 1]], faces[:, [1, 2]], faces[:, [2, 0]]])
    ij = np.unique(np.sort(ij, axis=1), axis=0)  # shared edges appear once
    w = np.linalg.norm(mesh.vertices[ij[:, 0]] - mesh.vertices[ij[:, 1]], axis=1)
    n = mesh.n_vertices
    g = coo_matrix((np.concatenate([w, w]),
                    (np.concatenate([ij[:, 0], ij[:, 1]]),
                     np.concatenate([ij[:, 1], ij[:, 0]]))), shape=(n, n))
    return g.tocsr()


def geodesic_matrix(mesh: TriMesh, sources: np.ndarray) -> np.ndarray:
    """Shortest edge-graph path lengths from each source to all vertices.

    When a UV area is flagged the walk is restricted to its faces (the chart
    region is what warping metrics measure); otherwise the whole mesh is used.
    """
    restrict = bool(mesh.face_in_uv_area.any())
    key = ("graph", restrict)
    if mesh._edge_graph is None or mesh._edge_graph[0] != key:
        object.__setattr__(mesh, "_edge_graph", (key, _edge_graph(mesh, restrict)))
    graph = mesh._edge_graph[1]
    return dijkstra(graph, directed=False, indices=np.atleast_1d(sources))


def geodesic_distance(mesh: TriMesh, v_a: int, v_b: int) -> float:
    """Graph-geodesic (edge shortest path, Euclidean weights) between two vertices.

    An overestimate of the true surface geodesic; adequate for distance-ratio
    statistics where only relative values matter.
    """
    n = mesh.n_vertices
    if not (0 <= v_a < n and 0 <= v_b < n):
        raise MeshError("vertex index out of range")
    if mesh.face_in_uv_area.any():
        region = mesh.uv_area_vertices()
        if v_a not in region or v_b not in region:
            raise MeshError("vertex outside the UV area")
    d = geodesic_matrix(mesh, np.array([v_a]))[0, v_b]
    if not np.isfinite(d):
        raise MeshError(f"vertices {v_a} and {v_b} are not connected")
    return float(d)
