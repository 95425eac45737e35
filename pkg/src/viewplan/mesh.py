"""Triangle meshes: representation, file I/O, synthetic scenes, proxy degradation.

Meshes are stored indexed (shared vertices) with 64-bit coordinates and a
per-face cache of centroids, unit normals and areas. Instances are immutable
after construction and safe to query from multiple workers.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import EmptySceneError, MeshDegradationError, MeshFormatError

_DEGENERATE_AREA = 1e-12


class TriangleMesh:
    """Indexed triangle mesh with cached per-face geometry.

    Degenerate (near zero-area) faces are dropped at construction unless
    ``drop_degenerate=False``; the number removed is kept in
    ``dropped_degenerate``.
    """

    def __init__(self, vertices, faces, *, drop_degenerate: bool = True):
        vertices = np.asarray(vertices, dtype=np.float64).reshape(-1, 3)
        faces = np.asarray(faces, dtype=np.int64).reshape(-1, 3)
        if faces.size and (faces.min() < 0 or faces.max() >= len(vertices)):
            raise MeshFormatError("face references a vertex index out of range")

        tri = vertices[faces]  # (F, 3, 3)
        cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])
        areas = 0.5 * np.linalg.norm(cross, axis=1)

        self.dropped_degenerate = 0
        if drop_degenerate and faces.size:
            keep = areas > _DEGENERATE_AREA
            self.dropped_degenerate = int((~keep).sum())
            faces = faces[keep]
            tri = tri[keep]
            cross = cross[keep]
            areas = areas[keep]

        self.vertices = vertices
        self.faces = faces
        self.centroids = tri.mean(axis=1)
        self.areas = areas
        norms = np.linalg.norm(cross, axis=1)
        safe = np.where(norms > 0.0, norms, 1.0)
        self.normals = cross / safe[:, None]

        for arr in (self.vertices, self.faces, self.centroids, self.areas, self.normals):
            arr.setflags(write=False)
        self._bvh = None

    # -- basic queries -------------------------------------------------

    @property
    def num_faces(self) -> int:
        return len(self.faces)

    @property
    def num_vertices(self) -> int:
        return len(self.vertices)

    def total_area(self) -> float:
        return float(self.areas.sum())

    def bounds(self) -> tuple[np.ndarray, np.ndarray]:
        """Axis-aligned bounding box as (min_xyz, max_xyz)."""
        return self.vertices.min(axis=0), self.vertices.max(axis=0)

    def triangles(self) -> np.ndarray:
        """Per-face corner coordinates, shape (F, 3, 3)."""
        return self.vertices[self.faces]

    @property
    def bvh(self):
        if self._bvh is None:
            from .bvh import Bvh

            self._bvh = Bvh(self)
        return self._bvh

    # -- occlusion -----------------------------------------------------

    def occluded(self, src, dst, *, engine: str = "auto") -> bool:
        """True iff any face blocks the open segment between two points.

        Hits within a relative 1e-6 of either endpoint are ignored so that a
        query from a view to a centroid lying on this mesh does not
        self-intersect. ``engine`` is one of ``auto``, ``bvh``, ``brute``;
        the two engines are bit-identical.
        """
        from . import bvh as _bvh

        src = np.asarray(src, dtype=np.float64)
        dst = np.asarray(dst, dtype=np.float64)
        if not np.any(src != dst):
            raise ValueError("occlusion query endpoints coincide")
        if engine == "brute":
            return _bvh.segment_hits_any(self.triangles(), src, dst)
        if engine == "bvh":
            return self.bvh.segment_occluded(src, dst)
        if self.num_faces <= _bvh.BRUTE_FACE_LIMIT:
            return _bvh.segment_hits_any(self.triangles(), src, dst)
        return self.bvh.segment_occluded(src, dst)

    def occluded_many(self, sources, targets, *, engine: str = "auto") -> np.ndarray:
        """Vectorised batch of `occluded` queries; returns a bool array."""
        from . import bvh as _bvh

        sources = np.asarray(sources, dtype=np.float64).reshape(-1, 3)
        targets = np.asarray(targets, dtype=np.float64).reshape(-1, 3)
        if engine == "bvh" or (engine == "auto" and self.num_faces > _bvh.BRUTE_FACE_LIMIT):
            return np.array(
                [self.bvh.segment_occluded(s, t) for s, t in zip(sources, targets)], dtype=bool
            )
        return _bvh.segments_hit_any(self.triangles(), sources, targets)

    # -- derived meshes --------------------------------------------------

    def submesh(self, face_indices) -> "TriangleMesh":
        """Mesh restricted to the given faces (vertices compacted)."""
        face_indices = np.asarray(face_indices, dtype=np.int64)
        if face_indices.size == 0:
            raise EmptySceneError("submesh with no faces")
        sub = self.faces[face_indices]
        used, inverse = np.unique(sub, return_inverse=True)
        return TriangleMesh(self.vertices[used], inverse.reshape(-1, 3))

    def with_vertices(self, vertices) -> "TriangleMesh":
        """Same topology with replaced vertex positions (faces kept 1:1)."""
        return TriangleMesh(vertices, self.faces, drop_degenerate=False)

    def subdivided(self, max_area: float) -> "TriangleMesh":
        """Split faces by longest-edge bisection until all areas <= max_area.

        Splits are per-face, so shared edges may acquire unshared midpoints;
        planning only consumes the face soup, where that is harmless.
        """
        if max_area <= 0.0:
            raise ValueError("max_area must be positive")
        out_verts: list[np.ndarray] = [v for v in self.vertices]
        out_faces: list[tuple[int, int, int]] = []
        stack = [tuple(f) for f in self.faces]
        while stack:
            f = stack.pop()
            p = [np.asarray(out_verts[i]) for i in f]
            area = 0.5 * np.linalg.norm(np.cross(p[1] - p[0], p[2] - p[0]))
            if area <= max_area:
                out_faces.append(f)
                continue
            edges = [
                np.linalg.norm(p[1] - p[0]),
                np.linalg.norm(p[2] - p[1]),
                np.linalg.norm(p[0] - p[2]),
            ]
            e = int(np.argmax(edges))
            a, b, c = f[e], f[(e + 1) % 3], f[(e + 2) % 3]
            mid = 0.5 * (np.asarray(out_verts[a]) + np.asarray(out_verts[b]))
            m = len(out_verts)
            out_verts.append(mid)
            stack.append((a, m, c))
            stack.append((m, b, c))
        return TriangleMesh(np.array(out_verts), np.array(out_faces, dtype=np.int64))

    def save_obj(self, path) -> None:
        lines = [f"v {float(v[0])!r} {float(v[1])!r} {float(v[2])!r}" for v in self.vertices]
        lines += [f"f {f[0] + 1} {f[1] + 1} {f[2] + 1}" for f in self.faces]
        Path(path).write_text("\n".join(lines) + "\n")


@dataclass(frozen=True)
class Ray:
    """Line-of-sight probe segment: origin plus unit direction up to max_t."""

    origin: np.ndarray
    direction: np.ndarray
    max_t: float

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=np.float64)
        n = np.linalg.norm(d)
        if not np.isclose(n, 1.0, atol=1e-9):
            raise ValueError("ray direction must be unit length")
        if self.max_t <= 0:
            raise ValueError("ray max_t must be positive")


def raycast_occluded(mesh: TriangleMesh, src, dst, *, engine: str = "auto") -> bool:
    """Module-level alias of ``TriangleMesh.occluded``."""
    return mesh.occluded(src, dst, engine=engine)


def ray_occluded(mesh: TriangleMesh, ray: Ray, *, engine: str = "auto") -> bool:
    """Occlusion along a probe ray, tested up to ``ray.max_t``."""
    origin = np.asarray(ray.origin, dtype=np.float64)
    end = origin + np.asarray(ray.direction, dtype=np.float64) * ray.max_t
    return mesh.occluded(origin, end, engine=engine)


# ---------------------------------------------------------------------------
# file I/O
# ---------------------------------------------------------------------------


def load_mesh(path, fmt: str | None = None) -> TriangleMesh:
    """Load an OBJ or PLY file (format inferred from the extension by default).

    Raises MeshFormatError (with a line number where possible) on parse
    failure and EmptySceneError when no non-degenerate faces remain.
    """
    path = Path(path)
    if fmt is None:
        fmt = path.suffix.lower().lstrip(".")
    if fmt == "obj":
        mesh = _load_obj(path)
    elif fmt == "ply":
        mesh = _load_ply(path)
    else:
        raise MeshFormatError(f"unsupported mesh format: {fmt!r}")
    if mesh.num_faces == 0:
        raise EmptySceneError(f"{path}: no non-degenerate faces")
    return mesh


def _fan(indices: list[int]) -> list[tuple[int, int, int]]:
    return [(indices[0], indices[i], indices[i + 1]) for i in range(1, len(indices) - 1)]


def _load_obj(path: Path) -> TriangleMesh:
    verts: list[list[float]] = []
    faces: list[tuple[int, int, int]] = []
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        parts = raw.split()
        if not parts or parts[0].startswith("#"):
            continue
        tag = parts[0]
        try:
            if tag == "v":
                verts.append([float(x) for x in parts[1:4]])
            elif tag == "f":
                idx = []
                for tok in parts[1:]:
                    i = int(tok.split("/")[0])
                    idx.append(i - 1 if i > 0 else len(verts) + i)
                if len(idx) < 3:
                    raise ValueError("face with fewer than 3 vertices")
                faces.extend(_fan(idx))
        except (ValueError, IndexError) as exc:
            raise MeshFormatError(f"{path}: line {lineno}: {exc}") from exc
    return TriangleMesh(np.array(verts, dtype=np.float64).reshape(-1, 3), faces)


_PLY_TYPES = {
    "char": "i1", "uchar": "u1", "int8": "i1", "uint8": "u1",
    "short": "i2", "ushort": "u2", "int16": "i2", "uint16": "u2",
    "int": "i4", "uint": "u4", "int32": "i4", "uint32": "u4",
    "float": "f4", "float32": "f4", "double": "f8", "float64": "f8",
}


def _load_ply(path: Path) -> TriangleMesh:
    blob = path.read_bytes()
    try:
        header_end = blob.index(b"end_header\n") + len(b"end_header\n")
    except ValueError as exc:
        raise MeshFormatError(f"{path}: missing end_header") from exc
    header = blob[:header_end].decode("ascii", errors="replace").splitlines()

    fmt = None
    elements: list[tuple[str, int, list[tuple[str, ...]]]] = []
    for lineno, line in enumerate(header, start=1):
        parts = line.split()
        if not parts:
            continue
        if parts[0] == "format":
            fmt = parts[1]
        elif parts[0] == "element":
            elements.append((parts[1], int(parts[2]), []))
        elif parts[0] == "property":
            if not elements:
                raise MeshFormatError(f"{path}: line {lineno}: property before element")
            elements[-1][2].append(tuple(parts[1:]))
    if fmt not in ("ascii", "binary_little_endian"):
        raise MeshFormatError(f"{path}: unsupported PLY format {fmt!r}")

    verts = None
    faces: list[tuple[int, int, int]] = []
    if fmt == "ascii":
        body = blob[header_end:].decode("ascii").split()
        pos = 0
        for name, count, props in elements:
            if name == "vertex":
                width = len(props)
                xi = [i for i, p in enumerate(props) if p[-1] in ("x", "y", "z")]
                rows = np.array(body[pos : pos + count * width], dtype=np.float64)
                verts = rows.reshape(count, width)[:, xi[:3]]
                pos += count * width
            elif name == "face":
                for _ in range(count):
                    n = int(body[pos])
                    idx = [int(v) for v in body[pos + 1 : pos + 1 + n]]
                    faces.extend(_fan(idx))
                    pos += 1 + n
            else:
                pos += count * len(props)
    else:
        off = header_end
        for name, count, props in elements:
            if name == "vertex":
                dt = np.dtype([(f"p{i}", "<" + _PLY_TYPES[p[0]]) for i, p in enumerate(props)])
                rows = np.frombuffer(blob, dtype=dt, count=count, offset=off)
                off += dt.itemsize * count
                xi = [i for i, p in enumerate(props) if p[-1] in ("x", "y", "z")]
                verts = np.stack([rows[f"p{i}"].astype(np.float64) for i in xi[:3]], axis=1)
            elif name == "face":
                cnt_t = "<" + _PLY_TYPES[props[0][1]]
                idx_t = "<" + _PLY_TYPES[props[0][2]]
                for _ in range(count):
                    n = int(np.frombuffer(blob, dtype=cnt_t, count=1, offset=off)[0])
                    off += np.dtype(cnt_t).itemsize
                    idx = np.frombuffer(blob, dtype=idx_t, count=n, offset=off)
                    off += np.dtype(idx_t).itemsize * n
                    faces.extend(_fan([int(v) for v in idx]))
            else:
                row = sum(np.dtype("<" + _PLY_TYPES[p[0]]).itemsize for p in props)
                off += row * count
    if verts is None:
        raise MeshFormatError(f"{path}: no vertex element")
    return TriangleMesh(verts, faces)


# ---------------------------------------------------------------------------
# synthetic scenes
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SceneSpec:
    """Recipe for a synthetic scene; the seed fully determines the mesh."""

    kind: str = "flat"  # flat | boxfield | canyon | file
    extent: float = 20.0
    obstacles: int = 3
    seed: int = 0
    path: str | None = None

    def __post_init__(self):
        if self.kind not in ("flat", "boxfield", "canyon", "file"):
            raise ValueError(f"unknown scene kind {self.kind!r}")
        if self.kind != "file" and self.extent <= 0:
            raise ValueError("scene extent must be positive")
        if self.kind == "file" and not self.path:
            raise ValueError("file scene requires a path")


def generate_scene(spec: SceneSpec) -> TriangleMesh:
    if spec.kind == "file":
        return load_mesh(spec.path)
    if spec.kind == "flat":
        return _terrain(spec.extent)
    rng = np.random.default_rng(spec.seed)
    if spec.kind == "boxfield":
        return _boxfield(spec.extent, spec.obstacles, rng)
    return _canyon(spec.extent, rng)


def _terrain(extent: float, cell: float = 1.0) -> TriangleMesh:
    n = max(1, int(np.ceil(extent / cell)))
    xs = np.linspace(0.0, extent, n + 1)
    ys = np.linspace(0.0, extent, n + 1)
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    verts = np.stack([gx.ravel(), gy.ravel(), np.zeros(gx.size)], axis=1)
    faces = []
    for i in range(n):
        for j in range(n):
            a = i * (n + 1) + j
            b = a + n + 1
            faces.append((a, b, a + 1))
            faces.append((a + 1, b, b + 1))
    return TriangleMesh(verts, np.array(faces, dtype=np.int64))


def _box(cx, cy, sx, sy, z0, z1, *, bottom: bool = False) -> tuple[np.ndarray, np.ndarray]:
    x0, x1 = cx - sx / 2, cx + sx / 2
    y0, y1 = cy - sy / 2, cy + sy / 2
    v = np.array(
        [
            [x0, y0, z0], [x1, y0, z0], [x1, y1, z0], [x0, y1, z0],
            [x0, y0, z1], [x1, y0, z1], [x1, y1, z1], [x0, y1, z1],
        ]
    )
    quads = [
        (4, 5, 6, 7),  # top
        (0, 1, 5, 4),  # y0 wall
        (1, 2, 6, 5),  # x1 wall
        (2, 3, 7, 6),  # y1 wall
        (3, 0, 4, 7),  # x0 wall
    ]
    if bottom:
        quads.insert(0, (0, 3, 2, 1))  # facing down; generators omit it since
        # boxes sit on the terrain and their undersides are unreachable
    faces = []
    for q in quads:
        faces.extend(_fan(list(q)))
    return v, np.array(faces, dtype=np.int64)


def _append(verts_list, faces_list, v, f):
    base = sum(len(x) for x in verts_list)
    verts_list.append(v)
    faces_list.append(f + base)


def _boxfield(extent: float, count: int, rng: np.random.Generator) -> TriangleMesh:
    terrain = _terrain(extent)
    verts_list = [terrain.vertices]
    faces_list = [terrain.faces]
    for _ in range(count):
        sx = float(rng.uniform(2.0, min(5.0, extent / 3)))
        sy = float(rng.uniform(2.0, min(5.0, extent / 3)))
        h = float(rng.uniform(2.0, 6.0))
        cx = float(rng.uniform(sx / 2 + 1.0, extent - sx / 2 - 1.0))
        cy = float(rng.uniform(sy / 2 + 1.0, extent - sy / 2 - 1.0))
        v, f = _box(cx, cy, sx, sy, 0.0, h)
        _append(verts_list, faces_list, v, f)
    return TriangleMesh(np.concatenate(verts_list), np.concatenate(faces_list))


def _canyon(extent: float, rng: np.random.Generator) -> TriangleMesh:
    terrain = _terrain(extent)
    gap = float(rng.uniform(max(3.0, extent / 6), max(4.0, extent / 4)))
    height = float(rng.uniform(5.0, 8.0))
    thick = float(rng.uniform(1.0, 2.0))
    mid = extent / 2
    length = extent * 0.8
    verts_list = [terrain.vertices]
    faces_list = [terrain.faces]
    for side in (-1.0, 1.0):
        cy = mid + side * (gap / 2 + thick / 2)
        v, f = _box(mid, cy, length, thick, 0.0, height)
        _append(verts_list, faces_list, v, f)
    return TriangleMesh(np.concatenate(verts_list), np.concatenate(faces_list))


# ---------------------------------------------------------------------------
# proxy degradation
# ---------------------------------------------------------------------------


def degrade_proxy(
    mesh: TriangleMesh, decimation_ratio: float, noise_sigma: float, seed: int
) -> TriangleMesh:
    """Coarse stand-in for a first-pass reconstruction of ``mesh``.

    Applies shortest-edge collapse until roughly ``decimation_ratio`` of the
    faces remain, then perturbs vertices along their normals with zero-mean
    Gaussian noise. Deterministic per seed; ratio 1 with sigma 0 is the
    identity on vertex positions.
    """
    if not 0.0 < decimation_ratio <= 1.0:
        raise ValueError("decimation_ratio must be in (0, 1]")
    if noise_sigma < 0.0:
        raise ValueError("noise_sigma must be non-negative")

    if decimation_ratio >= 1.0 and noise_sigma == 0.0:
        return TriangleMesh(mesh.vertices.copy(), mesh.faces.copy())

    verts = mesh.vertices.copy()
    faces = mesh.faces.copy()
    if decimation_ratio < 1.0:
        verts, faces = _collapse_edges(verts, faces, int(round(decimation_ratio * len(faces))))

    if noise_sigma > 0.0:
        rng = np.random.default_rng(seed)
        vnormals = _vertex_normals(verts, faces)
        offsets = rng.normal(0.0, noise_sigma, size=len(verts))
        verts = verts + vnormals * offsets[:, None]

    out = TriangleMesh(verts, faces)
    if out.num_faces < 4:
        raise MeshDegradationError("degraded mesh has fewer than 4 faces")
    return out


def _vertex_normals(verts: np.ndarray, faces: np.ndarray) -> np.ndarray:
    tri = verts[faces]
    cross = np.cross(tri[:, 1] - tri[:, 0], tri[:, 2] - tri[:, 0])  # area-weighted
    vn = np.zeros_like(verts)
    for k in range(3):
        np.add.at(vn, faces[:, k], cross)
    norms = np.linalg.norm(vn, axis=1)
    fallback = np.tile([0.0, 0.0, 1.0], (len(verts), 1))
    return np.where(norms[:, None] > 1e-12, vn / np.where(norms == 0, 1, norms)[:, None], fallback)


def _collapse_edges(verts: np.ndarray, faces: np.ndarray, target_faces: int):
    """Greedy shortest-edge collapse to approximately target_faces."""
    if target_faces < 4:
        raise MeshDegradationError("decimation target below 4 faces")
    verts = [v.copy() for v in verts]
    face_list = [list(f) for f in faces]
    alive = [True] * len(face_list)

    def live_count():
        return sum(alive)

    def edges_of(f):
        return [(f[0], f[1]), (f[1], f[2]), (f[2], f[0])]

    heap: list[tuple[float, int, int]] = []
    for f in face_list:
        for a, b in edges_of(f):
            a2, b2 = (a, b) if a < b else (b, a)
            d = float(np.linalg.norm(np.asarray(verts[a2]) - np.asarray(verts[b2])))
            heap.append((d, a2, b2))
    heapq.heapify(heap)

    # union-find over vertices so stale edges resolve to their survivors
    parent = list(range(len(verts)))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    count = live_count()
    while count > target_faces and heap:
        d, a, b = heapq.heappop(heap)
        a, b = find(a), find(b)
        if a == b:
            continue
        cur = float(np.linalg.norm(np.asarray(verts[a]) - np.asarray(verts[b])))
        if cur > d + 1e-12:  # stale entry; re-queue at its true length
            heapq.heappush(heap, (cur, min(a, b), max(a, b)))
            continue
        mid = 0.5 * (np.asarray(verts[a]) + np.asarray(verts[b]))
        verts[a] = mid
        parent[b] = a
        for i, f in enumerate(face_list):
            if not alive[i]:
                continue
            g = [find(x) for x in f]
            face_list[i] = g
            if len(set(g)) < 3:
                alive[i] = False
                count -= 1
        if count <= target_faces:
            break

    out_faces = [tuple(find(x) for x in f) for f, ok in zip(face_list, alive) if ok]
    out_faces = [f for f in out_faces if len(set(f)) == 3]
    if len(out_faces) < 4:
        raise MeshDegradationError("decimation collapsed the mesh")
    arr_faces = np.array(out_faces, dtype=np.int64)
    used, inverse = np.unique(arr_faces, return_inverse=True)
    new_verts = np.array([verts[i] for i in used])
    return new_verts, inverse.reshape(-1, 3)
