"""Viewing rectangles: cluster faces, elevate, fit planes, bound, merge.

Each cluster of mesh faces is lifted along its mean normal by the viewing
distance, a total-least-squares plane is fitted to the lifted centroids, and
the minimum-area enclosing rectangle of their in-plane projections becomes
the candidate camera surface for that cluster. Rectangles whose planes cross
each other are shrunk until no pair properly intersects.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateClusterError
from .mesh import TriangleMesh
from .quality import QualityParams

_EPS = 1e-9


@dataclass
class FaceCluster:
    """A group of faces with their mean normal and centroid statistics."""

    indices: np.ndarray
    mean_normal: np.ndarray  # unit, or zero when member normals cancel
    centroid: np.ndarray
    points: np.ndarray  # member face centroids, (n, 3)

    @property
    def size(self) -> int:
        return len(self.indices)


@dataclass
class ViewingRectangle:
    """Planar rectangle: center, outward normal, in-plane orthonormal axes."""

    center: np.ndarray
    normal: np.ndarray
    axis_u: np.ndarray
    axis_v: np.ndarray
    half_w: float
    half_h: float

    @property
    def width(self) -> float:
        return 2.0 * self.half_w

    @property
    def height(self) -> float:
        return 2.0 * self.half_h

    @property
    def area(self) -> float:
        return self.width * self.height

    def corners(self) -> np.ndarray:
        c, u, v = self.center, self.axis_u, self.axis_v
        return np.array(
            [
                c - u * self.half_w - v * self.half_h,
                c + u * self.half_w - v * self.half_h,
                c + u * self.half_w + v * self.half_h,
                c - u * self.half_w + v * self.half_h,
            ]
        )

    def to_plane(self, points: np.ndarray) -> np.ndarray:
        rel = np.atleast_2d(points) - self.center
        return np.stack([rel @ self.axis_u, rel @ self.axis_v], axis=1)

    def from_plane(self, uv: np.ndarray) -> np.ndarray:
        uv = np.atleast_2d(uv)
        return self.center + uv[:, :1] * self.axis_u + uv[:, 1:2] * self.axis_v

    def contains_projection(self, points: np.ndarray, slack: float = 1e-9) -> bool:
        uv = self.to_plane(points)
        return bool(
            (np.abs(uv[:, 0]) <= self.half_w + slack).all()
            and (np.abs(uv[:, 1]) <= self.half_h + slack).all()
        )

    def widened(self, min_extent: float) -> "ViewingRectangle":
        return ViewingRectangle(
            self.center,
            self.normal,
            self.axis_u,
            self.axis_v,
            max(self.half_w, min_extent / 2.0),
            max(self.half_h, min_extent / 2.0),
        )


# ---------------------------------------------------------------------------
# clustering
# ---------------------------------------------------------------------------


def _kmeans(points: np.ndarray, k: int, rng: np.random.Generator, iters: int = 100):
    """Lloyd's algorithm with k-means++ seeding; empty clusters are re-seeded
    from the point farthest from every current center."""
    n = len(points)
    centers = np.empty((k, 3))
    first = int(rng.integers(n))
    centers[0] = points[first]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for j in range(1, k):
        total = d2.sum()
        if total <= 0:
            centers[j] = points[int(rng.integers(n))]
            continue
        probs = d2 / total
        centers[j] = points[int(rng.choice(n, p=probs))]
        d2 = np.minimum(d2, ((points - centers[j]) ** 2).sum(axis=1))

    labels = np.full(n, -1, dtype=np.int64)
    for _ in range(iters):
        dist = ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=-1)
        new_labels = dist.argmin(axis=1)
        taken: set[int] = set()
        for j in range(k):
            if not (new_labels == j).any():
                order = np.argsort(-dist.min(axis=1), kind="stable")
                far = next(int(i) for i in order if int(i) not in taken)
                taken.add(far)
                new_labels[far] = j
        for j in range(k):
            members = points[new_labels == j]
            if len(members):
                centers[j] = members.mean(axis=0)
        if np.array_equal(new_labels, labels):
            break
        labels = new_labels
    return labels, centers


def cluster_faces(mesh: TriangleMesh, k: int, seed: int = 0) -> list[FaceCluster]:
    """Partition faces by k-means over their centroid positions."""
    if k < 1:
        raise ValueError("k must be >= 1")
    if k > mesh.num_faces:
        raise ValueError(f"k={k} exceeds face count {mesh.num_faces}")
    rng = np.random.default_rng(seed)
    labels, _ = _kmeans(mesh.centroids, k, rng)
    clusters = []
    for j in range(k):
        idx = np.nonzero(labels == j)[0]
        if idx.size == 0:
            continue
        clusters.append(_make_cluster(mesh, idx))
    return clusters


def _make_cluster(mesh: TriangleMesh, idx: np.ndarray) -> FaceCluster:
    normals = mesh.normals[idx]
    mean = normals.mean(axis=0)
    norm = np.linalg.norm(mean)
    unit = mean / norm if norm > 1e-9 else np.zeros(3)
    pts = mesh.centroids[idx]
    return FaceCluster(idx, unit, pts.mean(axis=0), pts)


# ---------------------------------------------------------------------------
# plane fit + minimum rectangle
# ---------------------------------------------------------------------------


def _convex_hull_2d(pts: np.ndarray) -> np.ndarray:
    """Andrew's monotone chain; returns CCW hull vertices (>= 1 point)."""
    uniq = np.unique(pts, axis=0)
    if len(uniq) <= 2:
        return uniq
    order = np.lexsort((uniq[:, 1], uniq[:, 0]))
    p = uniq[order]

    def cross2(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    def half(points):
        out: list[np.ndarray] = []
        for q in points:
            while len(out) >= 2 and cross2(out[-2], out[-1], q) <= 0:
                out.pop()
            out.append(q)
        return out

    lower = half(p)
    upper = half(p[::-1])
    return np.array(lower[:-1] + upper[:-1])


def _min_area_rect_2d(pts: np.ndarray):
    """Smallest enclosing rectangle of 2-d points (rotating calipers).

    Returns (center, edge_dir, half_w, half_h) in the input frame.
    """
    hull = _convex_hull_2d(pts)
    if len(hull) == 1:
        return hull[0], np.array([1.0, 0.0]), 0.0, 0.0
    if len(hull) == 2:
        d = hull[1] - hull[0]
        e = d / np.linalg.norm(d)
        mid = hull.mean(axis=0)
        return mid, e, float(np.linalg.norm(d)) / 2.0, 0.0

    edges = np.roll(hull, -1, axis=0) - hull
    lens = np.linalg.norm(edges, axis=1)
    dirs = edges[lens > _EPS] / lens[lens > _EPS, None]
    best = None
    for e in dirs:
        perp = np.array([-e[1], e[0]])
        x = hull @ e
        y = hull @ perp
        area = (x.max() - x.min()) * (y.max() - y.min())
        if best is None or area < best[0] - _EPS:
            best = (area, e, x.min(), x.max(), y.min(), y.max())
    _, e, x0, x1, y0, y1 = best
    perp = np.array([-e[1], e[0]])
    center = e * (x0 + x1) / 2.0 + perp * (y0 + y1) / 2.0
    return center, e, (x1 - x0) / 2.0, (y1 - y0) / 2.0


def _orthonormal_basis(normal: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    axis = np.zeros(3)
    axis[int(np.argmin(np.abs(normal)))] = 1.0
    u = np.cross(normal, axis)
    u /= np.linalg.norm(u)
    return u, np.cross(normal, u)


def fit_rectangle(cluster: FaceCluster, d: float) -> ViewingRectangle:
    """Fit the elevated cluster's plane and bound it with a minimal rectangle.

    The cluster's centroids are lifted by d along the cluster mean normal.
    The fitted plane is the principal plane of the lifted points; when those
    points are rank-deficient the plane orthogonal to the mean normal through
    the lifted centroid is used instead.
    """
    mu = cluster.mean_normal
    if np.linalg.norm(mu) < 0.5:
        raise DegenerateClusterError("cluster mean normal cancels to zero")
    elevated = cluster.points + d * mu
    center0 = elevated.mean(axis=0)
    rel = elevated - center0

    svals = np.linalg.svd(rel, compute_uv=False) if len(rel) >= 2 else np.zeros(3)
    scale = max(1.0, float(svals[0]) if len(svals) else 1.0)
    rank = int((svals > 1e-9 * scale).sum())
    if rank >= 2:
        _, _, vt = np.linalg.svd(rel, full_matrices=False)
        normal = vt[2] if vt.shape[0] >= 3 else np.cross(vt[0], vt[1])
        nn = np.linalg.norm(normal)
        if nn < _EPS:
            raise DegenerateClusterError("plane fit produced a zero normal")
        normal = normal / nn
        if abs(float(normal @ mu)) < 1e-9:
            raise DegenerateClusterError("fitted plane cannot be oriented by the mean normal")
        if float(normal @ mu) < 0:
            normal = -normal
        u = vt[0] / np.linalg.norm(vt[0])
        v = np.cross(normal, u)
    else:
        normal = mu
        u, v = _orthonormal_basis(normal)

    uv = np.stack([rel @ u, rel @ v], axis=1)
    c2, e, hw, hh = _min_area_rect_2d(uv)
    axis_u = e[0] * u + e[1] * v
    axis_u /= np.linalg.norm(axis_u)
    axis_v = np.cross(normal, axis_u)
    center = center0 + c2[0] * u + c2[1] * v
    return ViewingRectangle(center, normal, axis_u, axis_v, float(hw), float(hh))


# ---------------------------------------------------------------------------
# merge of properly intersecting rectangles
# ---------------------------------------------------------------------------


def _plane_line(a: ViewingRectangle, b: ViewingRectangle):
    """Intersection line of the two rectangle planes, or None if parallel."""
    cross = np.cross(a.normal, b.normal)
    n = np.linalg.norm(cross)
    if n < 1e-9:
        return None
    direction = cross / n
    mat = np.stack([a.normal, b.normal])
    rhs = np.array([a.normal @ a.center, b.normal @ b.center])
    point, *_ = np.linalg.lstsq(mat, rhs, rcond=None)
    return point, direction


def _line_in_plane(rect: ViewingRectangle, point: np.ndarray, direction: np.ndarray):
    """The 3-d line expressed in the rectangle's (u, v) frame."""
    q0 = np.array([(point - rect.center) @ rect.axis_u, (point - rect.center) @ rect.axis_v])
    e = np.array([direction @ rect.axis_u, direction @ rect.axis_v])
    return q0, e


def _crossing_interval(rect: ViewingRectangle, q0: np.ndarray, e: np.ndarray):
    """Parameter interval of the in-plane line inside the rectangle, or None."""
    t0, t1 = -np.inf, np.inf
    for axis, half in ((0, rect.half_w), (1, rect.half_h)):
        if abs(e[axis]) < 1e-12:
            if abs(q0[axis]) > half:
                return None
            continue
        a = (-half - q0[axis]) / e[axis]
        b = (half - q0[axis]) / e[axis]
        if a > b:
            a, b = b, a
        t0, t1 = max(t0, a), min(t1, b)
    if not np.isfinite(t0) or not np.isfinite(t1) or t0 >= t1:
        return None
    return t0, t1


def _proper_split(rect: ViewingRectangle, q0: np.ndarray, e: np.ndarray, eps: float) -> bool:
    """True when the line leaves rectangle corners strictly on both sides."""
    m = np.array([-e[1], e[0]])
    corners = np.array(
        [
            [-rect.half_w, -rect.half_h],
            [rect.half_w, -rect.half_h],
            [rect.half_w, rect.half_h],
            [-rect.half_w, rect.half_h],
        ]
    )
    s = (corners - q0) @ m
    return bool(s.min() < -eps and s.max() > eps)


def rectangles_intersect(a: ViewingRectangle, b: ViewingRectangle, *, eps: float = 1e-9) -> bool:
    """True when the planes' intersection line properly cuts both rectangles
    and the cut segments overlap (the merge rule's notion of intersecting)."""
    line = _plane_line(a, b)
    if line is None:
        return False
    point, direction = line
    qa, ea = _line_in_plane(a, point, direction)
    qb, eb = _line_in_plane(b, point, direction)
    ia = _crossing_interval(a, qa, ea)
    ib = _crossing_interval(b, qb, eb)
    if ia is None or ib is None:
        return False
    lo = max(ia[0], ib[0])
    hi = min(ia[1], ib[1])
    if hi - lo <= eps:
        return False
    return _proper_split(a, qa, ea, eps) and _proper_split(b, qb, eb, eps)


def _clip_polygon(poly: np.ndarray, q0: np.ndarray, m: np.ndarray, side: float) -> np.ndarray:
    """Sutherland-Hodgman clip of a convex polygon to one side of a line."""
    out: list[np.ndarray] = []
    n = len(poly)
    s = (poly - q0) @ m * side
    for i in range(n):
        j = (i + 1) % n
        if s[i] >= -1e-12:
            out.append(poly[i])
        if (s[i] > 1e-12) != (s[j] > 1e-12) and abs(s[i] - s[j]) > 1e-15:
            t = s[i] / (s[i] - s[j])
            out.append(poly[i] + t * (poly[j] - poly[i]))
    return np.array(out) if out else np.zeros((0, 2))


def _poly_area(poly: np.ndarray) -> float:
    if len(poly) < 3:
        return 0.0
    x, y = poly[:, 0], poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))


def _largest_piece_rect(rect: ViewingRectangle, q0: np.ndarray, e: np.ndarray) -> ViewingRectangle:
    """Shrink ``rect`` to the biggest axis-aligned rectangle inside its larger
    piece after cutting along the given in-plane line.

    The replacement is contained in both the source rectangle and the kept
    half-plane, so a processed pair can never intersect again and total area
    never increases.
    """
    m = np.array([-e[1], e[0]])
    hw, hh = rect.half_w, rect.half_h
    corners = np.array([[-hw, -hh], [hw, -hh], [hw, hh], [-hw, hh]])
    pieces = {side: _clip_polygon(corners, q0, m, side) for side in (+1.0, -1.0)}
    areas = {side: _poly_area(p) for side, p in pieces.items()}
    if abs(areas[1.0] - areas[-1.0]) > 1e-12:
        side = 1.0 if areas[1.0] > areas[-1.0] else -1.0
    else:
        # tie: keep the piece whose center sits farther from the cut line
        def center_dist(side):
            p = pieces[side]
            return abs(float((p.mean(axis=0) - q0) @ m)) if len(p) else -1.0

        side = 1.0 if center_dist(1.0) >= center_dist(-1.0) else -1.0

    # keep-side constraint rewritten as a*u + b*v <= c
    a, b = -side * m
    c = float(-side * (m @ q0))

    du = -1.0 if a > 0 else 1.0  # anchor corner minimises a*u + b*v
    dv = -1.0 if b > 0 else 1.0
    u0, v0 = du * hw, dv * hh
    a2, b2 = a * -du, b * -dv  # growth coefficients (>= 0)
    c2 = c - a * u0 - b * v0
    big_u, big_v = 2 * hw, 2 * hh
    if c2 < 0:
        c2 = 0.0
    if a2 * big_u + b2 * big_v <= c2:
        x, y = big_u, big_v
    elif a2 < 1e-12:
        x, y = big_u, min(big_v, c2 / b2)
    elif b2 < 1e-12:
        x, y = min(big_u, c2 / a2), big_v
    else:
        xh, yh = c2 / (2 * a2), c2 / (2 * b2)
        if xh <= big_u and yh <= big_v:
            x, y = xh, yh
        elif xh > big_u:
            x, y = big_u, min(big_v, (c2 - a2 * big_u) / b2)
        else:
            x, y = min(big_u, (c2 - b2 * big_v) / a2), big_v
    x, y = max(x, 0.0), max(y, 0.0)

    lo_u, hi_u = sorted((u0, u0 - du * x))
    lo_v, hi_v = sorted((v0, v0 - dv * y))
    center2 = np.array([(lo_u + hi_u) / 2.0, (lo_v + hi_v) / 2.0])
    center = rect.from_plane(center2[None, :])[0]
    return ViewingRectangle(
        center, rect.normal, rect.axis_u, rect.axis_v, (hi_u - lo_u) / 2.0, (hi_v - lo_v) / 2.0
    )


def merge_intersecting(rects: list[ViewingRectangle]) -> list[ViewingRectangle]:
    """Resolve every properly-intersecting pair by shrinking both rectangles
    to their largest piece on one side of the mutual plane line."""
    out = list(rects)
    max_rounds = max(1, len(out) * (len(out) - 1))
    for _ in range(max_rounds + 1):
        hit = None
        for i in range(len(out)):
            for j in range(i + 1, len(out)):
                if rectangles_intersect(out[i], out[j]):
                    hit = (i, j)
                    break
            if hit:
                break
        if hit is None:
            return out
        i, j = hit
        point, direction = _plane_line(out[i], out[j])
        qa, ea = _line_in_plane(out[i], point, direction)
        qb, eb = _line_in_plane(out[j], point, direction)
        out[i] = _largest_piece_rect(out[i], qa, ea)
        out[j] = _largest_piece_rect(out[j], qb, eb)
    raise RuntimeError("rectangle merge failed to terminate")


# ---------------------------------------------------------------------------
# end-to-end construction
# ---------------------------------------------------------------------------


def default_cluster_count(mesh: TriangleMesh, d: float) -> int:
    """Heuristic: target rectangles on the scale of 8 viewing distances."""
    k = math.ceil(mesh.total_area() / (8.0 * d) ** 2)
    return int(min(50, max(1, k)))


def _split_by_normals(mesh: TriangleMesh, cluster: FaceCluster, seed: int) -> list[FaceCluster]:
    normals = mesh.normals[cluster.indices]
    rng = np.random.default_rng(seed)
    labels, _ = _kmeans(normals, 2, rng)
    parts = []
    for j in (0, 1):
        idx = cluster.indices[labels == j]
        if idx.size:
            parts.append(_make_cluster(mesh, idx))
    return parts


def build_avr(
    mesh: TriangleMesh,
    params: QualityParams,
    k: int | None = None,
    seed: int = 0,
    *,
    r: float | None = None,
) -> list[tuple[ViewingRectangle, FaceCluster]]:
    """Cluster the mesh, fit one viewing rectangle per cluster, merge crossing
    rectangles, and widen every rectangle to at least the grid resolution.

    Clusters whose mean normal cancels are split by normal direction (up to
    three rounds) before giving up.
    """
    if mesh.num_faces == 0:
        raise ValueError("cannot build viewing rectangles for an empty mesh")
    if k is None:
        k = suggest_cluster_count(mesh, params.d, seed)
    if r is None:
        r = params.d

    queue = [(c, 0) for c in cluster_faces(mesh, k, seed)]
    fitted: list[tuple[ViewingRectangle, FaceCluster]] = []
    while queue:
        cluster, depth = queue.pop(0)
        try:
            fitted.append((fit_rectangle(cluster, params.d), cluster))
        except DegenerateClusterError:
            if depth >= 3 or cluster.size < 2:
                raise
            queue.extend((part, depth + 1) for part in _split_by_normals(mesh, cluster, seed + depth + 1))

    merged = merge_intersecting([rect for rect, _ in fitted])
    return [(rect.widened(r), cluster) for rect, (_, cluster) in zip(merged, fitted)]


def _normal_bucket_count(mesh: TriangleMesh, min_area_fraction: float = 0.05) -> int:
    """Number of dominant face orientations, by area, over the six axis
    directions. A scene mixing roofs and walls needs at least one rectangle
    per orientation family to keep depths inside the distance band."""
    dominant = np.argmax(np.abs(mesh.normals), axis=1)
    signs = np.take_along_axis(mesh.normals, dominant[:, None], axis=1)[:, 0] >= 0
    bucket = dominant * 2 + signs.astype(int)
    area = np.bincount(bucket, weights=mesh.areas, minlength=6)
    return int(max(1, (area >= min_area_fraction * mesh.total_area()).sum()))


def suggest_cluster_count(mesh: TriangleMesh, d: float, seed: int) -> int:
    """Pick k from scene area and orientation diversity, then grow it while
    clusters stay spatially stretched (far-apart patches need their own
    rectangles) or orientation-incoherent (mixed normals tilt the plane fit
    out of the distance band)."""
    cap = min(50, mesh.num_faces)
    k = min(cap, max(default_cluster_count(mesh, d), _normal_bucket_count(mesh)))
    for _ in range(6):
        if k >= cap:
            break
        clusters = cluster_faces(mesh, k, seed)
        spread = 0.0
        coherence = 1.0
        for c in clusters:
            ext = c.points.max(axis=0) - c.points.min(axis=0)
            spread = max(spread, float(np.linalg.norm(ext)))
            coherence = min(coherence, float(np.linalg.norm(mesh.normals[c.indices].mean(axis=0))))
        if spread <= 10.0 * d and coherence >= 0.85:
            break
        k = min(cap, k * 2)
    return k
