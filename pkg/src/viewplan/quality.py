"""Visibility predicate, per-face triangulation quality, and scene coverage.

A view sees a face when the segment to the face centroid is unoccluded, its
length lies inside the distance band [d - eps_d, d + eps_d], the centroid
falls inside the view's cone of half-angle ``half_fov``, and the face fronts
the view. Face quality is sin(theta) / (d1 * d2) for the pair of visible
views subtending the widest angle at the centroid.

All operations are pure functions over an immutable mesh and view list and
may be evaluated per face in any order.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .mesh import TriangleMesh

HALF_FOV = math.pi / 4  # full field of view is pi/2

STATUS_PASS = "pass"
STATUS_FAIL_COUNT = "fail-count"
STATUS_FAIL_QUALITY = "fail-quality"
STATUS_INFEASIBLE = "infeasible"


@dataclass
class View:
    """Camera pose: position plus unit forward direction."""

    position: np.ndarray
    direction: np.ndarray
    half_fov: float = HALF_FOV

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        n = np.linalg.norm(d)
        if n < 1e-12:
            raise ValueError("view direction must be non-zero")
        self.direction = d / n


@dataclass(frozen=True)
class QualityParams:
    """Coverage requirements: distance band, view count, quality threshold.

    ``epsilon_d`` defaults to its admissible maximum (sqrt(2) - 1) * d / 2,
    which keeps the farthest in-frame feature within a factor sqrt(2) of the
    nominal viewing distance. ``min_pair_angle``/``max_pair_angle`` optionally
    restrict which view pairs are eligible for the quality score; both default
    to off.
    """

    d: float = 5.0
    epsilon_d: float | None = None
    t: int = 3
    q_star: float = 0.014
    budget: int = 300
    min_pair_angle: float | None = None
    max_pair_angle: float | None = None

    def __post_init__(self):
        if self.d <= 0:
            raise ValueError("viewing distance d must be positive")
        limit = (math.sqrt(2.0) - 1.0) * self.d / 2.0
        if self.epsilon_d is None:
            object.__setattr__(self, "epsilon_d", limit)
        if not 0.0 <= self.epsilon_d <= limit + 1e-12:
            raise ValueError(f"epsilon_d must lie in [0, {limit:.6g}]")
        if self.t < 2:
            raise ValueError("visible-view requirement t must be >= 2")
        if self.q_star <= 0:
            raise ValueError("q_star must be positive")
        if self.budget < 1:
            raise ValueError("budget must be positive")

    @property
    def band(self) -> tuple[float, float]:
        return self.d - self.epsilon_d, self.d + self.epsilon_d


def _as_views(trajectory) -> list[View]:
    views = getattr(trajectory, "views", trajectory)
    return list(views)


def _pose_arrays(views: list[View]) -> tuple[np.ndarray, np.ndarray]:
    if not views:
        return np.zeros((0, 3)), np.zeros((0, 3))
    pos = np.stack([v.position for v in views])
    dirs = np.stack([v.direction for v in views])
    return pos, dirs


# ---------------------------------------------------------------------------
# visibility
# ---------------------------------------------------------------------------


def is_visible(face: int, view: View, mesh: TriangleMesh, params: QualityParams) -> bool:
    c = mesh.centroids[face]
    offset = view.position - c
    dist = float(np.linalg.norm(offset))
    lo, hi = params.band
    if not (lo <= dist <= hi):
        return False
    if float(np.dot(mesh.normals[face], offset)) <= 0.0:
        return False  # behind the face
    cos_view = float(np.dot(view.direction, -offset)) / dist
    if cos_view < math.cos(view.half_fov):
        return False  # outside the viewing cone
    return not mesh.occluded(view.position, c)


def visible_set(face: int, trajectory, mesh: TriangleMesh, params: QualityParams) -> set[int]:
    views = _as_views(trajectory)
    return {i for i, v in enumerate(views) if is_visible(face, v, mesh, params)}


def visibility_matrix(
    mesh: TriangleMesh,
    trajectory,
    params: QualityParams,
    *,
    faces: np.ndarray | None = None,
    engine: str = "auto",
) -> np.ndarray:
    """Boolean (faces x views) visibility, ray casting only surviving pairs."""
    views = _as_views(trajectory)
    pos, dirs = _pose_arrays(views)
    if faces is None:
        faces = np.arange(mesh.num_faces)
    faces = np.asarray(faces, dtype=np.int64)
    n_f, n_v = len(faces), len(views)
    if n_f == 0 or n_v == 0:
        return np.zeros((n_f, n_v), dtype=bool)

    c = mesh.centroids[faces]
    nrm = mesh.normals[faces]
    offset = pos[None, :, :] - c[:, None, :]  # (F, V, 3), face -> view
    dist = np.linalg.norm(offset, axis=-1)
    lo, hi = params.band
    cand = (dist >= lo) & (dist <= hi)
    cand &= (nrm[:, None, :] * offset).sum(axis=-1) > 0.0
    half = np.array([v.half_fov for v in views])
    with np.errstate(invalid="ignore", divide="ignore"):
        cos_view = (dirs[None, :, :] * (-offset)).sum(axis=-1) / np.where(dist > 0, dist, 1.0)
    cand &= cos_view >= np.cos(half)[None, :]

    fi, vi = np.nonzero(cand)
    if len(fi):
        blocked = mesh.occluded_many(pos[vi], c[fi], engine=engine)
        cand[fi[blocked], vi[blocked]] = False
    return cand


# ---------------------------------------------------------------------------
# quality
# ---------------------------------------------------------------------------


def pair_quality(
    centroid: np.ndarray,
    positions: np.ndarray,
    params: QualityParams,
) -> tuple[float, float, tuple[int, int] | None]:
    """Widest-angle pair statistics for views at ``positions`` around a point.

    Returns (theta, q, argmax pair as local indices). theta and q are 0 when
    fewer than two views (or no angle-eligible pair) exist.
    """
    m = len(positions)
    if m < 2:
        return 0.0, 0.0, None
    offs = positions - centroid
    dist = np.linalg.norm(offs, axis=1)
    unit = offs / dist[:, None]
    cos_mat = np.clip(unit @ unit.T, -1.0, 1.0)
    iu, ju = np.triu_indices(m, k=1)
    ang = np.arccos(cos_mat[iu, ju])
    eligible = np.ones(len(ang), dtype=bool)
    if params.min_pair_angle is not None:
        eligible &= ang >= params.min_pair_angle
    if params.max_pair_angle is not None:
        eligible &= ang <= params.max_pair_angle
    if not eligible.any():
        return 0.0, 0.0, None
    ang = np.where(eligible, ang, -1.0)
    best = int(np.argmax(ang))
    theta = float(ang[best])
    a, b = int(iu[best]), int(ju[best])
    q = math.sin(theta) / (float(dist[a]) * float(dist[b]))
    return theta, q, (a, b)


def face_quality(
    face: int, trajectory, mesh: TriangleMesh, params: QualityParams
) -> tuple[float, float, tuple[int, int] | None]:
    """(theta, Q, argmax view-index pair) for one face under a trajectory."""
    views = _as_views(trajectory)
    kappa = sorted(visible_set(face, views, mesh, params))
    if len(kappa) < 2:
        return 0.0, 0.0, None
    pos = np.stack([views[i].position for i in kappa])
    theta, q, pair = pair_quality(mesh.centroids[face], pos, params)
    if pair is None:
        return theta, q, None
    return theta, q, (kappa[pair[0]], kappa[pair[1]])


# ---------------------------------------------------------------------------
# coverage report
# ---------------------------------------------------------------------------


@dataclass
class CoverageReport:
    """Per-face coverage outcome for one mesh + trajectory evaluation."""

    counts: np.ndarray
    theta: np.ndarray
    q: np.ndarray
    pair_i: np.ndarray
    pair_j: np.ndarray
    status: np.ndarray
    t: int
    q_star: float

    @property
    def num_faces(self) -> int:
        return len(self.counts)

    @property
    def pass_mask(self) -> np.ndarray:
        return self.status == STATUS_PASS

    @property
    def pass_fraction(self) -> float:
        if self.num_faces == 0:
            return 0.0
        return float(self.pass_mask.mean())

    def count_histogram(self) -> dict[int, int]:
        hist = np.bincount(self.counts)
        return {int(k): int(v) for k, v in enumerate(hist) if v}

    def summary(self) -> dict:
        return {
            "faces": int(self.num_faces),
            "pass_fraction": self.pass_fraction,
            "min_q": float(self.q.min()) if self.num_faces else 0.0,
            "mean_q": float(self.q.mean()) if self.num_faces else 0.0,
            "count_histogram": {str(k): v for k, v in sorted(self.count_histogram().items())},
            "status_totals": {
                s: int((self.status == s).sum())
                for s in (STATUS_PASS, STATUS_FAIL_COUNT, STATUS_FAIL_QUALITY, STATUS_INFEASIBLE)
            },
        }

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["face", "visible_views", "theta_rad", "q", "view_i", "view_j", "status"])
            for i in range(self.num_faces):
                w.writerow(
                    [
                        i,
                        int(self.counts[i]),
                        repr(float(self.theta[i])),
                        repr(float(self.q[i])),
                        int(self.pair_i[i]),
                        int(self.pair_j[i]),
                        str(self.status[i]),
                    ]
                )


def evaluate_coverage(
    mesh: TriangleMesh,
    trajectory,
    params: QualityParams,
    *,
    infeasible: set[int] | np.ndarray | None = None,
    engine: str = "auto",
) -> CoverageReport:
    """Evaluate every face of ``mesh`` against the constraint set.

    ``infeasible`` marks faces no free-space view could ever satisfy (as
    established by the planner's probe); they are labelled infeasible instead
    of fail unless the trajectory happens to satisfy them anyway.
    """
    views = _as_views(trajectory)
    vis = visibility_matrix(mesh, views, params, engine=engine)
    n_f = mesh.num_faces
    counts = vis.sum(axis=1).astype(np.int64)
    theta = np.zeros(n_f)
    q = np.zeros(n_f)
    pair_i = np.full(n_f, -1, dtype=np.int64)
    pair_j = np.full(n_f, -1, dtype=np.int64)

    pos, _ = _pose_arrays(views)
    for f in np.nonzero(counts >= 2)[0]:
        kappa = np.nonzero(vis[f])[0]
        th, qq, pair = pair_quality(mesh.centroids[f], pos[kappa], params)
        theta[f] = th
        q[f] = qq
        if pair is not None:
            pair_i[f] = kappa[pair[0]]
            pair_j[f] = kappa[pair[1]]

    infeasible_mask = np.zeros(n_f, dtype=bool)
    if infeasible is not None:
        idx = np.fromiter(infeasible, dtype=np.int64) if not isinstance(infeasible, np.ndarray) else infeasible
        if idx.size:
            infeasible_mask[idx] = True

    status = np.empty(n_f, dtype="<U12")
    ok = (counts >= params.t) & (q >= params.q_star)
    status[ok] = STATUS_PASS
    fail_count = ~ok & (counts < params.t)
    status[fail_count] = STATUS_FAIL_COUNT
    status[~ok & ~fail_count] = STATUS_FAIL_QUALITY
    status[infeasible_mask & ~ok] = STATUS_INFEASIBLE
    return CoverageReport(counts, theta, q, pair_i, pair_j, status, params.t, params.q_star)
