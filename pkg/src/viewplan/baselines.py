"""Comparison planners: serpentine coverage, uniform 3-d lattice, greedy view
selection over the rectangle grids."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree

from .mesh import TriangleMesh
from .quality import QualityParams, View, pair_quality, visibility_matrix
from .tours import Trajectory, ViewingGrid


@dataclass(frozen=True)
class ZigZagSpec:
    """Fixed-altitude serpentine coverage pass."""

    altitude: float = 20.0
    spacing: float = 1.0

    def __post_init__(self):
        if self.spacing <= 0:
            raise ValueError("lane spacing must be positive")


def _lane_coords(lo: float, hi: float, spacing: float) -> np.ndarray:
    width = hi - lo
    n = int(np.floor(width / spacing + 1e-9)) + 1
    margin = (width - (n - 1) * spacing) / 2.0
    return lo + margin + spacing * np.arange(n)


def plan_zigzag(scene_bounds, spec: ZigZagSpec = ZigZagSpec()) -> Trajectory:
    """Nadir serpentine lanes over the scene footprint at a fixed altitude."""
    lo, hi = (np.asarray(b, dtype=np.float64) for b in scene_bounds)
    if np.any(hi < lo):
        raise ValueError("degenerate scene bounds")
    if spec.altitude <= hi[2]:
        raise ValueError("zigzag altitude must exceed the scene's max height")
    xs = _lane_coords(lo[0], hi[0], spec.spacing)
    ys = _lane_coords(lo[1], hi[1], spec.spacing)
    down = np.array([0.0, 0.0, -1.0])
    views: list[View] = []
    for i, x in enumerate(xs):
        lane = ys if i % 2 == 0 else ys[::-1]
        views.extend(View(np.array([x, y, spec.altitude]), down) for y in lane)
    return Trajectory(views)


def zigzag_length(scene_bounds, spec: ZigZagSpec = ZigZagSpec()) -> float:
    """Closed-form serpentine length for the lane layout of plan_zigzag."""
    lo, hi = (np.asarray(b, dtype=np.float64) for b in scene_bounds)
    n_lanes = len(_lane_coords(lo[0], hi[0], spec.spacing))
    n_per = len(_lane_coords(lo[1], hi[1], spec.spacing))
    return float((n_lanes * n_per - 1) * spec.spacing)


# ---------------------------------------------------------------------------
# uniform 3-d lattice
# ---------------------------------------------------------------------------


def _farthest_point_subset(points: np.ndarray, count: int) -> np.ndarray:
    """Deterministic farthest-point selection starting from index 0."""
    n = len(points)
    if count >= n:
        return np.arange(n)
    chosen = [0]
    dist = np.linalg.norm(points - points[0], axis=1)
    for _ in range(count - 1):
        nxt = int(dist.argmax())
        chosen.append(nxt)
        dist = np.minimum(dist, np.linalg.norm(points - points[nxt], axis=1))
    return np.array(sorted(chosen))


def _two_opt(points: np.ndarray, order: np.ndarray, max_passes: int = 25) -> np.ndarray:
    d = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
    order = order.copy()
    n = len(order)
    for _ in range(max_passes):
        improved = False
        for a in range(n - 3):
            for b in range(a + 2, n - 1):
                i, j = order[a], order[a + 1]
                p, q = order[b], order[b + 1]
                if d[i, p] + d[j, q] + 1e-12 < d[i, j] + d[p, q]:
                    order[a + 1 : b + 1] = order[a + 1 : b + 1][::-1]
                    improved = True
        if not improved:
            break
    return order


def plan_uniform_grid(
    scene_bounds,
    view_count: int,
    resolution: float = 1.0,
    *,
    proxy: TriangleMesh | None = None,
    margin: float = 5.0,
) -> Trajectory:
    """Evenly spaced lattice over the airspace around the scene, thinned to
    ``view_count`` views by farthest-point selection and toured greedily.

    Views aim at the nearest proxy face centroid when a proxy is given,
    otherwise at the scene center.
    """
    if view_count < 1:
        raise ValueError("view_count must be >= 1")
    lo, hi = (np.asarray(b, dtype=np.float64) for b in scene_bounds)
    xs = np.arange(lo[0] - margin, hi[0] + margin + 1e-9, resolution)
    ys = np.arange(lo[1] - margin, hi[1] + margin + 1e-9, resolution)
    zs = np.arange(lo[2], hi[2] + margin + 1e-9, resolution)
    gx, gy, gz = np.meshgrid(xs, ys, zs, indexing="ij")
    lattice = np.stack([gx.ravel(), gy.ravel(), gz.ravel()], axis=1)

    idx = _farthest_point_subset(lattice, view_count)
    pts = lattice[idx]

    if proxy is not None and proxy.num_faces:
        tree = cKDTree(proxy.centroids)
        _, nearest = tree.query(pts)
        aim = proxy.centroids[nearest] - pts
    else:
        aim = (lo + hi) / 2.0 - pts
    norms = np.linalg.norm(aim, axis=1)
    down = np.array([0.0, 0.0, -1.0])
    dirs = np.where(norms[:, None] > 1e-12, aim / np.where(norms == 0, 1, norms)[:, None], down)

    # nearest-neighbour walk, then 2-opt
    n = len(pts)
    order = [0]
    todo = set(range(1, n))
    dmat = np.linalg.norm(pts[:, None, :] - pts[None, :, :], axis=-1)
    while todo:
        last = order[-1]
        nxt = min(todo, key=lambda t: (dmat[last, t], t))
        order.append(nxt)
        todo.remove(nxt)
    order = _two_opt(pts, np.array(order)) if n >= 4 else np.array(order)
    return Trajectory([View(pts[i], dirs[i]) for i in order])


# ---------------------------------------------------------------------------
# greedy view selection
# ---------------------------------------------------------------------------


def plan_gvs(
    avr_grids: list[ViewingGrid],
    proxy: TriangleMesh,
    params: QualityParams,
    view_budget: int,
    seed: int = 0,
    *,
    neighbor_radius: float = 1.0,
    gain_mode: str = "literal",
    restart_on_stall: bool = True,
) -> tuple[Trajectory, dict]:
    """Greedy selection over the grid views, starting from a random view.

    Each step scores the unselected views within ``neighbor_radius`` of the
    current selection and takes the best. ``gain_mode='literal'`` scores a
    candidate by the summed quality of already-covered faces the candidate
    does NOT see; ``gain_mode='coverage'`` scores by the summed quality of the
    candidate's own faces after adding it. When no neighbour is available the
    walk either jumps to a random unselected view (``restart_on_stall``) or
    stops early with a flag.
    """
    if view_budget < 1:
        raise ValueError("view_budget must be >= 1")
    if gain_mode not in ("literal", "coverage"):
        raise ValueError(f"unknown gain_mode {gain_mode!r}")
    cand_views: list[View] = []
    for g in avr_grids:
        cand_views.extend(g.views())
    n = len(cand_views)
    if n == 0:
        raise ValueError("no candidate views")
    pos = np.stack([v.position for v in cand_views])

    vis = visibility_matrix(proxy, cand_views, params)  # (F, n)
    centroids = proxy.centroids
    rng = np.random.default_rng(seed)

    selected: list[int] = []
    selected_mask = np.zeros(n, dtype=bool)
    eligible = np.zeros(n, dtype=bool)
    kappa: list[list[int]] = [[] for _ in range(centroids.shape[0])]
    q_now = np.zeros(centroids.shape[0])
    covered = np.zeros(centroids.shape[0], dtype=bool)
    gains_log: list[float] = []
    restarts = 0
    stopped_early = False

    def add(s: int):
        selected.append(s)
        selected_mask[s] = True
        near = np.linalg.norm(pos - pos[s], axis=1) <= neighbor_radius
        eligible[near] = True
        faces = np.nonzero(vis[:, s])[0]
        covered[faces] = True
        for f in faces:
            kappa[f].append(s)
            if len(kappa[f]) >= 2:
                sel_pos = pos[np.array(kappa[f])]
                _, q, _ = pair_quality(centroids[f], sel_pos, params)
                q_now[f] = q

    def candidate_gains(cands: np.ndarray) -> np.ndarray:
        if gain_mode == "literal":
            total = float(q_now[covered].sum())
            overlap = (vis[:, cands] * (covered * q_now)[:, None]).sum(axis=0)
            return total - overlap
        out = np.empty(len(cands))
        for idx, s in enumerate(cands):
            faces = np.nonzero(vis[:, s])[0]
            acc = 0.0
            for f in faces:
                members = kappa[f]
                if members:
                    sel_pos = pos[np.array(members + [s])]
                    _, q, _ = pair_quality(centroids[f], sel_pos, params)
                else:
                    q = 0.0
                acc += q
            out[idx] = acc
        return out

    start = int(rng.integers(n))
    add(start)
    gains_log.append(0.0)

    while len(selected) < min(view_budget, n):
        cands = np.nonzero(eligible & ~selected_mask)[0]
        if len(cands) == 0:
            if not restart_on_stall:
                stopped_early = True
                break
            pool = np.nonzero(~selected_mask)[0]
            jump = int(pool[rng.integers(len(pool))])
            restarts += 1
            add(jump)
            gains_log.append(0.0)
            continue
        gains = candidate_gains(cands)
        best = int(cands[int(np.argmax(gains))])
        gains_log.append(float(gains.max()))
        add(best)

    if len(selected) < view_budget and not stopped_early and len(selected) >= n:
        stopped_early = True  # candidate pool exhausted below budget

    info = {
        "selected": list(selected),
        "gains": gains_log,
        "stopped_early": stopped_early,
        "restarts": restarts,
        "gain_mode": gain_mode,
    }
    return Trajectory([cand_views[i] for i in selected]), info
