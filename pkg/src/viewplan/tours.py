"""Viewing grids, per-rectangle sweep tours, grid stitching, length certificate.

Each rectangle carries a lattice of candidate views with spacing ``r`` and
orientation along the rectangle's inward normal. Per-rectangle serpentine
tours are connected through a minimum spanning tree over grid-to-grid
distances; the stitched tour's length is certified against the constructive
bound 3 * total_area / r + 2 * mst_weight plus a stitching allowance of 2r
per grid.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import minimum_spanning_tree
from scipy.spatial.distance import cdist

from .errors import BudgetExhaustedError, CertificateViolationError, DisconnectedTreeError
from .quality import View
from .rectangles import ViewingRectangle

_SLACK = 1e-9


@dataclass
class Trajectory:
    """Ordered camera views; length is the sum of consecutive hop distances
    (plus the closing hop when the trajectory is a closed tour)."""

    views: list[View]
    closed: bool = False

    def __len__(self) -> int:
        return len(self.views)

    @property
    def positions(self) -> np.ndarray:
        if not self.views:
            return np.zeros((0, 3))
        return np.stack([v.position for v in self.views])

    @property
    def directions(self) -> np.ndarray:
        if not self.views:
            return np.zeros((0, 3))
        return np.stack([v.direction for v in self.views])

    @property
    def length(self) -> float:
        p = self.positions
        if len(p) < 2:
            return 0.0
        total = float(np.linalg.norm(np.diff(p, axis=0), axis=1).sum())
        if self.closed:
            total += float(np.linalg.norm(p[-1] - p[0]))
        return total

    @staticmethod
    def concat(parts: list["Trajectory"]) -> "Trajectory":
        views: list[View] = []
        for p in parts:
            views.extend(p.views)
        return Trajectory(views)

    def to_json_dict(self) -> dict:
        return {
            "schema": 1,
            "closed": self.closed,
            "length": float(self.length),
            "views": [
                {
                    "x": float(v.position[0]),
                    "y": float(v.position[1]),
                    "z": float(v.position[2]),
                    "dir_x": float(v.direction[0]),
                    "dir_y": float(v.direction[1]),
                    "dir_z": float(v.direction[2]),
                }
                for v in self.views
            ],
        }

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, indent=1)


@dataclass
class ViewingGrid:
    """Lattice of candidate views on a rectangle, spacing ``resolution``."""

    rectangle: ViewingRectangle
    resolution: float
    points: np.ndarray  # (nu * nv, 3), u-major order
    shape: tuple[int, int]

    @property
    def orientation(self) -> np.ndarray:
        return -self.rectangle.normal

    @property
    def num_points(self) -> int:
        return len(self.points)

    def views(self) -> list[View]:
        d = self.orientation
        return [View(p, d) for p in self.points]


def impose_grid(rect: ViewingRectangle, r: float) -> ViewingGrid:
    """Lattice with spacing r, residual margins split evenly on both sides."""
    if r <= 0:
        raise ValueError("grid resolution must be positive")
    w, h = rect.width, rect.height
    nu = int(math.floor(w / r + _SLACK)) + 1
    nv = int(math.floor(h / r + _SLACK)) + 1
    mu = (w - (nu - 1) * r) / 2.0
    mv = (h - (nv - 1) * r) / 2.0
    us = -rect.half_w + mu + r * np.arange(nu)
    vs = -rect.half_h + mv + r * np.arange(nv)
    uu, vv = np.meshgrid(us, vs, indexing="ij")
    uv = np.stack([uu.ravel(), vv.ravel()], axis=1)
    pts = rect.from_plane(uv)
    return ViewingGrid(rect, r, pts, (nu, nv))


def boustrophedon_tour(grid: ViewingGrid) -> Trajectory:
    """Serpentine over the lattice, lanes parallel to the longer rectangle
    axis; every lattice point visited exactly once with steps of length r."""
    nu, nv = grid.shape
    if grid.num_points == 0:
        raise ValueError("cannot tour an empty grid")
    order: list[int] = []
    if grid.rectangle.width >= grid.rectangle.height:
        for iv in range(nv):  # lanes along u
            span = range(nu) if iv % 2 == 0 else range(nu - 1, -1, -1)
            order.extend(iu * nv + iv for iu in span)
    else:
        for iu in range(nu):  # lanes along v
            span = range(nv) if iu % 2 == 0 else range(nv - 1, -1, -1)
            order.extend(iu * nv + iv for iv in span)
    direction = grid.orientation
    views = [View(grid.points[i], direction) for i in order]
    return Trajectory(views)


# ---------------------------------------------------------------------------
# spanning tree over grids
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class GridEdge:
    """Tree edge between two grids realised by a closest lattice-point pair."""

    i: int
    j: int
    weight: float
    point_i: int  # lattice index within grid i
    point_j: int


def grid_mst(grids: list[ViewingGrid]) -> list[GridEdge]:
    """Minimum spanning tree over grids; distance between two grids is the
    minimum over all lattice-point pairs."""
    k = len(grids)
    if k == 0:
        raise ValueError("grid_mst needs at least one grid")
    if k == 1:
        return []
    dmat = np.zeros((k, k))
    closest: dict[tuple[int, int], tuple[int, int]] = {}
    for i in range(k):
        for j in range(i + 1, k):
            d = cdist(grids[i].points, grids[j].points)
            flat = int(d.argmin())
            pi, pj = divmod(flat, d.shape[1])
            w = float(d[pi, pj])
            dmat[i, j] = dmat[j, i] = w
            closest[(i, j)] = (pi, pj)
    tree = minimum_spanning_tree(dmat).tocoo()
    edges = []
    for a, b in zip(tree.row, tree.col):
        i, j = (int(a), int(b)) if a < b else (int(b), int(a))
        pi, pj = closest[(i, j)]
        edges.append(GridEdge(i, j, float(dmat[i, j]), pi, pj))
    edges.sort(key=lambda e: (e.i, e.j))
    return edges


def mst_weight(edges: list[GridEdge]) -> float:
    return float(sum(e.weight for e in edges))


# ---------------------------------------------------------------------------
# stitching + certificate
# ---------------------------------------------------------------------------


@dataclass
class TourCertificate:
    """Constructive length-bound record for one stitched tour.

    ``final_length`` is certified against ``bound_value`` =
    3 * total_area / r + 2 * mst_weight + 2r * grid_count; the last term
    allows one entry and one exit hop of up to a grid step per rectangle.
    ``lower_bound`` = max(total_area / (4 d), mst_weight) bounds any
    trajectory meeting the coverage constraints from below.
    """

    r: float
    d: float
    tour_lengths: list[float]
    areas: list[float]
    total_area: float
    mst_edges: list[tuple[int, int, float]]
    mst_weight: float
    splice_overheads: list[float]
    splice_allowance: float
    final_length: float
    bound_base: float
    bound_value: float
    lower_bound: float
    ratio_vs_lower_bound: float | None

    def to_json_dict(self) -> dict:
        return {
            "schema": 1,
            "r": self.r,
            "d": self.d,
            "tour_lengths": self.tour_lengths,
            "areas": self.areas,
            "total_area": self.total_area,
            "mst_edges": [list(e) for e in self.mst_edges],
            "mst_weight": self.mst_weight,
            "splice_overheads": self.splice_overheads,
            "splice_allowance": self.splice_allowance,
            "final_length": self.final_length,
            "bound_base": self.bound_base,
            "bound_value": self.bound_value,
            "lower_bound": self.lower_bound,
            "ratio_vs_lower_bound": self.ratio_vs_lower_bound,
        }

    def save_json(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, sort_keys=True, indent=1)


def lower_bound(rects: list[ViewingRectangle], mst_edges: list[GridEdge], d: float) -> float:
    """max(total rectangle area / (4 d), spanning-tree weight)."""
    total = float(sum(r.area for r in rects))
    return max(total / (4.0 * d), mst_weight(mst_edges))


def _preorder(k: int, edges: list[GridEdge]) -> list[int]:
    adj: dict[int, list[tuple[float, int]]] = {i: [] for i in range(k)}
    for e in edges:
        adj[e.i].append((e.weight, e.j))
        adj[e.j].append((e.weight, e.i))
    seen = [False] * k
    order: list[int] = []
    stack = [0]
    while stack:
        node = stack.pop()
        if seen[node]:
            continue
        seen[node] = True
        order.append(node)
        for _, nxt in sorted(adj[node], reverse=True):
            if not seen[nxt]:
                stack.append(nxt)
    if not all(seen):
        raise DisconnectedTreeError("spanning tree does not reach every grid")
    return order


def _best_orientations(ordered_tours: list[Trajectory]) -> list[bool]:
    """Pick forward/reversed per tour (visit order fixed) minimising the total
    hop length of the closed tour, by dynamic programming over the two
    endpoint states of each block."""
    k = len(ordered_tours)
    ends = []  # (start, end) per orientation: False=forward, True=reversed
    for t in ordered_tours:
        p0, p1 = t.views[0].position, t.views[-1].position
        ends.append({False: (p0, p1), True: (p1, p0)})
    if k == 1:
        return [False]

    best_total = None
    best_flips = None
    for first_flip in (False, True):
        # cost[o] = (total hops so far ending with orientation o, back-pointers)
        cost = {first_flip: (0.0, [first_flip])}
        for i in range(1, k):
            nxt: dict[bool, tuple[float, list[bool]]] = {}
            for o, (start, _) in ends[i].items():
                cands = []
                for po, (c, path) in cost.items():
                    hop = float(np.linalg.norm(start - ends[i - 1][po][1]))
                    cands.append((c + hop, path + [o]))
                nxt[o] = min(cands, key=lambda x: x[0])
            cost = nxt
        for o, (c, path) in cost.items():
            closing = float(np.linalg.norm(ends[0][first_flip][0] - ends[-1][o][1]))
            total = c + closing
            if best_total is None or total < best_total - 1e-12:
                best_total = total
                best_flips = path
    return best_flips


def stitch_tour(
    tours: list[Trajectory],
    mst: list[GridEdge],
    grids: list[ViewingGrid],
    d: float,
    *,
    closed: bool = True,
) -> tuple[Trajectory, TourCertificate]:
    """Combine per-rectangle tours into one tour visiting every view once.

    Grids are visited in depth-first order over the doubled spanning tree;
    each per-rectangle tour is traversed whole, in the direction chosen by
    ``_best_orientations`` to minimise the connecting hops. The resulting
    length is checked against the certificate bound and a violation raises.
    """
    if len(tours) != len(grids):
        raise ValueError("tours and grids must align")
    k = len(grids)
    if k == 0:
        raise ValueError("nothing to stitch")
    rs = {round(g.resolution, 12) for g in grids}
    if len(rs) != 1:
        raise ValueError("grids disagree on resolution")
    r = grids[0].resolution

    order = _preorder(k, mst)
    flips = _best_orientations([tours[g] for g in order])
    blocks: list[list[View]] = []
    hops: list[float] = []
    for g, flip in zip(order, flips):
        views = list(reversed(tours[g].views)) if flip else list(tours[g].views)
        if blocks:
            hops.append(float(np.linalg.norm(views[0].position - blocks[-1][-1].position)))
        blocks.append(views)

    all_views = [v for block in blocks for v in block]
    # the closing hop is certified even in open-tour mode: the bound is a
    # statement about the closed variant of the construction
    closing = float(np.linalg.norm(all_views[-1].position - all_views[0].position))
    hops_all = hops + [closing]

    trajectory = Trajectory(all_views, closed=closed)
    tour_lengths = [t.length for t in tours]
    areas = [g.rectangle.area for g in grids]
    total_area = float(sum(areas))
    w = mst_weight(mst)
    final_closed = float(sum(tour_lengths) + sum(hops_all))

    bound_base = 3.0 * total_area / r + 2.0 * w
    allowance = 2.0 * r * k
    bound_value = bound_base + allowance
    lb = lower_bound([g.rectangle for g in grids], mst, d)
    cert = TourCertificate(
        r=float(r),
        d=float(d),
        tour_lengths=[float(x) for x in tour_lengths],
        areas=[float(a) for a in areas],
        total_area=total_area,
        mst_edges=[(e.i, e.j, float(e.weight)) for e in mst],
        mst_weight=w,
        splice_overheads=[float(h) for h in hops_all],
        splice_allowance=float(allowance),
        final_length=final_closed,
        bound_base=float(bound_base),
        bound_value=float(bound_value),
        lower_bound=float(lb),
        ratio_vs_lower_bound=float(final_closed / lb) if lb > 0 else None,
    )

    for li, ai in zip(tour_lengths, areas):
        if li > 3.0 * ai / r + _SLACK:
            raise CertificateViolationError(
                f"per-rectangle bound violated: {li} > {3.0 * ai / r}"
            )
    if final_closed > bound_value + _SLACK:
        raise CertificateViolationError(
            f"tour length {final_closed} exceeds certified bound {bound_value}"
        )
    return trajectory, cert


# ---------------------------------------------------------------------------
# rectangle set -> tour, with view-budget coarsening
# ---------------------------------------------------------------------------


@dataclass
class PlanResult:
    grids: list[ViewingGrid]
    tours: list[Trajectory]
    mst: list[GridEdge]
    trajectory: Trajectory
    certificate: TourCertificate
    r_effective: float


def plan_rectangles(
    rects: list[ViewingRectangle],
    r: float,
    d: float,
    *,
    budget: int | None = None,
    closed: bool = True,
) -> PlanResult:
    """Grid + sweep + stitch over a rectangle set.

    When a view budget is given and the lattice exceeds it, the resolution is
    multiplied by 1.25 and the grids rebuilt until the count fits; if even
    the coarsest grids (2 x 2 per rectangle) do not fit, BudgetExhaustedError
    is raised carrying that minimal plan.
    """
    if not rects:
        raise ValueError("no rectangles to plan over")
    r_eff = float(r)
    grids: list[ViewingGrid] = []
    count = 0
    for _ in range(64):
        grids = [impose_grid(rect.widened(r_eff), r_eff) for rect in rects]
        count = sum(g.num_points for g in grids)
        if budget is None or count <= budget:
            break
        if count <= 4 * len(rects):
            break
        r_eff *= 1.25
    tours = [boustrophedon_tour(g) for g in grids]
    mst = grid_mst(grids)
    trajectory, cert = stitch_tour(tours, mst, grids, d, closed=closed)
    if budget is not None and count > budget:
        raise BudgetExhaustedError(
            f"{count} views exceed remaining budget {budget}",
            partial_plan=PlanResult(grids, tours, mst, trajectory, cert, r_eff),
        )
    return PlanResult(grids, tours, mst, trajectory, cert, r_eff)
