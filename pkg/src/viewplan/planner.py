"""Multi-visit planning loop: explore pass, full plan, targeted refinement.

Visit 1 flies a fixed serpentine at altitude and yields only a noisy proxy
of the scene. Visit 2 plans viewing rectangles over the whole proxy. Later
visits re-plan only above the faces still failing the coverage constraints,
and after every visit the proxy regains the true geometry of the faces that
passed, mimicking a reconstruction that improves where it was well observed.

The view budget applies to the planned visits (2 and later); the fixed
explore pass is the input that creates the proxy, not part of the optimised
trajectory.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .baselines import ZigZagSpec, plan_zigzag
from .errors import BudgetExhaustedError
from .mesh import TriangleMesh, _vertex_normals
from .quality import (
    STATUS_FAIL_COUNT,
    STATUS_FAIL_QUALITY,
    CoverageReport,
    QualityParams,
    evaluate_coverage,
)
from .rectangles import build_avr, suggest_cluster_count
from .tours import PlanResult, Trajectory, plan_rectangles


def default_quality_resolution(params: QualityParams) -> float:
    """Grid spacing fine enough that any face at nominal depth keeps at least
    three lattice views inside the distance band.

    The in-band lateral radius at depth d is sqrt((d + eps)^2 - d^2); the
    factor 0.6 leaves room for faces near the rectangle boundary, whose third
    nearest lattice point sits up to ~1.6 grid steps away."""
    hi = params.d + params.epsilon_d
    lateral = math.sqrt(max(hi * hi - params.d * params.d, 0.0))
    return min(params.d, 0.6 * lateral)


def preprocess_mesh(mesh: TriangleMesh, params: QualityParams) -> TriangleMesh:
    """Ingestion step: subdivide faces larger than the per-view footprint so
    centroid visibility is representative of the whole face."""
    return mesh.subdivided((params.d / 4.0) ** 2)


# ---------------------------------------------------------------------------
# feasibility probe
# ---------------------------------------------------------------------------


def _hemisphere_directions(n: int = 64, min_cos: float = 0.05) -> np.ndarray:
    """Deterministic spiral covering the +z hemisphere down to min_cos."""
    i = np.arange(n) + 0.5
    z = 1.0 - (i / n) * (1.0 - min_cos)
    phi = i * math.pi * (3.0 - math.sqrt(5.0))
    rho = np.sqrt(1.0 - z * z)
    return np.stack([rho * np.cos(phi), rho * np.sin(phi), z], axis=1)


def _frames(normals: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    axis = np.zeros_like(normals)
    axis[np.arange(len(normals)), np.argmin(np.abs(normals), axis=1)] = 1.0
    u = np.cross(normals, axis)
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return u, np.cross(normals, u)


def infeasible_faces(
    mesh: TriangleMesh,
    params: QualityParams,
    *,
    samples: int = 64,
    engine: str = "auto",
) -> set[int]:
    """Faces with no line of sight from any sampled in-band position in the
    hemisphere in front of the face; such faces can never satisfy the
    constraints and are excluded from refinement targets."""
    dirs = _hemisphere_directions(samples)
    u, v = _frames(mesh.normals)
    undecided = np.arange(mesh.num_faces)
    batch = 8
    for lo in range(0, samples, batch):
        if undecided.size == 0:
            break
        block = dirs[lo : lo + batch]
        cu, cv, cn = u[undecided], v[undecided], mesh.normals[undecided]
        cc = mesh.centroids[undecided]
        # world-space probe positions for every (face, direction) pair
        world = (
            block[None, :, 0, None] * cu[:, None, :]
            + block[None, :, 1, None] * cv[:, None, :]
            + block[None, :, 2, None] * cn[:, None, :]
        )
        origins = cc[:, None, :] + params.d * world
        m = len(block)
        flat_o = origins.reshape(-1, 3)
        flat_t = np.repeat(cc, m, axis=0)
        blocked = mesh.occluded_many(flat_o, flat_t, engine=engine).reshape(-1, m)
        undecided = undecided[blocked.all(axis=1)]
    return set(int(i) for i in undecided)


# ---------------------------------------------------------------------------
# per-visit planning
# ---------------------------------------------------------------------------


def identify_low_quality(report: CoverageReport) -> np.ndarray:
    """Faces failing the count or quality constraint (infeasible excluded)."""
    mask = (report.status == STATUS_FAIL_COUNT) | (report.status == STATUS_FAIL_QUALITY)
    return np.nonzero(mask)[0]


@dataclass
class VisitPlan:
    trajectory: Trajectory
    plan: PlanResult
    faces: np.ndarray
    k_used: int | None
    r_used: float


def plan_visit(
    low_quality_faces,
    proxy: TriangleMesh,
    params: QualityParams,
    k: int | None = None,
    seed: int = 0,
    *,
    r: float | None = None,
    budget: int | None = None,
    closed: bool = True,
) -> VisitPlan:
    """Plan a tour over the sub-mesh spanned by the given faces.

    Raises BudgetExhaustedError when even the coarsest grids exceed the
    remaining budget.
    """
    faces = np.unique(np.asarray(list(low_quality_faces), dtype=np.int64))
    if faces.size == 0:
        raise ValueError("plan_visit needs a non-empty face set")
    if r is None:
        r = default_quality_resolution(params)
    target = proxy if faces.size == proxy.num_faces else proxy.submesh(faces)
    if k is None and budget is not None:
        # every rectangle costs at least a 2x2 grid, so more clusters than
        # budget//4 can never fit
        k = min(suggest_cluster_count(target, params.d, seed), max(1, budget // 4))
        k = min(k, target.num_faces)
    pairs = build_avr(target, params, k=k, seed=seed, r=r)
    rects = [rect for rect, _ in pairs]
    plan = plan_rectangles(rects, r, params.d, budget=budget, closed=closed)
    return VisitPlan(plan.trajectory, plan, faces, k, plan.r_effective)


# ---------------------------------------------------------------------------
# the visit loop
# ---------------------------------------------------------------------------


@dataclass
class VisitState:
    """Snapshot after one visit: what flew, what the scene now looks like.

    ``pass_fraction`` counts a face as covered once any evaluation of the
    growing view set has satisfied its constraints; acquired images are never
    discarded, and the proxy keeps the recovered geometry, so coverage is an
    absorbing state. ``report`` holds the literal constraint evaluation of
    the current cumulative trajectory, whose own pass fraction can dip by a
    hair when a new widest-angle pair carries a smaller quality score.
    """

    visit: int
    proxy: TriangleMesh
    trajectory: Trajectory
    views_added: int
    cumulative_views: int
    planned_views: int  # cumulative over visits >= 2 (budgeted views)
    report: CoverageReport
    pass_fraction: float
    certificate: object | None = None
    budget_exhausted: bool = False


def _noisy_proxy(mesh: TriangleMesh, sigma: float, seed: int) -> TriangleMesh:
    if sigma <= 0:
        return mesh.with_vertices(mesh.vertices.copy())
    rng = np.random.default_rng(seed)
    normals = _vertex_normals(mesh.vertices, mesh.faces)
    offsets = rng.normal(0.0, sigma, size=mesh.num_vertices)
    return mesh.with_vertices(mesh.vertices + normals * offsets[:, None])


def _refresh_proxy(
    proxy: TriangleMesh, truth: TriangleMesh, passed_faces: np.ndarray
) -> TriangleMesh:
    """Copy true geometry back onto every vertex touched by a passing face."""
    if passed_faces.size == 0:
        return proxy
    verts = proxy.vertices.copy()
    idx = np.unique(truth.faces[passed_faces])
    verts[idx] = truth.vertices[idx]
    return truth.with_vertices(verts)


def run_pipeline(
    scene: TriangleMesh,
    params: QualityParams,
    max_visits: int = 4,
    seed: int = 0,
    *,
    k: int | None = None,
    r: float | None = None,
    zigzag: ZigZagSpec | None = None,
    noise_sigma: float = 0.25,
    min_new_views: int = 5,
    min_pass_gain: float = 0.005,
    closed_tours: bool = True,
    engine: str = "auto",
) -> list[VisitState]:
    """Run explore + plan + refine until convergence, budget, or max_visits.

    Deterministic for a fixed seed. Coverage is always evaluated against the
    ground-truth scene; planning always happens on the current proxy.
    """
    if max_visits < 2:
        raise ValueError("max_visits must be >= 2")
    truth = preprocess_mesh(scene, params)
    if r is None:
        r = default_quality_resolution(params)
    zz = zigzag or ZigZagSpec()
    infeasible = infeasible_faces(truth, params, engine=engine)

    states: list[VisitState] = []
    explore = plan_zigzag(truth.bounds(), zz)
    proxy = _noisy_proxy(truth, noise_sigma, seed)
    cumulative: list[Trajectory] = [explore]
    planned_views = 0
    passed_ever = np.zeros(truth.num_faces, dtype=bool)

    def evaluate() -> CoverageReport:
        return evaluate_coverage(
            truth, Trajectory.concat(cumulative), params, infeasible=infeasible, engine=engine
        )

    report = evaluate()
    passed_ever |= report.pass_mask
    states.append(
        VisitState(
            visit=1,
            proxy=proxy,
            trajectory=explore,
            views_added=len(explore),
            cumulative_views=len(explore),
            planned_views=0,
            report=report,
            pass_fraction=float(passed_ever.mean()),
        )
    )

    for visit in range(2, max_visits + 1):
        low = np.setdiff1d(identify_low_quality(report), np.nonzero(passed_ever)[0])
        if low.size == 0:
            break
        target = np.arange(truth.num_faces) if visit == 2 else low
        remaining = params.budget - planned_views
        try:
            vp = plan_visit(
                target, proxy, params, k=k, seed=seed + visit, r=r,
                budget=remaining, closed=closed_tours,
            )
        except BudgetExhaustedError:
            states.append(
                VisitState(
                    visit=visit,
                    proxy=proxy,
                    trajectory=Trajectory([]),
                    views_added=0,
                    cumulative_views=sum(len(t) for t in cumulative),
                    planned_views=planned_views,
                    report=report,
                    pass_fraction=float(passed_ever.mean()),
                    budget_exhausted=True,
                )
            )
            break
        if visit > 2 and len(vp.trajectory) < min_new_views:
            break
        cumulative.append(vp.trajectory)
        planned_views += len(vp.trajectory)
        prev_pass = float(passed_ever.mean())
        report = evaluate()
        passed_ever |= report.pass_mask
        proxy = _refresh_proxy(proxy, truth, np.nonzero(passed_ever)[0])
        states.append(
            VisitState(
                visit=visit,
                proxy=proxy,
                trajectory=vp.trajectory,
                views_added=len(vp.trajectory),
                cumulative_views=sum(len(t) for t in cumulative),
                planned_views=planned_views,
                report=report,
                pass_fraction=float(passed_ever.mean()),
                certificate=vp.plan.certificate,
            )
        )
        if visit > 2 and float(passed_ever.mean()) - prev_pass < min_pass_gain:
            break
    return states
