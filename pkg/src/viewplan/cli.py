"""Batch experiment runner.

Subcommands:
  plan     run one planner on one scene and write its artifact set
  compare  run all four planners at matched view counts on one scene
  report   tabulate completed run directories into a comparison CSV

Every artifact is a function of the config and seed alone, so repeated runs
are byte-identical. Distances are meters; angles are degrees at this
boundary and radians inside.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass
from pathlib import Path


from .baselines import ZigZagSpec, plan_gvs, plan_uniform_grid, plan_zigzag
from .errors import ViewPlanError
from .mesh import SceneSpec, TriangleMesh, generate_scene
from .planner import (
    _noisy_proxy,
    default_quality_resolution,
    infeasible_faces,
    preprocess_mesh,
    run_pipeline,
)
from .quality import QualityParams, evaluate_coverage
from .rectangles import build_avr
from .tours import Trajectory, impose_grid

SCHEMA = 1
DEFAULT_NOISE_SIGMA = 0.25
GVS_POOL_RESOLUTION = 1.0


@dataclass
class RunConfig:
    """One planner run, fully determined by these fields plus the seed."""

    planner: str = "avr"
    scene: str | None = "flat"
    mesh: str | None = None
    extent: float = 20.0
    obstacles: int = 3
    d: float = 5.0
    eps_d: float | None = None
    t: int = 3
    qstar: float = 0.014
    budget: int = 300
    k: int | None = None
    r: float | None = None
    max_visits: int = 4
    seed: int = 0
    out: str = "out"
    view_count: int | None = None
    min_pair_angle_deg: float | None = None
    max_pair_angle_deg: float | None = None
    gvs_gain: str = "literal"
    gvs_radius: float = 1.0
    open_tour: bool = False

    def validate(self) -> None:
        if self.planner not in ("avr", "zigzag", "uniform", "gvs"):
            raise ValueError(f"unknown planner {self.planner!r}")
        if (self.scene is None) == (self.mesh is None):
            raise ValueError("exactly one of scene/mesh must be set")
        if self.max_visits < 2:
            raise ValueError("max_visits must be >= 2")
        self.quality_params()  # raises on bad numeric ranges

    def quality_params(self) -> QualityParams:
        rad = lambda deg: None if deg is None else math.radians(deg)
        return QualityParams(
            d=self.d,
            epsilon_d=self.eps_d,
            t=self.t,
            q_star=self.qstar,
            budget=self.budget,
            min_pair_angle=rad(self.min_pair_angle_deg),
            max_pair_angle=rad(self.max_pair_angle_deg),
        )

    def scene_spec(self) -> SceneSpec:
        if self.mesh is not None:
            return SceneSpec(kind="file", path=self.mesh, seed=self.seed)
        return SceneSpec(
            kind=self.scene, extent=self.extent, obstacles=self.obstacles, seed=self.seed
        )

    def to_json_dict(self) -> dict:
        return {"schema": SCHEMA, **asdict(self)}

    @staticmethod
    def from_json_dict(data: dict) -> "RunConfig":
        data = {k: v for k, v in data.items() if k != "schema"}
        return RunConfig(**data)


def _dump_json(obj: dict, path: Path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, sort_keys=True, indent=1)


def _scene_for(config: RunConfig) -> TriangleMesh:
    return generate_scene(config.scene_spec())


def _gvs_pool(proxy: TriangleMesh, params: QualityParams, config: RunConfig):
    r_q = config.r if config.r is not None else default_quality_resolution(params)
    pairs = build_avr(proxy, params, k=config.k, seed=config.seed, r=r_q)
    res = GVS_POOL_RESOLUTION
    return [impose_grid(rect.widened(res), res) for rect, _ in pairs]


def run(config: RunConfig) -> dict:
    """Execute one configured run; returns the artifact paths."""
    config.validate()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)
    params = config.quality_params()
    truth = preprocess_mesh(_scene_for(config), params)
    _dump_json(config.to_json_dict(), out / "config.json")

    visits_summary: list[dict] = []
    bound_ratio = None
    certificate = None

    if config.planner == "avr":
        states = run_pipeline(
            truth,
            params,
            max_visits=config.max_visits,
            seed=config.seed,
            k=config.k,
            r=config.r,
            noise_sigma=DEFAULT_NOISE_SIGMA,
            closed_tours=not config.open_tour,
        )
        for st in states:
            st.trajectory.save_json(out / f"trajectory_visit{st.visit}.json")
            if st.certificate is not None:
                st.certificate.save_json(out / f"certificate_visit{st.visit}.json")
            _dump_json(st.report.summary(), out / f"coverage_visit{st.visit}.json")
            ratio = st.certificate.ratio_vs_lower_bound if st.certificate else None
            visits_summary.append(
                {
                    "visit": st.visit,
                    "views_added": st.views_added,
                    "cumulative_views": st.cumulative_views,
                    "pass_fraction": st.pass_fraction,
                    "mean_q": st.report.summary()["mean_q"],
                    "tour_length": st.trajectory.length,
                    "bound_ratio": ratio,
                    "budget_exhausted": st.budget_exhausted,
                }
            )
        planned = [s for s in states if s.visit >= 2 and s.certificate is not None]
        if planned:
            certificate = planned[0].certificate
            bound_ratio = certificate.ratio_vs_lower_bound
            certificate.save_json(out / "certificate.json")
        final = states[-1]
        report = final.report
        trajectory = Trajectory.concat([s.trajectory for s in states])
        views_planned = final.planned_views
        views_total = final.cumulative_views
        tour_length = float(sum(s.trajectory.length for s in states if s.visit >= 2))
        with open(out / "run.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(
                ["visit", "views_added", "cumulative_views", "pass_fraction", "mean_q",
                 "tour_length", "bound_ratio"]
            )
            for row in visits_summary:
                w.writerow(
                    [row["visit"], row["views_added"], row["cumulative_views"],
                     repr(row["pass_fraction"]), repr(row["mean_q"]),
                     repr(row["tour_length"]),
                     "" if row["bound_ratio"] is None else repr(row["bound_ratio"])]
                )
    else:
        infeasible = infeasible_faces(truth, params)
        proxy = _noisy_proxy(truth, DEFAULT_NOISE_SIGMA, config.seed)
        if config.planner == "zigzag":
            trajectory = plan_zigzag(truth.bounds(), ZigZagSpec())
        elif config.planner == "uniform":
            n = config.view_count or params.budget
            trajectory = plan_uniform_grid(
                truth.bounds(), n, 1.0, proxy=proxy, margin=params.d
            )
        else:  # gvs
            n = config.view_count or params.budget
            grids = _gvs_pool(proxy, params, config)
            trajectory, gvs_info = plan_gvs(
                grids,
                proxy,
                params,
                n,
                seed=config.seed,
                neighbor_radius=config.gvs_radius,
                gain_mode=config.gvs_gain,
            )
            _dump_json(
                {"schema": SCHEMA, "stopped_early": gvs_info["stopped_early"],
                 "restarts": gvs_info["restarts"], "gain_mode": gvs_info["gain_mode"]},
                out / "gvs_info.json",
            )
        report = evaluate_coverage(truth, trajectory, params, infeasible=infeasible)
        trajectory.save_json(out / "trajectory.json")
        views_planned = len(trajectory)
        views_total = len(trajectory)
        tour_length = trajectory.length

    report.to_csv(out / "coverage.csv")
    summary = {
        "schema": SCHEMA,
        "planner": config.planner,
        "scene": config.scene or config.mesh,
        "seed": config.seed,
        "views": views_planned,
        "views_planned": views_planned,
        "views_total": views_total,
        "tour_length": tour_length,
        "pass_fraction": report.pass_fraction,
        "mean_q": report.summary()["mean_q"],
        "min_q": report.summary()["min_q"],
        "bound_ratio": bound_ratio,
        "visits": visits_summary,
    }
    _dump_json(summary, out / "summary.json")
    return {"out": str(out), "summary": str(out / "summary.json")}


def _run_worker(config_dict: dict) -> str:
    cfg = RunConfig.from_json_dict(config_dict)
    run(cfg)
    return cfg.out


def compare(config: RunConfig) -> Path:
    """Run all four planners on one scene with matched view counts."""
    config.validate()
    out = Path(config.out)
    out.mkdir(parents=True, exist_ok=True)

    avr_cfg = RunConfig(**{**asdict(config), "planner": "avr", "out": str(out / "avr")})
    run(avr_cfg)
    with open(out / "avr" / "summary.json") as fh:
        n_views = json.load(fh)["views_planned"]

    baseline_cfgs = [
        RunConfig(
            **{
                **asdict(config),
                "planner": planner,
                "out": str(out / planner),
                "view_count": max(1, n_views),
            }
        )
        for planner in ("zigzag", "uniform", "gvs")
    ]
    workers = int(os.environ.get("AVR_THREADS", "1"))
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            list(pool.map(_run_worker, [c.to_json_dict() for c in baseline_cfgs]))
    else:
        for cfg in baseline_cfgs:
            run(cfg)

    return report([out / p for p in ("avr", "zigzag", "uniform", "gvs")], out / "compare.csv")


def report(run_dirs, out_path) -> Path:
    """Collect summaries from run directories into one CSV, best first."""
    rows = []
    max_visits = 0
    for d in run_dirs:
        summary_path = Path(d) / "summary.json"
        if not summary_path.exists():
            print(f"warning: skipping {d}: no summary.json", file=sys.stderr)
            continue
        try:
            with open(summary_path) as fh:
                s = json.load(fh)
        except json.JSONDecodeError as exc:
            print(f"warning: skipping {d}: {exc}", file=sys.stderr)
            continue
        s["_dir"] = str(d)
        rows.append(s)
        max_visits = max(max_visits, len(s.get("visits", [])))

    rows.sort(key=lambda s: -(s.get("pass_fraction") or 0.0))
    out_path = Path(out_path)
    visit_cols = [f"visit{i + 1}_views" for i in range(max_visits)]
    with open(out_path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(
            ["run", "planner", "scene", "seed", "views_planned", "views_total",
             "tour_length", "pass_fraction", "mean_q", "bound_ratio"] + visit_cols
        )
        for s in rows:
            visit_views = [v["views_added"] for v in s.get("visits", [])]
            visit_views += [""] * (max_visits - len(visit_views))
            w.writerow(
                [s["_dir"], s["planner"], s["scene"], s["seed"], s["views_planned"],
                 s["views_total"], repr(s["tour_length"]), repr(s["pass_fraction"]),
                 repr(s["mean_q"]),
                 "" if s.get("bound_ratio") is None else repr(s["bound_ratio"])]
                + visit_views
            )
    return out_path


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--scene", choices=["flat", "boxfield", "canyon"])
    src.add_argument("--mesh", help="path to an OBJ or PLY file")
    p.add_argument("--extent", type=float, default=20.0)
    p.add_argument("--obstacles", type=int, default=3)
    p.add_argument("--d", type=float, default=5.0, help="target viewing distance (m)")
    p.add_argument("--eps-d", type=float, default=None, help="distance tolerance (m)")
    p.add_argument("--t", type=int, default=3, help="minimum visible views per face")
    p.add_argument("--qstar", type=float, default=0.014, help="quality threshold (1/m^2)")
    p.add_argument("--budget", type=int, default=300, help="max planned views")
    p.add_argument("--k", type=int, default=None, help="face cluster count")
    p.add_argument("--r", type=float, default=None, help="grid resolution (m)")
    p.add_argument("--max-visits", type=int, default=4)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.add_argument("--min-pair-angle-deg", type=float, default=None)
    p.add_argument("--max-pair-angle-deg", type=float, default=None)


def _config_from(args: argparse.Namespace, planner: str | None = None) -> RunConfig:
    return RunConfig(
        planner=planner or getattr(args, "planner", "avr"),
        scene=args.scene,
        mesh=args.mesh,
        extent=args.extent,
        obstacles=args.obstacles,
        d=args.d,
        eps_d=args.eps_d,
        t=args.t,
        qstar=args.qstar,
        budget=args.budget,
        k=args.k,
        r=args.r,
        max_visits=args.max_visits,
        seed=args.seed,
        out=args.out,
        view_count=getattr(args, "views", None),
        min_pair_angle_deg=args.min_pair_angle_deg,
        max_pair_angle_deg=args.max_pair_angle_deg,
        gvs_gain=getattr(args, "gvs_gain", "literal"),
        gvs_radius=getattr(args, "gvs_radius", 1.0),
        open_tour=getattr(args, "open_tour", False),
    )


def main(argv: list[str] | None = None) -> int:
    parser = argparse.ArgumentParser(prog="viewplan")
    sub = parser.add_subparsers(dest="command", required=True)

    p_plan = sub.add_parser("plan", help="run one planner")
    _add_common(p_plan)
    p_plan.add_argument("--planner", choices=["avr", "zigzag", "uniform", "gvs"], default="avr")
    p_plan.add_argument("--views", type=int, default=None, help="view count for uniform/gvs")
    p_plan.add_argument("--gvs-gain", choices=["literal", "coverage"], default="literal")
    p_plan.add_argument("--gvs-radius", type=float, default=1.0)
    p_plan.add_argument("--open-tour", action="store_true",
                        help="leave planned tours open instead of closing them")

    p_cmp = sub.add_parser("compare", help="run all planners at matched view counts")
    _add_common(p_cmp)
    p_cmp.add_argument("--gvs-gain", choices=["literal", "coverage"], default="literal")
    p_cmp.add_argument("--gvs-radius", type=float, default=1.0)

    p_rep = sub.add_parser("report", help="tabulate run directories")
    p_rep.add_argument("dirs", nargs="+")
    p_rep.add_argument("--out", default="report.csv")

    args = parser.parse_args(argv)
    try:
        if args.command == "plan":
            run(_config_from(args))
        elif args.command == "compare":
            compare(_config_from(args))
        else:
            report(args.dirs, args.out)
    except (ValueError, OSError) as exc:
        print(f"error: invalid configuration: {exc}", file=sys.stderr)
        return 2
    except ViewPlanError as exc:
        print(f"error: planner failed: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
