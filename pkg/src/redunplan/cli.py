"""Command-line interface: ``redunplan plan | compare | check | export-grid``."""
from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .audit import audit_trajectory
from .collision import Scene, default_scene, load_scene
from .errors import (FixedSlideInfeasible, ModelError, NoFeasiblePath, RedunplanError,
                     SingularConfiguration, UnreachableTask)
from .gridmap import export_null_space_map, grid_csv, read_grid_csv
from .kinematics import RobotModel, default_model, load_robot
from .planner import DEFAULT_RESOLUTION, GridParams, PlanResult, bellman_violations, plan
from .stiffness import ETA_Z, force_ellipsoid
from .task import (CHAINED, DEFAULT_BUDGET, TaskSpec, atomic_write, fixed_slide_plan, load_task,
                   read_trajectory_csv, trajectory_csv)

EXIT_OK = 0
EXIT_BAD_CONFIG = 2
EXIT_UNREACHABLE = 3
EXIT_NO_PATH = 4
EXIT_AUDIT = 5
EXIT_SINGULAR = 6

THREADS_ENV = "REDUNPLAN_THREADS"


@dataclass
class LegReport:
    leg: int
    total_cost: float
    terminal_mma: float
    wall_clock_s: float
    within_budget: bool
    audit: dict
    representativeness_violations: int


@dataclass
class RunReport:
    budget_s: float
    legs: list[LegReport] = field(default_factory=list)
    artifacts: list[str] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(asdict(self), indent=2) + "\n"


# ------------------------------------------------------------ shared setup

def _threads(value: int | None) -> int:
    if value is None:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            value = int(raw)
        except ValueError:
            raise ModelError(f"{THREADS_ENV}={raw!r} is not an integer") from None
    if value < 1:
        raise ModelError("thread count must be at least 1")
    return value


def _inputs(args) -> tuple[RobotModel, Scene, TaskSpec]:
    model = load_robot(args.robot) if args.robot else default_model()
    scene = load_scene(args.scene) if args.scene else default_scene()
    task = load_task(args.task)
    return model, scene, task


def _eta(values) -> np.ndarray:
    eta = np.asarray(values if values is not None else ETA_Z, dtype=float)
    if eta.shape != (6,) or not np.isfinite(eta).all() or not np.linalg.norm(eta) > 0:
        raise ModelError("--eta needs six finite numbers, not all zero")
    return eta


def _grid_params(args) -> GridParams:
    if not args.u_res > 0:
        raise ModelError("--u-res must be positive")
    # a resolution wider than the slide range leaves a single column at q_min
    return GridParams(u_resolution=args.u_res)


def _plan_legs(model, scene, task, args, legs=None) -> list[PlanResult]:
    eta = _eta(args.eta)
    gp = _grid_params(args)
    threads = _threads(args.threads)
    initial = task.initial_q if task.mode == CHAINED else None
    results = []
    for k in range(len(task.legs) if legs is None else legs):
        result = plan(model, scene, task.leg_path(k), gp, eta, initial=initial, threads=threads)
        results.append(result)
        initial = result.trajectory[-1]
    return results


def _write_all(files: dict[Path, str | bytes]) -> list[str]:
    for path, content in files.items():
        atomic_write(path, content)
    return [str(p) for p in files]


# ------------------------------------------------------------ subcommands

def cmd_plan(args) -> int:
    model, scene, task = _inputs(args)
    budget = args.budget if args.budget is not None else task.budget_s
    results = _plan_legs(model, scene, task, args)
    out = Path(args.out_dir)
    report = RunReport(budget_s=budget)
    files: dict[Path, str | bytes] = {}
    ellipsoids = []
    for k, result in enumerate(results):
        path = task.leg_path(k)
        audit = audit_trajectory(model, scene, path, result.trajectory)
        within = result.timing <= budget
        if not within:
            print(f"warning: leg {k} took {result.timing:.2f} s, over the {budget:.2f} s budget",
                  file=sys.stderr)
        report.legs.append(LegReport(k, result.total_cost, result.terminal_mma, result.timing,
                                     within, audit.summary(), len(audit.rank_deficient)))
        files[out / f"leg{k}_trajectory.csv"] = trajectory_csv(result.trajectory, path.tau)
        ell = force_ellipsoid(model, result.trajectory[-1]).to_dict()
        ell.update(leg=k, q=[float(v) for v in result.trajectory[-1]])
        ellipsoids.append(ell)
        if args.export_grid:
            files[out / f"leg{k}_grid.csv"] = grid_csv(result.grid)
    files[out / "ellipsoids.json"] = json.dumps(ellipsoids, indent=2) + "\n"
    written = _write_all(files)
    if args.export_grid:
        for k, result in enumerate(results):
            maps = export_null_space_map(result.grid, out / f"leg{k}_maps", result.nodes)
            written.extend(str(p) for p in maps)
    report.artifacts = written + [str(out / "report.json")]
    atomic_write(out / "report.json", report.to_json())
    for leg in report.legs:
        print(f"leg {leg.leg}: cost {leg.total_cost:.6f}  MMA {leg.terminal_mma:.4f}  "
              f"{leg.wall_clock_s:.2f} s  {'ok' if leg.audit['clean'] else 'AUDIT FAILED'}")
    return EXIT_OK if all(leg.audit["clean"] for leg in report.legs) else EXIT_AUDIT


def cmd_compare(args) -> int:
    model, scene, task = _inputs(args)
    eta = _eta(args.eta)
    gp = _grid_params(args)
    threads = _threads(args.threads)
    dp_initial = fs_initial = task.initial_q if task.mode == CHAINED else None
    rows = []
    for k in range(len(task.legs)):
        path = task.leg_path(k)
        row = {"leg": k}
        try:
            dp = plan(model, scene, path, gp, eta, initial=dp_initial, threads=threads)
            dp_initial = dp.trajectory[-1]
            row.update(dp_feasible=True, dp_cost=dp.total_cost, dp_mma=dp.terminal_mma,
                       dp_time_s=dp.timing)
        except (UnreachableTask, NoFeasiblePath, SingularConfiguration) as exc:
            dp_initial = None  # the chain is broken; the next leg starts free
            row.update(dp_feasible=False, dp_error=str(exc))
        try:
            fs = fixed_slide_plan(model, scene, path, args.fixed_slide, fs_initial, eta)
            fs_initial = fs.trajectory[-1]
            row.update(fixed_feasible=True, fixed_cost=fs.total_cost, fixed_mma=fs.terminal_mma,
                       fixed_time_s=fs.timing)
        except (FixedSlideInfeasible, SingularConfiguration) as exc:
            fs_initial = None
            row.update(fixed_feasible=False, fixed_error=str(exc))
        if row.get("dp_feasible") and row.get("fixed_feasible") and row["fixed_cost"] > 0:
            row["cost_ratio"] = row["dp_cost"] / row["fixed_cost"]
        rows.append(row)
    print(f"{'leg':>3}  {'DP MMA':>8}  {'DP cost':>9}  {'fixed MMA':>9}  {'fixed cost':>10}  ratio")
    for r in rows:
        dp = f"{r['dp_mma']:8.4f}  {r['dp_cost']:9.5f}" if r["dp_feasible"] else f"{'infeasible':>19}"
        fs = (f"{r['fixed_mma']:9.4f}  {r['fixed_cost']:10.5f}" if r["fixed_feasible"]
              else f"{'infeasible':>21}")
        ratio = f"{r['cost_ratio']:.4f}" if "cost_ratio" in r else "-"
        print(f"{r['leg']:>3}  {dp}  {fs}  {ratio}")
    ratios = [r["cost_ratio"] for r in rows if "cost_ratio" in r]
    summary = {"fixed_slide_m": args.fixed_slide, "legs": rows,
               "mean_cost_ratio": float(np.mean(ratios)) if ratios else None}
    if args.out_dir:
        atomic_write(Path(args.out_dir) / "compare.json", json.dumps(summary, indent=2) + "\n")
    return EXIT_OK


def cmd_check(args) -> int:
    model, scene, task = _inputs(args)
    problems = []
    for k, traj_file in enumerate(args.trajectory):
        leg = args.leg + k
        if leg >= len(task.legs):
            raise ModelError(f"task has no leg {leg}")
        path = task.leg_path(leg)
        try:
            t, q = read_trajectory_csv(traj_file)
        except (OSError, ValueError) as exc:
            raise ModelError(f"cannot read trajectory {traj_file}: {exc}") from exc
        if q.shape[0] != len(path.poses):
            problems.append(f"leg {leg}: {q.shape[0]} rows for {len(path.poses)} waypoints")
            continue
        audit = audit_trajectory(model, scene, path, q)
        for i, tag, detail in audit.violations:
            problems.append(f"leg {leg} waypoint {i}: {tag} {detail}")
        for i in audit.rank_deficient:
            problems.append(f"leg {leg} waypoint {i}: augmented Jacobian rank deficient")
        print(f"leg {leg}: {len(path.poses)} waypoints, max FK error "
              f"{max(audit.max_position_error, audit.max_rotation_error):.2e}")
    if args.grid:
        grid = read_grid_csv(args.grid, task.leg_path(args.leg).tau)
        for i, j, g in bellman_violations(grid, model.qd_max):
            problems.append(f"grid node (i={i}, j={j}, g={g}): Bellman inconsistency")
    for p in problems:
        print(p, file=sys.stderr)
    print("audit clean" if not problems else f"audit failed: {len(problems)} violation(s)")
    return EXIT_OK if not problems else EXIT_AUDIT


def cmd_export_grid(args) -> int:
    model, scene, task = _inputs(args)
    if not 0 <= args.leg < len(task.legs):
        raise ModelError(f"task has no leg {args.leg}")
    result = _plan_legs(model, scene, task, args, legs=args.leg + 1)[-1]
    out = Path(args.out_dir)
    _write_all({out / f"leg{args.leg}_grid.csv": grid_csv(result.grid)})
    maps = export_null_space_map(result.grid, out / f"leg{args.leg}_maps", result.nodes)
    print(f"wrote {out / f'leg{args.leg}_grid.csv'} and {len(maps)} layer maps")
    return EXIT_OK


# ------------------------------------------------------------ parser

def _common(p: argparse.ArgumentParser, planning: bool = True) -> None:
    p.add_argument("--robot", help="robot JSON (default: bundled rail-mounted six-axis arm)")
    p.add_argument("--scene", help="scene JSON (default: bundled drilling cell)")
    p.add_argument("--task", required=True, help="task JSON: holes, legs, mode")
    if planning:
        p.add_argument("--u-res", type=float, default=DEFAULT_RESOLUTION,
                       help="slide grid resolution in m (default 0.0132)")
        p.add_argument("--eta", type=float, nargs=6, metavar="E",
                       help="tool-frame wrench direction for the MMA (default 0 0 1 0 0 0, "
                            "the drilling axis)")
        p.add_argument("--threads", type=int,
                       help=f"worker threads for the forward pass (default ${THREADS_ENV} or 1)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="redunplan", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("plan", help="plan every leg of a task")
    _common(p)
    p.add_argument("--budget", type=float,
                   help=f"planning-time budget per leg in s (default: task value, else "
                        f"{DEFAULT_BUDGET}, the drilling time of one hole)")
    p.add_argument("--out-dir", default="out", help="output directory (default ./out)")
    p.add_argument("--export-grid", action="store_true", help="also write grid CSVs and layer maps")
    p.set_defaults(func=cmd_plan)

    p = sub.add_parser("compare", help="DP plan against a fixed-slide baseline, leg by leg")
    _common(p)
    p.add_argument("--fixed-slide", type=float, required=True, help="frozen slide value in m")
    p.add_argument("--out-dir", help="write compare.json here")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("check", help="audit planned trajectories (and optionally a grid)")
    _common(p, planning=False)
    p.add_argument("--trajectory", nargs="+", required=True,
                   help="trajectory CSVs, one per leg starting at --leg")
    p.add_argument("--leg", type=int, default=0, help="leg index of the first trajectory")
    p.add_argument("--grid", help="grid CSV of leg --leg for the Bellman re-sweep")
    p.set_defaults(func=cmd_check)

    p = sub.add_parser("export-grid", help="write the grid CSV and layer maps of one leg")
    _common(p)
    p.add_argument("--leg", type=int, default=0, help="leg index (earlier legs are planned first)")
    p.add_argument("--out-dir", default="out", help="output directory (default ./out)")
    p.set_defaults(func=cmd_export_grid)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ModelError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG
    except UnreachableTask as exc:
        print(f"unreachable task: {exc}", file=sys.stderr)
        return EXIT_UNREACHABLE
    except NoFeasiblePath as exc:
        print(f"no feasible path: {exc}", file=sys.stderr)
        return EXIT_NO_PATH
    except SingularConfiguration as exc:
        print(f"singular configuration: {exc}", file=sys.stderr)
        return EXIT_SINGULAR
    except RedunplanError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_BAD_CONFIG


if __name__ == "__main__":
    sys.exit(main())
