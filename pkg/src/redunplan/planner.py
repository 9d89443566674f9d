"""Discrete dynamic-programming redundancy resolution.

The slide range is sampled on a regular grid.  At every waypoint ``i`` and slide
sample ``j`` the closed-form IK yields a handful of configurations, one per
layer ``g`` (IK branch plus angle representative).  A forward pass relaxes the
cumulative joint displacement stage by stage over velocity-admissible
transitions, the stiffest reachable terminal node is selected, and the
trajectory is read back through the predecessor links.

Ties are broken by the lowest ``(j, g)`` everywhere: nodes of a stage are
always enumerated column by column, layer by layer.
"""
from __future__ import annotations

import itertools
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .collision import Scene
from .constraints import admissible_mask, velocity_ok
from .errors import InstanceTooLarge, NoFeasiblePath, SingularConfiguration, UnreachableTask
from .ik import TWO_PI, expanded_joints, ik_batch
from .kinematics import N_JOINTS, SLIDE, RobotModel, TaskPath
from .stiffness import ETA_Z, mma_batch

Stiffness = Callable[[np.ndarray], np.ndarray]

DEFAULT_RESOLUTION = 0.0132  # m
NODE_MATCH_TOL = 1e-6
_JOINT_ORDER = (0, 5, 3, 1, 2, 4, SLIDE)


@dataclass
class GridParams:
    u_min: float | None = None
    u_max: float | None = None
    u_resolution: float = DEFAULT_RESOLUTION


def slide_samples(u_min: float, u_max: float, resolution: float) -> np.ndarray:
    if not u_min < u_max:
        raise ValueError("u_min must be below u_max")
    if not resolution > 0:
        raise ValueError("slide resolution must be positive")
    n_j = int(np.floor((u_max - u_min) / resolution + 1e-9))
    return u_min + np.arange(n_j + 1) * resolution


def displacement(diff, weights=None):
    """Weighted sum of absolute joint displacements over the last axis.

    Summed joint by joint in index order so that scalar and batched callers
    produce bitwise identical values.
    """
    a = np.abs(np.asarray(diff, dtype=float))
    if weights is not None:
        a = a * weights
    acc = a[..., 0]
    for k in range(1, a.shape[-1]):
        acc = acc + a[..., k]
    return acc


def local_cost(q_curr, q_prev, weights=None) -> float:
    """Sum of absolute joint displacements between consecutive waypoints.

    Radians and metres are added as they are; ``weights`` rescales joints.
    """
    return float(displacement(np.asarray(q_curr, dtype=float) - np.asarray(q_prev, dtype=float),
                              weights))


@dataclass
class DpGrid:
    """Node lattice of one path, stored as g-major layers of (i, j) matrices."""
    u: np.ndarray
    q: np.ndarray  # (N_g, N_i+1, N_j+1, 7), NaN where the layer has no solution
    feasible: np.ndarray  # (N_g, N_i+1, N_j+1)
    tau: float
    layers: list = field(default_factory=list)
    cost: np.ndarray | None = None
    pred_j: np.ndarray | None = None
    pred_g: np.ndarray | None = None
    in_C: np.ndarray | None = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=float)
        self.q = np.asarray(self.q, dtype=float)
        self.feasible = np.asarray(self.feasible, dtype=bool) & self.present
        if not self.layers:
            self.layers = [(g + 1,) for g in range(self.n_layers)]
        if self.cost is None:
            self.reset()
        slide = self.q[..., SLIDE]
        mismatch = self.present & (slide != self.u[None, None, :])
        if mismatch.any():
            raise ValueError("node slide values must equal their column's sample u_j")

    @property
    def present(self) -> np.ndarray:
        return ~np.isnan(self.q[..., 0])

    @property
    def n_layers(self) -> int:
        return self.q.shape[0]

    @property
    def n_stages(self) -> int:
        return self.q.shape[1]

    @property
    def n_columns(self) -> int:
        return self.q.shape[2]

    def reset(self):
        shape = self.q.shape[:3]
        self.cost = np.full(shape, np.inf)
        self.pred_j = np.full(shape, -1, dtype=np.int64)
        self.pred_g = np.full(shape, -1, dtype=np.int64)
        self.in_C = np.zeros(shape, dtype=bool)

    def stage_nodes(self, i: int, mask: np.ndarray | None = None):
        """``(j, g0)`` index arrays of a stage in (j, g) order; g0 is 0-based."""
        m = self.feasible[:, i, :] if mask is None else mask
        j, g0 = np.nonzero(m.T)
        return j, g0

    def node_count(self) -> int:
        return int(self.feasible.sum())


@dataclass
class PlanResult:
    trajectory: np.ndarray
    nodes: list
    total_cost: float
    stage_costs: np.ndarray
    terminal_mma: float
    timing: float = 0.0
    grid: DpGrid | None = None

    @property
    def terminal_node(self):
        return self.nodes[-1]


# ------------------------------------------------------------ grid building

def _shift_options(model: RobotModel, k: int) -> list[int]:
    lo = int(np.ceil((model.q_min[k] - np.pi) / TWO_PI))
    hi = int(np.floor((model.q_max[k] + np.pi) / TWO_PI))
    return list(range(lo, hi + 1))


def _stage_candidates(model: RobotModel, pose, u):
    """All IK configurations of one waypoint: (column, key, q) arrays."""
    q, valid = ik_batch(model, pose, u)
    joints = expanded_joints(model)
    cols, keys, qs = [], [], []
    for combo in itertools.product(*(_shift_options(model, k) for k in joints)):
        qq = q.copy()
        ok = valid.copy()
        for k, m in zip(joints, combo):
            if m:
                qq[..., k] = q[..., k] + m * TWO_PI
            ok &= (qq[..., k] >= model.q_min[k]) & (qq[..., k] <= model.q_max[k])
        jj, gg = np.nonzero(ok)
        if jj.size == 0:
            continue
        cols.append(jj)
        keys.extend((int(g) + 1,) + combo for g in gg)
        qs.append(qq[jj, gg])
    if not qs:
        return np.zeros(0, dtype=int), [], np.zeros((0, N_JOINTS))
    return np.concatenate(cols), keys, np.concatenate(qs)


def build_grid(model: RobotModel, scene: Scene | None, path: TaskPath,
               u_min: float | None = None, u_max: float | None = None,
               u_resolution: float = DEFAULT_RESOLUTION, margin: float = 0.0) -> DpGrid:
    """IK nodes of every waypoint at every slide sample, flagged by admissibility."""
    u_min = model.q_min[SLIDE] if u_min is None else u_min
    u_max = model.q_max[SLIDE] if u_max is None else u_max
    u = slide_samples(u_min, u_max, u_resolution)
    per_stage = []
    all_keys = set()
    for i, pose in enumerate(path.poses):
        cols, keys, qs = _stage_candidates(model, pose, u)
        ok = admissible_mask(model, scene, qs, margin) if len(keys) else np.zeros(0, dtype=bool)
        if not ok.any():
            raise UnreachableTask(f"waypoint {i} has no admissible configuration on the slide grid")
        per_stage.append((cols, keys, qs, ok))
        all_keys.update(keys)
    layers = sorted(all_keys)
    index = {key: n for n, key in enumerate(layers)}
    shape = (len(layers), len(path.poses), u.size)
    q = np.full(shape + (N_JOINTS,), np.nan)
    feasible = np.zeros(shape, dtype=bool)
    for i, (cols, keys, qs, ok) in enumerate(per_stage):
        g = np.array([index[k] for k in keys], dtype=int)
        q[g, i, cols] = qs
        feasible[g, i, cols] = ok
    return DpGrid(u=u, q=q, feasible=feasible, tau=path.tau, layers=layers)


# ------------------------------------------------------------ forward pass

def _match_node(grid: DpGrid, i: int, config, tol: float = NODE_MATCH_TOL):
    """Closest admissible node of stage ``i`` to ``config`` (within ``tol``), or None."""
    j, g0 = grid.stage_nodes(i)
    if j.size == 0:
        return None
    dist = np.abs(grid.q[g0, i, j] - np.asarray(config, dtype=float)).max(axis=-1)
    k = int(np.argmin(dist))
    if dist[k] > tol:
        return None
    return int(j[k]), int(g0[k])


def _relax_columns(columns, tgt_cols, tgt_q, src_u, src_q, src_cost, tau, qd_max,
                   weights, half_window, best_cost, best_src):
    for col_start, col_stop in columns:
        u_t = tgt_q[col_start, SLIDE]
        lo = np.searchsorted(src_u, u_t - half_window, side="left")
        hi = np.searchsorted(src_u, u_t + half_window, side="right")
        if lo >= hi:
            continue
        tq = tgt_q[col_start:col_stop]
        sq = src_q[lo:hi]
        # joint-by-joint velocity test, keeping only surviving pairs; the slide
        # component is last since the window already bounds it loosely
        k = _JOINT_ORDER[0]
        ok = np.abs((tq[:, None, k] - sq[None, :, k]) / tau) <= qd_max[k]
        ti, si = np.nonzero(ok)
        for k in _JOINT_ORDER[1:]:
            keep = np.abs((tq[ti, k] - sq[si, k]) / tau) <= qd_max[k]
            ti, si = ti[keep], si[keep]
        if ti.size == 0:
            continue
        total = np.full((tq.shape[0], sq.shape[0]), np.inf)
        total[ti, si] = src_cost[lo + si] + displacement(tq[ti] - sq[si], weights)
        arg = np.argmin(total, axis=1)
        val = total[np.arange(total.shape[0]), arg]
        reached = np.isfinite(val)
        rows = np.arange(col_start, col_stop)[reached]
        best_cost[rows] = val[reached]
        best_src[rows] = arg[reached] + lo


def forward_pass(grid: DpGrid, qd_max, weights=None, initial=None, threads: int = 1):
    """Fill ``cost``, predecessors and ``in_C`` of ``grid`` stage by stage."""
    grid.reset()
    qd_max = np.asarray(qd_max, dtype=float)
    j0, g0 = grid.stage_nodes(0)
    if initial is not None:
        hit = _match_node(grid, 0, initial)
        if hit is None:
            raise NoFeasiblePath("initial configuration is not an admissible node of stage 0")
        j0, g0 = np.array([hit[0]]), np.array([hit[1]])
    grid.in_C[g0, 0, j0] = True
    grid.cost[g0, 0, j0] = 0.0
    half_window = qd_max[SLIDE] * grid.tau * (1.0 + 1e-9)
    pool = ThreadPoolExecutor(threads) if threads > 1 else None
    try:
        for i in range(grid.n_stages - 1):
            sj, sg = grid.stage_nodes(i, grid.in_C[:, i, :])
            tj, tg = grid.stage_nodes(i + 1)
            if sj.size == 0 or tj.size == 0:
                break
            src_q = grid.q[sg, i, sj]
            src_cost = grid.cost[sg, i, sj]
            src_u = src_q[:, SLIDE]
            tgt_q = grid.q[tg, i + 1, tj]
            bounds = np.flatnonzero(np.diff(tj)) + 1
            starts = np.concatenate([[0], bounds])
            stops = np.concatenate([bounds, [tj.size]])
            columns = list(zip(starts.tolist(), stops.tolist()))
            best_cost = np.full(tj.size, np.inf)
            best_src = np.full(tj.size, -1, dtype=np.int64)
            args = (tj, tgt_q, src_u, src_q, src_cost, grid.tau, qd_max, weights,
                    half_window, best_cost, best_src)
            if pool is None:
                _relax_columns(columns, *args)
            else:
                chunks = np.array_split(np.arange(len(columns)), threads)
                futures = [pool.submit(_relax_columns, [columns[c] for c in chunk], *args)
                           for chunk in chunks if chunk.size]
                for f in futures:
                    f.result()
            reached = best_src >= 0
            rj, rg, rs = tj[reached], tg[reached], best_src[reached]
            grid.cost[rg, i + 1, rj] = best_cost[reached]
            grid.pred_j[rg, i + 1, rj] = sj[rs]
            grid.pred_g[rg, i + 1, rj] = sg[rs]
            grid.in_C[rg, i + 1, rj] = True
    finally:
        if pool is not None:
            pool.shutdown()


def select_terminal(grid: DpGrid, stiffness: Stiffness, terminal=None):
    """Stiffest node of the last reached set (the lowest (j, g) on ties)."""
    last = grid.n_stages - 1
    tj, tg = grid.stage_nodes(last, grid.in_C[:, last, :])
    if tj.size == 0:
        raise NoFeasiblePath("no admissible trajectory reaches the last waypoint")
    if terminal is not None:
        hit = _match_node(grid, last, terminal)
        if hit is None or not grid.in_C[hit[1], last, hit[0]]:
            raise NoFeasiblePath("pinned terminal configuration is not reachable")
        tj, tg = np.array([hit[0]]), np.array([hit[1]])
    values = np.asarray(stiffness(grid.q[tg, last, tj]), dtype=float)
    s_max, best = -np.inf, None
    for n in range(tj.size):
        s = values[n]
        if np.isnan(s):
            continue
        if s > s_max:
            s_max, best = s, n
    if best is None:
        raise SingularConfiguration("every reachable terminal node is singular along eta")
    return (int(tj[best]), int(tg[best])), float(s_max)


def backtrack(grid: DpGrid, terminal) -> list[tuple[int, int]]:
    j, g0 = terminal
    nodes = [(j, g0)]
    for i in range(grid.n_stages - 1, 0, -1):
        j, g0 = int(grid.pred_j[g0, i, j]), int(grid.pred_g[g0, i, j])
        nodes.append((j, g0))
    return nodes[::-1]


def _result(grid: DpGrid, nodes0, terminal_mma, weights, started) -> PlanResult:
    traj = np.array([grid.q[g0, i, j] for i, (j, g0) in enumerate(nodes0)])
    stage_costs = np.array([local_cost(traj[i], traj[i - 1], weights)
                            for i in range(1, len(traj))])
    j, g0 = nodes0[-1]
    return PlanResult(
        trajectory=traj,
        nodes=[(j, g0 + 1) for j, g0 in nodes0],
        total_cost=float(grid.cost[g0, grid.n_stages - 1, j]),
        stage_costs=stage_costs,
        terminal_mma=terminal_mma,
        timing=time.perf_counter() - started,
        grid=grid,
    )


def solve_grid(grid: DpGrid, qd_max, stiffness: Stiffness, weights=None, initial=None,
               terminal=None, threads: int = 1) -> PlanResult:
    """Forward pass, stiffest-terminal selection and backward reconstruction."""
    started = time.perf_counter()
    forward_pass(grid, qd_max, weights, initial, threads)
    node, s_max = select_terminal(grid, stiffness, terminal)
    return _result(grid, backtrack(grid, node), s_max, weights, started)


def model_stiffness(model: RobotModel, eta=ETA_Z, weights=None) -> Stiffness:
    return lambda Q: mma_batch(model, Q, eta, weights)


def plan(model: RobotModel, scene: Scene | None, path: TaskPath,
         grid_params: GridParams | None = None, eta=ETA_Z, *, initial=None, terminal=None,
         weights=None, compliance=None, threads: int = 1, margin: float = 0.0) -> PlanResult:
    """Minimum-displacement trajectory ending in the stiffest reachable configuration.

    ``initial`` fixes the first configuration (chained legs); ``terminal`` pins
    the last one instead of choosing it by stiffness.
    """
    started = time.perf_counter()
    gp = grid_params or GridParams()
    grid = build_grid(model, scene, path, gp.u_min, gp.u_max, gp.u_resolution, margin)
    result = solve_grid(grid, model.qd_max, model_stiffness(model, eta, compliance), weights,
                        initial, terminal, threads)
    result.timing = time.perf_counter() - started
    return result


# ------------------------------------------------------------ oracle

def brute_force_solve(grid: DpGrid, qd_max, stiffness: Stiffness, weights=None, initial=None,
                      terminal=None, limit: int = 10 ** 6) -> PlanResult:
    """Exhaustive enumeration of node sequences; the reference for :func:`solve_grid`.

    Sequences are extended stage by stage keeping every velocity-admissible
    prefix (no merging), the terminal is the stiffest reachable node, and among
    minimum-cost sequences the one whose nodes, read from the last stage
    backwards, have the lowest (j, g) wins.
    """
    started = time.perf_counter()
    qd_max = np.asarray(qd_max, dtype=float)
    n_stages = grid.n_stages
    stages = [grid.stage_nodes(i) for i in range(n_stages)]
    if initial is not None:
        hit = _match_node(grid, 0, initial)
        if hit is None:
            raise NoFeasiblePath("initial configuration is not an admissible node of stage 0")
        stages[0] = (np.array([hit[0]]), np.array([hit[1]]))
    sizes = [s[0].size for s in stages]
    if int(np.prod(sizes, dtype=float)) > limit:
        raise InstanceTooLarge(f"{np.prod(sizes, dtype=float):.3g} sequences exceed the guard {limit}")
    qs = [grid.q[g0, i, j] for i, (j, g0) in enumerate(stages)]

    seq = np.arange(sizes[0])[:, None]
    cost = np.zeros(sizes[0])
    for i in range(1, n_stages):
        prev = qs[i - 1][seq[:, -1]]
        a, b = np.meshgrid(np.arange(seq.shape[0]), np.arange(sizes[i]), indexing="ij")
        a, b = a.ravel(), b.ravel()
        cur = qs[i][b]
        ok = velocity_ok(cur, prev[a], grid.tau, qd_max)
        a, b = a[ok], b[ok]
        cost = cost[a] + displacement(qs[i][b] - prev[a], weights)
        seq = np.column_stack([seq[a], b])
        if seq.shape[0] == 0:
            raise NoFeasiblePath("no admissible trajectory reaches the last waypoint")

    end = np.unique(seq[:, -1])
    lj, lg = stages[-1]
    if terminal is not None:
        hit = _match_node(grid, n_stages - 1, terminal)
        pos = [n for n in end if (lj[n], lg[n]) == hit] if hit is not None else []
        if not pos:
            raise NoFeasiblePath("pinned terminal configuration is not reachable")
        end = np.array(pos)
    values = np.asarray(stiffness(qs[-1][end]), dtype=float)
    if np.all(np.isnan(values)):
        raise SingularConfiguration("every reachable terminal node is singular along eta")
    best_end = end[int(np.nanargmax(values))]
    keep = seq[:, -1] == best_end
    seq, cost = seq[keep], cost[keep]
    optimal = cost == cost.min()
    seq = seq[optimal]
    order = np.lexsort([seq[:, i] for i in range(n_stages - 1)]) if n_stages > 1 else [0]
    chosen = seq[order[0]]
    nodes0 = [(int(stages[i][0][n]), int(stages[i][1][n])) for i, n in enumerate(chosen)]
    traj = np.array([qs[i][n] for i, n in enumerate(chosen)])
    stage_costs = np.array([local_cost(traj[i], traj[i - 1], weights) for i in range(1, n_stages)])
    return PlanResult(
        trajectory=traj,
        nodes=[(j, g0 + 1) for j, g0 in nodes0],
        total_cost=float(cost.min()),
        stage_costs=stage_costs,
        terminal_mma=float(np.nanmax(values)),
        timing=time.perf_counter() - started,
        grid=grid,
    )


def brute_force_plan(model: RobotModel, scene: Scene | None, path: TaskPath,
                     grid_params: GridParams | None = None, eta=ETA_Z, *, initial=None,
                     terminal=None, weights=None, compliance=None, margin: float = 0.0,
                     limit: int = 10 ** 6) -> PlanResult:
    gp = grid_params or GridParams()
    grid = build_grid(model, scene, path, gp.u_min, gp.u_max, gp.u_resolution, margin)
    return brute_force_solve(grid, model.qd_max, model_stiffness(model, eta, compliance),
                             weights, initial, terminal, limit)


# ------------------------------------------------------------ audits

def bellman_violations(grid: DpGrid, qd_max, weights=None) -> list[tuple[int, int, int]]:
    """Nodes whose stored cost differs from the best in-B predecessor cost plus step.

    Feasible nodes without an admissible predecessor must be unreached (cost
    +inf, not in C); infeasible nodes must never be reached.  Returns ``(i, j, g)`` triples with 1-based ``g``.  Exact comparison.
    """
    qd_max = np.asarray(qd_max, dtype=float)
    bad = []
    for i in range(grid.n_stages):
        mask = grid.feasible[:, i, :] | grid.in_C[:, i, :] | np.isfinite(grid.cost[:, i, :])
        tj, tg = grid.stage_nodes(i, mask)
        if i == 0:
            for j, g0 in zip(tj, tg):
                reached = grid.in_C[g0, 0, j]
                if grid.cost[g0, 0, j] != (0.0 if reached else np.inf):
                    bad.append((0, int(j), int(g0) + 1))
            continue
        sj, sg = grid.stage_nodes(i - 1, grid.in_C[:, i - 1, :] & np.isfinite(grid.cost[:, i - 1, :]))
        sq = grid.q[sg, i - 1, sj]
        sc = grid.cost[sg, i - 1, sj]
        for col in np.unique(tj):
            rows = np.flatnonzero(tj == col)
            q = grid.q[tg[rows], i, col]
            near = np.abs((q[0, SLIDE] - sq[:, SLIDE]) / grid.tau) <= qd_max[SLIDE]
            expected = np.full(rows.size, np.inf)
            cand_q, cand_c = sq[near], sc[near]
            # cheap exact pre-test on joint 1, then the full velocity check on survivors
            a, b = np.nonzero(np.abs((q[:, None, 0] - cand_q[None, :, 0]) / grid.tau) <= qd_max[0])
            ok = velocity_ok(q[a], cand_q[b], grid.tau, qd_max)
            a, b = a[ok], b[ok]
            if a.size:
                np.minimum.at(expected, a, cand_c[b] + displacement(q[a] - cand_q[b], weights))
            for n, r in enumerate(rows):
                g0 = tg[r]
                # infeasible nodes must stay unreached; feasible ones hold the exact minimum
                want = expected[n] if grid.feasible[g0, i, col] else np.inf
                if want != grid.cost[g0, i, col] or grid.in_C[g0, i, col] != np.isfinite(want):
                    bad.append((i, int(col), int(g0) + 1))
    return bad
