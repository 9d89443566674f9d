"""Grid exports: the node table as CSV and one colour raster per layer.

Raster legend (binary PPM, row = waypoint i, column = slide sample j):

    black       no IK solution in this layer
    dark grey   IK solution that violates limits or collides
    white       admissible but never reached by the forward pass
    blue..red   reached, coloured by cumulative cost (low..high)
    green       node on the returned trajectory
"""
from __future__ import annotations

from pathlib import Path

import numpy as np

from .errors import ModelError
from .planner import DpGrid
from .task import atomic_write

CSV_HEADER = ["i", "j", "g", "u"] + [f"q{k}" for k in range(1, 8)] + [
    "feasible", "in_C", "cost", "pred_j", "pred_g"]

ABSENT = (0, 0, 0)
INFEASIBLE = (64, 64, 64)
UNREACHED = (255, 255, 255)
ON_PATH = (0, 200, 0)


def _fmt(x) -> str:
    return format(float(x), ".17g")


def grid_csv(grid: DpGrid) -> str:
    """Every node that has an IK solution, ordered by (i, j, g); g and pred_g are 1-based."""
    lines = [",".join(CSV_HEADER)]
    g0, i, j = np.nonzero(grid.present)
    order = np.lexsort((g0, j, i))
    for n in order:
        gg, ii, jj = int(g0[n]), int(i[n]), int(j[n])
        q = grid.q[gg, ii, jj]
        pg = int(grid.pred_g[gg, ii, jj])
        row = [str(ii), str(jj), str(gg + 1), _fmt(grid.u[jj])] + [_fmt(v) for v in q] + [
            str(int(grid.feasible[gg, ii, jj])), str(int(grid.in_C[gg, ii, jj])),
            _fmt(grid.cost[gg, ii, jj]), str(int(grid.pred_j[gg, ii, jj])),
            str(pg + 1 if pg >= 0 else -1)]
        lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def read_grid_csv(path: str | Path, tau: float) -> DpGrid:
    """Rebuild a solved :class:`DpGrid` from :func:`grid_csv` output."""
    text = Path(path).read_text(encoding="utf-8").strip().splitlines()
    if not text or text[0].split(",") != CSV_HEADER:
        raise ModelError(f"{path} is not a grid file")
    rows = [r.split(",") for r in text[1:]]
    if not rows:
        raise ModelError(f"{path} holds no nodes")
    try:
        idx = np.array([[int(r[0]), int(r[1]), int(r[2])] for r in rows])
        vals = np.array([[float(x) for x in r[3:11]] for r in rows])
        flags = np.array([[int(r[11]), int(r[12])] for r in rows], dtype=bool)
        cost = np.array([float(r[13]) for r in rows])
        preds = np.array([[int(r[14]), int(r[15])] for r in rows])
    except (ValueError, IndexError) as exc:
        raise ModelError(f"malformed grid file {path}: {exc}") from exc
    n_g, n_i, n_j = idx[:, 2].max(), idx[:, 0].max() + 1, idx[:, 1].max() + 1
    u = np.full(n_j, np.nan)
    u[idx[:, 1]] = vals[:, 0]
    q = np.full((n_g, n_i, n_j, 7), np.nan)
    i, j, g0 = idx[:, 0], idx[:, 1], idx[:, 2] - 1
    q[g0, i, j] = vals[:, 1:]
    feasible = np.zeros(q.shape[:3], dtype=bool)
    feasible[g0, i, j] = flags[:, 0]
    grid = DpGrid(u=u, q=q, feasible=feasible, tau=tau)
    grid.cost[g0, i, j] = cost
    grid.in_C[g0, i, j] = flags[:, 1]
    grid.pred_j[g0, i, j] = preds[:, 0]
    grid.pred_g[g0, i, j] = np.where(preds[:, 1] > 0, preds[:, 1] - 1, -1)
    return grid


def follow_predecessors(grid: DpGrid, terminal) -> list[tuple[int, int]]:
    """Node chain back from ``terminal = (j, g)`` (1-based g), returned in stage order."""
    j, g = terminal
    nodes = [(int(j), int(g))]
    for i in range(grid.n_stages - 1, 0, -1):
        j, g0 = grid.pred_j[g - 1, i, j], grid.pred_g[g - 1, i, j]
        if j < 0:
            raise ModelError(f"broken predecessor chain at stage {i}")
        j, g = int(j), int(g0) + 1
        nodes.append((j, g))
    return nodes[::-1]


def _cost_colour(t: np.ndarray) -> np.ndarray:
    t = np.clip(t, 0.0, 1.0)[..., None]
    blue = np.array([30.0, 60.0, 255.0])
    red = np.array([255.0, 40.0, 30.0])
    return np.rint((1 - t) * blue + t * red).astype(np.uint8)


def layer_image(grid: DpGrid, g0: int, path_nodes=()) -> np.ndarray:
    """RGB array (N_i+1, N_j+1, 3) for 0-based layer ``g0``."""
    img = np.zeros(grid.q.shape[1:3] + (3,), dtype=np.uint8)
    img[:] = ABSENT
    img[grid.present[g0]] = INFEASIBLE
    img[grid.feasible[g0]] = UNREACHED
    reached = grid.in_C & np.isfinite(grid.cost)
    if reached.any():
        c = grid.cost[reached]
        lo, hi = c.min(), c.max()
        span = hi - lo if hi > lo else 1.0
        mine = reached[g0]
        img[mine] = _cost_colour((grid.cost[g0][mine] - lo) / span)
    for i, (j, g) in enumerate(path_nodes):
        if g - 1 == g0:
            img[i, j] = ON_PATH
    return img


def ppm_bytes(img: np.ndarray, scale: int = 1) -> bytes:
    if scale > 1:
        img = np.repeat(np.repeat(img, scale, axis=0), scale, axis=1)
    h, w = img.shape[:2]
    return f"P6\n{w} {h}\n255\n".encode("ascii") + np.ascontiguousarray(img, dtype=np.uint8).tobytes()


def export_null_space_map(grid: DpGrid, out_dir: str | Path, path_nodes=(), prefix: str = "layer",
                          scale: int = 4) -> list[Path]:
    """One PPM per layer, named ``{prefix}_g{g:03d}.ppm``; returns the written paths."""
    out_dir = Path(out_dir)
    written = []
    for g0 in range(grid.n_layers):
        target = out_dir / f"{prefix}_g{g0 + 1:03d}.ppm"
        atomic_write(target, ppm_bytes(layer_image(grid, g0, path_nodes), scale))
        written.append(target)
    return written
