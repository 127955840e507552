"""Grid sweeps behind the study's maps: bounce counts and terminal
log-error over co-state seeds, and the optimal-branch / value maps over
initial states.

Cells never interact, so every sweep is deterministic: evaluation order,
batching, and worker counts change the wall clock only. State-grid rows
are solved as one lockstep multistart batch per row (each row is
axis1-index fixed, axis2 varying), which is what makes desk-scale grids
feasible on one core.
"""
from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .ball import BallState, Costate, PhysParams, zeno_time_printed, \
    zeno_time_series
from .exactflow import STATUS_HORIZON, propagate_batch
from .hybrid import IntegratorConfig
from .shooting import SolverConfig, _seed_lattice, _solve_pairs, \
    _results_from, dedupe_and_sort, j_shoot
from .zeno import Branch, Infeasible, is_zeno_locally_optimal, \
    optimal_switch, true_value

__all__ = [
    "NoRoot",
    "Axis",
    "GridSpec",
    "CostateCell",
    "StateCell",
    "sweep_costate_grid",
    "sweep_state_grid",
    "iter_state_rows",
    "boundary_curve",
    "config_hash",
    "write_costate_csv",
    "write_state_csv",
    "write_boundary_csv",
    "write_metadata",
    "costate_fields",
    "state_fields",
]


class NoRoot(RuntimeError):
    """The optimality boundary does not cross the sampled interval."""


@dataclass(frozen=True)
class Axis:
    name: str
    lo: float
    hi: float
    n: int

    def __post_init__(self):
        if not self.lo < self.hi:
            raise ValueError(f"axis {self.name!r}: lo must be below hi")
        if self.n < 2:
            raise ValueError(f"axis {self.name!r}: need at least 2 points")

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.n)


@dataclass(frozen=True)
class GridSpec:
    axis1: Axis
    axis2: Axis


@dataclass(frozen=True)
class CostateCell:
    """One raw shoot from a co-state seed: bounce count and terminal
    log-error, or the Zeno marker."""

    seed: Costate
    bounces: int
    zeno: bool
    log_error: float


@dataclass(frozen=True)
class StateCell:
    """Per-initial-state record: both branch costs, the winner, and the
    local-optimality classification under both Zeno-time variants."""

    x0: float
    p0: float
    j_shoot: float
    j_zeno: float
    j_true: float
    branch: str
    optimal_bounces: int
    locally_optimal_series: bool
    locally_optimal_printed: bool


def default_costate_grid() -> GridSpec:
    return GridSpec(Axis("seed_px", -2.0, 2.0, 201),
                    Axis("seed_pp", -2.0, 2.0, 201))


def default_state_grid(n: int = 101) -> GridSpec:
    return GridSpec(Axis("x0", 0.0, 2.0, n), Axis("p0", -2.0, 2.0, n))


def sweep_costate_grid(x0: BallState, grid: GridSpec, params: PhysParams,
                       cfg: IntegratorConfig | None = None
                       ) -> list[list[CostateCell]]:
    """Raw shoots over a co-state seed lattice; no root solving.

    Returns the cell matrix indexed [i][j] with axis1 (seed p_x) outer
    and axis2 (seed p_p) inner. Zeno cells carry the bounce count reached
    before collapse and a NaN log-error.
    """
    cfg = cfg or IntegratorConfig()
    u = grid.axis1.values()
    v = grid.axis2.values()
    n1, n2 = u.size, v.size
    y0 = np.empty((n1 * n2, 5))
    y0[:, 0] = x0.x
    y0[:, 1] = x0.p
    y0[:, 2] = np.repeat(u, n2)
    y0[:, 3] = np.tile(v, n1)
    y0[:, 4] = 0.0
    res = propagate_batch(y0, 0.0, params.t_f, params, cfg)
    ok = res.status == STATUS_HORIZON
    miss2 = (res.y[:, 0] - params.x_f) ** 2 + (res.y[:, 1] - params.p_f) ** 2
    with np.errstate(divide="ignore"):
        log_err = np.where(ok, np.log(miss2), np.nan)
    matrix = []
    for i in range(n1):
        row = []
        for j in range(n2):
            k = i * n2 + j
            row.append(CostateCell(
                seed=Costate(px=float(u[i]), pp=float(v[j])),
                bounces=int(res.bounces[k]), zeno=not bool(ok[k]),
                log_error=float(log_err[k])))
        matrix.append(row)
    return matrix


def _state_row(args):
    """Solve one grid row of initial states: a single lockstep multistart
    across all (cell, seed) pairs of the row."""
    i, x0v, p0_values, params, cfg, scfg = args
    lattice = _seed_lattice(scfg)
    nseed = lattice.shape[0]
    ncell = p0_values.size
    starts = np.empty((ncell * nseed, 2))
    starts[:, 0] = x0v
    starts[:, 1] = np.repeat(p0_values, nseed)
    seeds = np.tile(lattice, (ncell, 1))
    sols, _ = _solve_pairs(starts, seeds, params, cfg, scfg)

    _, j_star = optimal_switch(params)
    cells = []
    for jcell in range(ncell):
        chunk = sols[jcell * nseed:(jcell + 1) * nseed]
        roots = dedupe_and_sort(_results_from(lattice, chunk),
                                scfg.dedupe_radius)
        js = j_shoot(roots)
        best_bounces = roots[0].bounces if roots else -1
        state = BallState(x=float(x0v), p=float(p0_values[jcell]))
        loc_series = is_zeno_locally_optimal(state, params)
        loc_printed = is_zeno_locally_optimal(state, params,
                                              variant="printed")
        jz = j_star if loc_series else math.nan
        try:
            jt, branch = true_value(state, params, js)
            branch_name = branch.value
        except Infeasible:
            jt, branch_name = math.inf, "none"
        cells.append(StateCell(
            x0=float(x0v), p0=float(p0_values[jcell]), j_shoot=js,
            j_zeno=jz, j_true=jt, branch=branch_name,
            optimal_bounces=best_bounces,
            locally_optimal_series=loc_series,
            locally_optimal_printed=loc_printed))
    return i, cells


def iter_state_rows(grid: GridSpec, params: PhysParams,
                    cfg: IntegratorConfig | None = None,
                    scfg: SolverConfig | None = None,
                    workers: int = 1, start_row: int = 0):
    """Yield (row_index, cells) in axis1 order, starting at start_row.

    Rows are independent work items; with workers > 1 they are evaluated
    in a process pool and still yielded in order, so output is identical
    for any worker count.
    """
    cfg = cfg or IntegratorConfig()
    scfg = scfg or SolverConfig()
    x_values = grid.axis1.values()
    p_values = grid.axis2.values()
    tasks = [(i, float(x_values[i]), p_values, params, cfg, scfg)
             for i in range(start_row, x_values.size)]
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            yield from pool.map(_state_row, tasks)
    else:
        for t in tasks:
            yield _state_row(t)


def sweep_state_grid(grid: GridSpec, params: PhysParams,
                     cfg: IntegratorConfig | None = None,
                     scfg: SolverConfig | None = None,
                     workers: int = 1) -> list[list[StateCell]]:
    """Full multistart per cell over an initial-state grid."""
    return [cells for _, cells in
            iter_state_rows(grid, params, cfg, scfg, workers)]


def _zeno_time_variant(x: float, p: float, params: PhysParams,
                       variant: str) -> float:
    s = BallState(x=x, p=p)
    if variant == "series":
        return zeno_time_series(s, params)
    if variant == "printed":
        return zeno_time_printed(s, params)
    raise ValueError(f"unknown variant {variant!r}")


def boundary_curve(params: PhysParams, x_values, variant: str = "series",
                   p_hi: float = 50.0) -> np.ndarray:
    """Local-optimality boundary: solve zeno_time(x, p) + T* = T_f for p.

    The zeno time is U-shaped in p at fixed x (it decreases for
    sufficiently negative p because a downward throw feeds the cascade),
    so the solve brackets the increasing branch only, from the closed-form
    minimizer upward. x values whose slice never reaches the level are
    skipped; if no x in the range crosses it, NoRoot is raised. Returns
    an (k, 2) array of (x, p) samples satisfying the equation to 1e-9.
    """
    m, g, c = params.m, params.g, params.c
    if variant == "series":
        big_a = (1.0 + c * c) / (1.0 - c * c)
    elif variant == "printed":
        big_a = 3.0 / (1.0 - c * c)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    level = params.t_f - math.sqrt(6.0 / g)
    if level <= 0.0:
        raise NoRoot("horizon leaves no room for the steering window")

    pts = []
    for x in np.asarray(x_values, dtype=float):
        if x < 0.0:
            continue
        # argmin of the zeno time over p at this height
        p_lo = -m * math.sqrt(2.0 * g * x / (big_a * big_a - 1.0))

        def f(p, x=x):
            return _zeno_time_variant(x, p, params, variant) - level

        if f(p_lo) > 0.0:
            continue  # the whole slice is above the level
        hi = max(p_lo + 1.0, 1.0)
        while f(hi) < 0.0 and hi < p_hi:
            hi = min(2.0 * hi, p_hi)
        if f(hi) < 0.0:
            continue
        root = brentq(f, p_lo, hi, xtol=1e-13, rtol=8.9e-16)
        pts.append((float(x), float(root)))
    if not pts:
        raise NoRoot("boundary does not cross the sampled range")
    return np.array(pts)


def config_hash(payload: dict) -> str:
    """Stable hash of a JSON-serializable configuration record."""
    blob = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode()).hexdigest()


def _fmt(v) -> str:
    return repr(float(v))


COSTATE_HEADER = ["seed_px", "seed_pp", "bounces", "zeno", "log_error"]

STATE_HEADER = ["x0", "p0", "j_shoot", "j_zeno", "j_true", "branch",
                "optimal_bounces", "locally_optimal_series",
                "locally_optimal_printed"]


def costate_row(cell: CostateCell) -> list:
    return [_fmt(cell.seed.px), _fmt(cell.seed.pp), cell.bounces,
            int(cell.zeno), _fmt(cell.log_error)]


def state_row(cell: StateCell) -> list:
    return [_fmt(cell.x0), _fmt(cell.p0), _fmt(cell.j_shoot),
            _fmt(cell.j_zeno), _fmt(cell.j_true), cell.branch,
            cell.optimal_bounces, int(cell.locally_optimal_series),
            int(cell.locally_optimal_printed)]


def write_costate_csv(matrix: list[list[CostateCell]], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(COSTATE_HEADER)
        for row in matrix:
            for cell in row:
                w.writerow(costate_row(cell))


def write_state_csv(rows: list[list[StateCell]], path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(STATE_HEADER)
        for row in rows:
            for cell in row:
                w.writerow(state_row(cell))


def write_boundary_csv(points: np.ndarray, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "p"])
        for x, p in points:
            w.writerow([_fmt(x), _fmt(p)])


def write_metadata(record: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


def costate_fields(matrix: list[list[CostateCell]]):
    """(bounces, log_error) value arrays for rendering; Zeno cells are NaN
    in both."""
    n1, n2 = len(matrix), len(matrix[0])
    b = np.full((n1, n2), np.nan)
    e = np.full((n1, n2), np.nan)
    for i in range(n1):
        for j in range(n2):
            cell = matrix[i][j]
            if not cell.zeno:
                b[i, j] = cell.bounces
                e[i, j] = cell.log_error
    return b, e


def state_fields(rows: list[list[StateCell]]):
    """(optimal_bounces, j_true) arrays for rendering; bounce field is NaN
    on Zeno-branch cells, value field is NaN on infeasible cells."""
    n1, n2 = len(rows), len(rows[0])
    b = np.full((n1, n2), np.nan)
    v = np.full((n1, n2), np.nan)
    for i in range(n1):
        for j in range(n2):
            cell = rows[i][j]
            if cell.branch == "shoot" and cell.optimal_bounces >= 0:
                b[i, j] = cell.optimal_bounces
            if math.isfinite(cell.j_true):
                v[i, j] = cell.j_true
    return b, v
