"""Command-line front end: wire a key-value config file to the library
and emit trajectories, root tables, plans, sweep CSVs and heatmaps.

Subcommands: simulate, shoot, zeno, sweep. Every command is
deterministic given its inputs; worker counts change scheduling only.
Sweeps checkpoint their CSV every few rows and can resume after an
interruption, refusing to resume if the configuration changed.
"""
from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .ball import BallState, ConfigError, Costate, PhysParams, _PARAM_KEYS, \
    _parse_kv_file, make_ball_system, params_to_mapping, zeno_time_printed, \
    zeno_time_series
from .hybrid import IntegratorConfig, InvalidInitialState, Termination, \
    simulate_hybrid, write_impacts_csv, write_trajectory_csv
from .shooting import SolverConfig, multistart_solve, shoot, \
    write_seed_table_csv
from .sweeps import Axis, GridSpec, NoRoot, boundary_curve, config_hash, \
    costate_fields, sweep_costate_grid, iter_state_rows, state_fields, \
    write_boundary_csv, write_metadata, COSTATE_HEADER, STATE_HEADER, \
    costate_row, state_row
from .heatmap import bounce_palette, render_heatmap, value_palette
from .zeno import Branch, NotLocallyOptimal, optimal_switch, \
    synthesize_zeno_execution, true_value, write_zeno_plan, \
    write_zeno_trajectory_csv

__all__ = ["RunConfig", "load_run_config", "metadata_to_run_config", "main"]


@dataclass(frozen=True)
class RunConfig:
    """Everything a command needs: physics, integrator and solver knobs,
    sweep grids, and where artifacts go."""

    params: PhysParams
    integrator: IntegratorConfig
    solver: SolverConfig
    grids: dict
    output_dir: Path


_INT_KEYS = {"rel_tol": "rel_tol", "abs_tol": "abs_tol",
             "max_step": "max_step", "event_tol": "event_tol",
             "min_impact_gap": "min_impact_gap", "max_events": "max_events"}
_SOLVER_KEYS = {"seed_lo": "seed_lo", "seed_hi": "seed_hi",
                "seeds_per_axis": "seeds_per_axis", "root_tol": "root_tol",
                "max_iters": "max_iters", "fd_step": "fd_step",
                "dedupe_radius": "dedupe_radius"}
_GRID_KEYS = {"costate_grid_n": "costate_grid_n",
              "state_grid_n": "state_grid_n",
              "state_x_lo": "state_x_lo", "state_x_hi": "state_x_hi",
              "state_p_lo": "state_p_lo", "state_p_hi": "state_p_hi"}
_COUNT_FIELDS = {"max_events", "seeds_per_axis", "max_iters",
                 "costate_grid_n", "state_grid_n"}


def _default_grids(values: dict) -> dict:
    nc = int(values.get("costate_grid_n", 201))
    ns = int(values.get("state_grid_n", 101))
    return {
        "costate": GridSpec(Axis("seed_px", -2.0, 2.0, nc),
                            Axis("seed_pp", -2.0, 2.0, nc)),
        "state": GridSpec(Axis("x0", values.get("state_x_lo", 0.0),
                               values.get("state_x_hi", 2.0), ns),
                          Axis("p0", values.get("state_p_lo", -2.0),
                               values.get("state_p_hi", 2.0), ns)),
    }


def load_run_config(path: str | None, output_dir: str) -> RunConfig:
    """Assemble a RunConfig from an optional key-value file plus defaults."""
    values: dict = {}
    if path is not None:
        known = {**_PARAM_KEYS, **_INT_KEYS, **_SOLVER_KEYS, **_GRID_KEYS}
        values, _ = _parse_kv_file(path, known)
    phys = {k: values[k] for k in ("m", "g", "c", "t_f", "x_f", "p_f")
            if k in values}
    params = PhysParams(**phys)
    ikw = {v: (int(values[v]) if v in _COUNT_FIELDS else values[v])
           for v in _INT_KEYS.values() if v in values}
    integrator = IntegratorConfig(**ikw)
    skw = {}
    if "seed_lo" in values or "seed_hi" in values:
        lo = values.get("seed_lo", -2.0)
        hi = values.get("seed_hi", 2.0)
        skw["seed_box"] = ((lo, hi), (lo, hi))
    for v in ("seeds_per_axis", "max_iters"):
        if v in values:
            skw[v] = int(values[v])
    for v in ("root_tol", "fd_step", "dedupe_radius"):
        if v in values:
            skw[v] = values[v]
    solver = SolverConfig(**skw)
    return RunConfig(params=params, integrator=integrator, solver=solver,
                     grids=_default_grids(values),
                     output_dir=Path(output_dir))


def _config_payload(rc: RunConfig, kind: str, extra: dict) -> dict:
    grid = rc.grids[kind] if kind in rc.grids else None
    payload = {
        "kind": kind,
        "params": params_to_mapping(rc.params),
        "integrator": {
            "rel_tol": rc.integrator.rel_tol,
            "abs_tol": rc.integrator.abs_tol,
            "max_step": rc.integrator.max_step,
            "event_tol": rc.integrator.event_tol,
            "min_impact_gap": rc.integrator.min_impact_gap,
            "max_events": rc.integrator.max_events,
        },
        "solver": {
            "seed_box": [list(rc.solver.seed_box[0]),
                         list(rc.solver.seed_box[1])],
            "seeds_per_axis": rc.solver.seeds_per_axis,
            "root_tol": rc.solver.root_tol,
            "max_iters": rc.solver.max_iters,
            "fd_step": rc.solver.fd_step,
            "dedupe_radius": rc.solver.dedupe_radius,
        },
    }
    if grid is not None:
        payload["grid"] = {
            "axis1": [grid.axis1.name, grid.axis1.lo, grid.axis1.hi,
                      grid.axis1.n],
            "axis2": [grid.axis2.name, grid.axis2.lo, grid.axis2.hi,
                      grid.axis2.n],
        }
    payload.update(extra)
    return payload


def metadata_to_run_config(meta: dict, output_dir: str) -> RunConfig:
    """Rebuild the RunConfig a metadata sidecar describes."""
    p = meta["params"]
    params = PhysParams(m=p["m"], g=p["g"], c=p["c"], t_f=p["T_f"],
                        x_f=p["x_f"], p_f=p["p_f"])
    integ = IntegratorConfig(**meta["integrator"])
    s = meta["solver"]
    solver = SolverConfig(seed_box=(tuple(s["seed_box"][0]),
                                    tuple(s["seed_box"][1])),
                          seeds_per_axis=s["seeds_per_axis"],
                          root_tol=s["root_tol"], max_iters=s["max_iters"],
                          fd_step=s["fd_step"],
                          dedupe_radius=s["dedupe_radius"])
    grids = {}
    if "grid" in meta:
        a1 = meta["grid"]["axis1"]
        a2 = meta["grid"]["axis2"]
        grids[meta["kind"]] = GridSpec(Axis(a1[0], a1[1], a1[2], a1[3]),
                                       Axis(a2[0], a2[1], a2[2], a2[3]))
    return RunConfig(params=params, integrator=integ, solver=solver,
                     grids=grids, output_dir=Path(output_dir))


def _write_extended_csv(traj, path, dt: float) -> None:
    """Sampled extended-system trajectory: t, x, p, p_x, p_p, J_acc."""
    ts, ys = traj.sample(dt)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "p", "p_x", "p_p", "J_acc"])
        for t, y in zip(ts, ys):
            w.writerow([repr(float(t))] + [repr(float(v)) for v in y])


def _write_exact_impacts_csv(impact_times, t0: float, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "t_k", "gap_k"])
        prev = t0
        for k, t_k in enumerate(impact_times, start=1):
            w.writerow([k, repr(float(t_k)), repr(float(t_k - prev))])
            prev = t_k


def cmd_simulate(rc: RunConfig, args) -> int:
    params = rc.params
    out = rc.output_dir
    out.mkdir(parents=True, exist_ok=True)
    x0 = BallState(x=args.x0, p=args.p0)
    if (args.px0 is None) != (args.pp0 is None):
        print("give both --px0 and --pp0 or neither", file=sys.stderr)
        return 2

    if args.px0 is None:
        sysdef = make_ball_system(params)
        traj = simulate_hybrid(sysdef, np.array([x0.x, x0.p]), 0.0,
                               params.t_f, rc.integrator)
        write_trajectory_csv(traj, out / "trajectory.csv", ["x", "p"],
                             dt=params.t_f / 2000.0)
        write_impacts_csv(traj, out / "impacts.csv")
        print(f"termination: {traj.termination.name}")
        print(f"impacts: {len(traj.impact_times)}")
        if traj.t_inf is not None:
            print(f"t_inf: {traj.t_inf!r}")
            print(f"series formula: {zeno_time_series(x0, params)!r}")
            print(f"printed formula: {zeno_time_printed(x0, params)!r}")
        end = traj.segments[-1].end_state
        print(f"final state: x={float(end[0])!r} p={float(end[1])!r}")
        return 0

    outcome = shoot(x0, Costate(px=args.px0, pp=args.pp0), params,
                    rc.integrator, record=True)
    traj = outcome.trajectory
    _write_extended_csv(traj, out / "trajectory.csv", params.t_f / 2000.0)
    _write_exact_impacts_csv(traj.impact_times, 0.0, out / "impacts.csv")
    if outcome.zeno_hit:
        print("zeno_hit: true")
        print(f"bounces: {outcome.bounces}")
        if outcome.t_inf is not None:
            print(f"t_inf: {outcome.t_inf!r}")
    else:
        print("zeno_hit: false")
        print(f"terminal: x={outcome.terminal.x!r} p={outcome.terminal.p!r}")
        print(f"residual: ({float(outcome.residual[0])!r}, "
              f"{float(outcome.residual[1])!r})")
        print(f"bounces: {outcome.bounces}")
        print(f"cost: {outcome.cost!r}")
    return 0


_ROOTS_HEADER = ["seed_px", "seed_pp", "costate_px", "costate_pp",
                 "residual_norm", "bounces", "cost"]


def _write_roots_csv(results, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(_ROOTS_HEADER)
        for r in results:
            w.writerow([repr(float(r.seed.px)), repr(float(r.seed.pp)),
                        repr(float(r.costate.px)), repr(float(r.costate.pp)),
                        repr(float(r.residual_norm)), r.bounces,
                        repr(float(r.cost))])


def cmd_shoot(rc: RunConfig, args) -> int:
    params = rc.params
    out = rc.output_dir
    out.mkdir(parents=True, exist_ok=True)
    x0 = BallState(x=args.x0, p=args.p0)
    records: list = []
    results = multistart_solve(x0, params, rc.integrator, rc.solver,
                               workers=args.workers, records_out=records)
    write_seed_table_csv(records, out / "seeds.csv")
    _write_roots_csv(results, out / "roots.csv")
    if not results:
        print("no Zeno-free extremal found")
        print("J_shoot = inf")
        return 0
    best = results[0]
    best_traj = shoot(x0, best.costate, params, rc.integrator,
                      record=True).trajectory
    _write_extended_csv(best_traj, out / "best_trajectory.csv",
                        params.t_f / 2000.0)
    print(f"J_shoot = {best.cost!r}")
    print(f"roots: {len(results)}")
    print(f"best: bounces={best.bounces} costate_px={best.costate.px!r} "
          f"costate_pp={best.costate.pp!r} "
          f"residual_norm={best.residual_norm!r}")
    return 0


def _j_shoot_from_csv(path) -> float:
    best = math.inf
    with open(path, newline="") as fh:
        for row in csv.DictReader(fh):
            best = min(best, float(row["cost"]))
    return best


def cmd_zeno(rc: RunConfig, args) -> int:
    params = rc.params
    out = rc.output_dir
    out.mkdir(parents=True, exist_ok=True)
    x0 = BallState(x=args.x0, p=args.p0)
    j_from_shoot = math.inf
    if args.shoot_csv is not None:
        j_from_shoot = _j_shoot_from_csv(args.shoot_csv)
    try:
        samples, plan = synthesize_zeno_execution(x0, params,
                                                  sample_dt=args.sample_dt,
                                                  cfg=rc.integrator)
    except NotLocallyOptimal as exc:
        print(f"not locally optimal: {exc}", file=sys.stderr)
        return 1
    j_true, branch = true_value(x0, params, j_from_shoot)
    write_zeno_trajectory_csv(samples, out / "zeno_trajectory.csv")
    write_zeno_plan(plan, out / "zeno_plan.json",
                    extra={"j_shoot": j_from_shoot, "j_true": j_true,
                           "branch": branch.value})
    print(f"t_zeno = {plan.t_zeno!r}")
    print(f"t_on = {plan.t_on!r}")
    print(f"T_switch = {plan.T_switch!r}")
    print(f"J_zeno = {plan.J_zeno!r}")
    print(f"J_true = {j_true!r} ({branch.value})")
    return 0


def _checkpointed_rows(out_csv: Path, header: list, total_rows: int,
                       row_iter_factory, chash: str, resume: bool,
                       every: int = 10) -> None:
    """Stream rows into out_csv with a crash-safe sidecar.

    The sidecar stores the config hash, completed row count, and the byte
    offset of the partial file; resuming truncates to that offset so the
    final file is byte-identical to an uninterrupted run.
    """
    partial = out_csv.with_suffix(out_csv.suffix + ".partial")
    ckpt = out_csv.with_suffix(out_csv.suffix + ".checkpoint.json")
    start_row = 0
    if resume and ckpt.exists():
        state = json.loads(ckpt.read_text())
        if state["config_hash"] != chash:
            raise ConfigError(
                "refusing to resume: configuration changed since the "
                "checkpoint was written")
        start_row = int(state["rows_done"])
        with open(partial, "r+", newline="") as fh:
            fh.truncate(int(state["byte_offset"]))
    else:
        with open(partial, "w", newline="") as fh:
            csv.writer(fh).writerow(header)

    fh = open(partial, "a", newline="")
    w = csv.writer(fh)
    done = start_row
    try:
        for i, lines in row_iter_factory(start_row):
            for line in lines:
                w.writerow(line)
            done += 1
            if done % every == 0 and done < total_rows:
                fh.flush()
                os.fsync(fh.fileno())
                ckpt.write_text(json.dumps(
                    {"config_hash": chash, "rows_done": done,
                     "byte_offset": fh.tell()}))
        fh.flush()
        os.fsync(fh.fileno())
    finally:
        fh.close()
    os.replace(partial, out_csv)
    if ckpt.exists():
        ckpt.unlink()


def _read_csv_columns(path) -> dict:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return {k: [r[k] for r in rows] for k in rows[0]} if rows else {}


def _render_costate_artifacts(rc: RunConfig, out: Path) -> None:
    grid = rc.grids["costate"]
    cols = _read_csv_columns(out / "costate_sweep.csv")
    n1, n2 = grid.axis1.n, grid.axis2.n
    bounces = np.full((n1, n2), np.nan)
    logerr = np.full((n1, n2), np.nan)
    for k in range(n1 * n2):
        i, j = divmod(k, n2)
        if cols["zeno"][k] == "0":
            bounces[i, j] = float(cols["bounces"][k])
            logerr[i, j] = float(cols["log_error"][k])
    ax1 = (grid.axis1.name, grid.axis1.lo, grid.axis1.hi)
    ax2 = (grid.axis2.name, grid.axis2.lo, grid.axis2.hi)
    render_heatmap(bounces, bounce_palette(), out / "costate_bounces.svg",
                   x_axis=ax1, y_axis=ax2,
                   title="bounce count (cropped at 6)")
    render_heatmap(logerr, value_palette(), out / "costate_log_error.svg",
                   x_axis=ax1, y_axis=ax2, title="terminal log-error")


def _render_state_artifacts(rc: RunConfig, out: Path) -> None:
    grid = rc.grids["state"]
    cols = _read_csv_columns(out / "state_sweep.csv")
    n1, n2 = grid.axis1.n, grid.axis2.n
    bounces = np.full((n1, n2), np.nan)
    value = np.full((n1, n2), np.nan)
    for k in range(n1 * n2):
        i, j = divmod(k, n2)
        if cols["branch"][k] == "shoot" and \
                int(cols["optimal_bounces"][k]) >= 0:
            bounces[i, j] = float(cols["optimal_bounces"][k])
        jt = float(cols["j_true"][k])
        if math.isfinite(jt):
            value[i, j] = jt
    overlays = []
    xs = np.linspace(grid.axis1.lo, grid.axis1.hi, 201)
    for variant, style in (("series", {"stroke": "#000000", "width": 2.0}),
                           ("printed", {"stroke": "#666666", "width": 2.0,
                                        "dash": "6,4"})):
        try:
            pts = boundary_curve(rc.params, xs, variant)
        except NoRoot:
            continue
        keep = (pts[:, 1] >= grid.axis2.lo) & (pts[:, 1] <= grid.axis2.hi)
        if keep.any():
            overlays.append((pts[keep], style))
            write_boundary_csv(pts, out / f"boundary_{variant}.csv")
    ax1 = (grid.axis1.name, grid.axis1.lo, grid.axis1.hi)
    ax2 = (grid.axis2.name, grid.axis2.lo, grid.axis2.hi)
    render_heatmap(bounces, bounce_palette(),
                   out / "state_optimal_bounces.svg", x_axis=ax1, y_axis=ax2,
                   title="optimal bounce count (white = Zeno)",
                   overlays=overlays)
    render_heatmap(value, value_palette(), out / "state_value.svg",
                   x_axis=ax1, y_axis=ax2, title="value function",
                   overlays=overlays)


def cmd_sweep(rc: RunConfig, args) -> int:
    out = rc.output_dir
    out.mkdir(parents=True, exist_ok=True)
    params = rc.params
    kind = args.kind

    if kind == "costate":
        grid = rc.grids["costate"]
        x0 = BallState(x=args.x0, p=args.p0)
        payload = _config_payload(rc, "costate",
                                  {"x0": [x0.x, x0.p]})
        chash = config_hash(payload)

        def rows(start_row: int):
            matrix = sweep_costate_grid(x0, grid, params, rc.integrator)
            for i in range(start_row, grid.axis1.n):
                yield i, [costate_row(c) for c in matrix[i]]

        _checkpointed_rows(out / "costate_sweep.csv", COSTATE_HEADER,
                           grid.axis1.n, rows, chash, args.resume)
        write_metadata({**payload, "config_hash": chash},
                       out / "costate_sweep.meta.json")
        _render_costate_artifacts(rc, out)
        print(f"costate sweep done: {grid.axis1.n}x{grid.axis2.n} cells")
        return 0

    grid = rc.grids["state"]
    payload = _config_payload(rc, "state", {})
    chash = config_hash(payload)

    def rows(start_row: int):
        for i, cells in iter_state_rows(grid, params, rc.integrator,
                                        rc.solver, workers=args.workers,
                                        start_row=start_row):
            yield i, [state_row(c) for c in cells]

    _checkpointed_rows(out / "state_sweep.csv", STATE_HEADER, grid.axis1.n,
                       rows, chash, args.resume)
    write_metadata({**payload, "config_hash": chash},
                   out / "state_sweep.meta.json")
    _render_state_artifacts(rc, out)
    zeno_cells = 0
    cols = _read_csv_columns(out / "state_sweep.csv")
    if cols:
        zeno_cells = sum(1 for b in cols["branch"] if b == "zeno")
    print(f"state sweep done: {grid.axis1.n}x{grid.axis2.n} cells, "
          f"{zeno_cells} on the Zeno branch")
    return 0


def _build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="zenoball",
        description="Hybrid bouncing-ball simulation and indirect "
                    "optimal control")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, need_state=True):
        p.add_argument("--config", help="key-value parameter file")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--tf", type=float, help="override horizon time")
        p.add_argument("--workers", type=int,
                       default=os.cpu_count() or 1,
                       help="worker processes (never changes results)")
        if need_state:
            p.add_argument("--x0", type=float, required=True,
                           help="initial height")
            p.add_argument("--p0", type=float, required=True,
                           help="initial momentum")

    p = sub.add_parser("simulate", help="integrate one trajectory")
    common(p)
    p.add_argument("--px0", type=float, help="initial height co-state")
    p.add_argument("--pp0", type=float, help="initial momentum co-state")

    p = sub.add_parser("shoot", help="multistart boundary-value solve")
    common(p)

    p = sub.add_parser("zeno", help="synthesize the Zeno control execution")
    common(p)
    p.add_argument("--shoot-csv", help="roots.csv from a prior shoot run")
    p.add_argument("--sample-dt", type=float, default=0.01)

    p = sub.add_parser("sweep", help="grid sweep with CSV and heatmaps")
    p.add_argument("kind", choices=["costate", "state"])
    common(p, need_state=False)
    p.add_argument("--x0", type=float, default=0.1,
                   help="initial height for the costate sweep")
    p.add_argument("--p0", type=float, default=0.0,
                   help="initial momentum for the costate sweep")
    p.add_argument("--resume", action="store_true",
                   help="continue an interrupted sweep")
    return ap


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    if args.config is not None and not Path(args.config).is_file():
        print(f"config file not found: {args.config}", file=sys.stderr)
        return 2
    try:
        rc = load_run_config(args.config, args.out)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 2
    if args.tf is not None:
        rc = replace(rc, params=replace(rc.params, t_f=args.tf))
    try:
        if args.command == "simulate":
            return cmd_simulate(rc, args)
        if args.command == "shoot":
            return cmd_shoot(rc, args)
        if args.command == "zeno":
            return cmd_zeno(rc, args)
        return cmd_sweep(rc, args)
    except ConfigError as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except (InvalidInitialState, ValueError) as exc:
        print(str(exc), file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
