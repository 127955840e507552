"""Indirect shooting for the controlled ball: pick initial co-states so the
extended system lands on the target state at the horizon.

The residual map sends initial co-states (p_x0, p_p0) to the terminal miss
(x(T_f) - x_f, p(T_f) - p_f). Trajectories that collapse onto the Zeno
accumulation before the horizon have no terminal state; their residual is
NaN and any local solve touching them aborts. Roots are polished with a
damped-Newton dogleg iteration (forward-difference Jacobian, trust-region
globalization) and a multistart over a seed lattice collects the distinct
roots.

All arithmetic is deterministic: identical inputs produce bitwise
identical results. Seeds never interact, so batching and worker counts
change only the wall clock, never a reported number.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .ball import P_MIN, BallState, Costate, PhysParams, ZenoSingularity, \
    make_extended_system
from .exactflow import STATUS_HORIZON, ExactTrajectory, propagate_batch, \
    propagate_recorded
from .hybrid import HybridTrajectory, IntegratorConfig, InvalidInitialState, \
    Termination, simulate_hybrid

__all__ = [
    "SolverConfig",
    "ShootOutcome",
    "ShootResult",
    "SeedRecord",
    "shoot",
    "residual",
    "local_root_solve",
    "multistart_solve",
    "dedupe_and_sort",
    "j_shoot",
    "write_seed_table_csv",
]


@dataclass(frozen=True)
class SolverConfig:
    """Multistart and local-solve knobs for the shooting problem."""

    seed_box: tuple[tuple[float, float], tuple[float, float]] = ((-2.0, 2.0),
                                                                 (-2.0, 2.0))
    seeds_per_axis: int = 25
    root_tol: float = 1e-9
    max_iters: int = 200
    fd_step: float = 1e-7
    dedupe_radius: float = 1e-5

    def __post_init__(self):
        if self.seeds_per_axis < 1:
            raise ValueError("seeds_per_axis must be at least 1")
        if self.root_tol <= 0.0 or self.fd_step <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.dedupe_radius < 0.0:
            raise ValueError("dedupe_radius must be nonnegative")
        (a, b), (c, d) = self.seed_box
        if not (a <= b and c <= d):
            raise ValueError("seed_box bounds must be ordered")


@dataclass
class ShootOutcome:
    """Terminal data of one extended-system run.

    zeno_hit means the run never reached the horizon: the impact cascade
    collapsed (singular impact or detected geometric accumulation) or the
    event cap was exhausted. In that case the terminal state, residual and
    cost carry no information (NaN residual, NaN cost).
    """

    terminal: BallState | None
    residual: np.ndarray
    bounces: int
    cost: float
    zeno_hit: bool
    trajectory: ExactTrajectory | HybridTrajectory | None = None
    t_inf: float | None = None


@dataclass(frozen=True)
class ShootResult:
    """One converged shooting root."""

    seed: Costate
    costate: Costate
    residual_norm: float
    bounces: int
    cost: float


@dataclass(frozen=True)
class SeedRecord:
    """Per-seed multistart bookkeeping: outcome of the local solve started
    at the seed, plus whether the raw shoot from the seed itself hit Zeno."""

    seed: Costate
    converged: bool
    residual_norm: float
    bounces: int
    cost: float
    zeno_hit: bool


def _check_initial(x0: BallState) -> None:
    if x0.x < -1e-9:
        raise InvalidInitialState(f"height must be nonnegative, got {x0.x!r}")


def shoot(x0: BallState, costate0: Costate, params: PhysParams,
          cfg: IntegratorConfig | None = None, engine: str = "exact",
          p_min: float = P_MIN, record: bool = True) -> ShootOutcome:
    """Run the extended system from (x0, costate0, J=0) to the horizon.

    engine "exact" propagates the polynomial flight arcs in closed form;
    engine "rk45" drives the adaptive integrator on the same flow as an
    independent route. A start on the ground moving downward counts as an
    impact at t=0 (exact engine).
    """
    _check_initial(x0)
    cfg = cfg or IntegratorConfig()
    if engine == "exact":
        y0 = np.array([x0.x, x0.p, costate0.px, costate0.pp, 0.0])
        if record:
            traj = propagate_recorded(y0, 0.0, params.t_f, params, cfg,
                                      p_min=p_min)
            status, y_end, t_inf = traj.status, traj.y_end, traj.t_inf
            bounces = len(traj.impact_times)
        else:
            res = propagate_batch(y0[None, :], 0.0, params.t_f, params, cfg,
                                  p_min=p_min)
            status, y_end = int(res.status[0]), res.y[0]
            ti = float(res.t_inf[0])
            t_inf = None if math.isnan(ti) else ti
            bounces = int(res.bounces[0])
            traj = None
        ok = status == STATUS_HORIZON
    elif engine == "rk45":
        sysdef = make_extended_system(params, p_min=p_min)
        y0 = np.array([x0.x, x0.p, costate0.px, costate0.pp, 0.0])
        try:
            traj = simulate_hybrid(sysdef, y0, 0.0, params.t_f, cfg)
        except ZenoSingularity:
            return ShootOutcome(terminal=None,
                                residual=np.array([np.nan, np.nan]),
                                bounces=0, cost=np.nan, zeno_hit=True)
        ok = traj.termination is Termination.REACHED_HORIZON
        y_end = traj.segments[-1].end_state
        t_inf = traj.t_inf
        bounces = len(traj.impact_times)
    else:
        raise ValueError(f"unknown engine {engine!r}")

    if not ok:
        return ShootOutcome(terminal=None,
                            residual=np.array([np.nan, np.nan]),
                            bounces=bounces, cost=np.nan, zeno_hit=True,
                            trajectory=traj, t_inf=t_inf)
    term = BallState(x=float(y_end[0]), p=float(y_end[1]))
    return ShootOutcome(terminal=term,
                        residual=np.array([term.x - params.x_f,
                                           term.p - params.p_f]),
                        bounces=bounces, cost=float(y_end[4]),
                        zeno_hit=False, trajectory=traj, t_inf=t_inf)


def residual(x0: BallState, costate0: Costate, params: PhysParams,
             cfg: IntegratorConfig | None = None) -> np.ndarray:
    """Terminal miss of the shooting map; (NaN, NaN) on a Zeno collapse."""
    return shoot(x0, costate0, params, cfg, record=False).residual


# Trust-region dogleg constants.
_RHO_ACCEPT = 1e-4
_DELTA0 = 1.0
_DELTA_MAX = 100.0


def _dogleg_gen(z0: np.ndarray, scfg: SolverConfig):
    """Damped-Newton dogleg as a generator.

    Yields co-state points to evaluate; expects (residual, valid) back.
    Aborts (returns None) on a Zeno hit at any evaluation, a singular
    Jacobian, a collapsed trust region, or iteration exhaustion. Returns
    (z, residual_norm, n_iters) on convergence. The generator finishes
    successfully only right after receiving the evaluation at z, a fact
    the batch driver relies on to reuse that evaluation's data.
    """
    z = np.asarray(z0, dtype=float).copy()
    f, ok = yield z
    if not ok:
        return None
    fnorm = float(np.hypot(f[0], f[1]))
    if fnorm <= scfg.root_tol:
        return z, fnorm, 0
    h = scfg.fd_step
    delta = _DELTA0
    jac = None
    need_jac = True
    for it in range(1, scfg.max_iters + 1):
        if need_jac:
            f1, ok1 = yield z + np.array([h, 0.0])
            if not ok1:
                return None
            f2, ok2 = yield z + np.array([0.0, h])
            if not ok2:
                return None
            jac = np.column_stack([(f1 - f) / h, (f2 - f) / h])
            need_jac = False
        det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
        scale = max(abs(jac).max(), 1e-300)
        if not np.isfinite(det) or abs(det) < 1e-14 * scale * scale:
            return None  # Jacobian numerically singular
        p_newton = -np.array([jac[1, 1] * f[0] - jac[0, 1] * f[1],
                              -jac[1, 0] * f[0] + jac[0, 0] * f[1]]) / det
        grad = jac.T @ f
        gn2 = float(grad @ grad)
        jg = jac @ grad
        jg2 = float(jg @ jg)
        if np.linalg.norm(p_newton) <= delta:
            step = p_newton
        elif jg2 <= 0.0:
            step = -delta * grad / math.sqrt(gn2)
        else:
            p_cauchy = -(gn2 / jg2) * grad
            pc_norm = float(np.linalg.norm(p_cauchy))
            if pc_norm >= delta:
                step = p_cauchy * (delta / pc_norm)
            else:
                d = p_newton - p_cauchy
                a = float(d @ d)
                b = 2.0 * float(p_cauchy @ d)
                cq = float(p_cauchy @ p_cauchy) - delta * delta
                s = (-b + math.sqrt(max(b * b - 4.0 * a * cq, 0.0))) / (2.0 * a)
                step = p_cauchy + s * d
        f_trial, ok_t = yield z + step
        if not ok_t:
            return None
        lin = f + jac @ step
        pred = fnorm * fnorm - float(lin @ lin)
        tnorm = float(np.hypot(f_trial[0], f_trial[1]))
        act = fnorm * fnorm - tnorm * tnorm
        rho = act / pred if pred > 0.0 else -1.0
        step_len = float(np.linalg.norm(step))
        if rho >= _RHO_ACCEPT:
            z = z + step
            f = f_trial
            fnorm = tnorm
            need_jac = True
            if fnorm <= scfg.root_tol:
                return z, fnorm, it
        if rho < 0.25:
            delta = 0.25 * step_len
        elif rho > 0.75 and step_len >= 0.99 * delta:
            delta = min(2.0 * delta, _DELTA_MAX)
        if delta < 1e-13 * (1.0 + float(np.linalg.norm(z))):
            return None  # trust region collapsed without convergence
    return None


def _drive(seeds: np.ndarray, eval_batch, scfg: SolverConfig):
    """Run one dogleg generator per seed, batching all evaluations.

    eval_batch(idx, Z) evaluates the residual map at point Z[k] for
    generator idx[k] and returns (F, valid, bounces, cost) rows. Returns
    (solutions, first_evals): solutions[i] is None or a tuple
    (z, residual_norm, iters, bounces, cost), the trailing pair taken
    from the evaluation at z itself; first_evals[i] is the raw shoot at
    seed i, as (residual, valid, bounces, cost).
    """
    n = seeds.shape[0]
    gens = [_dogleg_gen(seeds[i], scfg) for i in range(n)]
    points = [next(g) for g in gens]
    solutions: list = [None] * n
    first: list = [None] * n
    active = list(range(n))
    fresh = set(active)
    while active:
        idx = np.asarray(active, dtype=np.intp)
        Z = np.stack([points[i] for i in active])
        F, valid, bounces, cost = eval_batch(idx, Z)
        still = []
        for row, i in enumerate(active):
            if i in fresh:
                first[i] = (F[row].copy(), bool(valid[row]),
                            int(bounces[row]), float(cost[row]))
                fresh.discard(i)
            try:
                points[i] = gens[i].send((F[row], bool(valid[row])))
                still.append(i)
            except StopIteration as stop:
                if stop.value is not None:
                    z, fnorm, iters = stop.value
                    solutions[i] = (z, fnorm, iters, int(bounces[row]),
                                    float(cost[row]))
        active = still
    return solutions, first


def _solve_pairs(starts: np.ndarray, seeds: np.ndarray, params: PhysParams,
                 cfg: IntegratorConfig, scfg: SolverConfig):
    """Lockstep dogleg solves for n independent problems.

    starts[i] is the (x, p) initial state for seed i; seeds[i] the initial
    co-state guess. Returns (solutions, first_evals) as in _drive.
    """
    starts = np.asarray(starts, dtype=float)
    target = np.array([params.x_f, params.p_f])

    def eval_batch(idx, Z):
        k = Z.shape[0]
        y0 = np.empty((k, 5))
        y0[:, :2] = starts[idx]
        y0[:, 2:4] = Z
        y0[:, 4] = 0.0
        res = propagate_batch(y0, 0.0, params.t_f, params, cfg)
        valid = res.status == STATUS_HORIZON
        F = np.where(valid[:, None], res.y[:, :2] - target, np.nan)
        cost = np.where(valid, res.y[:, 4], np.nan)
        return F, valid, res.bounces, cost

    return _drive(seeds, eval_batch, scfg)


def local_root_solve(x0: BallState, seed: Costate, params: PhysParams,
                     cfg: IntegratorConfig | None = None,
                     scfg: SolverConfig | None = None) -> ShootResult | None:
    """Polish one co-state seed to a shooting root, or None on failure."""
    cfg = cfg or IntegratorConfig()
    scfg = scfg or SolverConfig()
    _check_initial(x0)
    sols, _ = _solve_pairs(np.array([[x0.x, x0.p]]),
                           np.array([[seed.px, seed.pp]], dtype=float),
                           params, cfg, scfg)
    if sols[0] is None:
        return None
    z, fnorm, _, bounces, cost = sols[0]
    return ShootResult(seed=seed,
                       costate=Costate(px=float(z[0]), pp=float(z[1])),
                       residual_norm=fnorm, bounces=bounces, cost=cost)


def _seed_lattice(scfg: SolverConfig) -> np.ndarray:
    (a, b), (c, d) = scfg.seed_box
    n = scfg.seeds_per_axis
    px = np.linspace(a, b, n)
    pp = np.linspace(c, d, n)
    return np.array([[u, v] for u in px for v in pp])


def dedupe_and_sort(results: list[ShootResult],
                    radius: float) -> list[ShootResult]:
    """Collapse roots within radius of an earlier one, then sort by cost
    (ties broken by bounce count, then co-states)."""
    distinct: list[ShootResult] = []
    for r in results:
        dup = False
        for keep in distinct:
            if math.hypot(r.costate.px - keep.costate.px,
                          r.costate.pp - keep.costate.pp) <= radius:
                dup = True
                break
        if not dup:
            distinct.append(r)
    distinct.sort(key=lambda r: (r.cost, r.bounces, r.costate.px,
                                 r.costate.pp))
    return distinct


def _results_from(seeds: np.ndarray, sols: list) -> list[ShootResult]:
    out = []
    for s, sol in zip(seeds, sols):
        if sol is None:
            continue
        z, fnorm, _, bounces, cost = sol
        out.append(ShootResult(seed=Costate(px=float(s[0]), pp=float(s[1])),
                               costate=Costate(px=float(z[0]),
                                               pp=float(z[1])),
                               residual_norm=fnorm, bounces=bounces,
                               cost=cost))
    return out


def _solve_chunk(args):
    x0x, x0p, seeds, params, cfg, scfg = args
    starts = np.broadcast_to(np.array([x0x, x0p]), (seeds.shape[0], 2))
    return _solve_pairs(starts, seeds, params, cfg, scfg)


def multistart_solve(x0: BallState, params: PhysParams,
                     cfg: IntegratorConfig | None = None,
                     scfg: SolverConfig | None = None,
                     workers: int = 1,
                     records_out: list | None = None) -> list[ShootResult]:
    """Polish every lattice seed and return the distinct roots, cost-sorted.

    Roots closer than dedupe_radius in converged co-state space collapse
    onto the first in lattice order. When records_out is a list, one
    SeedRecord per seed is appended in lattice order. workers only
    parallelizes the solves; results are identical for any worker count.
    """
    cfg = cfg or IntegratorConfig()
    scfg = scfg or SolverConfig()
    _check_initial(x0)
    seeds = _seed_lattice(scfg)
    n = seeds.shape[0]
    if workers > 1 and n > 1:
        chunk = max(1, -(-n // (workers * 2)))
        tasks = [(x0.x, x0.p, seeds[i:i + chunk], params, cfg, scfg)
                 for i in range(0, n, chunk)]
        with ProcessPoolExecutor(max_workers=workers) as pool:
            outs = list(pool.map(_solve_chunk, tasks))
        sols = [s for part, _ in outs for s in part]
        firsts = [f for _, part in outs for f in part]
    else:
        starts = np.broadcast_to(np.array([x0.x, x0.p]), (n, 2))
        sols, firsts = _solve_pairs(starts, seeds, params, cfg, scfg)

    if records_out is not None:
        for s, sol, fe in zip(seeds, sols, firsts):
            f0, valid0, b0, c0 = fe
            if sol is not None:
                _, fnorm, _, bounces, cost = sol
                records_out.append(SeedRecord(
                    seed=Costate(px=float(s[0]), pp=float(s[1])),
                    converged=True, residual_norm=fnorm, bounces=bounces,
                    cost=cost, zeno_hit=not valid0))
            else:
                rn = float(np.hypot(f0[0], f0[1])) if valid0 else np.nan
                records_out.append(SeedRecord(
                    seed=Costate(px=float(s[0]), pp=float(s[1])),
                    converged=False, residual_norm=rn, bounces=b0,
                    cost=c0, zeno_hit=not valid0))

    return dedupe_and_sort(_results_from(seeds, sols), scfg.dedupe_radius)


def j_shoot(results: list[ShootResult]) -> float:
    """Best shooting cost, +inf when no root converged."""
    return results[0].cost if results else math.inf


def write_seed_table_csv(records: list[SeedRecord], path) -> None:
    """One row per seed: solve outcome plus raw-shoot Zeno flag."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["seed_px", "seed_pp", "converged", "residual_norm",
                    "bounces", "cost", "zeno_hit"])
        for r in records:
            w.writerow([repr(float(r.seed.px)), repr(float(r.seed.pp)),
                        int(r.converged), repr(float(r.residual_norm)),
                        r.bounces, repr(float(r.cost)), int(r.zeno_hit)])
