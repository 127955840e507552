"""Event-detecting adaptive integration for hybrid systems with state resets.

A hybrid system here is a smooth flow interrupted by an autonomous guard
surface: whenever the guard function crosses zero from above while the
guard-direction predicate is negative, the state jumps through a reset map
and the flow restarts. Trajectories are stored with per-step dense output
so impact times can be located to high accuracy and the whole path can be
resampled after the fact.
"""
from __future__ import annotations

import csv
from bisect import bisect_right
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Sequence

import numpy as np
from scipy.optimize import brentq

__all__ = [
    "StepSizeUnderflow",
    "InvalidInitialState",
    "IntegratorConfig",
    "HybridSystemDef",
    "DenseStep",
    "Segment",
    "Termination",
    "HybridTrajectory",
    "integrate_segment",
    "simulate_hybrid",
    "detect_zeno",
    "write_trajectory_csv",
    "write_impacts_csv",
]


class StepSizeUnderflow(RuntimeError):
    """Error control pushed the step size below machine resolution."""


class InvalidInitialState(ValueError):
    """The initial state sits on or past the guard surface moving inward."""


@dataclass(frozen=True)
class IntegratorConfig:
    """Tolerances and safety limits for hybrid integration.

    max_step of None means one hundredth of the integration span, resolved
    per call. min_impact_gap and max_events bound the impact cascade near an
    accumulation point; event_tol bounds the located impact-time error.
    """

    rel_tol: float = 1e-9
    abs_tol: float = 1e-11
    max_step: float | None = None
    event_tol: float = 1e-12
    min_impact_gap: float = 1e-7
    max_events: int = 10_000

    def __post_init__(self):
        if self.rel_tol <= 0.0 or self.abs_tol <= 0.0:
            raise ValueError("tolerances must be positive")
        if self.max_step is not None and self.max_step <= 0.0:
            raise ValueError("max_step must be positive when given")
        if self.event_tol <= 0.0:
            raise ValueError("event_tol must be positive")
        if self.min_impact_gap <= 0.0:
            raise ValueError("min_impact_gap must be positive")
        if self.max_events < 1:
            raise ValueError("max_events must be at least 1")


@dataclass(frozen=True)
class HybridSystemDef:
    """Flow field plus guard/reset data defining one hybrid system.

    flow(t, y) returns dy/dt. guard_fn(y) is the scalar surface function h;
    an impact happens where h crosses zero from above with guard_dir(y) < 0.
    reset(y) maps the pre-impact state to the post-impact state and may
    raise to signal that the jump is undefined there.
    """

    dimension: int
    flow: Callable[[float, np.ndarray], np.ndarray]
    guard_fn: Callable[[np.ndarray], float]
    guard_dir: Callable[[np.ndarray], float]
    reset: Callable[[np.ndarray], np.ndarray]


# Dormand-Prince 5(4) tableau, with the Shampine quartic interpolant.
_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0])
_A = np.array([
    [0.0, 0.0, 0.0, 0.0, 0.0],
    [1 / 5, 0.0, 0.0, 0.0, 0.0],
    [3 / 40, 9 / 40, 0.0, 0.0, 0.0],
    [44 / 45, -56 / 15, 32 / 9, 0.0, 0.0],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729, 0.0],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
])
_B = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84])
_E = np.array([71 / 57600, 0.0, -71 / 16695, 71 / 1920, -17253 / 339200,
               22 / 525, -1 / 40])
_P = np.array([
    [1.0, -8048581381 / 2820520608, 8663915743 / 2820520608,
     -12715105075 / 11282082432],
    [0.0, 0.0, 0.0, 0.0],
    [0.0, 131558114200 / 32700410799, -68118460800 / 10900136933,
     87487479700 / 32700410799],
    [0.0, -1754552775 / 470086768, 14199869525 / 1410260304,
     -10690763975 / 1880347072],
    [0.0, 127303824393 / 49829197408, -318862633887 / 49829197408,
     701980252875 / 199316789632],
    [0.0, -282668133 / 205662961, 2019193451 / 616988883,
     -1453857185 / 822651844],
    [0.0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

_ORDER = 5          # local order of the propagated solution
_SAFETY = 0.9
_MIN_FACTOR = 0.2
_MAX_FACTOR = 5.0
# PI controller exponents for a 5th-order error estimate (Hairer II.4).
_PI_ALPHA = 0.7 / 5.0
_PI_BETA = 0.4 / 5.0
_EPS = float(np.finfo(float).eps)


@dataclass(frozen=True)
class DenseStep:
    """One accepted step with its quartic interpolant."""

    t0: float
    h: float
    y0: np.ndarray
    q: np.ndarray  # shape (dim, 4); interpolant coefficients

    def eval(self, t: float) -> np.ndarray:
        th = (t - self.t0) / self.h
        powers = np.array([th, th * th, th**3, th**4])
        return self.y0 + self.h * (self.q @ powers)


@dataclass
class Segment:
    """A maximal smooth arc between two impacts (or run boundaries)."""

    t_start: float
    t_end: float
    steps: list[DenseStep]
    _starts: list[float] = field(default_factory=list, repr=False)

    def eval(self, t: float) -> np.ndarray:
        t = min(max(t, self.t_start), self.t_end)
        if not self._starts:
            self._starts.extend(s.t0 for s in self.steps)
        i = bisect_right(self._starts, t) - 1
        i = max(i, 0)
        return self.steps[i].eval(t)

    @property
    def start_state(self) -> np.ndarray:
        return self.steps[0].y0.copy()

    @property
    def end_state(self) -> np.ndarray:
        return self.eval(self.t_end)


class Termination(Enum):
    REACHED_HORIZON = "reached_horizon"
    ZENO_DETECTED = "zeno_detected"
    EVENT_LIMIT = "event_limit"


@dataclass
class HybridTrajectory:
    """Piecewise-smooth trajectory with impact bookkeeping."""

    segments: list[Segment]
    impact_times: list[float]
    termination: Termination
    t_inf: float | None = None

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start

    @property
    def t_end(self) -> float:
        return self.segments[-1].t_end

    def state(self, t: float) -> np.ndarray:
        """State at time t; exactly at an impact, the post-reset state."""
        starts = [s.t_start for s in self.segments]
        i = min(max(bisect_right(starts, t) - 1, 0), len(self.segments) - 1)
        return self.segments[i].eval(t)

    def sample(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        """Uniform resampling at spacing dt, always including t_end."""
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        ts = np.arange(self.t_start, self.t_end, dt)
        if ts.size == 0 or ts[-1] < self.t_end:
            ts = np.append(ts, self.t_end)
        ys = np.stack([self.state(float(t)) for t in ts])
        return ts, ys


def _error_norm(err: np.ndarray, y0: np.ndarray, y1: np.ndarray,
                rel_tol: float, abs_tol: float) -> float:
    sc = abs_tol + rel_tol * np.maximum(np.abs(y0), np.abs(y1))
    return float(np.sqrt(np.mean((err / sc) ** 2)))


def _initial_step(flow, t0, y0, f0, rel_tol, abs_tol, max_step):
    """Hairer's starting-step heuristic, clipped to max_step."""
    sc = abs_tol + np.abs(y0) * rel_tol
    d0 = float(np.sqrt(np.mean((y0 / sc) ** 2)))
    d1 = float(np.sqrt(np.mean((f0 / sc) ** 2)))
    h0 = 1e-6 if (d0 < 1e-5 or d1 < 1e-5) else 0.01 * d0 / d1
    h0 = min(h0, max_step)
    f1 = flow(t0 + h0, y0 + h0 * f0)
    d2 = float(np.sqrt(np.mean(((f1 - f0) / sc) ** 2))) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1.0 / (_ORDER + 1))
    return min(100 * h0, h1, max_step)


def _rk_step(flow, t, y, h, k1):
    """One Dormand-Prince step. Returns (y_new, error_vector, stages)."""
    k = np.empty((7, y.size))
    k[0] = k1
    for s in range(1, 6):
        k[s] = flow(t + _C[s] * h, y + h * (_A[s, :s] @ k[:s]))
    y_new = y + h * (_B @ k[:6])
    k[6] = flow(t + h, y_new)  # FSAL stage, reused as next k1
    err = h * (_E @ k)
    return y_new, err, k


def _locate_event(sys_def: HybridSystemDef, step: DenseStep, t_a: float,
                  t_b: float, g_a: float, event_tol: float):
    """First admissible guard crossing inside [t_a, t_b], or None.

    The dense interpolant is scanned on a fixed sample grid; each
    positive-to-nonpositive bracket is refined with Brent's method and kept
    only if the guard direction at the located state is strictly negative
    (grazing contacts are skipped). Crossings narrower than one scan cell
    are beyond the locator's resolution.
    """
    n_scan = 8

    def guard_at(t: float) -> float:
        return sys_def.guard_fn(step.eval(t))

    ts = np.linspace(t_a, t_b, n_scan + 1)
    gs = [g_a] + [guard_at(float(t)) for t in ts[1:]]
    for i in range(n_scan):
        g_lo, g_hi = gs[i], gs[i + 1]
        lo, hi = float(ts[i]), float(ts[i + 1])
        if g_lo <= 0.0 and i == 0 and g_hi <= 0.0:
            # Start exactly on the surface: look for an interior rise and
            # fall within the first cell (a whole flight inside one cell).
            fine = np.linspace(lo, hi, 17)
            fg = [guard_at(float(t)) for t in fine]
            for j in range(16):
                if fg[j] > 0.0 >= fg[j + 1]:
                    lo, hi, g_lo, g_hi = (float(fine[j]), float(fine[j + 1]),
                                          fg[j], fg[j + 1])
                    break
            else:
                continue
        if not (g_lo > 0.0 >= g_hi):
            continue
        if g_hi == 0.0:
            t_e = hi
        else:
            t_e = float(brentq(guard_at, lo, hi, xtol=event_tol))
        y_e = step.eval(t_e)
        if sys_def.guard_dir(y_e) < 0.0:
            return t_e, y_e
    return None


def integrate_segment(sys_def: HybridSystemDef, state: np.ndarray, t0: float,
                      t_max: float, cfg: IntegratorConfig):
    """Integrate the flow until the guard fires or t_max is reached.

    Returns (segment, event) where event is (t_event, pre_impact_state) or
    None when the horizon was reached first. The caller must not start on
    an active guard (guard_fn <= 0 with guard_dir < 0).

    Raises StepSizeUnderflow if error control stalls.
    """
    y = np.asarray(state, dtype=float).copy()
    if y.size != sys_def.dimension:
        raise ValueError("state dimension mismatch")
    if t_max <= t0:
        raise ValueError("t_max must exceed t0")
    max_step = cfg.max_step if cfg.max_step is not None else (t_max - t0) / 100.0
    max_step = min(max_step, t_max - t0)

    t = t0
    k1 = sys_def.flow(t, y)
    h = _initial_step(sys_def.flow, t, y, k1, cfg.rel_tol, cfg.abs_tol, max_step)
    err_prev = 1.0
    steps: list[DenseStep] = []

    while t < t_max:
        h = min(h, max_step, t_max - t)
        if h < 16.0 * _EPS * max(abs(t), 1.0):
            raise StepSizeUnderflow(f"step size {h:g} underflow at t={t:g}")
        y_new, err_vec, k = _rk_step(sys_def.flow, t, y, h, k1)
        err = _error_norm(err_vec, y, y_new, cfg.rel_tol, cfg.abs_tol)
        if not np.isfinite(err):
            h *= 0.1
            continue
        if err > 1.0:
            h *= max(_MIN_FACTOR, _SAFETY * err ** (-1.0 / _ORDER))
            continue
        # Accepted: build the dense interpolant and scan it for the guard.
        q = k.T @ _P
        step = DenseStep(t0=t, h=h, y0=y.copy(), q=q)
        g_a = sys_def.guard_fn(y)
        hit = _locate_event(sys_def, step, t, t + h, g_a, cfg.event_tol)
        steps.append(step)
        if hit is not None:
            t_e, y_e = hit
            return Segment(t_start=t0, t_end=t_e, steps=steps), (t_e, y_e)
        t = t + h
        y = y_new
        k1 = k[6]
        if err == 0.0:
            factor = _MAX_FACTOR
        else:
            factor = _SAFETY * err ** (-_PI_ALPHA) * err_prev ** _PI_BETA
            factor = min(_MAX_FACTOR, max(_MIN_FACTOR, factor))
        h *= factor
        err_prev = max(err, 1e-10)

    return Segment(t_start=t0, t_end=t_max, steps=steps), None


def detect_zeno(impact_times: Sequence[float], cfg: IntegratorConfig) -> float | None:
    """Extrapolated accumulation time from a geometrically shrinking tail.

    Requires the most recent gap below cfg.min_impact_gap and the last
    three consecutive gap ratios all strictly inside (0, 1); then the tail
    is summed as a geometric series. Returns None when the pattern does
    not (yet) hold. Needs at least three recorded impacts to be called,
    and at least five to ever succeed.
    """
    if len(impact_times) < 3:
        raise ValueError("need at least three impact times")
    if len(impact_times) < 5:
        return None
    t = list(impact_times[-5:])
    gaps = [t[i + 1] - t[i] for i in range(4)]
    if gaps[-1] >= cfg.min_impact_gap:
        return None
    ratios = []
    for i in range(1, 4):
        if gaps[i - 1] <= 0.0:
            return None
        ratios.append(gaps[i] / gaps[i - 1])
    if not all(0.0 < r < 1.0 for r in ratios):
        return None
    r = ratios[-1]
    return t[-1] + gaps[-1] * r / (1.0 - r)


def simulate_hybrid(sys_def: HybridSystemDef, state0: np.ndarray, t0: float,
                    t_f: float, cfg: IntegratorConfig) -> HybridTrajectory:
    """Alternate flow and reset until the horizon, Zeno, or the event cap.

    Raises InvalidInitialState when state0 already violates the guard, and
    propagates any error raised by the reset map (e.g. an undefined jump
    at vanishing impact velocity).
    """
    y = np.asarray(state0, dtype=float).copy()
    g0 = sys_def.guard_fn(y)
    if g0 < -cfg.event_tol:
        raise InvalidInitialState("initial state beyond the guard surface")
    if g0 <= cfg.event_tol and sys_def.guard_dir(y) < 0.0:
        raise InvalidInitialState("initial state on the guard moving inward")
    max_step = cfg.max_step if cfg.max_step is not None else (t_f - t0) / 100.0
    run_cfg = IntegratorConfig(rel_tol=cfg.rel_tol, abs_tol=cfg.abs_tol,
                               max_step=max_step, event_tol=cfg.event_tol,
                               min_impact_gap=cfg.min_impact_gap,
                               max_events=cfg.max_events)

    segments: list[Segment] = []
    impacts: list[float] = []
    t = t0
    while True:
        segment, hit = integrate_segment(sys_def, y, t, t_f, run_cfg)
        segments.append(segment)
        if hit is None:
            return HybridTrajectory(segments, impacts, Termination.REACHED_HORIZON)
        t_e, y_e = hit
        impacts.append(t_e)
        y = sys_def.reset(y_e)
        t = t_e
        if len(impacts) >= 3:
            t_inf = detect_zeno(impacts, run_cfg)
            if t_inf is not None:
                return HybridTrajectory(segments, impacts,
                                        Termination.ZENO_DETECTED, t_inf=t_inf)
        if len(impacts) >= run_cfg.max_events:
            return HybridTrajectory(segments, impacts, Termination.EVENT_LIMIT)


def _fmt(v) -> str:
    return repr(float(v))


def write_trajectory_csv(traj: HybridTrajectory, path, labels: Sequence[str],
                         dt: float) -> None:
    """Resample the trajectory at spacing dt and write one row per sample."""
    starts = [s.t_start for s in traj.segments]
    ts, ys = traj.sample(dt)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", *labels, "segment_index"])
        for t, y in zip(ts, ys):
            seg = min(max(bisect_right(starts, float(t)) - 1, 0),
                      len(traj.segments) - 1)
            w.writerow([_fmt(t), *(_fmt(v) for v in y), seg])


def write_impacts_csv(traj: HybridTrajectory, path) -> None:
    """Impact table: index, impact time, gap to the previous impact.

    The first gap is measured from the start of the run.
    """
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["k", "t_k", "gap_k"])
        prev = traj.t_start
        for k, t_k in enumerate(traj.impact_times, start=1):
            w.writerow([k, _fmt(t_k), _fmt(t_k - prev)])
            prev = t_k
