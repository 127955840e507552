"""The Zeno control scheme: coast uncontrolled into the impact
accumulation, rest on the ground, then steer to the target with a
minimum-energy push over the last stretch of the horizon.

The controlled arc admits closed forms. Steering the ball from rest on
the ground to (x, p) = (1, 0) in a window of length T costs
J(T) = m^2 g^2 T / 2 + 6 m^2 / T^3, minimized at T* = sqrt(6/g) with
J* = (2/3) m^2 g sqrt(6 g). Turning the controls on exactly T* before
the horizon therefore beats any other window length, and the arc itself
is a cubic in time that never re-enters the ground.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .ball import BallState, Costate, PhysParams, make_ball_system, reset, \
    zeno_time_printed, zeno_time_series
from .hybrid import IntegratorConfig, Termination, simulate_hybrid

__all__ = [
    "NonpositiveDuration",
    "NotLocallyOptimal",
    "Infeasible",
    "Branch",
    "ZenoPlan",
    "steering_cost",
    "optimal_switch",
    "switch_on_costate",
    "is_zeno_locally_optimal",
    "synthesize_zeno_execution",
    "true_value",
    "write_zeno_plan",
    "write_zeno_trajectory_csv",
]


class NonpositiveDuration(ValueError):
    """Steering window length must be positive."""


class NotLocallyOptimal(RuntimeError):
    """The horizon is too short to coast to Zeno and still steer back."""


class Infeasible(RuntimeError):
    """Neither a Zeno-free extremal nor a locally optimal Zeno plan exists."""


class Branch(Enum):
    SHOOT = "shoot"
    ZENO = "zeno"


@dataclass(frozen=True)
class ZenoPlan:
    """Timing and cost of one Zeno control execution.

    t_zeno ends the uncontrolled coast, t_on = T_f - T_switch starts the
    controlled arc, and costate_on holds the co-states that generate it.
    """

    t_zeno: float
    t_on: float
    T_switch: float
    J_zeno: float
    costate_on: Costate


def steering_cost(T: float, params: PhysParams) -> float:
    """Cost of steering from rest on the ground to (1, 0) in time T.

    Specific to the (x_f, p_f) = (1, 0) target; other terminal pairs are
    out of scope here.
    """
    if T <= 0.0:
        raise NonpositiveDuration(f"window length must be positive, got {T!r}")
    m, g = params.m, params.g
    return 0.5 * m * m * g * g * T + 6.0 * m * m / T ** 3


def optimal_switch(params: PhysParams) -> tuple[float, float]:
    """Best window length and its cost: T* = sqrt(6/g), J* = (2/3) m^2 g sqrt(6g)."""
    g = params.g
    t_star = math.sqrt(6.0 / g)
    j_star = (2.0 / 3.0) * params.m ** 2 * g * math.sqrt(6.0 * g)
    return t_star, j_star


def switch_on_costate(params: PhysParams) -> Costate:
    """Co-states that generate the optimal steering arc from rest."""
    m, g = params.m, params.g
    return Costate(px=-math.sqrt(2.0 / 3.0) * m * m * g ** 1.5,
                   pp=-2.0 * m * g)


def is_zeno_locally_optimal(x0: BallState, params: PhysParams,
                            variant: str = "series") -> bool:
    """Whether the horizon leaves room to coast to Zeno and then steer.

    True when T_f >= zeno time + T*. The geometric-series Zeno time is
    the default; variant "printed" uses the alternative formula kept for
    comparison.
    """
    if variant == "series":
        zt = zeno_time_series(x0, params)
    elif variant == "printed":
        zt = zeno_time_printed(x0, params)
    else:
        raise ValueError(f"unknown variant {variant!r}")
    return params.t_f >= zt + math.sqrt(6.0 / params.g)


def _arc_samples(tau, params: PhysParams, T: float):
    """Closed-form controlled arc from rest at the origin, tau in [0, T].

    Returns columns (x, p, p_x, p_p, u, J_acc). The height cubic
    g tau^2 / 2 - 2 tau^3 / T^3 stays nonnegative through tau = g T^3 / 4
    > T, so the arc never re-impacts.
    """
    tau = np.asarray(tau, dtype=float)
    m, g = params.m, params.g
    a = 2.0 * m * g
    b = 12.0 * m / T ** 3
    x = 0.5 * g * tau ** 2 - 2.0 * tau ** 3 / T ** 3
    p = m * g * tau - (6.0 * m / T ** 3) * tau ** 2
    pp = -a + b * tau
    px = np.full_like(tau, -12.0 * m * m / T ** 3)
    u = -pp
    j = 0.5 * (a * a * tau - a * b * tau ** 2 + (b * b / 3.0) * tau ** 3)
    return x, p, px, pp, u, j


def synthesize_zeno_execution(x0: BallState, params: PhysParams,
                              sample_dt: float = 0.01,
                              cfg: IntegratorConfig | None = None):
    """Build the three-phase Zeno execution and sample it.

    Phase one coasts uncontrolled from x0 into the impact accumulation
    (simulated; skipped when x0 is already at rest on the ground). Phase
    two holds the ball at the origin with zero control and zero cost.
    Phase three is the closed-form steering arc over the final T* time
    units. Returns (samples, plan): samples is an (n, 7) array with
    columns (t, x, p, p_x, p_p, u, J_acc); co-states and control are
    reported as zero while the controls are off. The coast is resolved
    only down to the impact-gap threshold, so samples between the last
    simulated impact and t_zeno sit at the origin.
    """
    if sample_dt <= 0.0:
        raise ValueError("sample_dt must be positive")
    if not is_zeno_locally_optimal(x0, params):
        raise NotLocallyOptimal(
            f"horizon {params.t_f} is shorter than zeno time "
            f"{zeno_time_series(x0, params)} plus the steering window "
            f"{math.sqrt(6.0 / params.g)}")
    cfg = cfg or IntegratorConfig()
    t_star, j_star = optimal_switch(params)
    t_on = params.t_f - t_star

    at_rest = abs(x0.x) <= 1e-12 and abs(x0.p) <= 1e-12
    if at_rest:
        coast = None
        t_zeno = 0.0
    else:
        start = x0
        if x0.x <= cfg.event_tol and x0.p < 0.0:
            start = reset(x0, params)  # guard start: impact at t = 0
        sysdef = make_ball_system(params)
        coast = simulate_hybrid(sysdef, np.array([start.x, start.p]), 0.0,
                                t_on, cfg)
        if coast.termination is Termination.ZENO_DETECTED:
            t_zeno = coast.t_inf
        else:
            t_zeno = zeno_time_series(x0, params)

    ts = np.arange(0.0, params.t_f, sample_dt)
    ts = np.unique(np.concatenate([ts, [t_zeno, t_on, params.t_f]]))
    ts = ts[(ts >= 0.0) & (ts <= params.t_f)]

    cols = np.zeros((ts.size, 7))
    cols[:, 0] = ts
    coasting = ts < t_zeno
    if coast is not None and coasting.any():
        t_cover = coast.segments[-1].t_end
        for k in np.nonzero(coasting)[0]:
            t = ts[k]
            if t <= t_cover:
                s = coast.state(t)
                cols[k, 1] = s[0]
                cols[k, 2] = s[1]
            # past the resolved impacts the ball is already at the origin
    arc = ts >= t_on
    tau = ts[arc] - t_on
    x, p, px, pp, u, j = _arc_samples(tau, params, t_star)
    cols[arc, 1] = x
    cols[arc, 2] = p
    cols[arc, 3] = px
    cols[arc, 4] = pp
    cols[arc, 5] = u
    cols[arc, 6] = j

    plan = ZenoPlan(t_zeno=float(t_zeno), t_on=float(t_on),
                    T_switch=float(t_star), J_zeno=float(j_star),
                    costate_on=switch_on_costate(params))
    return cols, plan


def true_value(x0: BallState, params: PhysParams,
               j_shoot: float) -> tuple[float, Branch]:
    """Value of the better branch: the best Zeno-free extremal cost versus
    the Zeno scheme's J*, the latter available only when locally optimal.
    Ties go to the Shoot branch."""
    available = is_zeno_locally_optimal(x0, params)
    _, j_star = optimal_switch(params)
    if available and j_star < j_shoot:
        return j_star, Branch.ZENO
    if math.isfinite(j_shoot):
        return j_shoot, Branch.SHOOT
    raise Infeasible(
        "no Zeno-free extremal converged and the Zeno scheme is not "
        "locally optimal here")


def write_zeno_plan(plan: ZenoPlan, path, extra: dict | None = None) -> None:
    """Write the plan as a small JSON record."""
    rec = {
        "t_zeno": plan.t_zeno,
        "t_on": plan.t_on,
        "T_switch": plan.T_switch,
        "J_zeno": plan.J_zeno,
        "costate_on": {"px": plan.costate_on.px, "pp": plan.costate_on.pp},
    }
    if extra:
        rec.update(extra)
    with open(path, "w") as fh:
        json.dump(rec, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_zeno_trajectory_csv(samples: np.ndarray, path) -> None:
    """Samples from synthesize_zeno_execution as CSV."""
    import csv

    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["t", "x", "p", "p_x", "p_p", "u", "J_acc"])
        for row in samples:
            w.writerow([repr(float(v)) for v in row])
