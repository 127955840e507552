"""Damped bouncing ball: dynamics, impact maps, and closed-form ballistics.

States are (height x, momentum p). The ground at x = 0 is an inelastic
guard: an impact with p < 0 rescales the momentum by -c^2. The controlled
variant carries co-states (p_x, p_p) of the minimum-energy control problem;
its flow follows the optimality conditions with control u = -p_p, and the
impact map extends to the co-states so that the optimal Hamiltonian is
preserved across the jump.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .hybrid import HybridSystemDef

__all__ = [
    "GuardViolation",
    "ZenoSingularity",
    "ConfigError",
    "PhysParams",
    "BallState",
    "Costate",
    "ExtendedState",
    "P_MIN",
    "controlled_flow",
    "reset",
    "extended_reset",
    "optimal_hamiltonian",
    "hamiltonian_raw",
    "ballistic_flight",
    "zeno_time_series",
    "zeno_time_printed",
    "make_ball_system",
    "make_extended_system",
    "load_params",
    "params_to_mapping",
]

# Impacts slower than this are treated as the accumulation point: the
# co-state jump divides by the impact momentum and blows up there.
P_MIN = 1e-10


class GuardViolation(ValueError):
    """An impact map was applied to a state that is not an impact state."""


class ZenoSingularity(ArithmeticError):
    """The co-state jump is undefined: impact momentum below the floor."""


class ConfigError(ValueError):
    """A parameter file could not be parsed into physical parameters."""


@dataclass(frozen=True)
class PhysParams:
    """Physical constants and the steering target.

    m: mass, g: gravity, c: restitution parameter in (0, 1) (momentum
    rescales by -c^2 at impact), t_f: horizon, (x_f, p_f): target state.
    """

    m: float = 1.0
    g: float = 1.0
    c: float = 0.75
    t_f: float = 10.0
    x_f: float = 1.0
    p_f: float = 0.0

    def __post_init__(self):
        if self.m <= 0.0:
            raise ValueError("mass must be positive")
        if self.g <= 0.0:
            raise ValueError("gravity must be positive")
        if not 0.0 < self.c < 1.0:
            raise ValueError("restitution parameter must lie in (0, 1)")
        if self.t_f <= 0.0:
            raise ValueError("horizon must be positive")


@dataclass(frozen=True)
class BallState:
    x: float
    p: float


@dataclass(frozen=True)
class Costate:
    px: float
    pp: float


@dataclass(frozen=True)
class ExtendedState:
    """State, co-state, and accumulated running cost at a time instant."""

    t: float
    state: BallState
    costate: Costate
    j_acc: float = 0.0

    def as_vector(self) -> np.ndarray:
        return np.array([self.state.x, self.state.p,
                         self.costate.px, self.costate.pp, self.j_acc])


def controlled_flow(e: ExtendedState, params: PhysParams) -> np.ndarray:
    """Right-hand side of the optimally controlled flow.

    Returns (dx, dp, dp_x, dp_p, dJ) with the control eliminated via
    u = -p_p: dx = p/m, dp = -m g - p_p, dp_x = 0, dp_p = -p_x/m, and the
    running cost rate dJ = p_p^2 / 2.
    """
    p = e.state.p
    px, pp = e.costate.px, e.costate.pp
    return np.array([p / params.m,
                     -params.m * params.g - pp,
                     0.0,
                     -px / params.m,
                     0.5 * pp * pp])


def reset(s: BallState, params: PhysParams, tol: float = 1e-9) -> BallState:
    """Impact map (x, p) -> (x, -c^2 p); only valid on the guard."""
    if abs(s.x) > tol or s.p >= 0.0:
        raise GuardViolation(f"not an impact state: x={s.x!r}, p={s.p!r}")
    return BallState(x=s.x, p=-params.c * params.c * s.p)


def extended_reset(e: ExtendedState, params: PhysParams,
                   p_min: float = P_MIN, tol: float = 1e-9) -> ExtendedState:
    """Impact map extended to the co-states.

    p_x and p_p jump so that the optimal Hamiltonian takes the same value
    on both sides of the impact. The map divides by the impact momentum,
    so it is undefined as |p| falls below p_min (the Zeno accumulation).
    """
    x, p = e.state.x, e.state.p
    if abs(x) > tol or p >= 0.0:
        raise GuardViolation(f"not an impact state: x={x!r}, p={p!r}")
    if abs(p) <= p_min:
        raise ZenoSingularity(f"impact momentum {p!r} below floor {p_min!r}")
    m, g, c = params.m, params.g, params.c
    c2 = c * c
    px, pp = e.costate.px, e.costate.pp
    p_new = -c2 * p
    pp_new = -pp / c2
    px_new = (-px / c2
              + (m / (2.0 * c2)) * (pp * pp / p) * (1.0 - 1.0 / (c2 * c2))
              + (m * m * g / c2) * (pp / p) * (1.0 + 1.0 / c2))
    return ExtendedState(t=e.t, state=BallState(x=x, p=p_new),
                         costate=Costate(px=px_new, pp=pp_new), j_acc=e.j_acc)


def hamiltonian_raw(p: float, px: float, pp: float, m: float, g: float) -> float:
    """Optimal Hamiltonian -p_p^2/2 + p_x p / m - m g p_p."""
    return -0.5 * pp * pp + px * p / m - m * g * pp


def optimal_hamiltonian(e: ExtendedState, params: PhysParams) -> float:
    """Optimal Hamiltonian at an extended state (constant along the flow)."""
    return hamiltonian_raw(e.state.p, e.costate.px, e.costate.pp,
                           params.m, params.g)


def ballistic_flight(s: BallState, params: PhysParams) -> tuple[float, float]:
    """Uncontrolled flight to the next impact, in closed form.

    Returns (time_to_impact, impact_momentum). Valid for x > 0, or x = 0
    with any p: launches (p > 0) fly a full arc, and descents (p <= 0)
    are already at the impact, returned as a flight of duration zero.
    """
    x, p = s.x, s.p
    m, g = params.m, params.g
    if x < 0.0:
        raise GuardViolation(f"height must be nonnegative, got {x!r}")
    s_ = math.sqrt((p / m) ** 2 + 2.0 * g * x)
    if x == 0.0 and p <= 0.0:
        return 0.0, p
    return (p / m + s_) / g, -m * s_


def zeno_time_series(s: BallState, params: PhysParams) -> float:
    """Accumulation time of the uncontrolled ball, by geometric summation.

    The first flight lands after t1 with momentum v1; every restitution
    scales the flight duration by c^2, so the remaining bounces sum to
    (2 |v1| / (m g)) c^2 / (1 - c^2). This is the series-derived form,
    validated against event-detected simulation.
    """
    m, g, c = params.m, params.g, params.c
    t1, v1 = ballistic_flight(s, params)
    c2 = c * c
    return t1 + (2.0 * abs(v1) / (m * g)) * c2 / (1.0 - c2)


def zeno_time_printed(s: BallState, params: PhysParams) -> float:
    """Alternative closed form for the accumulation time, coefficient 3.

    Kept for comparison; it disagrees with the series-derived
    form by the factor 3/(1+c^2) on the square-root term for every c in
    (0, 1), so downstream logic uses zeno_time_series instead.
    """
    x, p = s.x, s.p
    m, g, c = params.m, params.g, params.c
    if x < 0.0:
        raise GuardViolation(f"height must be nonnegative, got {x!r}")
    return p / (m * g) + 3.0 / (g * (1.0 - c * c)) * math.sqrt(
        (p / m) ** 2 + 2.0 * g * x)


def make_ball_system(params: PhysParams) -> HybridSystemDef:
    """Uncontrolled ball as a hybrid system on (x, p)."""
    m, g, c = params.m, params.g, params.c
    c2 = c * c

    def flow(t: float, y: np.ndarray) -> np.ndarray:
        return np.array([y[1] / m, -m * g])

    def guard_fn(y: np.ndarray) -> float:
        return y[0]

    def guard_dir(y: np.ndarray) -> float:
        return y[1]

    def do_reset(y: np.ndarray) -> np.ndarray:
        return np.array([0.0, -c2 * y[1]])

    return HybridSystemDef(dimension=2, flow=flow, guard_fn=guard_fn,
                           guard_dir=guard_dir, reset=do_reset)


def make_extended_system(params: PhysParams, p_min: float = P_MIN) -> HybridSystemDef:
    """Controlled ball with co-states and running cost, on (x, p, p_x, p_p, J)."""
    m, g = params.m, params.g

    def flow(t: float, y: np.ndarray) -> np.ndarray:
        return np.array([y[1] / m, -m * g - y[3], 0.0, -y[2] / m,
                         0.5 * y[3] * y[3]])

    def guard_fn(y: np.ndarray) -> float:
        return y[0]

    def guard_dir(y: np.ndarray) -> float:
        return y[1]

    def do_reset(y: np.ndarray) -> np.ndarray:
        e = ExtendedState(t=0.0, state=BallState(x=0.0, p=y[1]),
                          costate=Costate(px=y[2], pp=y[3]), j_acc=y[4])
        e2 = extended_reset(e, params, p_min=p_min)
        return np.array([0.0, e2.state.p, e2.costate.px, e2.costate.pp, y[4]])

    return HybridSystemDef(dimension=5, flow=flow, guard_fn=guard_fn,
                           guard_dir=guard_dir, reset=do_reset)


_PARAM_KEYS = {"m": "m", "g": "g", "c": "c", "T_f": "t_f",
               "x_f": "x_f", "p_f": "p_f"}


def load_params(path) -> PhysParams:
    """Read physical parameters from a flat key-value file.

    Lines look like "g = 9.81" or "c: 0.75"; '#' starts a comment. Unknown
    keys, repeated keys, and malformed numbers raise ConfigError with the
    offending line number. Missing keys fall back to the defaults.
    """
    values, _ = _parse_kv_file(path, _PARAM_KEYS)
    try:
        return PhysParams(**values)
    except ValueError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


def _parse_kv_file(path, known: dict[str, str], allow_extra: bool = False):
    """Shared key-value parser; returns (mapped values, extras)."""
    values: dict[str, float] = {}
    extras: dict[str, str] = {}
    seen: set[str] = set()
    text = Path(path).read_text()
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, _, val = line.partition("=")
        elif ":" in line:
            key, _, val = line.partition(":")
        else:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value', "
                              f"got {raw.strip()!r}")
        key = key.strip()
        val = val.strip()
        if key in seen:
            raise ConfigError(f"{path}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        if key in known:
            try:
                values[known[key]] = float(val)
            except ValueError:
                raise ConfigError(f"{path}:{lineno}: key {key!r} needs a "
                                  f"number, got {val!r}") from None
        elif allow_extra:
            extras[key] = val
        else:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
    return values, extras


def params_to_mapping(params: PhysParams) -> dict[str, float]:
    """Parameters under their config-file key names."""
    return {"m": params.m, "g": params.g, "c": params.c,
            "T_f": params.t_f, "x_f": params.x_f, "p_f": params.p_f}
