"""Closed-form propagation of the controlled extended system.

Between impacts the optimally controlled flow is polynomial in time: the
co-states are constant/linear, the momentum quadratic, the height cubic,
and the running cost cubic. Segments can therefore be advanced exactly:
the next impact is the first descending root of a cubic, found here by
monotone-piece bracketing (split at the derivative's critical points) plus
fixed-count bisection and safeguarded Newton polish. Everything is
vectorized across a batch of trajectories so grid sweeps stay affordable
on one core.

Grazing contacts (height touching zero with nonnegative momentum) are not
impacts and the flight continues through them; an impact whose momentum
magnitude is at or below the singularity floor leaves the co-state jump
undefined and terminates the trajectory.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .ball import P_MIN, PhysParams
from .hybrid import IntegratorConfig

__all__ = [
    "STATUS_HORIZON",
    "STATUS_ZENO_SINGULAR",
    "STATUS_ZENO_DETECTED",
    "STATUS_EVENT_LIMIT",
    "BatchResult",
    "ExactSegment",
    "ExactTrajectory",
    "eval_flight",
    "propagate_batch",
    "propagate_recorded",
]

STATUS_ACTIVE = 0
STATUS_HORIZON = 1
STATUS_ZENO_SINGULAR = 2
STATUS_ZENO_DETECTED = 3
STATUS_EVENT_LIMIT = 4

_BISECT_ITERS = 40
_NEWTON_ITERS = 3


def eval_flight(y0: np.ndarray, tau, m: float, g: float) -> np.ndarray:
    """Flight state after time tau from extended state y0 = (x,p,px,pp,J).

    tau may be a scalar or an array; the result broadcasts accordingly
    with the state components on the last axis.
    """
    x0, p0, px0, pp0, j0 = (float(y0[i]) for i in range(5))
    tau = np.asarray(tau, dtype=float)
    pc1 = -(m * g + pp0)
    pc2 = px0 / (2.0 * m)
    p = p0 + tau * (pc1 + tau * pc2)
    x = x0 + tau * (p0 + tau * (pc1 / 2.0 + tau * (pc2 / 3.0))) / m
    pp = pp0 - (px0 / m) * tau
    px = np.full_like(tau, px0)
    j = j0 + 0.5 * tau * (pp0 * pp0 + tau * (-pp0 * px0 / m
                                             + tau * px0 * px0 / (3.0 * m * m)))
    return np.stack([x, p, px, pp, j], axis=-1)


def _horner3(c0, c1, c2, c3, t):
    return c0 + t * (c1 + t * (c2 + t * c3))


def _critical_knots(c1, c2, c3, hi):
    """Critical points of the height cubic, clipped into [0, hi].

    Returns (k1, k2) with k1 <= k2; absent or out-of-range criticals
    collapse onto the interval ends so the three monotone pieces
    [0,k1], [k1,k2], [k2,hi] remain valid (possibly empty).
    """
    a = 3.0 * c3
    b = 2.0 * c2
    c = c1
    inf = np.full_like(c1, np.inf)
    is_quad = a != 0.0
    disc = b * b - 4.0 * a * c
    has_pair = is_quad & (disc >= 0.0)
    sq = np.sqrt(np.where(has_pair, disc, 0.0))
    qq = -0.5 * (b + np.where(b >= 0.0, sq, -sq))
    with np.errstate(divide="ignore", invalid="ignore"):
        r1 = np.where(has_pair, qq / np.where(a == 0.0, 1.0, a), np.inf)
        r2 = np.where(has_pair & (qq != 0.0), c / np.where(qq == 0.0, 1.0, qq),
                      np.where(has_pair, 0.0, np.inf))
        rl = np.where((~is_quad) & (b != 0.0),
                      -c / np.where(b == 0.0, 1.0, b), np.inf)
    k1 = np.where(is_quad, np.minimum(r1, r2), rl)
    k2 = np.where(is_quad, np.maximum(r1, r2), inf)
    k1 = np.clip(np.nan_to_num(k1, nan=np.inf, posinf=np.inf, neginf=0.0), 0.0, hi)
    k2 = np.clip(np.nan_to_num(k2, nan=np.inf, posinf=np.inf, neginf=0.0), 0.0, hi)
    return k1, np.maximum(k1, k2)


def _first_descending_root(c0, c1, c2, c3, hi):
    """Smallest tau in (0, hi] where the cubic crosses zero from above.

    Vectorized. Elements without such a crossing return +inf. The caller
    still has to inspect the momentum at the root (a crossing located at
    a critical point is a graze).
    """
    k1, k2 = _critical_knots(c1, c2, c3, hi)
    knots = (np.zeros_like(hi), k1, k2, hi)
    vals = [_horner3(c0, c1, c2, c3, k) for k in knots]
    lo = np.full_like(hi, np.inf)
    up = np.full_like(hi, np.inf)
    found = np.zeros(hi.shape, dtype=bool)
    for j in range(3):
        cross = (~found) & (vals[j] > 0.0) & (vals[j + 1] <= 0.0) \
            & (knots[j + 1] > knots[j])
        lo = np.where(cross, knots[j], lo)
        up = np.where(cross, knots[j + 1], up)
        found |= cross
    if not found.any():
        return np.full_like(hi, np.inf)

    root = np.full_like(hi, np.inf)
    idx = np.nonzero(found)[0]
    flo, fup = lo[idx], up[idx]
    fc0, fc1, fc2, fc3 = c0[idx], c1[idx], c2[idx], c3[idx]
    for _ in range(_BISECT_ITERS):
        mid = 0.5 * (flo + fup)
        pos = _horner3(fc0, fc1, fc2, fc3, mid) > 0.0
        flo = np.where(pos, mid, flo)
        fup = np.where(pos, fup, mid)
    t = 0.5 * (flo + fup)
    for _ in range(_NEWTON_ITERS):
        f = _horner3(fc0, fc1, fc2, fc3, t)
        fp = fc1 + t * (2.0 * fc2 + t * 3.0 * fc3)
        step = np.where(fp != 0.0, f / np.where(fp == 0.0, 1.0, fp), 0.0)
        t = np.clip(t - step, flo, fup)
    root[idx] = t
    return root


@dataclass
class BatchResult:
    """Terminal data for a batch of exactly propagated trajectories."""

    t: np.ndarray        # (n,) stop time
    y: np.ndarray        # (n, 5) stop state [x, p, p_x, p_p, J]
    status: np.ndarray   # (n,) STATUS_* codes
    bounces: np.ndarray  # (n,) impact counts
    t_inf: np.ndarray    # (n,) accumulation estimate, nan unless detected


def propagate_batch(y0: np.ndarray, t0: float, t_f: float, params: PhysParams,
                    cfg: IntegratorConfig | None = None,
                    p_min: float = P_MIN,
                    segment_sink: list | None = None) -> BatchResult:
    """Propagate a batch of extended states from t0 to t_f exactly.

    y0 has shape (n, 5). Stops each trajectory at the horizon, at a
    singular impact (|p| <= p_min), when the impact gaps shrink
    geometrically below the detection threshold, or at the event cap.
    A start on the ground with descending momentum counts as an impact
    at t0. segment_sink (batch size 1 only) collects
    (t_start, t_end, start_state) triples for trajectory export.

    The returned arrays are aligned with the rows of y0.
    """
    cfg = cfg or IntegratorConfig()
    y0 = np.atleast_2d(np.asarray(y0, dtype=float))
    n = y0.shape[0]
    if segment_sink is not None and n != 1:
        raise ValueError("segment recording needs a batch of one")
    m, g, c = params.m, params.g, params.c
    c2 = c * c

    x = y0[:, 0].copy()
    p = y0[:, 1].copy()
    px = y0[:, 2].copy()
    pp = y0[:, 3].copy()
    j = y0[:, 4].copy()
    t = np.full(n, float(t0))
    status = np.full(n, STATUS_ACTIVE, dtype=np.int8)
    bounces = np.zeros(n, dtype=np.int64)
    t_inf = np.full(n, np.nan)
    # Ring buffer of the last four impact gaps, oldest first.
    gaps = np.full((4, n), np.nan)

    if (x < -1e-9).any():
        raise ValueError("negative initial height in batch")

    while True:
        act = np.nonzero(status == STATUS_ACTIVE)[0]
        if act.size == 0:
            break
        xa, pa, pxa, ppa = x[act], p[act], px[act], pp[act]
        ta = t[act]

        # Ground-level starts: descending momentum is an immediate impact,
        # and a vanishing one an undefined (singular) jump.
        on_ground = xa <= 0.0
        accel = -m * g - ppa
        sing = on_ground & (((pa < 0.0) & (pa >= -p_min))
                            | ((pa == 0.0) & ((accel < 0.0)
                                              | ((accel == 0.0) & (pxa < 0.0)))))
        if sing.any():
            rows = act[sing]
            status[rows] = STATUS_ZENO_SINGULAR
        instant = on_ground & (pa < -p_min)
        if instant.any():
            rows = act[instant]
            pi = p[rows]
            p[rows] = -c2 * pi
            ppi = pp[rows]
            pp[rows] = -ppi / c2
            px[rows] = (-px[rows] / c2
                        + (m / (2.0 * c2)) * (ppi * ppi / pi) * (1.0 - 1.0 / (c2 * c2))
                        + (m * m * g / c2) * (ppi / pi) * (1.0 + 1.0 / c2))
            bounces[rows] += 1
            gaps[:-1, rows] = gaps[1:, rows]
            gaps[-1, rows] = 0.0
            if bounces[rows].max() >= cfg.max_events:
                hit_cap = rows[bounces[rows] >= cfg.max_events]
                status[hit_cap] = STATUS_EVENT_LIMIT
        if sing.any() or instant.any():
            continue

        # Flight polynomials for the height, x(tau) = c0 + c1 t + c2 t^2 + c3 t^3.
        hco0 = xa
        hco1 = pa / m
        hco2 = -(m * g + ppa) / (2.0 * m)
        hco3 = pxa / (6.0 * m * m)
        hi = t_f - ta
        tau = _first_descending_root(hco0, hco1, hco2, hco3, hi)

        # Momentum at the candidate root; a nonnegative value is a graze,
        # which for these cubics only happens at a tangency, where the
        # trajectory would immediately go below ground; treat the
        # vanishing-momentum contact as the singular case.
        rooted = np.isfinite(tau)
        tau_r = np.where(rooted, tau, 0.0)
        p_hit = pa + tau_r * (-(m * g + ppa) + tau_r * pxa / (2.0 * m))
        hit = rooted & (p_hit < -p_min)
        graze_sing = rooted & (p_hit >= -p_min)

        # No impact before the horizon: advance to t_f and finish.
        done = ~rooted
        if done.any():
            rows = act[done]
            dtau = hi[done]
            ya = np.stack([xa[done], pa[done], pxa[done], ppa[done],
                           j[rows]], axis=-1)
            out = _advance(ya, dtau, m, g)
            if segment_sink is not None:
                segment_sink.append((float(ta[done][0]), t_f,
                                     ya[0].copy(), False))
            x[rows], p[rows], px[rows], pp[rows], j[rows] = out.T
            t[rows] = t_f
            status[rows] = STATUS_HORIZON

        if graze_sing.any():
            rows = act[graze_sing]
            dtau = tau[graze_sing]
            ya = np.stack([xa[graze_sing], pa[graze_sing], pxa[graze_sing],
                           ppa[graze_sing], j[rows]], axis=-1)
            out = _advance(ya, dtau, m, g)
            if segment_sink is not None:
                segment_sink.append((float(ta[graze_sing][0]),
                                     float(ta[graze_sing][0] + dtau[0]),
                                     ya[0].copy(), False))
            x[rows], p[rows], px[rows], pp[rows], j[rows] = out.T
            x[rows] = 0.0
            t[rows] = ta[graze_sing] + dtau
            status[rows] = STATUS_ZENO_SINGULAR

        if hit.any():
            rows = act[hit]
            dtau = tau[hit]
            ya = np.stack([xa[hit], pa[hit], pxa[hit], ppa[hit], j[rows]],
                          axis=-1)
            out = _advance(ya, dtau, m, g)
            if segment_sink is not None:
                segment_sink.append((float(ta[hit][0]),
                                     float(ta[hit][0] + dtau[0]),
                                     ya[0].copy(), True))
            xn, pn, pxn, ppn, jn = out.T
            t_new = ta[hit] + dtau
            # Impact: momentum jump and Hamiltonian-preserving co-state jump.
            p_post = -c2 * pn
            pp_post = -ppn / c2
            px_post = (-pxn / c2
                       + (m / (2.0 * c2)) * (ppn * ppn / pn) * (1.0 - 1.0 / (c2 * c2))
                       + (m * m * g / c2) * (ppn / pn) * (1.0 + 1.0 / c2))
            x[rows] = 0.0
            p[rows] = p_post
            px[rows] = px_post
            pp[rows] = pp_post
            j[rows] = jn
            t[rows] = t_new
            bounces[rows] += 1
            gaps[:-1, rows] = gaps[1:, rows]
            gaps[-1, rows] = dtau
            # Geometric-tail detection on the last four gaps.
            g0, g1, g2, g3 = gaps[0, rows], gaps[1, rows], gaps[2, rows], gaps[3, rows]
            with np.errstate(divide="ignore", invalid="ignore"):
                r1 = g1 / g0
                r2 = g2 / g1
                r3 = g3 / g2
            # NaN gaps (not enough impacts yet) compare False throughout.
            okratio = ((g3 < cfg.min_impact_gap)
                       & (r1 > 0.0) & (r1 < 1.0) & (r2 > 0.0) & (r2 < 1.0)
                       & (r3 > 0.0) & (r3 < 1.0))
            if okratio.any():
                zrows = rows[okratio]
                rr = r3[okratio]
                t_inf[zrows] = t_new[okratio] + g3[okratio] * rr / (1.0 - rr)
                status[zrows] = STATUS_ZENO_DETECTED
            cap = bounces[rows] >= cfg.max_events
            if cap.any():
                caprows = rows[cap & (status[rows] == STATUS_ACTIVE)]
                status[caprows] = STATUS_EVENT_LIMIT

    return BatchResult(t=t, y=np.stack([x, p, px, pp, j], axis=-1),
                       status=status, bounces=bounces, t_inf=t_inf)


def _advance(ya: np.ndarray, dtau: np.ndarray, m: float, g: float) -> np.ndarray:
    """Closed-form flight advance for rows ya=(x,p,px,pp,J) by times dtau."""
    x0, p0, px0, pp0, j0 = ya.T
    pc1 = -(m * g + pp0)
    pc2 = px0 / (2.0 * m)
    pn = p0 + dtau * (pc1 + dtau * pc2)
    xn = x0 + dtau * (p0 + dtau * (pc1 / 2.0 + dtau * (pc2 / 3.0))) / m
    ppn = pp0 - (px0 / m) * dtau
    jn = j0 + 0.5 * dtau * (pp0 * pp0 + dtau * (-pp0 * px0 / m
                                                + dtau * px0 * px0 / (3.0 * m * m)))
    return np.stack([xn, pn, px0, ppn, jn], axis=-1)


@dataclass
class ExactSegment:
    """One closed-form flight arc of the extended system."""

    t_start: float
    t_end: float
    y_start: np.ndarray  # (5,) state at t_start
    m: float
    g: float

    def eval(self, t: float) -> np.ndarray:
        tau = min(max(t, self.t_start), self.t_end) - self.t_start
        return eval_flight(self.y_start, tau, self.m, self.g)


@dataclass
class ExactTrajectory:
    """Exactly propagated extended trajectory with impact bookkeeping."""

    segments: list[ExactSegment]
    impact_times: list[float]
    status: int
    t_end: float
    y_end: np.ndarray
    t_inf: float | None = None

    @property
    def t_start(self) -> float:
        return self.segments[0].t_start if self.segments else self.t_end

    def state(self, t: float) -> np.ndarray:
        for seg in reversed(self.segments):
            if t >= seg.t_start:
                return seg.eval(t)
        return self.segments[0].eval(t) if self.segments else self.y_end.copy()

    def sample(self, dt: float) -> tuple[np.ndarray, np.ndarray]:
        if dt <= 0.0:
            raise ValueError("dt must be positive")
        ts = np.arange(self.t_start, self.t_end, dt)
        if ts.size == 0 or ts[-1] < self.t_end:
            ts = np.append(ts, self.t_end)
        ys = np.stack([self.state(float(u)) for u in ts])
        return ts, ys


def propagate_recorded(y0: np.ndarray, t0: float, t_f: float,
                       params: PhysParams, cfg: IntegratorConfig | None = None,
                       p_min: float = P_MIN) -> ExactTrajectory:
    """Single-trajectory exact propagation that keeps every flight arc."""
    sink: list = []
    res = propagate_batch(np.asarray(y0, dtype=float)[None, :], t0, t_f,
                          params, cfg, p_min=p_min, segment_sink=sink)
    segs = [ExactSegment(t_start=a, t_end=b, y_start=y, m=params.m, g=params.g)
            for (a, b, y, _) in sink]
    impacts = [b for (_, b, _, ended_with_reset) in sink if ended_with_reset]
    # Instant impacts at t0 (ground-level descending starts) have no arc.
    nb = int(res.bounces[0])
    if len(impacts) < nb:
        impacts = [t0] * (nb - len(impacts)) + impacts
    ti = float(res.t_inf[0])
    return ExactTrajectory(segments=segs, impact_times=impacts,
                           status=int(res.status[0]), t_end=float(res.t[0]),
                           y_end=res.y[0].copy(),
                           t_inf=None if np.isnan(ti) else ti)
