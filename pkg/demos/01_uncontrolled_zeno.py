"""Drop the ball with no control and watch the impact times pile up.

Flight durations shrink geometrically (ratio c per bounce), so the ball
comes to rest after infinitely many bounces in finite time. The simulator
detects the accumulation and reports t_inf; the closed-form series gives
the same number independently.
"""
import numpy as np

from zenoball import (
    BallState,
    IntegratorConfig,
    PhysParams,
    make_ball_system,
    simulate_hybrid,
    zeno_time_printed,
    zeno_time_series,
)


def main():
    params = PhysParams()
    cfg = IntegratorConfig()
    state0 = BallState(x=1.0, p=0.0)

    traj = simulate_hybrid(make_ball_system(params),
                           np.array([state0.x, state0.p]), 0.0, 10.0, cfg)
    print(f"termination: {traj.termination.name}")
    print(f"impacts recorded before cutoff: {len(traj.impact_times)}")

    print("\n  k   t_k            gap_k / gap_(k-1)")
    gaps = np.diff(traj.impact_times)
    for k, t in enumerate(traj.impact_times[:10]):
        if k >= 2:
            print(f" {k:2d}   {t:.9f}    {gaps[k - 1] / gaps[k - 2]:.9f}")
        else:
            print(f" {k:2d}   {t:.9f}")
    print(f"(restitution squared, the exact gap ratio: {params.c ** 2})")

    series = zeno_time_series(state0, params)
    printed = zeno_time_printed(state0, params)
    print(f"\nextrapolated accumulation time  t_inf  = {traj.t_inf:.9f}")
    print(f"geometric-series closed form           = {series:.9f}")
    print(f"coefficient-3 variant (for comparison) = {printed:.9f}")
    print(f"|t_inf - series| = {abs(traj.t_inf - series):.2e}")


if __name__ == "__main__":
    main()
