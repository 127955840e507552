"""Steer the ball from rest on the ground to (x_f, p_f) = (1, 0) at t_f.

Strategy: let the ball sit at the contact point until exactly the optimal
steering window T* remains, then fly a single controlled arc. The demo
prints the cost trade-off, synthesizes the arc, and checks the endpoint.
"""
import math

import numpy as np

from zenoball import (
    BallState,
    PhysParams,
    optimal_switch,
    steering_cost,
    switch_on_costate,
    synthesize_zeno_execution,
    write_zeno_trajectory_csv,
)


def main():
    params = PhysParams()
    t_star, j_star = optimal_switch(params)

    print("steering window T vs cost J(T):")
    for t in (0.5, 1.0, 2.0, t_star, 3.0, 5.0, 10.0):
        tag = "   <- optimal" if t == t_star else ""
        print(f"  T = {t:9.6f}   J = {steering_cost(t, params):12.8f}{tag}")
    print(f"\nT* = sqrt(6/g) = {t_star!r}")
    print(f"J* = {j_star!r}")

    costate = switch_on_costate(params)
    print(f"co-states at switch-on: p_x = {costate.px!r}, "
          f"p_p = {costate.pp!r}")

    samples, plan = synthesize_zeno_execution(BallState(0.1, 0.0), params)
    print(f"\nfull execution from (0.1, 0): rest by t = {plan.t_zeno:.6f}, "
          f"controls on at t = {plan.t_on:.6f}")
    end = samples[-1]
    print(f"endpoint at t_f = {end[0]}: x = {float(end[1])!r}, "
          f"p = {float(end[2])!r}")
    print(f"target miss: {math.hypot(end[1] - params.x_f, end[2] - params.p_f):.2e}")

    out = "demos_out_rest_to_target.csv"
    write_zeno_trajectory_csv(samples, out)
    n_coast = int(np.sum(samples[:, 0] < plan.t_on))
    print(f"wrote {len(samples)} samples ({n_coast} on the ground) to {out}")


if __name__ == "__main__":
    main()
