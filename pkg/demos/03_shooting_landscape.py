"""Multistart shooting from (0.1, 0) and the co-state seed landscape.

Every extremal of the impact-aware two-point boundary problem shows up as
a root of the shooting map. A raw sweep over seed co-states (no root
polish) exposes the basin structure: bounce-count plateaus separated by
curves where trajectories graze the guard, plus the singular seed whose
trajectory never leaves the Zeno cascade.
"""
import pathlib

from zenoball import (
    Axis,
    BallState,
    GridSpec,
    IntegratorConfig,
    PhysParams,
    SolverConfig,
    multistart_solve,
    sweep_costate_grid,
    write_costate_csv,
)
from zenoball.heatmap import bounce_palette, render_heatmap, value_palette


def main():
    params = PhysParams()
    cfg = IntegratorConfig()
    x0 = BallState(0.1, 0.0)

    roots = multistart_solve(x0, params, cfg, SolverConfig())
    print(f"distinct extremals found: {len(roots)}")
    print(f"{'p_x(0)':>22} {'p_p(0)':>22} {'bounces':>8} {'cost':>20}")
    for r in roots:
        print(f"{r.costate.px:22.15f} {r.costate.pp:22.15f} "
              f"{r.bounces:8d} {r.cost:20.15f}")
    print(f"cheapest extremal cost J_shoot = {roots[0].cost!r}")

    # raw sweep, 201 x 201 seeds
    grid = GridSpec(Axis("seed_px", -2.0, 2.0, 201),
                    Axis("seed_pp", -2.0, 2.0, 201))
    matrix = sweep_costate_grid(x0, grid, params, cfg)
    n_zeno = sum(c.zeno for row in matrix for c in row)
    print(f"\nseed sweep: {grid.axis1.n * grid.axis2.n} shoots, "
          f"{n_zeno} Zeno-trapped seed(s)")

    out = pathlib.Path("demos_out_landscape")
    out.mkdir(exist_ok=True)
    write_costate_csv(matrix, out / "costate_sweep.csv")
    bounces = [[min(c.bounces, 7) if not c.zeno else float("nan")
                for c in row] for row in matrix]
    logerr = [[c.log_error for c in row] for row in matrix]
    ax1 = ("p_x(0)", -2.0, 2.0)
    ax2 = ("p_p(0)", -2.0, 2.0)
    render_heatmap(bounces, bounce_palette(), out / "bounces.svg",
                   x_axis=ax1, y_axis=ax2,
                   title="bounce count (cropped at 6)")
    render_heatmap(logerr, value_palette(), out / "log_error.svg",
                   x_axis=ax1, y_axis=ax2, title="terminal log-error")
    print(f"wrote CSV and two SVG maps under {out}/")


if __name__ == "__main__":
    main()
