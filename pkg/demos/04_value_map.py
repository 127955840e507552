"""Map the optimal-cost surface over initial states.

For each start the true value is the cheaper of two competitors: the best
bouncing extremal from multistart shooting, and the rest-then-fly plan
(available whenever the ball can reach rest early enough). Near the origin
the rest plan wins and the value surface is exactly flat at J*.
"""
import pathlib

from zenoball import (
    Axis,
    GridSpec,
    IntegratorConfig,
    PhysParams,
    SolverConfig,
    boundary_curve,
    sweep_state_grid,
    write_boundary_csv,
    write_state_csv,
)
from zenoball.heatmap import render_heatmap, value_palette


def main():
    params = PhysParams()
    cfg = IntegratorConfig()
    # coarse but quick; the CLI's `sweep state` runs the full 101 x 101 map
    grid = GridSpec(Axis("x0", 0.0, 2.0, 21), Axis("p0", -2.0, 2.0, 21))
    scfg = SolverConfig(seeds_per_axis=5)

    rows = sweep_state_grid(grid, params, cfg, scfg)
    cells = [c for row in rows for c in row]
    zeno = [c for c in cells if c.branch == "zeno"]
    print(f"grid: {len(cells)} states, {len(zeno)} on the Zeno branch")
    if zeno:
        vals = {c.j_true for c in zeno}
        print(f"value on the Zeno branch: {sorted(vals)}")
    spread = [c for c in cells if c.branch == "shoot"]
    print(f"shoot-branch value range: [{min(c.j_true for c in spread):.6f},"
          f" {max(c.j_true for c in spread):.6f}]")

    out = pathlib.Path("demos_out_value_map")
    out.mkdir(exist_ok=True)
    write_state_csv(rows, out / "state_sweep.csv")

    # where resting stops being an option: zeno_time(x, p) + T* = t_f
    pts = boundary_curve(params, grid.axis1.values())
    write_boundary_csv(pts, out / "feasibility_boundary.csv")
    print(f"feasibility boundary: {len(pts)} points, "
          f"p({pts[0][0]:.2f}) = {pts[0][1]:.4f}")

    values = [[c.j_true for c in row] for row in rows]
    render_heatmap(values, value_palette(), out / "value.svg",
                   x_axis=("x0", 0.0, 2.0), y_axis=("p0", -2.0, 2.0),
                   title="value function",
                   overlays=[(pts, {"stroke": "#000000"})])
    print(f"artifacts under {out}/")


if __name__ == "__main__":
    main()
