"""Hybrid-systems simulation and indirect optimal control of the damped
bouncing ball, including closed-form synthesis through the Zeno accumulation."""
from __future__ import annotations

from .ball import (
    BallState,
    ConfigError,
    Costate,
    ExtendedState,
    GuardViolation,
    PhysParams,
    ZenoSingularity,
    ballistic_flight,
    controlled_flow,
    extended_reset,
    load_params,
    make_ball_system,
    make_extended_system,
    optimal_hamiltonian,
    reset,
    zeno_time_printed,
    zeno_time_series,
)
from .hybrid import (
    HybridSystemDef,
    HybridTrajectory,
    IntegratorConfig,
    InvalidInitialState,
    Segment,
    StepSizeUnderflow,
    Termination,
    detect_zeno,
    integrate_segment,
    simulate_hybrid,
)
from .shooting import (
    SeedRecord,
    ShootOutcome,
    ShootResult,
    SolverConfig,
    dedupe_and_sort,
    j_shoot,
    local_root_solve,
    multistart_solve,
    residual,
    shoot,
    write_seed_table_csv,
)
from .zeno import (
    Branch,
    Infeasible,
    NonpositiveDuration,
    NotLocallyOptimal,
    ZenoPlan,
    is_zeno_locally_optimal,
    optimal_switch,
    steering_cost,
    switch_on_costate,
    synthesize_zeno_execution,
    true_value,
    write_zeno_plan,
    write_zeno_trajectory_csv,
)
from .sweeps import (
    Axis,
    CostateCell,
    GridSpec,
    NoRoot,
    StateCell,
    boundary_curve,
    config_hash,
    default_costate_grid,
    default_state_grid,
    iter_state_rows,
    sweep_costate_grid,
    sweep_state_grid,
    write_boundary_csv,
    write_costate_csv,
    write_metadata,
    write_state_csv,
)
from .heatmap import (
    CategoricalPalette,
    ContinuousPalette,
    bounce_palette,
    render_heatmap,
    value_palette,
)

__version__ = "0.1.0"
