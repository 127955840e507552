import pytest

from zenoball import Axis, GridSpec, IntegratorConfig, PhysParams, \
    SolverConfig, sweep_state_grid


@pytest.fixture(scope="session")
def params():
    """Study parameters: m=1, g=1, c=0.75, horizon 10, target (1, 0)."""
    return PhysParams()


@pytest.fixture(scope="session")
def cfg():
    return IntegratorConfig()


@pytest.fixture(scope="session")
def sweep_solver():
    """Seed lattice used for the large state sweeps.

    13 seeds per axis is the sparsest lattice whose classifier matches the
    default 25x25 one on the Zeno region (checked empirically); it keeps
    the big sweeps inside an hour on one core.
    """
    return SolverConfig(seeds_per_axis=13)


def state_grid(n: int) -> GridSpec:
    return GridSpec(Axis("x0", 0.0, 2.0, n), Axis("p0", -2.0, 2.0, n))


@pytest.fixture(scope="session")
def state_rows_51(params, cfg, sweep_solver):
    """51x51 value-map sweep, computed once per test run (minutes)."""
    return sweep_state_grid(state_grid(51), params, cfg, sweep_solver)


@pytest.fixture(scope="session")
def state_rows_101(params, cfg, sweep_solver):
    """101x101 value-map sweep, computed once per test run (tens of
    minutes); only the refinement test requests it."""
    return sweep_state_grid(state_grid(101), params, cfg, sweep_solver)
