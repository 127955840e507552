"""Closed-form propagation: flight algebra, root finding, batch semantics."""
import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import assume, given, settings
from hypothesis import strategies as st

from zenoball import make_extended_system, simulate_hybrid
from zenoball.ball import hamiltonian_raw
from zenoball.exactflow import (
    STATUS_EVENT_LIMIT,
    STATUS_HORIZON,
    STATUS_ZENO_DETECTED,
    STATUS_ZENO_SINGULAR,
    _first_descending_root,
    eval_flight,
    propagate_batch,
    propagate_recorded,
)

import oracles


class TestEvalFlight:
    def test_polynomial_components(self, params):
        y0 = np.array([1.0, 0.5, -0.3, -1.2, 0.25])
        tau = 0.7
        out = eval_flight(y0, tau, params.m, params.g)
        # dp/dt = -(m g + p_p(t)); p_p linear makes p quadratic, x cubic.
        pp_t = -1.2 + 0.3 * tau
        assert out[3] == pytest.approx(pp_t, rel=1e-15)
        assert out[2] == pytest.approx(-0.3, rel=1e-15)
        p_t = 0.5 + (-1.0 + 1.2) * tau - 0.3 * tau**2 / 2.0
        assert out[1] == pytest.approx(p_t, rel=1e-14)
        x_t = 1.0 + 0.5 * tau + 0.2 * tau**2 / 2.0 - 0.3 * tau**3 / 6.0
        assert out[0] == pytest.approx(x_t, rel=1e-14)

    def test_cost_is_control_energy(self, params):
        y0 = np.array([1.0, 0.0, -0.4, -1.5, 0.0])
        taus = np.linspace(0.0, 2.0, 41)
        out = eval_flight(y0, taus, params.m, params.g)
        u = -out[:, 3]
        j_ref = np.concatenate([[0.0], np.cumsum(
            0.5 * (u[1:] ** 2 + u[:-1] ** 2) / 2.0 * np.diff(taus))])
        assert out[:, 4] == pytest.approx(j_ref, abs=5e-4)
        assert np.all(np.diff(out[:, 4]) >= -1e-15)
        assert out[0, 4] == 0.0

    def test_hamiltonian_constant_in_flight(self, params):
        y0 = np.array([2.0, -1.0, 0.8, 0.3, 0.0])
        taus = np.linspace(0.0, 1.5, 17)
        out = eval_flight(y0, taus, params.m, params.g)
        h = [hamiltonian_raw(y[1], y[2], y[3], params.m, params.g)
             for y in out]
        assert np.ptp(h) <= 1e-12


class TestFirstDescendingRoot:
    def run_one(self, c0, c1, c2, c3, hi=10.0):
        arr = lambda v: np.array([float(v)])
        return float(_first_descending_root(arr(c0), arr(c1), arr(c2),
                                            arr(c3), arr(hi))[0])

    def test_pure_parabola_drop(self):
        # 1 - t^2/2: crosses zero descending at sqrt(2).
        got = self.run_one(1.0, 0.0, -0.5, 0.0)
        assert got == pytest.approx(math.sqrt(2.0), rel=1e-12)

    def test_skips_ascending_crossing(self):
        # t^2 - 1 on [0, 10] crosses upward at t=1; no descending crossing
        # from a positive start, and the start is negative anyway.
        got = self.run_one(2.0, 3.0, 1.0, 0.0)
        assert got == math.inf

    def test_cubic_with_hump(self):
        # Rises, then dips through zero: first descending root only.
        got = self.run_one(0.5, 1.0, -1.0, 0.0)
        ref = oracles.first_cubic_root_reference((0.5, 1.0, -1.0, 0.0), 10.0)
        assert got == pytest.approx(ref, rel=1e-10)

    def test_no_root_within_horizon(self):
        got = self.run_one(1.0, 0.0, -0.5, 0.0, hi=1.0)
        assert got == math.inf

    # Leading coefficients are either exactly zero or well scaled; a
    # subnormal cubic term makes the companion-matrix reference itself
    # meaningless.
    _scaled = st.one_of(st.just(0.0), st.floats(1e-3, 5.0),
                        st.floats(-5.0, -1e-3))

    @settings(max_examples=400, deadline=None)
    @given(c0=st.floats(0.01, 5.0), c1=_scaled, c2=_scaled,
           c3=st.one_of(st.just(0.0), st.floats(1e-3, 2.0),
                        st.floats(-2.0, -1e-3)))
    def test_matches_companion_matrix_roots(self, c0, c1, c2, c3):
        ref = oracles.first_cubic_root_reference((c0, c1, c2, c3), 10.0)
        got = self.run_one(c0, c1, c2, c3)
        if ref is None:
            assert got == math.inf
            return
        slope = c1 + 2 * c2 * ref + 3 * c3 * ref**2
        assume(abs(slope) > 1e-6)  # tangential grazes are a different path
        assert got == pytest.approx(ref, rel=1e-9, abs=1e-9)


class TestPropagateBatch:
    def test_matches_adaptive_integrator(self, params, cfg):
        y0 = np.array([0.1, 0.0, -1.7656981023271467, -0.09616377731651161,
                       0.0])
        res = propagate_batch(y0[None, :], 0.0, params.t_f, params)
        sysdef = make_extended_system(params)
        traj = simulate_hybrid(sysdef, y0, 0.0, params.t_f, cfg)
        assert res.status[0] == STATUS_HORIZON
        ref = traj.segments[-1].end_state
        assert res.y[0, :2] == pytest.approx(ref[:2], abs=1e-6)
        assert res.bounces[0] == len(traj.impact_times)

    def test_uncontrolled_coast_reaches_zeno(self, params):
        y0 = np.array([[0.1, 0.0, 0.0, 0.0, 0.0]])
        res = propagate_batch(y0, 0.0, params.t_f, params)
        assert res.status[0] in (STATUS_ZENO_DETECTED, STATUS_ZENO_SINGULAR)
        assert res.t[0] < params.t_f
        if res.status[0] == STATUS_ZENO_DETECTED:
            assert res.t_inf[0] == pytest.approx(1.5971914124998488,
                                                 abs=1e-6)

    def test_upward_control_never_lands(self, params):
        y0 = np.array([[1.0, 0.0, 0.0, -3.0, 0.0]])
        res = propagate_batch(y0, 0.0, params.t_f, params)
        assert res.status[0] == STATUS_HORIZON
        assert res.bounces[0] == 0

    def test_event_cap(self, params, cfg):
        capped = replace(cfg, max_events=3)
        y0 = np.array([[1.0, 0.0, 0.0, 0.0, 0.0]])
        res = propagate_batch(y0, 0.0, params.t_f, params, capped)
        assert res.status[0] == STATUS_EVENT_LIMIT
        assert res.bounces[0] == 3

    def test_instant_impact_at_ground_start(self, params):
        y0 = np.array([[0.0, -1.0, 1.0, 1.0, 0.0]])
        res = propagate_batch(y0, 0.0, params.t_f, params)
        assert res.bounces[0] >= 1

    def test_negative_height_rejected(self, params):
        with pytest.raises(ValueError):
            propagate_batch(np.array([[-0.5, 0.0, 0.0, 0.0, 0.0]]),
                            0.0, 10.0, params)

    def test_rows_are_independent(self, params):
        rng = np.random.default_rng(7)
        y0 = np.column_stack([
            rng.uniform(0.0, 2.0, 12),
            rng.uniform(-2.0, 2.0, 12),
            rng.uniform(-2.0, 2.0, 12),
            rng.uniform(-2.0, 2.0, 12),
            np.zeros(12),
        ])
        full = propagate_batch(y0, 0.0, params.t_f, params)
        halves = [propagate_batch(y0[:6], 0.0, params.t_f, params),
                  propagate_batch(y0[6:], 0.0, params.t_f, params)]
        assert np.array_equal(full.y[:6], halves[0].y)
        assert np.array_equal(full.y[6:], halves[1].y)
        perm = rng.permutation(12)
        shuffled = propagate_batch(y0[perm], 0.0, params.t_f, params)
        assert np.array_equal(shuffled.y, full.y[perm])
        assert np.array_equal(shuffled.status, full.status[perm])
        assert np.array_equal(shuffled.bounces, full.bounces[perm])

    def test_hamiltonian_preserved_across_whole_run(self, params):
        y0 = np.array([[0.1, 0.0, -1.7656981023271467,
                        -0.09616377731651161, 0.0]])
        res = propagate_batch(y0, 0.0, params.t_f, params)
        h0 = hamiltonian_raw(y0[0, 1], y0[0, 2], y0[0, 3],
                             params.m, params.g)
        h1 = hamiltonian_raw(res.y[0, 1], res.y[0, 2], res.y[0, 3],
                             params.m, params.g)
        assert h1 == pytest.approx(h0, rel=1e-10, abs=1e-12)


class TestPropagateRecorded:
    def test_segments_tile_the_run(self, params):
        y0 = np.array([0.1, 0.0, -1.7656981023271467, -0.09616377731651161,
                       0.0])
        traj = propagate_recorded(y0, 0.0, params.t_f, params)
        assert traj.status == STATUS_HORIZON
        assert traj.segments[0].t_start == 0.0
        assert traj.t_end == params.t_f
        for a, b in zip(traj.segments, traj.segments[1:]):
            assert a.t_end == b.t_start
        assert len(traj.impact_times) == len(traj.segments) - 1

    def test_impacts_touch_ground(self, params):
        y0 = np.array([0.1, 0.0, -1.7656981023271467, -0.09616377731651161,
                       0.0])
        traj = propagate_recorded(y0, 0.0, params.t_f, params)
        for k, t_k in enumerate(traj.impact_times):
            pre = traj.segments[k].eval(t_k)
            assert abs(pre[0]) <= 1e-12
            assert pre[1] < 0.0
            post = traj.segments[k + 1].y_start
            assert post[1] == pytest.approx(-params.c**2 * pre[1], rel=1e-9)

    def test_state_and_sample(self, params):
        y0 = np.array([1.0, 0.0, 0.0, -3.0, 0.0])
        traj = propagate_recorded(y0, 0.0, params.t_f, params)
        ts, ys = traj.sample(0.5)
        assert ts[0] == 0.0
        assert ts[-1] == params.t_f
        assert ys.shape == (len(ts), 5)
        assert np.array_equal(traj.state(0.0), y0)
        assert np.array_equal(ys[-1], traj.y_end)

    def test_terminal_matches_batch(self, params):
        y0 = np.array([0.5, -0.25, 0.4, -0.8, 0.0])
        traj = propagate_recorded(y0, 0.0, params.t_f, params)
        res = propagate_batch(y0[None, :], 0.0, params.t_f, params)
        assert np.array_equal(traj.y_end, res.y[0])
        assert traj.status == res.status[0]
