"""Boundary-value shooting: single shots, local solves, multistart."""
import csv
import math

import numpy as np
import pytest

from zenoball import (
    BallState,
    Costate,
    InvalidInitialState,
    SolverConfig,
    dedupe_and_sort,
    j_shoot,
    local_root_solve,
    multistart_solve,
    residual,
    shoot,
    write_seed_table_csv,
)
from zenoball.shooting import ShootResult

import oracles


# Empirically frozen best root at x0 = (0.1, 0) with the default 25x25
# seed box: five bounces, found from many distinct seeds.
BEST_COSTATE = Costate(px=-1.7656981023271467, pp=-0.09616377731651161)
BEST_COST = 1.6225074338170125


class TestSolverConfig:
    @pytest.mark.parametrize("bad", [
        {"seeds_per_axis": 0}, {"root_tol": 0.0}, {"max_iters": 0},
        {"fd_step": -1e-7}, {"dedupe_radius": -1.0},
        {"seed_box": ((2.0, -2.0), (-2.0, 2.0))},
    ])
    def test_rejects_bad_knobs(self, bad):
        with pytest.raises(ValueError):
            SolverConfig(**bad)


class TestShoot:
    def test_steering_root_from_rest(self, params, cfg):
        # From rest at the origin the zero-bounce extremal over the full
        # horizon is the affine-control steering arc; its co-states and
        # cost have closed forms.
        out = shoot(BallState(0.0, 0.0), Costate(px=-0.012, pp=-1.06),
                    params, cfg)
        assert not out.zeno_hit
        assert out.bounces == 0
        assert np.linalg.norm(out.residual) <= 1e-9
        assert out.cost == pytest.approx(5.006, rel=1e-12)
        assert out.cost == pytest.approx(
            oracles.steering_cost_quadrature(10.0, 1.0), rel=1e-9)

    def test_known_five_bounce_root(self, params, cfg):
        out = shoot(BallState(0.1, 0.0), BEST_COSTATE, params, cfg)
        assert not out.zeno_hit
        assert out.bounces == 5
        assert np.linalg.norm(out.residual) <= 1e-9
        assert out.cost == pytest.approx(BEST_COST, rel=1e-12)

    def test_engines_agree(self, params, cfg):
        exact = shoot(BallState(0.1, 0.0), BEST_COSTATE, params, cfg,
                      engine="exact")
        rk = shoot(BallState(0.1, 0.0), BEST_COSTATE, params, cfg,
                   engine="rk45")
        assert rk.bounces == exact.bounces
        assert rk.cost == pytest.approx(exact.cost, abs=1e-8)
        assert rk.terminal.x == pytest.approx(exact.terminal.x, abs=1e-7)

    def test_zero_costates_hit_zeno(self, params, cfg):
        out = shoot(BallState(0.1, 0.0), Costate(px=0.0, pp=0.0),
                    params, cfg)
        assert out.zeno_hit
        assert not math.isfinite(out.cost)

    def test_negative_height_rejected(self, params, cfg):
        with pytest.raises(InvalidInitialState):
            shoot(BallState(-0.2, 0.0), Costate(px=0.0, pp=-1.0),
                  params, cfg)

    def test_residual_vector(self, params, cfg):
        out = shoot(BallState(0.0, 0.0), Costate(px=-0.012, pp=-1.06),
                    params, cfg)
        r = residual(BallState(0.0, 0.0), Costate(px=-0.012, pp=-1.06),
                     params, cfg)
        assert np.array_equal(r, out.residual)
        assert r == pytest.approx([0.0, 0.0], abs=1e-10)


class TestLocalRootSolve:
    def test_polishes_nearby_seed(self, params, cfg):
        # basin of the five-bounce root is narrow; stay well inside it
        seed = Costate(px=BEST_COSTATE.px + 1e-4,
                       pp=BEST_COSTATE.pp - 1e-4)
        got = local_root_solve(BallState(0.1, 0.0), seed, params, cfg)
        assert got is not None
        assert got.residual_norm <= 1e-9
        assert got.costate.px == pytest.approx(BEST_COSTATE.px, abs=1e-8)
        assert got.costate.pp == pytest.approx(BEST_COSTATE.pp, abs=1e-8)
        assert got.cost == pytest.approx(BEST_COST, rel=1e-10)

    def test_nearby_seeds_land_on_same_root(self, params, cfg):
        a = local_root_solve(BallState(0.1, 0.0),
                             Costate(px=-1.76, pp=-0.10), params, cfg)
        b = local_root_solve(BallState(0.1, 0.0),
                             Costate(px=-1.77, pp=-0.09), params, cfg)
        assert a is not None and b is not None
        assert a.costate.px == pytest.approx(b.costate.px, abs=1e-6)
        assert a.costate.pp == pytest.approx(b.costate.pp, abs=1e-6)

    def test_zeno_seed_fails_cleanly(self, params, cfg):
        got = local_root_solve(BallState(0.1, 0.0),
                               Costate(px=0.0, pp=0.0), params, cfg)
        assert got is None


@pytest.fixture(scope="module")
def study_roots(params, cfg):
    records = []
    results = multistart_solve(BallState(0.1, 0.0), params, cfg,
                               SolverConfig(), records_out=records)
    return results, records


class TestMultistart:

    def test_finds_fifteen_roots(self, study_roots):
        results, _ = study_roots
        assert len(results) == 15

    def test_best_root_frozen_values(self, study_roots):
        results, _ = study_roots
        best = results[0]
        assert best.cost == pytest.approx(BEST_COST, rel=1e-12)
        assert best.bounces == 5
        assert best.costate.px == pytest.approx(BEST_COSTATE.px, abs=1e-9)
        assert best.costate.pp == pytest.approx(BEST_COSTATE.pp, abs=1e-9)

    def test_results_sorted_and_converged(self, study_roots):
        results, _ = study_roots
        costs = [r.cost for r in results]
        assert costs == sorted(costs)
        for r in results:
            assert r.residual_norm <= 1e-9
            assert r.cost >= 0.0

    def test_j_shoot_selects_minimum(self, study_roots):
        results, _ = study_roots
        assert j_shoot(results) == results[0].cost

    def test_records_cover_every_seed(self, study_roots):
        _, records = study_roots
        assert len(records) == 25 * 25
        assert any(r.zeno_hit for r in records)
        assert any(r.converged for r in records)
        for r in records:
            if r.converged:
                assert r.residual_norm <= 1e-9

    def test_worker_count_does_not_change_results(self, params, cfg):
        scfg = SolverConfig(seeds_per_axis=5)
        one = multistart_solve(BallState(0.1, 0.0), params, cfg, scfg,
                               workers=1)
        two = multistart_solve(BallState(0.1, 0.0), params, cfg, scfg,
                               workers=2)
        assert one == two

    def test_rest_start_still_has_roots(self, params, cfg):
        # From (0, 0) the steering arc is one extremal among several, and
        # not the cheapest: a one-bounce root undercuts it.
        results = multistart_solve(BallState(0.0, 0.0), params, cfg,
                                   SolverConfig(seeds_per_axis=5))
        assert len(results) == 2
        assert results[0].bounces == 1
        assert results[0].cost == pytest.approx(3.181026288192698, rel=1e-12)
        steer = results[1]
        assert steer.bounces == 0
        assert steer.cost == pytest.approx(5.006, rel=1e-10)
        assert steer.costate.px == pytest.approx(-0.012, rel=1e-9)
        assert steer.costate.pp == pytest.approx(-1.06, rel=1e-9)

    def test_j_shoot_of_nothing_is_infinite(self):
        assert j_shoot([]) == math.inf


class TestDedupeAndSort:
    def mk(self, px, pp, cost, bounces=1, rn=1e-12):
        return ShootResult(seed=Costate(px=0.0, pp=0.0),
                           costate=Costate(px=px, pp=pp),
                           residual_norm=rn, bounces=bounces, cost=cost)

    def test_collapses_within_radius(self):
        rs = [self.mk(1.0, 1.0, 2.0), self.mk(1.0 + 5e-6, 1.0, 3.0),
              self.mk(1.5, 1.0, 1.0)]
        out = dedupe_and_sort(rs, 1e-5)
        assert len(out) == 2
        assert out[0].cost == 1.0
        # The first-seen representative wins, keeping lattice order stable.
        assert out[1].cost == 2.0

    def test_sort_breaks_ties_deterministically(self):
        rs = [self.mk(2.0, 0.0, 1.0, bounces=3),
              self.mk(1.0, 0.0, 1.0, bounces=2),
              self.mk(0.5, 0.0, 1.0, bounces=2)]
        out = dedupe_and_sort(rs, 1e-9)
        assert [(r.bounces, r.costate.px) for r in out] == \
            [(2, 0.5), (2, 1.0), (3, 2.0)]


class TestSeedTableCsv:
    def test_round_trip(self, params, cfg, tmp_path):
        records = []
        multistart_solve(BallState(0.1, 0.0), params, cfg,
                         SolverConfig(seeds_per_axis=3), records_out=records)
        path = tmp_path / "seeds.csv"
        write_seed_table_csv(records, path)
        rows = list(csv.DictReader(open(path)))
        assert len(rows) == 9
        assert list(rows[0]) == ["seed_px", "seed_pp", "converged",
                                 "residual_norm", "bounces", "cost",
                                 "zeno_hit"]
        for rec, row in zip(records, rows):
            assert float(row["seed_px"]) == rec.seed.px
            assert int(row["converged"]) == int(rec.converged)
