"""Policy execution tests.

Hand-built constant paths and degenerate regions give exact expected
payoffs; the batch Monte Carlo estimator is checked against the per-path
executor on identical paths, and policy values are checked against the PDE
surface from below (any executed policy is admissible).
"""

import math

import numpy as np
import pytest

from noisyswitch.filtering import ReducedPath, simulate_reduced_path
from noisyswitch.strategy import (
    MCEstimate,
    estimate_value,
    evaluate_threshold_strategy,
    run_strategy,
)
from noisyswitch.vi_solver import Grid, ProblemSpec, SwitchingRegions, extract_regions

SPEC = ProblemSpec(epsilon=1.0)


def make_regions(grid, in_s0, in_s1):
    shape = (grid.n_t + 1, grid.n_x)
    return SwitchingRegions(
        grid=grid,
        in_S0=np.full(shape, in_s0, dtype=bool),
        in_S1=np.full(shape, in_s1, dtype=bool),
    )


def constant_path(m0, t0, T, n_steps, epsilon=1.0):
    times = np.linspace(t0, T, n_steps + 1)
    return ReducedPath(epsilon=epsilon, t0=t0, times=times,
                       values=np.full(n_steps + 1, float(m0)))


class TestRunStrategyExact:
    def test_never_switch_mode0_earns_nothing(self):
        grid = Grid(n_x=11, n_t=10)
        regions = make_regions(grid, False, False)
        path = constant_path(0.7, 0.0, 1.0, 10)
        ex = run_strategy(path, regions, SPEC, 0.0, 0)
        assert ex.realized_payoff == 0.0
        assert ex.switching_cost == 0.0
        assert ex.n_opens == ex.n_closes == 0
        assert list(ex.modes) == [0]

    def test_never_switch_mode1_accrues_linear_payoff(self):
        grid = Grid(n_x=11, n_t=10)
        regions = make_regions(grid, False, False)
        path = constant_path(0.7, 0.25, 1.0, 12)
        ex = run_strategy(path, regions, SPEC, 0.25, 1)
        # constant state: trapezoid accrual is exact, 10 * 0.7 * (1 - 0.25)
        assert ex.payoff_integral == pytest.approx(10 * 0.7 * 0.75, rel=1e-12)
        assert ex.realized_payoff == ex.payoff_integral
        assert len(ex.switch_times) == 0

    def test_immediate_close_pays_one_cost(self):
        grid = Grid(n_x=11, n_t=10)
        regions = make_regions(grid, False, True)
        path = constant_path(0.7, 0.0, 1.0, 10)
        ex = run_strategy(path, regions, SPEC, 0.0, 1)
        assert ex.realized_payoff == -SPEC.c10
        assert ex.n_closes == 1 and ex.n_opens == 0
        assert list(ex.modes) == [1, 0]
        assert ex.switch_times[0] == 0.0

    def test_immediate_open_then_hold(self):
        grid = Grid(n_x=11, n_t=10)
        regions = make_regions(grid, True, False)
        path = constant_path(0.5, 0.0, 1.0, 10)
        ex = run_strategy(path, regions, SPEC, 0.0, 0)
        assert ex.realized_payoff == pytest.approx(10 * 0.5 * 1.0 - SPEC.c01,
                                                   rel=1e-12)
        assert ex.n_opens == 1 and ex.n_closes == 0
        assert ex.switch_times[0] == 0.0

    def test_chatter_when_both_regions_full(self):
        # both regions everywhere: the policy flips once per step
        grid = Grid(n_x=11, n_t=4)
        regions = make_regions(grid, True, True)
        path = constant_path(1.0, 0.0, 1.0, 4)
        ex = run_strategy(path, regions, SPEC, 0.0, 0)
        assert ex.n_opens == 2 and ex.n_closes == 2
        assert list(ex.modes) == [0, 1, 0, 1, 0]
        # open during steps 0 and 2, each of length 1/4, at state 1.0
        assert ex.payoff_integral == pytest.approx(10 * 1.0 * 0.5, rel=1e-12)
        assert ex.switching_cost == pytest.approx(
            2 * SPEC.c01 + 2 * SPEC.c10, rel=1e-12)
        assert ex.realized_payoff == pytest.approx(
            ex.payoff_integral - ex.switching_cost, rel=1e-12)

    def test_no_decision_at_horizon(self):
        # a path that only has the terminal point left makes no decisions
        grid = Grid(n_x=11, n_t=10)
        regions = make_regions(grid, True, True)
        path = constant_path(1.0, 1.0 - 1e-9, 1.0, 1)
        ex = run_strategy(path, regions, SPEC, 1.0 - 1e-9, 0)
        assert ex.n_opens == 1  # the single pre-horizon step still decides
        path_end = ReducedPath(epsilon=1.0, t0=1.0,
                               times=np.array([1.0, 1.0]),
                               values=np.array([1.0, 1.0]))
        ex_end = run_strategy(path_end, regions, SPEC, 1.0, 0)
        assert ex_end.n_opens == 1  # zero-length step: decision, no accrual
        assert ex_end.payoff_integral == 0.0

    def test_clamp_counting_outside_grid(self):
        grid = Grid(x_min=-1.0, x_max=1.0, n_x=21, n_t=8)
        regions = make_regions(grid, False, False)
        path = constant_path(5.0, 0.0, 1.0, 8)
        ex = run_strategy(path, regions, SPEC, 0.0, 1)
        assert ex.n_clamped == 8  # one clamp per decision step
        # accrual still uses the true path state, not the clamped node
        assert ex.payoff_integral == pytest.approx(10 * 5.0 * 1.0, rel=1e-12)

    def test_modes_alternate(self, sweep_small):
        regions = extract_regions(sweep_small[1.0])
        path = simulate_reduced_path(0.0, 0.0, 1.0, 1.0, 400, seed=7)
        ex = run_strategy(path, regions, sweep_small[1.0].spec, 0.0, 1)
        assert len(ex.modes) == 1 + len(ex.switch_times)
        assert np.all(np.diff(ex.modes) != 0)
        assert ex.realized_payoff == pytest.approx(
            ex.payoff_integral - ex.switching_cost, abs=1e-15)
        assert ex.switching_cost == pytest.approx(
            ex.n_opens * SPEC.c01 + ex.n_closes * SPEC.c10, rel=1e-12)

    def test_decisions_are_adapted(self, sweep_small):
        # truncating the path never changes decisions already made
        regions = extract_regions(sweep_small[1.0])
        path = simulate_reduced_path(0.0, 0.0, 1.0, 1.0, 400, seed=11)
        full = run_strategy(path, regions, sweep_small[1.0].spec, 0.0, 1)
        k = 173
        trunc = ReducedPath(epsilon=1.0, t0=0.0, times=path.times[:k + 1],
                            values=path.values[:k + 1])
        part = run_strategy(trunc, regions, sweep_small[1.0].spec, 0.0, 1)
        cutoff = path.times[k]
        expected = full.switch_times[full.switch_times < cutoff]
        np.testing.assert_array_equal(part.switch_times, expected)

    def test_start_validation(self):
        grid = Grid(n_x=11, n_t=10)
        regions = make_regions(grid, False, False)
        path = constant_path(0.0, 0.0, 1.0, 10)
        with pytest.raises(ValueError, match="initial_mode"):
            run_strategy(path, regions, SPEC, 0.0, 2)
        with pytest.raises(ValueError, match="outside"):
            run_strategy(path, regions, SPEC, 2.0, 0)
        late = constant_path(0.0, 0.5, 1.0, 10)
        with pytest.raises(ValueError, match="starts at"):
            run_strategy(late, regions, SPEC, 0.0, 0)


class TestEstimateValue:
    def test_matches_per_path_executor(self, sweep_small):
        # the batch kernel and the python executor run the same policy on
        # the same paths; means agree to accumulation round-off
        surface = sweep_small[1.0]
        regions = extract_regions(surface)
        n_paths, n_steps = 200, 400
        est = estimate_value(surface.spec, regions, 0.0, 0.0, 1,
                             n_paths, n_steps, seed=3)
        payoffs = []
        for i in range(n_paths):
            path = simulate_reduced_path(0.0, 0.0, 1.0, 1.0, n_steps,
                                         seed=3, path_index=i)
            payoffs.append(run_strategy(path, regions, surface.spec,
                                        0.0, 1).realized_payoff)
        assert est.mean == pytest.approx(float(np.mean(payoffs)), abs=1e-12)

    def test_deterministic_and_seed_sensitive(self, sweep_small):
        surface = sweep_small[1.0]
        regions = extract_regions(surface)
        a = estimate_value(surface.spec, regions, 0.0, 0.0, 1, 400, 200, seed=5)
        b = estimate_value(surface.spec, regions, 0.0, 0.0, 1, 400, 200, seed=5)
        c = estimate_value(surface.spec, regions, 0.0, 0.0, 1, 400, 200, seed=6)
        assert (a.mean, a.std_err) == (b.mean, b.std_err)
        assert a.mean != c.mean

    def test_policy_value_tracks_surface(self, sweep_small):
        # executed policy value is a lower bound up to discretization and
        # stays within a few standard errors of the PDE value
        surface = sweep_small[1.0]
        regions = extract_regions(surface)
        pde = surface.value_at(0.0, 0.0, 1)
        est = estimate_value(surface.spec, regions, 0.0, 0.0, 1,
                             4000, 400, seed=1)
        assert est.std_err < 0.05
        assert abs(est.mean - pde) <= 0.02 + 4.0 * est.std_err

    def test_argument_validation(self, sweep_small):
        surface = sweep_small[1.0]
        regions = extract_regions(surface)
        with pytest.raises(ValueError, match="n_paths"):
            estimate_value(surface.spec, regions, 0.0, 0.0, 1, 50, 100, seed=0)
        with pytest.raises(ValueError, match="n_steps"):
            estimate_value(surface.spec, regions, 0.0, 0.0, 1, 100, 0, seed=0)
        with pytest.raises(ValueError, match="initial_mode"):
            estimate_value(surface.spec, regions, 0.0, 0.0, 3, 100, 100, seed=0)


class TestThresholdStrategy:
    def test_never_open_is_exactly_zero(self):
        est = evaluate_threshold_strategy(SPEC, math.inf, -math.inf, 0.0, 0.0,
                                          0, 200, 50, seed=0)
        assert est.mean == 0.0
        assert est.std_err == 0.0

    def test_never_close_matches_region_policy(self):
        # hysteresis with unreachable levels == all-false regions: both hold
        # mode 1 for the whole horizon over the identical path set
        grid = Grid(n_x=11, n_t=50)
        regions = make_regions(grid, False, False)
        a = evaluate_threshold_strategy(SPEC, math.inf, -math.inf, 0.0, 0.3,
                                        1, 300, 50, seed=9)
        b = estimate_value(SPEC, regions, 0.0, 0.3, 1, 300, 50, seed=9)
        assert a.mean == pytest.approx(b.mean, abs=1e-12)

    def test_crossed_levels_rejected(self):
        with pytest.raises(ValueError, match="close_level"):
            evaluate_threshold_strategy(SPEC, 0.0, 0.5, 0.0, 0.0, 0,
                                        200, 50, seed=0)
        with pytest.raises(ValueError, match="NaN"):
            evaluate_threshold_strategy(SPEC, math.nan, 0.0, 0.0, 0.0, 0,
                                        200, 50, seed=0)

    def test_threshold_below_optimal(self, sweep_small):
        # any admissible policy underperforms the PDE value beyond noise
        surface = sweep_small[1.0]
        pde = surface.value_at(0.0, 0.0, 1)
        est = evaluate_threshold_strategy(surface.spec, 0.3, -0.3, 0.0, 0.0,
                                          1, 4000, 400, seed=2)
        assert est.mean <= pde + 0.02 + 4.0 * est.std_err


class TestMCEstimate:
    def test_validation(self):
        with pytest.raises(ValueError):
            MCEstimate(mean=0.0, std_err=0.1, n_paths=0)
        with pytest.raises(ValueError):
            MCEstimate(mean=0.0, std_err=-0.1, n_paths=10)
        est = MCEstimate(mean=1.0, std_err=0.0, n_paths=10)
        assert est.n_clamped == 0
