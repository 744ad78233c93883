from __future__ import annotations

import math

import numpy as np
import pytest

from multiflow import (
    CrossLayerFactors,
    Dirac,
    EmpiricalJoint,
    IndependentJoint,
    LayerWeightedEqual,
    Pareto,
    SystemConfig,
    Uniform,
    Weibull,
    apply_strategy,
    critical_attack_size,
    final_size,
    initial_state,
    is_stable_point,
    iterate_to_steady_state,
    stable_set_grid,
    step,
)
from helpers import random_system, single_layer_recursion


class TestInitialState:
    def test_quarter_attack(self, symmetric_uniform_config):
        state = initial_state(0.25, symmetric_uniform_config)
        assert state.t == 0
        assert state.n == 0.75
        assert state.q_a == 10.0
        assert state.q_b == 10.0

    def test_vanishing_attack(self, symmetric_uniform_config):
        state = initial_state(1e-12, symmetric_uniform_config)
        assert state.n == pytest.approx(1.0)
        assert state.q_a == pytest.approx(0.0, abs=1e-9)

    def test_even_split(self):
        cfg = SystemConfig.from_marginals(Uniform(50, 150), Uniform(25, 75),
                                          Uniform(25, 75), Uniform(25, 75))
        state = initial_state(0.5, cfg)
        assert state.q_a == pytest.approx(100.0)
        assert state.q_b == pytest.approx(50.0)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 1.5, math.nan])
    def test_rejects_bad_attack_fraction(self, p, symmetric_uniform_config):
        with pytest.raises(ValueError):
            initial_state(p, symmetric_uniform_config)


class TestStep:
    def test_fixed_point_when_no_failures(self, symmetric_uniform_config):
        state = initial_state(0.25, symmetric_uniform_config)
        after = step(state, 0.25, symmetric_uniform_config)
        assert after.t == 1
        assert after.n == 0.75
        assert after.q_a == 10.0
        assert after.q_b == 10.0

    def test_collapse_is_absorbing(self, symmetric_uniform_config):
        state = initial_state(0.9, symmetric_uniform_config)
        collapsed = step(state, 0.9, symmetric_uniform_config)
        assert collapsed.collapsed
        assert collapsed.q_a == math.inf
        again = step(collapsed, 0.9, symmetric_uniform_config)
        assert again.collapsed and again.q_a == math.inf

    def test_matches_single_layer_recursion_when_other_layer_inert(self):
        # layer B can never fail: Dirac free space far above anything reachable
        cfg = SystemConfig.from_marginals(Uniform(20, 40), Uniform(25, 60),
                                          Uniform(20, 40), Dirac(1e9))
        p = 0.5
        oracle = single_layer_recursion(p, 30.0, Uniform(25, 60))
        assert len(oracle) > 3  # a real multi-round cascade
        state = initial_state(p, cfg)
        for t in range(1, len(oracle)):
            state = step(state, p, cfg)
            n_ref, q_ref = oracle[t]
            assert state.n == pytest.approx(n_ref, rel=1e-12, abs=1e-15)
            if math.isinf(q_ref):
                assert state.collapsed
            else:
                assert state.q_a == pytest.approx(q_ref, rel=1e-12)


class TestIterate:
    def test_no_cascade_point(self, symmetric_uniform_config):
        steady = iterate_to_steady_state(0.25, symmetric_uniform_config)
        assert steady.n_inf == 0.75
        assert (steady.x_star, steady.y_star) == (10.0, 10.0)
        assert steady.iterations == 1
        assert steady.converged

    def test_collapse_beyond_critical(self, symmetric_uniform_config):
        steady = iterate_to_steady_state(0.9, symmetric_uniform_config)
        assert steady.n_inf == 0.0
        assert steady.x_star == math.inf and steady.y_star == math.inf
        assert steady.converged

    def test_optimal_dirac_allocation_converges_in_one_round(self):
        cfg = apply_strategy(LayerWeightedEqual(720), Pareto(100, 5), Uniform(150, 200),
                             CrossLayerFactors(0.2, 0.2))
        steady = iterate_to_steady_state(0.5, cfg)
        assert steady.n_inf == pytest.approx(0.5, abs=1e-15)
        assert steady.iterations == 1
        assert steady.converged

    def test_nonconvergence_flag_propagates(self):
        # a surviving multi-round cascade (15 iterations at full budget)
        cfg = SystemConfig.from_marginals(Uniform(20, 40), Uniform(10, 200),
                                          Uniform(20, 40), Dirac(1e9))
        full = iterate_to_steady_state(0.3, cfg)
        assert full.converged and full.iterations > 5
        steady = iterate_to_steady_state(0.3, cfg, max_iter=2)
        assert not steady.converged

    def test_monotone_trajectory(self):
        rng = np.random.default_rng(21)
        checked = 0
        for _ in range(25):
            cfg = random_system(rng)
            p = float(rng.uniform(0.05, 0.7))
            state = initial_state(p, cfg)
            eff_prev = cfg.effective(state.q_a, state.q_b)
            n_prev = state.n
            for _ in range(60):
                state = step(state, p, cfg)
                if state.collapsed:
                    break
                eff = cfg.effective(state.q_a, state.q_b)
                assert eff[0] >= eff_prev[0] - 1e-9 * (1 + eff_prev[0])
                assert eff[1] >= eff_prev[1] - 1e-9 * (1 + eff_prev[1])
                assert state.n <= n_prev + 1e-12
                eff_prev, n_prev = eff, state.n
                checked += 1
        assert checked > 100

    def test_steady_state_identity(self):
        rng = np.random.default_rng(22)
        found = 0
        for _ in range(30):
            cfg = random_system(rng)
            p = float(rng.uniform(0.05, 0.6))
            steady = iterate_to_steady_state(p, cfg)
            if steady.collapsed:
                continue
            found += 1
            prob = cfg.joint.joint_survival(*cfg.effective(steady.x_star, steady.y_star))
            assert steady.n_inf == pytest.approx((1 - p) * prob, rel=1e-12)
        assert found >= 10

    def test_final_size_bounded_by_attack_survivors(self):
        # equality exactly when nothing fails beyond the attack
        rng = np.random.default_rng(23)
        for _ in range(20):
            cfg = random_system(rng)
            p = float(rng.uniform(0.05, 0.9))
            steady = iterate_to_steady_state(p, cfg)
            assert steady.n_inf <= 1 - p + 1e-15
            prob0 = cfg.joint.joint_survival(
                *cfg.effective(p * cfg.joint.mean_load_a / (1 - p),
                               p * cfg.joint.mean_load_b / (1 - p)))
            if prob0 == 1.0:
                assert steady.n_inf == 1 - p
            else:
                assert steady.n_inf < 1 - p


class TestStablePoints:
    def test_steady_state_is_stable(self, symmetric_uniform_config):
        assert is_stable_point(10.0, 10.0, 0.25, symmetric_uniform_config)

    def test_origin_not_stable_under_attack(self, symmetric_uniform_config):
        assert not is_stable_point(0.0, 0.0, 0.25, symmetric_uniform_config)

    def test_above_support_not_stable(self, symmetric_uniform_config):
        # effective load 75 exceeds the free-space maximum: survival is zero
        assert not is_stable_point(60.0, 60.0, 0.25, symmetric_uniform_config)

    def test_fixed_point_is_minimal(self):
        rng = np.random.default_rng(24)
        found = 0
        for _ in range(30):
            cfg = random_system(rng)
            p = float(rng.uniform(0.05, 0.6))
            steady = iterate_to_steady_state(p, cfg)
            if steady.collapsed:
                continue
            found += 1
            assert is_stable_point(steady.x_star, steady.y_star, p, cfg)
            eps = 1e-5 * (1.0 + max(steady.x_star, steady.y_star))
            if steady.x_star > eps and steady.y_star > eps:
                assert not is_stable_point(steady.x_star - eps, steady.y_star - eps, p, cfg)
        assert found >= 10

    def test_rejects_negative_loads(self, symmetric_uniform_config):
        with pytest.raises(ValueError):
            is_stable_point(-1.0, 0.0, 0.25, symmetric_uniform_config)


class TestStableSetGrid:
    def test_region_and_minimum(self, symmetric_uniform_config):
        grid = stable_set_grid(0.25, symmetric_uniform_config, resolution=200)
        assert not grid.empty
        cell = grid.x[1] - grid.x[0]
        minimum = grid.minimum
        assert abs(minimum[0] - 10.0) <= cell
        assert abs(minimum[1] - 10.0) <= cell
        assert grid.threshold == pytest.approx(1 / 0.75)

    def test_empty_region_beyond_critical(self, symmetric_uniform_config):
        grid = stable_set_grid(0.95, symmetric_uniform_config, resolution=80)
        assert grid.empty
        assert grid.minimum is None

    def test_surfaces_do_not_depend_on_p(self, symmetric_uniform_config):
        low = stable_set_grid(0.1, symmetric_uniform_config, resolution=40)
        high = stable_set_grid(0.3, symmetric_uniform_config, resolution=40)
        assert np.allclose(low.lhs_a, high.lhs_a)
        assert np.allclose(low.lhs_b, high.lhs_b)
        assert int(low.stable.sum()) >= int(high.stable.sum())

    def test_grid_stability_matches_pointwise(self, symmetric_uniform_config):
        grid = stable_set_grid(0.25, symmetric_uniform_config, resolution=24)
        for ix in range(0, 24, 5):
            for iy in range(0, 24, 5):
                assert grid.stable[ix, iy] == is_stable_point(
                    float(grid.x[ix]), float(grid.y[iy]), 0.25,
                    symmetric_uniform_config, rel_tol=0.0)

    def test_empirical_grid_matches_independent(self, symmetric_uniform_config):
        rng = np.random.default_rng(4)
        m = 300_000
        joint = symmetric_uniform_config.joint
        samples = np.column_stack([
            joint.load_a.sample(rng, m), joint.free_a.sample(rng, m),
            joint.load_b.sample(rng, m), joint.free_b.sample(rng, m)])
        emp_cfg = SystemConfig(EmpiricalJoint(samples), symmetric_uniform_config.factors)
        grid_emp = stable_set_grid(0.25, emp_cfg, resolution=30, x_max=90, y_max=90)
        grid_ref = stable_set_grid(0.25, symmetric_uniform_config, resolution=30,
                                   x_max=90, y_max=90)
        assert np.max(np.abs(grid_emp.lhs_a - grid_ref.lhs_a)) < 0.02
        assert np.max(np.abs(grid_emp.lhs_b - grid_ref.lhs_b)) < 0.02

    def test_invalid_arguments(self, symmetric_uniform_config):
        with pytest.raises(ValueError):
            stable_set_grid(0.25, symmetric_uniform_config, resolution=1)
        with pytest.raises(ValueError):
            stable_set_grid(0.25, symmetric_uniform_config, x_max=-5.0)


class TestLayerIndependent:
    def test_final_size_factorizes(self):
        cfg = SystemConfig.from_marginals(Uniform(20, 40), Uniform(25, 60),
                                          Weibull(10, 20, 2), Uniform(20, 55))
        steady = iterate_to_steady_state(0.21, cfg)
        assert not steady.collapsed
        product = (1 - 0.21) * float(cfg.joint.free_a.survival(steady.x_star)) \
            * float(cfg.joint.free_b.survival(steady.y_star))
        assert steady.n_inf == pytest.approx(product, rel=1e-10)

    def test_inert_layer_reduces_to_single_layer(self):
        cfg = SystemConfig.from_marginals(Uniform(20, 40), Uniform(25, 60),
                                          Uniform(20, 40), Dirac(1e9))
        p = 0.5
        oracle = single_layer_recursion(p, 30.0, Uniform(25, 60))
        steady = iterate_to_steady_state(p, cfg)
        n_ref, q_ref = oracle[-1]
        assert steady.n_inf == pytest.approx(n_ref, rel=1e-10)
        assert steady.x_star == pytest.approx(q_ref, rel=1e-10)


class TestCriticalAttackSize:
    def test_bracket_is_tight(self, symmetric_uniform_config):
        result = critical_attack_size(symmetric_uniform_config)
        assert result.upper - result.lower <= 1e-4
        assert final_size(result.lower, symmetric_uniform_config) > 0
        assert final_size(result.upper, symmetric_uniform_config) == 0
        assert not result.degenerate and not result.non_monotone

    def test_identical_dirac_layers_match_budget_ratio(self):
        # beta = 0, both layers identical, Dirac free space: the critical
        # size is mean free space over mean capacity.
        cfg = SystemConfig.from_marginals(Uniform(20, 40), Dirac(50),
                                          Uniform(20, 40), Dirac(50))
        result = critical_attack_size(cfg)
        assert result.p_hat == pytest.approx(50 / 80, abs=1e-4)

    def test_degenerate_system(self):
        cfg = SystemConfig.from_marginals(Uniform(20, 40), Dirac(1e-3),
                                          Uniform(20, 40), Dirac(1e-3))
        result = critical_attack_size(cfg)
        assert result.degenerate
        assert result.p_hat == 0.0

    def test_float_protocol(self, symmetric_uniform_config):
        result = critical_attack_size(symmetric_uniform_config, tol_p=1e-3)
        assert float(result) == result.p_hat

    def test_matches_simulated_collapse_point(self):
        # localize the finite-N collapse by bisection on one 10^5-node
        # population and compare with the mean-field estimate
        from multiflow import build_population, run_cascade

        cfg = SystemConfig.from_marginals(Uniform(20, 40), Uniform(25, 75),
                                          Uniform(20, 40), Uniform(25, 75),
                                          beta_a=0.1, beta_b=0.1)
        predicted = critical_attack_size(cfg).p_hat
        pop = build_population(cfg, 100_000, seed=77)
        lo, hi = 0.2, 0.8
        for _ in range(12):
            mid = 0.5 * (lo + hi)
            outcome = run_cascade(pop, mid, cfg.factors, attack_seed=78)
            if outcome.surviving_fraction > 0.005:
                lo = mid
            else:
                hi = mid
        simulated = 0.5 * (lo + hi)
        assert predicted == pytest.approx(simulated, abs=0.01)


class TestValidation:
    def test_cross_layer_factors(self):
        with pytest.raises(ValueError):
            CrossLayerFactors(-0.1, 0.0)
        with pytest.raises(ValueError):
            CrossLayerFactors(0.1, math.inf)
        assert CrossLayerFactors().beta_a == 0.0

    def test_effective_loads(self):
        cfg = SystemConfig(
            IndependentJoint(Uniform(20, 40), Uniform(25, 75),
                             Uniform(20, 40), Uniform(25, 75)),
            CrossLayerFactors(0.5, 0.25))
        assert cfg.effective(10.0, 20.0) == (10.0 + 0.25 * 20.0, 20.0 + 0.5 * 10.0)
