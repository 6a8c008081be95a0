"""Solver: loss/gradient values, coordinate descent, beam search, checker."""

import math

import numpy as np
import pytest

from riskcards.errors import ConfigError, ConstraintViolationError
from riskcards.solver import (
    ConstraintSet,
    check_feasibility,
    coordinate_descent,
    fit_continuous,
    logistic_loss,
    loss_gradient,
    zero_solution,
)

from conftest import default_constraints, exhaustive_optimum, make_dataset, random_binary_instance

LN2 = 0.6931471805599453


class TestLoss:
    def test_zero_model_four_rows(self):
        data = make_dataset([[0], [1], [0], [1]], [1, 0, 1, 0])
        # every margin is 0: loss = 4 * ln 2 = 2.772588722239781
        assert abs(logistic_loss(np.zeros(1), 0.0, data) - 2.772588722239781) < 1e-15

    def test_single_row_values(self):
        pos = make_dataset([[1]], [1])
        # z = 2 with y = +1: log(1 + e^-2) = 0.12692801104297263
        assert abs(logistic_loss(np.array([2.0]), 0.0, pos) - 0.12692801104297263) < 1e-15
        neg = make_dataset([[1]], [0])
        # z = 2 with y = -1: log(1 + e^2) = 2.126928011042972
        assert abs(logistic_loss(np.array([2.0]), 0.0, neg) - 2.126928011042972) < 1e-15

    def test_multiplier_scales_margin(self):
        data = make_dataset([[1]], [1])
        # z/m = 1: log(1 + e^-1) = 0.3132616875182228
        assert abs(logistic_loss(np.array([2.0]), 0.0, data, m=2.0) - 0.3132616875182228) < 1e-15

    def test_intercept_only(self):
        data = make_dataset([[0], [0]], [1, 0])
        got = logistic_loss(np.zeros(1), 1.5, data)
        want = math.log1p(math.exp(-1.5)) + math.log1p(math.exp(1.5))
        assert abs(got - want) < 1e-15

    def test_large_margins_stable(self):
        data = make_dataset([[1]], [0])
        # naive log(1+e^500) overflows; stable form returns ~500 exactly
        got = logistic_loss(np.array([500.0]), 0.0, data)
        assert abs(got - 500.0) < 1e-9


class TestGradient:
    def test_single_row_closed_form(self):
        data = make_dataset([[1]], [1])
        gw, g0 = loss_gradient(np.zeros(1), 0.0, data)
        assert gw[0] == -0.5 and g0 == -0.5

    def test_matches_finite_differences(self, rng):
        for _ in range(20):
            data = random_binary_instance(rng, n=60, group_sizes=[2, 3, 1])
            w = rng.normal(scale=1.5, size=data.p)
            w0 = rng.normal()
            m = float(rng.uniform(0.5, 4.0))
            gw, g0 = loss_gradient(w, w0, data, m=m)
            h = 1e-6
            for j in range(data.p):
                e = np.zeros(data.p)
                e[j] = h
                fd = (logistic_loss(w + e, w0, data, m) - logistic_loss(w - e, w0, data, m)) / (2 * h)
                assert abs(fd - gw[j]) < 1e-5 * max(1.0, abs(gw[j]))
            fd0 = (logistic_loss(w, w0 + h, data, m) - logistic_loss(w, w0 - h, data, m)) / (2 * h)
            assert abs(fd0 - g0) < 1e-5 * max(1.0, abs(g0))


class TestCoordinateDescent:
    def test_balanced_intercept_is_zero(self):
        data = make_dataset([[0], [0], [0], [0]], [1, 1, 0, 0])
        cs = default_constraints(data)
        sol = coordinate_descent(data, (), zero_solution(data), cs)
        assert abs(sol.w0) < 1e-8
        assert abs(sol.loss - 4 * LN2) < 1e-12

    def test_imbalanced_intercept_log_odds(self):
        data = make_dataset([[0]] * 4, [1, 1, 1, 0])
        cs = default_constraints(data)
        sol = coordinate_descent(data, (), zero_solution(data), cs)
        # MLE intercept = log(3/1) = 1.0986122886681098
        assert abs(sol.w0 - 1.0986122886681098) < 1e-8

    def test_separable_column_hits_box(self):
        data = make_dataset([[1], [1], [1], [0]], [1, 1, 1, 0])
        cs = default_constraints(data, intercept_box=(0.0, 0.0))
        sol = coordinate_descent(data, (0,), zero_solution(data), cs)
        assert sol.w[0] == 5.0  # box upper bound, exactly
        assert sol.w0 == 0.0

    def test_loss_history_monotone(self, rng):
        data = random_binary_instance(rng, n=120, group_sizes=[2, 2, 2])
        cs = default_constraints(data)
        hist = []
        coordinate_descent(data, tuple(range(data.p)), zero_solution(data), cs, loss_history=hist)
        assert len(hist) >= 1
        assert all(b <= a + 1e-12 for a, b in zip(hist, hist[1:]))

    def test_init_outside_support_rejected(self):
        data = make_dataset([[1, 0], [0, 1]], [1, 0])
        cs = default_constraints(data)
        bad = zero_solution(data)
        w = bad.w.copy()
        w[1] = 1.0
        init = type(bad).build(w, 0.0, data)
        with pytest.raises(ConstraintViolationError, match="outside the support"):
            coordinate_descent(data, (0,), init, cs)

    def test_support_larger_than_lambda_rejected(self):
        data = make_dataset([[1, 0], [0, 1]], [1, 0])
        cs = default_constraints(data, lam=1)
        with pytest.raises(ConstraintViolationError):
            coordinate_descent(data, (0, 1), zero_solution(data), cs)

    def test_group_budget_enforced(self):
        data = make_dataset([[1, 0], [0, 1]], [1, 0], group_sizes=[1, 1])
        cs = default_constraints(data, gamma=1)
        with pytest.raises(ConstraintViolationError):
            coordinate_descent(data, (0, 1), zero_solution(data), cs)

    def test_respects_box_override(self, rng):
        data = random_binary_instance(rng, n=200, group_sizes=[3])
        cs = ConstraintSet.for_map(data.map, lam=3, gamma=1, box=(-0.5, 0.5))
        sol = coordinate_descent(data, (0, 1, 2), zero_solution(data), cs)
        assert np.all(sol.w >= -0.5) and np.all(sol.w <= 0.5)

    def test_nonneg_direction_folds_box(self, rng):
        data = random_binary_instance(rng, n=200, group_sizes=[2, 2])
        cs = ConstraintSet.for_map(data.map, lam=4, gamma=2, monotone={"v0": "nonneg"})
        sol = coordinate_descent(data, tuple(range(4)), zero_solution(data), cs)
        assert np.all(sol.w[:2] >= 0.0)


class TestBeamSearch:
    def test_single_column_matches_exhaustive(self, rng):
        data = random_binary_instance(rng, n=150, group_sizes=[1])
        cs = default_constraints(data, lam=1)
        beam = fit_continuous(data, cs, beam_width=3)
        oracle = exhaustive_optimum(data, cs)
        assert beam.loss <= oracle.loss + 1e-8

    def test_tiny_instance_matches_exhaustive(self, rng):
        for _ in range(5):
            data = random_binary_instance(rng, n=80, group_sizes=[2, 2, 2])
            cs = default_constraints(data, lam=2, gamma=2)
            beam = fit_continuous(data, cs, beam_width=6)
            oracle = exhaustive_optimum(data, cs)
            assert beam.loss >= oracle.loss - 1e-8  # cannot beat the optimum
            assert beam.loss <= oracle.loss + max(1e-6, 1e-4 * abs(oracle.loss))

    def test_lambda_zero_intercept_only(self, rng):
        data = random_binary_instance(rng, n=50, group_sizes=[2])
        cs = default_constraints(data, lam=0)
        sol = fit_continuous(data, cs)
        assert sol.support == ()

    def test_gamma_confines_support_to_one_group(self, rng):
        data = random_binary_instance(rng, n=200, group_sizes=[3, 3])
        cs = default_constraints(data, lam=6, gamma=1)
        sol = fit_continuous(data, cs, beam_width=4)
        used = {data.map.column_group[j] for j in sol.support}
        assert len(used) <= 1

    def test_sparsity_budget_respected(self, rng):
        data = random_binary_instance(rng, n=300, group_sizes=[2, 2, 2, 2])
        cs = default_constraints(data, lam=3)
        sol = fit_continuous(data, cs, beam_width=5)
        assert len(sol.support) <= 3

    def test_deterministic(self, rng):
        data = random_binary_instance(rng, n=200, group_sizes=[2, 3, 2])
        cs = default_constraints(data, lam=4, gamma=3)
        a = fit_continuous(data, cs, beam_width=4)
        b = fit_continuous(data, cs, beam_width=4)
        assert a.w.tobytes() == b.w.tobytes()
        assert a.w0 == b.w0 and a.loss == b.loss

    def test_pinned_zero_box_never_selected(self, rng):
        data = random_binary_instance(rng, n=150, group_sizes=[1, 1])
        cs = ConstraintSet.for_map(data.map, lam=2, gamma=2, box_overrides={"v0": (0.0, 0.0)})
        sol = fit_continuous(data, cs, beam_width=3)
        assert 0 not in sol.support


class TestChecker:
    def box_map(self):
        return make_dataset([[1, 0], [0, 1]], [1, 0], group_sizes=[1, 1]).map

    def test_each_violation_kind_reported(self):
        bmap = self.box_map()
        cs = ConstraintSet.for_map(bmap, lam=1, gamma=1, box=(-2.0, 2.0))
        v = check_feasibility(np.array([1.0, 1.0]), 0.0, cs, bmap)
        kinds = {s.split(":")[0] for s in v}
        assert "sparsity" in kinds and "group-sparsity" in kinds

        v = check_feasibility(np.array([3.0, 0.0]), 0.0, cs, bmap)
        assert any(s.startswith("box:") for s in v)

        v = check_feasibility(np.array([1.0, 0.0]), 500.0, cs, bmap)
        assert any(s.startswith("intercept-box:") for s in v)

        v = check_feasibility(np.array([1.5, 0.0]), 0.0, cs, bmap, integer=True)
        assert any(s.startswith("integrality:") for s in v)

        assert check_feasibility(np.array([1.0, 0.0]), 0.0, cs, bmap) == ()

    def test_monotone_sign_checked_independently(self):
        bmap = self.box_map()
        cs = ConstraintSet.for_map(bmap, lam=2, gamma=2, monotone={"v0": "nonneg"})
        # violate the sign while inside the original (unfolded) box
        v = check_feasibility(np.array([-1.0, 0.0]), 0.0, cs, bmap)
        assert any(s.startswith("monotone-sign:") for s in v)
        assert any(s.startswith("box:") for s in v)  # folded box also trips

    def test_config_rejections(self):
        bmap = self.box_map()
        with pytest.raises(ConfigError):
            ConstraintSet.for_map(bmap, lam=5, gamma=1)  # lam > p
        with pytest.raises(ConfigError):
            ConstraintSet.for_map(bmap, lam=1, gamma=5)  # gamma > groups
        with pytest.raises(ConfigError):
            ConstraintSet.for_map(bmap, lam=1, gamma=1, box=(0.2, 0.8))  # no integer
        with pytest.raises(ConfigError):
            ConstraintSet.for_map(bmap, lam=1, gamma=1, box=(2.0, 1.0))  # empty
        with pytest.raises(ConfigError):
            ConstraintSet.for_map(bmap, lam=1, gamma=1, monotone={"v0": "up"})
        with pytest.raises(ConfigError):
            ConstraintSet.for_map(bmap, lam=1, gamma=1, monotone={"zz": "nonneg"})
        with pytest.raises(ConfigError):
            # nonneg impossible when the box is entirely negative
            ConstraintSet.for_map(bmap, lam=1, gamma=1, box=(-3.0, -1.0), monotone={"v0": "nonneg"})
