"""Diverse pool: budget enforcement, distinctness, growth behavior."""

import numpy as np
import pytest

from riskcards.errors import ConfigError
from riskcards.pool import generate_pool
from riskcards.solver import check_feasibility, fit_continuous

from conftest import default_constraints, make_dataset, random_binary_instance


def fit_base(data, cs, beam_width=4):
    return fit_continuous(data, cs, beam_width=beam_width)


class TestBudget:
    def test_exact_budget_zero_epsilon(self, rng):
        data = random_binary_instance(rng, n=150, group_sizes=[1, 1, 1, 1])
        cs = default_constraints(data, lam=2)
        base = fit_base(data, cs)
        pool = generate_pool(base, data, cs, epsilon_u=0.0, swap_candidates=4, pool_size=10)
        for e in pool.entries:
            assert e.loss <= base.loss  # no slack at all

    @pytest.mark.parametrize("eps", [0.0, 0.1, 0.3])
    def test_budget_holds_exactly(self, rng, eps):
        for _ in range(3):
            data = random_binary_instance(rng, n=120, group_sizes=[2, 1, 2, 1])
            cs = default_constraints(data, lam=3, gamma=3)
            base = fit_base(data, cs)
            pool = generate_pool(base, data, cs, epsilon_u=eps, swap_candidates=5, pool_size=20)
            budget = (1.0 + eps) * base.loss
            assert all(e.loss <= budget for e in pool.entries)

    def test_base_always_included(self, rng):
        data = random_binary_instance(rng, n=100, group_sizes=[1, 1, 1])
        cs = default_constraints(data, lam=2)
        base = fit_base(data, cs)
        pool = generate_pool(base, data, cs, epsilon_u=0.1, swap_candidates=3, pool_size=1)
        assert len(pool.entries) == 1
        assert pool.entries[0].support == base.support

    def test_pool_caps_at_size(self, rng):
        data = random_binary_instance(rng, n=150, group_sizes=[1] * 8)
        cs = default_constraints(data, lam=3)
        base = fit_base(data, cs)
        pool = generate_pool(base, data, cs, epsilon_u=0.5, swap_candidates=8, pool_size=4)
        assert len(pool.entries) <= 4


class TestDiversity:
    def test_duplicated_column_found_as_twin(self):
        col = np.array([1, 1, 1, 0, 0, 0, 1, 0])
        y = np.array([1, 1, 0, 0, 0, 1, 1, 0])
        data = make_dataset(np.column_stack([col, col]), y, group_sizes=[1, 1])
        cs = default_constraints(data, lam=1)
        base = fit_base(data, cs)
        pool = generate_pool(base, data, cs, epsilon_u=0.0, swap_candidates=2, pool_size=5)
        supports = {e.support for e in pool.entries}
        assert supports == {(0,), (1,)}
        losses = [e.loss for e in pool.entries]
        # twin columns give the same problem; CD from different warm starts
        # agrees to its convergence tolerance, not to machine precision
        assert abs(losses[0] - losses[1]) < 1e-6

    def test_supports_distinct(self, rng):
        data = random_binary_instance(rng, n=200, group_sizes=[1] * 6)
        cs = default_constraints(data, lam=3)
        base = fit_base(data, cs)
        pool = generate_pool(base, data, cs, epsilon_u=0.4, swap_candidates=6, pool_size=15)
        supports = [e.support for e in pool.entries]
        assert len(supports) == len(set(supports))

    def test_entries_sorted_by_loss(self, rng):
        data = random_binary_instance(rng, n=180, group_sizes=[1] * 6)
        cs = default_constraints(data, lam=3)
        base = fit_base(data, cs)
        pool = generate_pool(base, data, cs, epsilon_u=0.4, swap_candidates=6, pool_size=15)
        losses = [e.loss for e in pool.entries]
        assert losses == sorted(losses)
        assert pool.entries[0].loss == base.loss

    def test_growth_in_epsilon(self, rng):
        data = random_binary_instance(rng, n=150, group_sizes=[1] * 6)
        cs = default_constraints(data, lam=2)
        base = fit_base(data, cs)
        sizes = [
            len(generate_pool(base, data, cs, epsilon_u=e, swap_candidates=6, pool_size=50).entries)
            for e in (0.0, 0.2, 0.6)
        ]
        assert sizes == sorted(sizes)

    def test_growth_in_candidates(self, rng):
        data = random_binary_instance(rng, n=150, group_sizes=[1] * 8)
        cs = default_constraints(data, lam=2)
        base = fit_base(data, cs)
        sizes = [
            len(generate_pool(base, data, cs, epsilon_u=0.5, swap_candidates=t, pool_size=50).entries)
            for t in (1, 3, 7)
        ]
        assert sizes == sorted(sizes)

    def test_extra_rounds_explore_no_less(self, rng):
        data = random_binary_instance(rng, n=150, group_sizes=[1] * 8)
        cs = default_constraints(data, lam=3)
        base = fit_base(data, cs)
        one = generate_pool(base, data, cs, epsilon_u=0.5, swap_candidates=4, pool_size=50, rounds=1)
        two = generate_pool(base, data, cs, epsilon_u=0.5, swap_candidates=4, pool_size=50, rounds=2)
        assert len(two.entries) >= len(one.entries)


class TestFeasibility:
    def test_all_entries_feasible(self, rng):
        for _ in range(3):
            data = random_binary_instance(rng, n=120, group_sizes=[2, 2, 1, 1])
            cs = default_constraints(data, lam=3, gamma=2)
            base = fit_base(data, cs)
            pool = generate_pool(base, data, cs, epsilon_u=0.3, swap_candidates=5, pool_size=10)
            for e in pool.entries:
                assert check_feasibility(e.w, e.w0, cs, data.map) == ()

    def test_bad_params_rejected(self, rng):
        data = random_binary_instance(rng, n=50, group_sizes=[1, 1])
        cs = default_constraints(data, lam=1)
        base = fit_base(data, cs)
        with pytest.raises(ConfigError):
            generate_pool(base, data, cs, epsilon_u=-0.1)
        with pytest.raises(ConfigError):
            generate_pool(base, data, cs, swap_candidates=0)
        with pytest.raises(ConfigError):
            generate_pool(base, data, cs, pool_size=0)
        with pytest.raises(ConfigError):
            generate_pool(base, data, cs, rounds=0)

    def test_deterministic(self, rng):
        data = random_binary_instance(rng, n=150, group_sizes=[1] * 6)
        cs = default_constraints(data, lam=3)
        base = fit_base(data, cs)
        a = generate_pool(base, data, cs, epsilon_u=0.3, swap_candidates=5, pool_size=10)
        b = generate_pool(base, data, cs, epsilon_u=0.3, swap_candidates=5, pool_size=10)
        assert [e.support for e in a.entries] == [e.support for e in b.entries]
        assert all(x.w.tobytes() == y.w.tobytes() for x, y in zip(a.entries, b.entries))
