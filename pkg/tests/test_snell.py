from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrbsde.errors import ContractError, InfeasibleError, OracleRefusal
from qrbsde.lattice import build_tree, girsanov
from qrbsde.snell import (
    Solution, check_invariants, check_skorohod, require_solution_measure, snell_bound,
    snell_oracle, solve_underlying, stopping_value_count,
)


def _obstacle(model, inner, terminal):
    lo = np.full(model.n_nodes, float(inner))
    lo[model.leaves] = terminal
    return lo


def test_zero_data():
    m = build_tree(3, 2, 0.5, 1.0)
    sol = solve_underlying(0.0, 0.0, np.full(m.n_nodes, -1.0), m)
    np.testing.assert_array_equal(sol.y.values, 0.0)
    np.testing.assert_array_equal(sol.dk, 0.0)


def test_depth_one_obstacle_active():
    m = build_tree(1, 2, 1.0, 1.0)
    sol = solve_underlying(0.0, 0.0, _obstacle(m, 1.0, 0.0), m)
    assert sol.y0 == 1.0
    assert sol.dk[0] == 1.0


def test_depth_two_example():
    m = build_tree(2, 2, 0.5, 1.0)
    xi = np.array([1.0, 0.0, 0.0, 1.0])
    sol = solve_underlying(0.0, xi, _obstacle(m, 0.6, 0.0), m)
    assert sol.y0 == pytest.approx(0.6)
    np.testing.assert_allclose(sol.dk, [0.0, 0.1, 0.1])
    np.testing.assert_allclose(sol.k.values[m.leaves], 0.1)
    assert check_invariants(sol, 0.0, xi, _obstacle(m, 0.6, 0.0)).passed


def test_oracle_examples():
    m = build_tree(3, 2, 0.5, 1.0)
    rng = np.random.default_rng(0)
    xi = rng.normal(size=m.n_leaves)
    dv = rng.normal(size=m.n_internal) * 0.1
    low = np.full(m.n_nodes, -1e6)
    free = snell_oracle(dv, xi, low, m)
    # far obstacle: Y_0 = E[xi] + E[sum dV]
    p_leaf = m.path_product(m.P.probs)[m.leaves]
    assert free[0] == pytest.approx(p_leaf @ xi + m.P.accumulate(dv)[0], abs=1e-12)
    lo = rng.normal(size=m.n_nodes)
    lo[m.leaves] = xi
    np.testing.assert_allclose(snell_oracle(-np.abs(dv), xi, lo, m)[m.leaves], xi)


def test_oracle_terminal_equals_obstacle():
    m = build_tree(2, 4, 0.5, 1.0)
    lo = np.random.default_rng(1).normal(size=m.n_nodes)
    xi = lo[m.leaves]
    # with zero drift and xi = L_T, Y equals the larger of L and the continuation value
    y = snell_oracle(0.0, xi, lo, m)
    assert np.all(y >= lo - 1e-15)
    np.testing.assert_allclose(y, solve_underlying(0.0, xi, lo, m).y.values, atol=1e-12)


def test_expectation_only_when_obstacle_is_far():
    m = build_tree(2, 2, 0.5, 1.0)
    xi = np.array([4.0, 0.0, 2.0, 2.0])
    sol = solve_underlying(0.0, xi, np.full(m.n_nodes, -1e6), m)
    assert sol.y0 == pytest.approx(2.0)
    np.testing.assert_array_equal(sol.dk, 0.0)


def test_oracle_refuses_large_trees():
    m = build_tree(5, 4, 0.1, 1.0)
    with pytest.raises(OracleRefusal):
        snell_oracle(0.0, 0.0, np.full(m.n_nodes, -1.0), m)
    assert stopping_value_count(2, 1) == 2
    assert stopping_value_count(2, 2) == 5


def test_infeasible_terminal():
    m = build_tree(1, 2, 1.0, 1.0)
    with pytest.raises(InfeasibleError, match="leaf"):
        solve_underlying(0.0, 0.0, np.ones(m.n_nodes), m)


def test_skorohod_violation_detected():
    m = build_tree(1, 2, 1.0, 1.0)
    lo = _obstacle(m, 0.0, 0.0)
    good = solve_underlying(0.0, np.array([1.0, 1.0]), lo, m)
    assert check_skorohod(good, lo).passed
    bad = Solution.from_arrays(m, [1.5, 1.0, 1.0], [0.5])
    rep = check_skorohod(bad, lo)
    assert not rep.passed and rep.max_product == pytest.approx(0.75)
    neg = Solution.from_arrays(m, [0.5, 1.0, 1.0], [-0.5])
    assert check_skorohod(neg, lo).negative_dk == [str(m.node_id(0))]
    assert not check_invariants(bad, 0.0, [1.0, 1.0], lo).passed


def test_measure_tag_contract():
    m = build_tree(1, 2, 1.0, 1.0)
    q = girsanov(m, m.P, np.array([[0.2, -0.2]]))
    sol = solve_underlying(0.0, [1.0, 0.0], np.full(m.n_nodes, -1.0), m, q)
    assert sol.y0 == pytest.approx(0.6)
    with pytest.raises(ContractError):
        require_solution_measure(sol, m.P.tag)


cases = st.tuples(st.sampled_from([(2, 1), (2, 2), (2, 3), (2, 4), (4, 1), (4, 2), (4, 3)]),
                  st.integers(0, 2**32 - 1))


@given(cases)
def test_recursion_matches_oracle(case):
    (b, d), seed = case
    m = build_tree(d, b, 0.25, 1.0)
    rng = np.random.default_rng(seed)
    dv = rng.normal(size=m.n_internal) * 0.2
    lo = rng.normal(size=m.n_nodes)
    xi = lo[m.leaves] + np.abs(rng.normal(size=m.n_leaves))
    sol = solve_underlying(dv, xi, lo, m)
    np.testing.assert_allclose(sol.y.values, snell_oracle(dv, xi, lo, m), atol=1e-12)
    assert check_invariants(sol, dv, xi, lo).passed
    assert sol.y.values.max() <= snell_bound(dv, xi, lo, m) + 1e-12


@given(cases, st.floats(0, 1), st.floats(0, 1))
def test_monotone_in_data(case, a, c):
    (b, d), seed = case
    m = build_tree(d, b, 0.25, 1.0)
    rng = np.random.default_rng(seed)
    dv = rng.normal(size=m.n_internal) * 0.2
    lo = rng.normal(size=m.n_nodes)
    xi = lo[m.leaves] + np.abs(rng.normal(size=m.n_leaves))
    base = solve_underlying(dv, xi, lo, m).y.values
    up = solve_underlying(dv + a, xi + c, lo + c, m).y.values
    assert np.all(up >= base - 1e-12)
