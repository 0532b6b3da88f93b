from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qrbsde.analysis import (
    apriori_bmo_bound, check_comparison, check_special_comparison, compare_solutions,
    linearisation_measure, stability_experiment,
)
from qrbsde.driver import Constants, DriverSpec, RBSDEData
from qrbsde.errors import ContractError, OrderingError, StepSizeError
from qrbsde.growth import Growth
from qrbsde.instances import ordered_pair, random_instance
from qrbsde.lattice import build_tree
from qrbsde.snell import Solution
from qrbsde.solver import solve_backward


def _data(model, f, xi=0.0, obstacle=-1e6, **kw):
    return RBSDEData.build(DriverSpec.build(model, f, **kw), xi, obstacle)


def test_apriori_zero_solution():
    m = build_tree(3, 2, 1 / 3, 1.0)
    cst = Constants.default(m, h=0.0, lam_qg=Growth("constant", 1.0))
    d = _data(m, "0", constants=cst)
    rep = apriori_bmo_bound(solve_backward(d), d)
    assert rep.lhs == 0.0
    assert rep.details["b"] == 2.0
    assert rep.rhs == pytest.approx(0.25)
    assert rep.passed and rep.slack_ratio == 0.0


def test_apriori_bound_holds_on_random_instances():
    rng = np.random.default_rng(4)
    for _ in range(5):
        inst = random_instance(rng, data_scale=0.3)
        rep = apriori_bmo_bound(solve_backward(inst.data), inst.data)
        assert rep.passed and rep.lhs > 0


def test_comparison_examples():
    m = build_tree(3, 2, 1 / 3, 1.0)
    a = _data(m, "0.2*sq(z) + 0.1", xi=np.tanh(m.m_value[m.leaves]), obstacle=-1.5)
    b = _data(m, "0.2*sq(z)", xi=np.tanh(m.m_value[m.leaves]) - 0.1, obstacle=-1.6)
    rep = check_comparison(a, b)
    assert rep.passed and rep.max_excess < 0 and rep.y0_prime < rep.y0
    with pytest.raises(OrderingError):
        check_comparison(b, a)
    same = check_comparison(a, a)
    assert same.passed and same.max_excess == 0.0


def test_comparison_kernel_guard():
    m = build_tree(1, 2, 1.0, 1.0)
    d = _data(m, "2*z", xi=np.array([0.0, 1.0]))
    with pytest.raises(StepSizeError):
        check_comparison(d, d)


def test_compare_solutions_reports_worst_node():
    m = build_tree(1, 2, 1.0, 1.0)
    s = Solution.from_arrays(m, [0.0, 0.0, 0.0], [0.0])
    sp = Solution.from_arrays(m, [0.0, 0.5, 0.0], [0.0])
    rep = compare_solutions(s, sp)
    assert not rep.passed and rep.worst_node == str(m.node_id(1))


@settings(max_examples=15)
@given(st.integers(0, 2**32 - 1))
def test_comparison_property(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, data_scale=0.5)
    data, data_p, _ = ordered_pair(rng, inst, scale=0.5)
    try:
        rep = check_comparison(data, data_p)
    except StepSizeError:
        return
    assert rep.passed


def test_special_comparison_identical_data():
    m = build_tree(2, 2, 0.5, 1.0)
    lo = np.full(m.n_nodes, 0.3)
    lo[m.leaves] = 0.0
    d = _data(m, "0.1*sq(z)", xi=np.array([0.0, 0.2, 0.4, 0.6]), obstacle=lo)
    s = solve_backward(d)
    rep = check_special_comparison(s, s, d, d)
    assert rep.passed and rep.max_excess == 0.0 and rep.binding_nodes > 0


def test_special_comparison_contracts():
    m = build_tree(2, 2, 0.5, 1.0)
    a = _data(m, "0.1*sq(z)", xi=0.5, obstacle=0.0)
    b = _data(m, "0.1*sq(z)", xi=0.5, obstacle=-0.1)
    sa, sb = solve_backward(a), solve_backward(b)
    with pytest.raises(ContractError):
        check_special_comparison(sa, sb, a, b)
    up = _data(m, "0.1*sq(z) + 1", xi=0.5, obstacle=0.0)
    with pytest.raises(OrderingError):
        check_special_comparison(sa, solve_backward(up), a, up)


def test_special_comparison_far_obstacle():
    m = build_tree(3, 4, 0.25, 1.0)
    a = _data(m, "0.1*sq(z) + 0.2", xi=0.5)
    b = _data(m, "0.1*sq(z)", xi=0.5)
    sa, sb = solve_backward(a), solve_backward(b)
    np.testing.assert_array_equal(sa.dk, 0.0)
    rep = check_special_comparison(sa, sb, a, b)
    assert rep.passed and rep.binding_nodes == 0


def test_special_comparison_on_binding_pairs():
    rng = np.random.default_rng(11)
    for _ in range(8):
        inst = random_instance(rng, data_scale=0.5, binding=True)
        data, data_p, _ = ordered_pair(rng, inst, shared_obstacle=True, scale=0.5)
        rep = check_special_comparison(solve_backward(data), solve_backward(data_p), data, data_p)
        assert rep.passed


def _stability_base():
    m = build_tree(2, 4, 0.5, 1.0)
    d = _data(m, "0.2*sq(z) + 0.1*tanh(y) + 0.05", xi=0.1 * np.tanh(np.arange(16) - 8.0),
              obstacle=-1.0, g=0.1, nu=0.1)
    return m, d


def test_stability_zero_delta():
    m, d = _stability_base()
    zero = (np.zeros(m.n_leaves), np.zeros(m.n_internal))
    rep = stability_experiment(d, [(zero, zero)])
    (p,) = rep.pairs
    assert p["delta_d"] == 0.0 and p["dy_sup"] <= 1e-12 and rep.passed


def test_stability_small_pair_and_halving():
    m, d = _stability_base()
    probe = stability_experiment(d, [])
    size = 0.5 * probe.gate
    d1 = (np.zeros(m.n_leaves), np.zeros(m.n_internal))
    d2 = (np.full(m.n_leaves, size / 2), np.full(m.n_internal, size / 2))
    rep = stability_experiment(d, [(d1, d2)])
    (p,) = rep.pairs
    assert p["delta_d"] == pytest.approx(size)
    assert p["y_bound_ok"] and p["bmo_q_bound_ok"]
    assert p["halving_ratio"] == pytest.approx(0.5, abs=0.05)
    assert 0 < p["dy_sup"] <= size * (1 + 1e-9) * math.exp(rep.beta_bar_linf1)
    big = (np.full(m.n_leaves, 10 * probe.gate), np.zeros(m.n_internal))
    assert stability_experiment(d, [(d1, big)]).skipped


def test_linearisation_measure_is_probability():
    m, d = _stability_base()
    beta, q = linearisation_measure(solve_backward(d), d)
    assert beta.shape == (m.n_internal,)
    np.testing.assert_allclose(q.probs.sum(axis=1), 1.0)
    assert np.all(q.probs > 0)
