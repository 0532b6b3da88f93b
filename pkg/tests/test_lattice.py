from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrbsde.errors import ContractError, DomainError, ParameterError, StepSizeError
from qrbsde.lattice import (
    AdaptedProcess, NodeId, build_tree, conditional_expectation, decompose, girsanov,
    integrating_factor, martingale_decompose, predictable_bracket,
)

trees = st.builds(
    build_tree,
    depth=st.integers(1, 5),
    branching=st.sampled_from([2, 4]),
    dt=st.floats(0.01, 1.0),
    sigma=st.floats(0.1, 3.0),
)


def test_smallest_tree():
    m = build_tree(1, 2, 1.0, 1.0)
    assert m.n_nodes == 3
    assert sorted(m.dm) == [-1.0, 1.0]
    np.testing.assert_allclose(m.P.probs[0], [0.5, 0.5])


def test_quaternary_depth_two():
    m = build_tree(2, 4, 0.25, 2.0)
    assert m.n_nodes == 21
    np.testing.assert_allclose(np.abs(m.dm), 1.0)
    np.testing.assert_allclose(np.abs(m.dw), 0.5)


def test_node_count_depth_ten():
    assert build_tree(10, 2, 0.1, 1.0).n_nodes == 2**11 - 1


@pytest.mark.parametrize("dt,sigma", [(0.0, 1.0), (-1.0, 1.0), (1.0, 0.0), (1.0, -2.0)])
def test_non_positive_parameters_rejected(dt, sigma):
    with pytest.raises(ParameterError):
        build_tree(2, 2, dt, sigma)


def test_bad_branching_rejected():
    with pytest.raises(ParameterError):
        build_tree(2, 3, 1.0, 1.0)


@given(trees)
def test_tree_moments(m):
    p = m.P.probs
    assert np.all(p > 0)
    np.testing.assert_allclose(p.sum(axis=1), 1.0, atol=1e-15)
    np.testing.assert_allclose(p @ m.dm, 0.0, atol=1e-12)
    np.testing.assert_allclose(p @ m.dm**2, m.sigma**2 * m.dt, rtol=1e-12)
    np.testing.assert_allclose(p @ (m.dm * m.dw), 0.0, atol=1e-12)


@given(trees)
def test_layout_round_trip(m):
    for v in range(0, m.n_nodes, max(1, m.n_nodes // 17)):
        assert m.index(m.node_id(v)) == v
        if v:
            assert v in m.children[m.parent[v]]


def test_conditional_expectation_examples():
    m = build_tree(1, 2, 1.0, 1.0)
    assert conditional_expectation(np.array([2.0, 0.0]), 0, m.P) == 1.0
    q = girsanov(m, m.P, np.array([[0.5, -0.5]]))
    assert conditional_expectation(np.array([2.0, 0.0]), 0, q) == pytest.approx(1.5)
    m4 = build_tree(1, 4, 1.0, 1.0)
    assert conditional_expectation(np.ones(4), 0, m4.P) == 1.0


def test_conditional_expectation_terminal_node():
    m = build_tree(1, 2, 1.0, 1.0)
    with pytest.raises(DomainError):
        conditional_expectation(np.zeros(2), NodeId((0,)), m.P)


def test_decompose_binary():
    m = build_tree(1, 2, 0.25, 2.0)
    c = 0.3
    x = c * np.sign(m.dm)
    parts = martingale_decompose(x, 0, m)
    assert parts.z[0] == pytest.approx(c / (m.sigma * math.sqrt(m.dt)))
    np.testing.assert_allclose(parts.orth, 0.0)


def test_decompose_quaternary():
    m = build_tree(1, 4, 0.25, 2.0)
    c, d = 0.7, -0.4
    e1 = np.array([1.0, 1.0, -1.0, -1.0])
    e2 = np.array([1.0, -1.0, 1.0, -1.0])
    parts = martingale_decompose(c * e1 + d * e2, 0, m)
    assert parts.z[0] == pytest.approx(c / (m.sigma * math.sqrt(m.dt)))
    np.testing.assert_allclose(parts.orth[0], d * e2, atol=1e-15)
    assert abs(np.mean(m.dm * parts.orth[0])) < 1e-15


def test_decompose_zero():
    m = build_tree(1, 4, 1.0, 1.0)
    parts = martingale_decompose(np.zeros(4), 0, m)
    assert parts.z[0] == 0.0
    np.testing.assert_array_equal(parts.orth, 0.0)


@given(trees, st.integers(0, 2**32 - 1))
def test_decomposition_properties(m, seed):
    rng = np.random.default_rng(seed)
    y = rng.normal(size=m.n_nodes)
    parts = decompose(m, y)
    p = m.P.probs
    dmt = m.dm[None, :]
    np.testing.assert_allclose(np.einsum("ij,ij->i", p, parts.orth), 0.0, atol=1e-12)
    np.testing.assert_allclose(np.einsum("ij,ij->i", p, parts.orth * dmt), 0.0, atol=1e-12)
    # bracket additivity
    np.testing.assert_allclose(parts.d_n, (parts.z * m.sigma) ** 2 * m.dt + parts.d_nperp,
                               rtol=1e-10, atol=1e-13)
    # reconstruction of the children
    rebuilt = (p * y[m.children]).sum(axis=1)[:, None] + parts.z[:, None] * dmt + parts.orth
    np.testing.assert_allclose(rebuilt, y[m.children], atol=1e-12)


def test_predictable_bracket_examples():
    m = build_tree(1, 4, 0.5, 1.5)
    var = m.sigma**2 * m.dt
    assert predictable_bracket(m.dm, m.dm, 0, m.P) == pytest.approx(var)
    assert predictable_bracket(m.dm, m.dw, 0, m.P) == pytest.approx(0.0, abs=1e-15)
    assert predictable_bracket(2 * m.dm, 3 * m.dm, 0, m.P) == pytest.approx(6 * var)


def test_predictable_bracket_rejects_non_centred():
    m = build_tree(1, 2, 1.0, 1.0)
    with pytest.raises(ContractError):
        predictable_bracket(m.dm + 0.1, m.dm, 0, m.P)


def test_girsanov_identity():
    m = build_tree(3, 4, 0.25, 1.0)
    q = girsanov(m, m.P, np.zeros((m.n_internal, 4)))
    np.testing.assert_allclose(q.probs, m.P.probs)
    np.testing.assert_allclose(q.density, 1.0)


def test_girsanov_binary_example():
    m = build_tree(1, 2, 0.25, 2.0)
    kernel = 0.5 * np.sign(m.dm)[None, :]
    q = girsanov(m, m.P, kernel)
    np.testing.assert_allclose(q.probs[0], [0.75, 0.25])
    assert q.probs[0] @ m.dm == pytest.approx(0.5 * m.sigma * math.sqrt(m.dt))


def test_girsanov_degenerate_kernel():
    m = build_tree(1, 2, 1.0, 1.0)
    with pytest.raises(StepSizeError, match="kernel too large for step size"):
        girsanov(m, m.P, np.array([[1.0, -1.0]]))


@given(trees, st.integers(0, 2**32 - 1))
def test_girsanov_density_is_likelihood_ratio(m, seed):
    rng = np.random.default_rng(seed)
    k = rng.uniform(-0.5, 0.5, (m.n_internal, m.branching))
    k -= (m.P.probs * k).sum(axis=1, keepdims=True)
    q = girsanov(m, m.P, k)
    leaves = q.density[m.leaves]
    p_path = m.path_product(m.P.probs)[m.leaves]
    assert np.sum(leaves * p_path) == pytest.approx(1.0)
    np.testing.assert_allclose(q.probs.sum(axis=1), 1.0)


def test_integrating_factor_examples():
    m = build_tree(2, 2, 0.5, 1.0)
    np.testing.assert_allclose(integrating_factor(np.zeros(m.n_nodes), m).values, 1.0)
    b = integrating_factor(np.ones(m.n_nodes), m)
    np.testing.assert_allclose(b.values[m.leaves], math.e)


def test_integrating_factor_path_dependent():
    m = build_tree(3, 2, 0.3, 1.0)
    beta = np.tanh(m.m_value) + 0.2 * m.time
    b = integrating_factor(beta, m).values
    for v in range(m.n_nodes):
        prod, u = 1.0, v
        while u > 0:
            u = int(m.parent[u])
            prod *= math.exp(beta[u] * m.dt)
        assert b[v] == pytest.approx(prod, rel=1e-14)


def test_integrating_factor_implicit_step_guard():
    m = build_tree(2, 2, 0.5, 1.0)
    with pytest.raises(StepSizeError):
        integrating_factor(np.full(m.n_nodes, 2.0), m, scheme="implicit")


def test_adapted_process_arithmetic():
    m = build_tree(2, 2, 1.0, 1.0)
    a = AdaptedProcess.constant(m, 2.0)
    b = AdaptedProcess.from_function(m, lambda t, mm, w: t)
    np.testing.assert_allclose((a * b - 1).values, 2 * m.time - 1)
    assert (a + b).at(NodeId((1, 0))) == pytest.approx(4.0)
    with pytest.raises(ContractError):
        AdaptedProcess(m, np.zeros(5))
    with pytest.raises(DomainError):
        m.index(NodeId((0, 0, 0)))
