from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from qrbsde.driver import (
    Constants, Driver, DriverSpec, RBSDEData, drift, drift_increment, linearize, recenter,
    scale_data, translate_obstacle, validate_der, validate_monotone, validate_ordering, validate_qg,
)
from qrbsde.errors import (
    ContractError, DriverError, InfeasibleError, OrderingError, ParameterError,
)
from qrbsde.growth import Growth
from qrbsde.lattice import NodeId, build_tree, decompose


def _data(model, f, xi=0.0, obstacle=-1e6, **kw):
    return RBSDEData.build(DriverSpec.build(model, f, **kw), xi, obstacle)


def test_drift_increment_examples():
    m = build_tree(2, 2, 0.25, 1.0)
    assert drift_increment(_data(m, "0"), NodeId(), 0.3, 0.7, 0.0, 0.0) == 0.0
    d = _data(m, "sq(z)")
    assert drift_increment(d, NodeId(), 0.0, 2.0, 0.0, 0.0) == pytest.approx(1.0)
    with pytest.raises(ContractError):
        drift_increment(d, NodeId((0, 0)), 0.0, 0.0, 0.0, 0.0)


def test_binary_drift_is_driver_times_dt():
    m = build_tree(3, 2, 0.2, 1.3)
    d = _data(m, "0.3*sq(z) + tanh(y) + t", g=0.5, nu=0.2)
    y = np.random.default_rng(1).normal(size=m.n_nodes)
    parts = decompose(m, y)
    n = m.n_internal
    np.testing.assert_allclose(parts.orth, 0.0, atol=1e-14)
    expected = d.driver.f(y[:n], parts.z * m.sigma) * m.dt
    np.testing.assert_allclose(drift(d, y), expected, atol=1e-14)


def test_quaternary_drift_terms():
    m = build_tree(2, 4, 0.25, 1.0)
    d = _data(m, "0", g=0.5, nu=0.3)
    y = np.random.default_rng(2).normal(size=m.n_nodes)
    parts = decompose(m, y)
    p = m.P.probs
    expected = (p * d.driver.nu * parts.orth).sum(axis=1) + 0.5 * parts.d_nperp
    np.testing.assert_allclose(drift(d, y), expected, atol=1e-14)
    v = 3
    single = drift_increment(d, m.node_id(v), y[v], parts.z[v], parts.d_nperp[v],
                             float(p[v] @ (d.driver.nu[v] * parts.orth[v])))
    assert single == pytest.approx(expected[v])


def test_driver_variables_and_coefficients():
    m = build_tree(2, 2, 0.5, 1.0)
    f = Driver.from_expr("k*y + t + m + w", m, {"k": 2.0})
    nodes = np.arange(m.n_internal)
    np.testing.assert_allclose(f(1.0, 0.0), 2.0 + m.time[nodes] + m.m_value[nodes] + m.w_value[nodes])
    with pytest.raises(ParameterError):
        Driver.from_expr("q*y", m)
    with pytest.raises(ParameterError):
        Driver.from_expr("y", m, {"y": 1.0})


def test_driver_error_names_node():
    m = build_tree(2, 2, 0.5, 1.0)
    f = Driver.from_expr("1/t", m)
    with pytest.raises(DriverError, match="at node"):
        f(np.zeros(m.n_internal), np.zeros(m.n_internal))


@pytest.mark.parametrize("text,beta,gamma", [
    ("2*y + 3*z + sq(z)", 2.0, 3.0),
    ("tanh(y) + z*y", 1.0, 0.0),
])
def test_linearize_examples(text, beta, gamma):
    m = build_tree(2, 2, 0.5, 1.0)
    b, g, _ = linearize(DriverSpec.build(m, text))
    np.testing.assert_allclose(b, beta, atol=1e-8)
    np.testing.assert_allclose(g, gamma, atol=1e-8)


@given(st.floats(-2, 2), st.floats(-2, 2), st.floats(-1, 1), st.floats(-1, 1))
def test_linearize_reconstructs(a, c, y, z):
    m = build_tree(2, 2, 0.5, 1.0)
    spec = DriverSpec.build(m, f"{a!r}*tanh(y) + {c!r}*sq(z) + 0.5*z + t")
    beta, gamma, h = linearize(spec)
    nodes = np.arange(m.n_internal)
    yy, zz = np.full(nodes.size, y), np.full(nodes.size, z)
    np.testing.assert_allclose(beta * yy + gamma * zz + h(yy, zz), spec.f(yy, zz), atol=1e-12)


def test_recenter_drift_identity():
    m = build_tree(3, 4, 0.2, 1.0)
    d = _data(m, "0.2*sq(z) + 0.1*y*z + tanh(y)", g=0.3, nu="0.1*tanh(m)")
    rng = np.random.default_rng(3)
    y1, y = rng.normal(size=m.n_nodes), rng.normal(size=m.n_nodes)
    rc = RBSDEData.build(recenter(d.driver, y1), 0.0, -1e6)
    np.testing.assert_allclose(drift(rc, y), drift(d, y + y1) - drift(d, y1), atol=1e-13)
    assert rc.driver.constants.lam == 2 * d.driver.constants.lam


def test_translate_and_scale():
    m = build_tree(2, 2, 0.5, 1.0)
    d = _data(m, "y + 1", xi=2.0, obstacle=0.5)
    t, u = translate_obstacle(d)
    assert u == 0.5 and t.obstacle.max() == 0.0
    np.testing.assert_allclose(t.alpha, 1.5)
    s = scale_data(d, 0.25)
    np.testing.assert_allclose(s.alpha, 0.25)
    np.testing.assert_allclose(s.xi, 0.5)


def test_spec_contracts():
    m = build_tree(2, 4, 0.5, 1.0)
    with pytest.raises(ContractError):
        DriverSpec.build(m, "0", g=2.0, constants=Constants.default(m, lam=1.0))
    bad = np.tile(m.dm, (m.n_internal, 1))  # correlated with M
    with pytest.raises(ContractError):
        DriverSpec(Driver.zero(m), np.zeros(m.n_nodes), bad, Constants.default(m))
    with pytest.raises(ParameterError):
        DriverSpec.build(m, "0", family="weird")
    with pytest.raises(InfeasibleError):
        _data(m, "0", xi=0.0, obstacle=1.0).check_feasible()


def test_validators():
    m = build_tree(2, 2, 0.5, 1.0)
    good = _data(m, "0.5*sq(z)", constants=Constants.default(m, lam=1.0, rho_prime=1.0))
    assert validate_qg(good).passed
    assert validate_der(good).passed
    bad = _data(m, "2*sq(z) + 3", constants=Constants.default(m, lam=1.0))
    rep = validate_qg(bad)
    assert not rep.passed and rep.worst["excess"] > 0 and "node" in rep.worst
    assert not validate_der(bad).passed
    mono = _data(m, "-y^3", family="monotone_y", constants=Constants.default(m, mu=0.0))
    assert validate_monotone(mono).passed
    up = _data(m, "y^3", family="monotone_y", constants=Constants.default(m, mu=0.0))
    assert not validate_monotone(up).passed
    with pytest.raises(ParameterError):
        validate_monotone(good)


def test_validate_ordering():
    m = build_tree(2, 2, 0.5, 1.0)
    a = _data(m, "0.2*sq(z)", xi=1.0, obstacle=0.0)
    b = _data(m, "0.1*sq(z) - 0.01", xi=0.5, obstacle=-0.1)
    validate_ordering(a, b)
    with pytest.raises(OrderingError, match="f'"):
        validate_ordering(b, a)
    c = _data(m, "0.1*sq(z)", xi=1.5, obstacle=-0.1)
    with pytest.raises(OrderingError, match="xi'"):
        validate_ordering(a, c)


def test_growth_catalog():
    assert Growth("linear", 2.0)(np.array([-1.0]))[0] == 4.0
    assert Growth("exp", 1.0, 2.0)(0.5) == pytest.approx(np.e)
    assert Growth.parse(3).c == 3.0
    assert Growth.parse({"kind": "superlinear", "c": 1.0})(0.0) == 0.0
    with pytest.raises(ParameterError):
        Growth("cubic")
    with pytest.raises(ParameterError):
        Growth("constant", -1.0)
