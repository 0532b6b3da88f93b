"""Equation data: driver, coefficients, terminal value and obstacle.

A driver is evaluated on internal nodes only.  Its ``z`` argument is the
volatility-scaled control ``Z*sigma``.  The orthogonal coefficient ``nu`` is
stored as per-branch increments, which keeps recentred drivers (whose ``nu``
picks up a ``2 g dN_perp`` term) in the same representation.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Callable, Mapping

import numpy as np

from . import expr as _expr
from .errors import ContractError, DriverError, InfeasibleError, OrderingError, ParameterError
from .growth import Growth
from .lattice import AdaptedProcess, MartingaleParts, NodeId, TreeModel, decompose

FAMILIES = ("lipschitz_y", "superlinear_y", "monotone_y")
DRIVER_VARIABLES = ("t", "y", "z", "m", "w")

FD_STEPS = (1e-5, 1e-6)
FD_STEPS_SECOND = (1e-3, 1e-4)
FD_AGREEMENT = 1e-4


class Driver:
    """Vectorised callable ``f(y, z, nodes)`` over internal nodes.

    ``nodes`` holds flat internal-node indices broadcastable against ``y`` and
    ``z``; it gives access to time, path coordinates and coefficient
    processes.  ``text`` is kept for reports when the driver came from an
    expression.
    """

    def __init__(self, model: TreeModel, fn: Callable, text: str | None = None):
        self.model = model
        self._fn = fn
        self.text = text

    def __call__(self, y, z, nodes=None) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        z = np.asarray(z, dtype=float)
        if nodes is None:
            nodes = np.arange(self.model.n_internal)
        nodes = np.asarray(nodes, dtype=np.int64)
        shape = np.broadcast_shapes(y.shape, z.shape, nodes.shape)
        y, z, nodes = (np.broadcast_to(a, shape) for a in (y, z, nodes))
        try:
            out = self._fn(y, z, nodes)
        except DriverError as exc:
            if exc.node is not None and nodes.size:
                v = int(nodes.reshape(-1)[exc.node])
                raise DriverError(str(exc).split(" (at node")[0], self.model.node_id(v)) from None
            raise
        out = np.broadcast_to(np.asarray(out, dtype=float), shape)
        if not np.all(np.isfinite(out)):
            bad = np.flatnonzero(~np.isfinite(out.reshape(-1)))[0]
            raise DriverError("driver value is not finite", self.model.node_id(int(nodes.reshape(-1)[bad])))
        return out

    def raw(self, y, z, nodes):
        """Evaluate without broadcasting or finiteness checks.

        For driver wrappers whose arguments were already prepared by an
        outer :meth:`__call__`.
        """
        return self._fn(y, z, nodes)

    @classmethod
    def from_expr(cls, source, model: TreeModel,
                  coefficients: Mapping[str, object] | None = None) -> "Driver":
        """Compile an expression in ``t, y, z, m, w`` and named coefficient processes."""
        ast = _expr.parse_driver(source) if isinstance(source, str) else source
        coeffs = {name: _node_values(model, val) for name, val in (coefficients or {}).items()}
        clash = set(coeffs) & set(DRIVER_VARIABLES)
        if clash:
            raise ParameterError(f"coefficient names shadow driver variables: {sorted(clash)}")
        unknown = _expr.variables(ast) - set(DRIVER_VARIABLES) - set(coeffs)
        if unknown:
            raise ParameterError(f"unknown names in driver expression: {sorted(unknown)}")

        run = _expr.compile_expr(ast)

        def fn(y, z, nodes):
            env = {"t": model.time[nodes], "m": model.m_value[nodes],
                   "w": model.w_value[nodes], "y": y, "z": z}
            env.update({k: v[nodes] for k, v in coeffs.items()})
            return run(env)

        return cls(model, fn, _expr.to_text(ast))

    @classmethod
    def zero(cls, model: TreeModel) -> "Driver":
        return cls(model, lambda y, z, nodes: np.zeros(y.shape), "0.0")


def _node_values(model: TreeModel, value) -> np.ndarray:
    if isinstance(value, AdaptedProcess):
        return value.values
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full(model.n_nodes, float(arr))
    if arr.shape == (model.n_internal,):
        return np.concatenate([arr, np.zeros(model.n_leaves)])
    if arr.shape != (model.n_nodes,):
        raise ParameterError(f"process must be scalar or have {model.n_nodes} node values")
    return arr


@dataclass(frozen=True)
class Constants:
    """Declared regularity constants.

    ``lam_qg`` is the growth function of the quadratic-growth bound, ``lam``
    the scalar second-derivative bound (also the bound on ``|g|``),
    ``rho``/``rho_prime`` bound ``f_y`` and ``f_z``.  ``r`` and ``h`` are node
    processes.  ``mu`` is the one-sided Lipschitz constant of monotone
    drivers and ``phi`` the growth of superlinear ones.
    """

    r: np.ndarray
    h: np.ndarray
    lam: float = 1.0
    lam_qg: Growth = field(default_factory=Growth)
    rho: Growth = field(default_factory=Growth)
    rho_prime: Growth = field(default_factory=Growth)
    mu: float | None = None
    phi: Growth | None = None

    @classmethod
    def default(cls, model: TreeModel, **kw) -> "Constants":
        r = _node_values(model, kw.pop("r", 1.0))
        h = _node_values(model, kw.pop("h", 1.0))
        for key in ("lam_qg", "rho", "rho_prime", "phi"):
            if key in kw and kw[key] is not None:
                kw[key] = Growth.parse(kw[key])
        return cls(r=r, h=h, **kw)

    def to_dict(self) -> dict:
        out = {"lam": self.lam, "lam_qg": self.lam_qg.to_dict(), "rho": self.rho.to_dict(),
               "rho_prime": self.rho_prime.to_dict(),
               "r_max": float(np.abs(self.r).max()), "h_max": float(np.abs(self.h).max())}
        if self.mu is not None:
            out["mu"] = self.mu
        if self.phi is not None:
            out["phi"] = self.phi.to_dict()
        return out


@dataclass(frozen=True)
class DriverSpec:
    """Driver ``f`` with coefficients ``g`` (node process) and ``nu`` increments."""

    f: Driver
    g: np.ndarray
    nu: np.ndarray
    constants: Constants
    family: str = "lipschitz_y"

    def __post_init__(self):
        model = self.f.model
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown driver family {self.family!r}; expected one of {FAMILIES}")
        if self.g.shape != (model.n_nodes,):
            raise ParameterError("g must be a node process")
        if self.nu.shape != (model.n_internal, model.branching):
            raise ParameterError("nu increments must have shape (n_internal, branching)")
        gmax = float(np.abs(self.g[: model.n_internal]).max())
        if gmax > self.constants.lam * (1 + 1e-12):
            raise ContractError(f"|g| reaches {gmax:.6g}, above the declared lambda {self.constants.lam:.6g}")
        p = model.P.probs
        scale = max(1.0, float(np.abs(self.nu).max()))
        if np.abs(np.einsum("ij,ij->i", p, self.nu)).max() > 1e-12 * scale:
            raise ContractError("nu increments are not centred")
        cross = np.einsum("ij,ij->i", p, self.nu * model.dm[None, :])
        if np.abs(cross).max() > 1e-12 * scale * max(1.0, float(np.abs(model.dm).max())):
            v = int(np.argmax(np.abs(cross)))
            raise ContractError(f"nu is not orthogonal to M at node {model.node_id(v)}")

    @property
    def model(self) -> TreeModel:
        return self.f.model

    @classmethod
    def build(cls, model: TreeModel, f, g=0.0, nu=0.0, constants: Constants | None = None,
              family: str = "lipschitz_y", coefficients: Mapping[str, object] | None = None) -> "DriverSpec":
        """Convenience constructor; ``nu`` is an integrand against ``W_perp``."""
        if not isinstance(f, Driver):
            f = Driver.from_expr(f, model, coefficients)
        g = _resolve_process(model, g, coefficients)
        nu_int = _resolve_process(model, nu, coefficients)[: model.n_internal]
        nu_inc = nu_int[:, None] * model.dw[None, :]
        constants = constants or Constants.default(model)
        return cls(f, g, np.ascontiguousarray(nu_inc), constants, family)


def _resolve_process(model: TreeModel, value, coefficients=None) -> np.ndarray:
    if isinstance(value, str):
        ast = _expr.parse_driver(value)
        env = {"t": model.time, "m": model.m_value, "w": model.w_value}
        env.update({k: _node_values(model, v) for k, v in (coefficients or {}).items()})
        with np.errstate(all="ignore"):
            out = np.broadcast_to(np.asarray(_expr.evaluate(ast, env), dtype=float), (model.n_nodes,))
        return np.array(out)
    return _node_values(model, value)


@dataclass(frozen=True)
class RBSDEData:
    """Full problem data.  ``extra_drift`` is an additive per-node drift term
    (zero for ordinary problems, nonzero for perturbation equations)."""

    driver: DriverSpec
    xi: np.ndarray
    obstacle: np.ndarray
    extra_drift: np.ndarray | None = None

    def __post_init__(self):
        model = self.model
        if self.xi.shape != (model.n_leaves,):
            raise ParameterError(f"terminal condition needs {model.n_leaves} leaf values")
        if self.obstacle.shape != (model.n_nodes,):
            raise ParameterError("obstacle must be a node process")
        if self.extra_drift is not None and self.extra_drift.shape != (model.n_internal,):
            raise ParameterError("extra drift must have one value per internal node")
        for name, arr in (("xi", self.xi), ("obstacle", self.obstacle)):
            if not np.all(np.isfinite(arr)):
                raise ParameterError(f"{name} has non-finite values")

    @property
    def model(self) -> TreeModel:
        return self.driver.model

    @classmethod
    def build(cls, driver: DriverSpec, xi, obstacle, extra_drift=None) -> "RBSDEData":
        model = driver.model
        xi = np.asarray(xi, dtype=float)
        if xi.ndim == 0:
            xi = np.full(model.n_leaves, float(xi))
        obstacle = _node_values(model, obstacle)
        return cls(driver, np.array(xi, dtype=float), np.array(obstacle, dtype=float),
                   None if extra_drift is None else np.asarray(extra_drift, dtype=float))

    @property
    def alpha(self) -> np.ndarray:
        """``f(., 0, 0)`` at internal nodes."""
        n = self.model.n_internal
        return self.driver.f(np.zeros(n), np.zeros(n))

    @property
    def terminal_obstacle(self) -> np.ndarray:
        return self.obstacle[self.model.leaves]

    def check_feasible(self, tol: float = 0.0) -> None:
        gap = self.xi - self.terminal_obstacle
        if gap.min() < -tol:
            k = int(np.argmin(gap))
            v = self.model.level_offsets[self.model.depth] + k
            raise InfeasibleError(
                f"terminal value {self.xi[k]:.6g} below obstacle {self.terminal_obstacle[k]:.6g} "
                f"at leaf {self.model.node_id(v)}")

    def with_(self, **kw) -> "RBSDEData":
        return replace(self, **kw)

    def extra(self) -> np.ndarray:
        return np.zeros(self.model.n_internal) if self.extra_drift is None else self.extra_drift


def drift(data: RBSDEData, y, parts: MartingaleParts | None = None) -> np.ndarray:
    """Drift increments ``dV`` at every internal node for the frozen input ``y``.

    Control and brackets are read from the decomposition under the reference
    measure P, which is what the discrete scheme prescribes.
    """
    model = data.model
    yv = y.values if isinstance(y, AdaptedProcess) else np.asarray(y, dtype=float)
    if parts is None:
        parts = decompose(model, yv)
    spec = data.driver
    n = model.n_internal
    fv = spec.f(yv[:n], parts.z * model.sigma)
    nu_cross = np.einsum("ij,ij->i", model.P.probs, spec.nu * parts.orth)
    out = fv * model.dt + nu_cross + spec.g[:n] * parts.d_nperp
    if data.extra_drift is not None:
        out = out + data.extra_drift
    return out


def drift_increment(data: RBSDEData, node, y: float, z: float, dNperp_bracket: float,
                    nu_cross_bracket: float) -> float:
    """``f(t, y, z*sigma) dt + nu_cross + g dNperp`` at a single node."""
    model = data.model
    v = model.index(node)
    if v >= model.n_internal:
        raise ContractError(f"node {model.node_id(v)} is terminal")
    fv = data.driver.f(np.array([y]), np.array([z * model.sigma]), np.array([v]))[0]
    out = fv * model.dt + nu_cross_bracket + data.driver.g[v] * dNperp_bracket
    if data.extra_drift is not None:
        out += data.extra_drift[v]
    return float(out)


# ---------------------------------------------------------------------------
# sampling-based validation

@dataclass(frozen=True)
class SampleGrid:
    y: np.ndarray
    z: np.ndarray
    nodes: np.ndarray

    @classmethod
    def default(cls, model: TreeModel, y_max: float = 2.0, z_max: float = 2.0, n: int = 9,
                max_nodes: int = 64) -> "SampleGrid":
        nodes = np.unique(np.linspace(0, model.n_internal - 1, min(max_nodes, model.n_internal)).astype(np.int64))
        return cls(np.linspace(-y_max, y_max, n), np.linspace(-z_max, z_max, n), nodes)

    def mesh(self):
        nn, yy, zz = np.meshgrid(self.nodes, self.y, self.z, indexing="ij")
        return yy.ravel(), zz.ravel(), nn.ravel()


@dataclass
class ValidationReport:
    check: str
    passed: bool
    n_samples: int
    worst: dict | None = None
    note: str = "sampling-based, non-exhaustive"

    def to_dict(self) -> dict:
        return {"check": self.check, "passed": self.passed, "n_samples": self.n_samples,
                "worst": self.worst, "note": self.note}


def _worst(model: TreeModel, excess: np.ndarray, fields: dict) -> dict:
    i = int(np.argmax(excess))
    out = {k: float(v[i]) for k, v in fields.items() if k != "node"}
    out["node"] = str(model.node_id(int(fields["node"][i])))
    out["excess"] = float(excess[i])
    return out


def validate_qg(data: RBSDEData, sample_grid: SampleGrid | None = None) -> ValidationReport:
    """Sample ``|f(t,y,z)| <= lambda(y) (h^2 + z^2)``."""
    model = data.model
    grid = sample_grid or SampleGrid.default(model)
    y, z, nodes = grid.mesh()
    if y.size == 0:
        raise ParameterError("sample grid is empty")
    c = data.driver.constants
    lhs = np.abs(data.driver.f(y, z, nodes))
    rhs = c.lam_qg(y) * (c.h[nodes] ** 2 + z**2)
    excess = lhs - rhs
    ok = bool(np.all(excess <= 1e-12 * (1 + rhs)))
    worst = _worst(model, excess, {"y": y, "z": z, "node": nodes, "lhs": lhs, "rhs": rhs})
    return ValidationReport("quadratic_growth", ok, int(y.size), worst)


def fd_partials(f: Driver, y, z, nodes, step: float) -> tuple[np.ndarray, np.ndarray]:
    """Central-difference first derivatives ``(f_y, f_z)``."""
    fy = (f(y + step, z, nodes) - f(y - step, z, nodes)) / (2 * step)
    fz = (f(y, z + step, nodes) - f(y, z - step, nodes)) / (2 * step)
    return fy, fz


def _fd_second(f: Driver, y, z, nodes, s: float):
    f0 = f(y, z, nodes)
    fyy = (f(y + s, z, nodes) - 2 * f0 + f(y - s, z, nodes)) / s**2
    fzz = (f(y, z + s, nodes) - 2 * f0 + f(y, z - s, nodes)) / s**2
    fyz = (f(y + s, z + s, nodes) - f(y + s, z - s, nodes)
           - f(y - s, z + s, nodes) + f(y - s, z - s, nodes)) / (4 * s * s)
    return fyy, fyz, fzz


def stable_partials(f: Driver, y, z, nodes) -> tuple[np.ndarray, np.ndarray]:
    """First derivatives at the two standard steps, cross-checked."""
    a = fd_partials(f, y, z, nodes, FD_STEPS[0])
    b = fd_partials(f, y, z, nodes, FD_STEPS[1])
    for name, u, v in (("f_y", a[0], b[0]), ("f_z", a[1], b[1])):
        gap = np.abs(u - v) - FD_AGREEMENT * (1 + np.abs(u))
        if np.any(gap > 0):
            i = int(np.argmax(gap))
            node = f.model.node_id(int(np.broadcast_to(nodes, gap.shape).reshape(-1)[i]))
            raise DriverError(
                f"unstable finite-difference estimate of {name} ({u.reshape(-1)[i]:.6g} vs "
                f"{v.reshape(-1)[i]:.6g}); try a smaller finite-difference step", node)
    return a


def validate_der(data: RBSDEData, sample_grid: SampleGrid | None = None) -> ValidationReport:
    """Sample the derivative bounds on ``f_y, f_z, f_yy, f_yz, f_zz``."""
    model = data.model
    grid = sample_grid or SampleGrid.default(model)
    y, z, nodes = grid.mesh()
    if y.size == 0:
        raise ParameterError("sample grid is empty")
    c = data.driver.constants
    f = data.driver.f
    r, h = c.r[nodes], c.h[nodes]
    try:
        fy, fz = stable_partials(f, y, z, nodes)
    except DriverError as exc:
        return ValidationReport("derivative_bounds", False, int(y.size), {"error": str(exc)})
    s1 = _fd_second(f, y, z, nodes, FD_STEPS_SECOND[0])
    s2 = _fd_second(f, y, z, nodes, FD_STEPS_SECOND[1])
    for u, v in zip(s1, s2):
        if np.any(np.abs(u - v) > 1e-3 * (1 + np.abs(u))):
            return ValidationReport("derivative_bounds", False, int(y.size),
                                    {"error": "unstable second-derivative estimate"})
    fyy, fyz, fzz = s1
    checks = {
        "f_y": (np.abs(fy), c.rho(y) * r**2),
        "f_z": (np.abs(fz), c.rho_prime(y) * (h + np.abs(z))),
        "f_yy": (np.abs(fyy), c.lam * r**2),
        "f_yz": (np.abs(fyz), c.lam * r),
        "f_zz": (np.abs(fzz), c.lam + 0 * y),
    }
    _worst_name, worst_excess, worst = None, -np.inf, None
    for name, (lhs, rhs) in checks.items():
        excess = lhs - rhs - 1e-6 * (1 + rhs)
        i = int(np.argmax(excess))
        if excess[i] > worst_excess:
            _worst_name, worst_excess = name, float(excess[i])
            worst = {"derivative": name, "y": float(y[i]), "z": float(z[i]),
                     "node": str(model.node_id(int(nodes[i]))), "estimate": float(lhs[i]),
                     "bound": float(rhs[i]), "excess": float(excess[i])}
    return ValidationReport("derivative_bounds", bool(worst_excess <= 0), int(y.size), worst)


def validate_monotone(data: RBSDEData, sample_grid: SampleGrid | None = None) -> ValidationReport:
    """Sample ``(y'-y)(f(y',z)-f(y,z)) <= mu r^2 |y'-y|^2`` over grid pairs."""
    model = data.model
    grid = sample_grid or SampleGrid.default(model)
    c = data.driver.constants
    if c.mu is None:
        raise ParameterError("monotone family requires a declared mu")
    ny = grid.y.size
    ia, ib = np.triu_indices(ny, k=1)
    nn, pa, zz = np.meshgrid(grid.nodes, np.arange(ia.size), grid.z, indexing="ij")
    nn, pa, zz = nn.ravel(), pa.ravel(), zz.ravel()
    y1, y2 = grid.y[ia[pa]], grid.y[ib[pa]]
    f = data.driver.f
    lhs = (y2 - y1) * (f(y2, zz, nn) - f(y1, zz, nn))
    rhs = c.mu * c.r[nn] ** 2 * (y2 - y1) ** 2
    excess = lhs - rhs - 1e-12 * (1 + np.abs(rhs))
    worst = _worst(model, excess, {"y": y1, "y_prime": y2, "z": zz, "node": nn, "lhs": lhs, "rhs": rhs})
    return ValidationReport("monotonicity", bool(np.all(excess <= 0)), int(lhs.size), worst)


def validate_ordering(data: RBSDEData, data_prime: RBSDEData,
                      sample_grid: SampleGrid | None = None) -> None:
    """Raise :class:`OrderingError` unless ``f' <= f, g' <= g, xi' <= xi, L' <= L``."""
    model = data.model
    if data_prime.model is not model and (data_prime.model.n_nodes != model.n_nodes
                                          or data_prime.model.branching != model.branching):
        raise OrderingError("ordering violation: instances live on different trees")
    grid = sample_grid or SampleGrid.default(model)
    y, z, nodes = grid.mesh()
    n = model.n_internal
    tol = 1e-12
    diffs = {
        "f": data_prime.driver.f(y, z, nodes) - data.driver.f(y, z, nodes),
        "g": data_prime.driver.g[:n] - data.driver.g[:n],
        "xi": data_prime.xi - data.xi,
        "L": data_prime.obstacle - data.obstacle,
        "extra drift": data_prime.extra() - data.extra(),
    }
    for name, d in diffs.items():
        if d.size and d.max() > tol:
            raise OrderingError(f"ordering violation: {name}' exceeds {name} by {d.max():.6g}")
    if np.abs(data_prime.driver.nu - data.driver.nu).max() > tol:
        raise OrderingError("ordering violation: comparison requires the same nu")


# ---------------------------------------------------------------------------
# driver-level transforms

def recenter(spec: DriverSpec, around, alpha=None) -> DriverSpec:
    """Driver ``f(y + Y1, z + Z1 sigma) - f(Y1, Z1 sigma) (+ alpha)`` around a base solution.

    ``around`` is a solution (anything with a ``y`` node process) or a node
    array.  The returned ``nu`` increments carry the ``2 g dN1_perp`` cross
    term so that the drift of the increment equation is exact.
    """
    model = spec.model
    yv = around.y.values if hasattr(around, "y") else _node_values(model, around)
    parts = decompose(model, yv)
    n = model.n_internal
    y1 = yv[:n].copy()
    zs1 = parts.z * model.sigma
    f = spec.f
    a2 = None if alpha is None else np.broadcast_to(np.asarray(alpha, dtype=float), (n,)).copy()

    def fbar(y, z, nodes):
        out = f.raw(y + y1[nodes], z + zs1[nodes], nodes) - f.raw(y1[nodes], zs1[nodes], nodes)
        return out if a2 is None else out + a2[nodes]

    nu = spec.nu + 2.0 * spec.g[:n, None] * parts.orth
    c = spec.constants
    consts = replace(c, lam=2.0 * c.lam)
    return replace(spec, f=Driver(model, fbar, None), nu=np.ascontiguousarray(nu), constants=consts)


def translate_obstacle(data: RBSDEData) -> tuple[RBSDEData, float]:
    """Shift by ``U = max L^+`` so that the translated obstacle is non-positive."""
    u = float(max(0.0, data.obstacle.max()))
    if u == 0.0:
        return data, 0.0
    model = data.model
    f = data.driver.f
    shifted = Driver(model, lambda y, z, nodes: f.raw(y + u, z, nodes),
                     None if f.text is None else f"f(y + {u!r}, z)")
    spec = replace(data.driver, f=shifted)
    return replace(data, driver=spec, xi=data.xi - u, obstacle=data.obstacle - u), u


def untranslate_driver(spec: DriverSpec, u: float) -> DriverSpec:
    f = spec.f
    return replace(spec, f=Driver(spec.model, lambda y, z, nodes: f.raw(y - u, z, nodes), None))


def linearize(spec: DriverSpec) -> tuple[np.ndarray, np.ndarray, Driver]:
    """``(beta, gamma, h)`` with ``f = beta y + gamma z + h`` and derivatives taken at (0, 0)."""
    model = spec.model
    n = model.n_internal
    nodes = np.arange(n)
    beta, gamma = stable_partials(spec.f, np.zeros(n), np.zeros(n), nodes)
    beta, gamma = beta.copy(), gamma.copy()
    f = spec.f

    def h(y, z, nd):
        return f.raw(y, z, nd) - beta[nd] * y - gamma[nd] * z

    return beta, gamma, Driver(model, h, None)


def scale_data(data: RBSDEData, factor: float) -> RBSDEData:
    """Uniform piece ``(xi/n, alpha/n)`` of the data: ``f - alpha + alpha*factor``."""
    model = data.model
    alpha = data.alpha
    f = data.driver.f

    def piece(y, z, nodes):
        return f.raw(y, z, nodes) - (1.0 - factor) * alpha[nodes]

    spec = replace(data.driver, f=Driver(model, piece, None))
    return replace(data, driver=spec, xi=data.xi * factor)


def node_label(model: TreeModel, v: int) -> str:
    return str(model.node_id(v))


__all__ = [
    "Constants", "Driver", "DriverSpec", "RBSDEData", "SampleGrid", "ValidationReport",
    "drift", "drift_increment", "fd_partials", "linearize", "recenter", "scale_data",
    "stable_partials", "translate_obstacle", "untranslate_driver", "validate_der",
    "validate_monotone", "validate_ordering", "validate_qg", "NodeId",
]
