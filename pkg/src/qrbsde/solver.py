"""Fixed-point machinery: the Sol map, Picard iteration with smallness gating,
the gauge transform pair, perturbation stages and the split-and-perturb
procedures (Lipschitz, superlinear and monotone families)."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace

import numpy as np

from .driver import (
    Driver, DriverSpec, RBSDEData, drift, linearize, recenter, scale_data, stable_partials,
    translate_obstacle, validate_monotone,
)
from .errors import ContractError, ConvergenceError, GateError, ParameterError, StepSizeError
from .lattice import AdaptedProcess, Measure, TreeModel, girsanov, integrating_factor
from .norms import bmo_norm_sq, linf_norms, sup_norm
from .snell import Solution, solve_underlying

log = logging.getLogger(__name__)

DEFAULT_TOL = 1e-10
DEFAULT_MAX_ITER = 200
CONTRACTION_LIMIT = 1.0 / math.sqrt(2.0)
DEFAULT_SLACK = 0.05


# ---------------------------------------------------------------------------
# budget arithmetic

def epsilon0(lam: float, r_linf2_sq: float, beta_linf1: float = 0.0) -> float:
    """Data-size threshold below which the Sol map contracts on a small ball."""
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam!r}")
    return math.exp(-2.0 * beta_linf1) / (2.0**10 * lam * (r_linf2_sq + 2.0))


def r0(lam: float, r_linf2_sq: float, beta_linf1: float = 0.0) -> float:
    """Radius of the invariant ball, with ``lambda`` inflated by ``exp(|beta|)``."""
    if not lam > 0:
        raise ParameterError(f"lambda must be positive, got {lam!r}")
    return 1.0 / (2.0**5 * math.exp(beta_linf1) * lam * (r_linf2_sq + 2.0))


@dataclass(frozen=True)
class SmallnessBudget:
    lam: float
    r_linf2_sq: float
    beta_linf1: float
    epsilon0: float
    r0: float
    data_size: float
    n_split: int
    label: str = "single-shot"

    @classmethod
    def compute(cls, lam: float, r_linf2_sq: float, beta_linf1: float, data_size: float,
                label: str = "single-shot") -> "SmallnessBudget":
        eps = epsilon0(lam, r_linf2_sq, beta_linf1)
        n = max(1, math.ceil(data_size / eps - 1e-12)) if data_size > 0 else 1
        return cls(float(lam), float(r_linf2_sq), float(beta_linf1), eps,
                   r0(lam, r_linf2_sq, beta_linf1), float(data_size), int(n), label)

    @property
    def gate_passed(self) -> bool:
        return self.data_size <= self.epsilon0

    def to_dict(self) -> dict:
        return {"label": self.label, "lambda": self.lam, "r_linf2_sq": self.r_linf2_sq,
                "beta_linf1": self.beta_linf1, "epsilon0": self.epsilon0, "r0": self.r0,
                "data_size": self.data_size, "n_split": self.n_split, "gate_passed": self.gate_passed}


def data_size(data: RBSDEData) -> float:
    """``|xi|_inf + |alpha|_{inf,1} + max L^+``."""
    model = data.model
    l1, _ = linf_norms(data.alpha, model)
    return float(np.abs(data.xi).max() + l1 + max(0.0, data.obstacle.max()))


def budget_for(data: RBSDEData, beta: np.ndarray | None = None, label: str = "single-shot") -> SmallnessBudget:
    model = data.model
    c = data.driver.constants
    if beta is None:
        beta = linearize(data.driver)[0]
    b1, _ = linf_norms(beta, model)
    _, r2 = linf_norms(c.r, model)
    return SmallnessBudget.compute(c.lam, r2, b1, data_size(data), label)


# ---------------------------------------------------------------------------
# Picard iteration

@dataclass
class PicardTrace:
    iterates: list[tuple[float, float, float]] = field(default_factory=list)
    contraction_ratios: list[float] = field(default_factory=list)
    converged: bool = False
    gate_passed: bool | None = None
    final_norm: float = 0.0
    slack: float = DEFAULT_SLACK
    r0: float | None = None

    @property
    def n_iter(self) -> int:
        return len(self.iterates)

    @property
    def max_ratio(self) -> float:
        return max(self.contraction_ratios, default=0.0)

    @property
    def contraction_ok(self) -> bool:
        return self.max_ratio <= CONTRACTION_LIMIT + self.slack

    @property
    def ball_ok(self) -> bool | None:
        if self.r0 is None:
            return None
        return self.final_norm <= self.r0 * (1.0 + self.slack)

    def to_dict(self) -> dict:
        return {"n_iter": self.n_iter, "converged": self.converged, "gate_passed": self.gate_passed,
                "final_norm": self.final_norm, "max_ratio": self.max_ratio,
                "contraction_ratios": list(self.contraction_ratios),
                "contraction_ok": self.contraction_ok, "ball_ok": self.ball_ok,
                "iterates": [list(t) for t in self.iterates]}


def sol_map(y, data: RBSDEData, model: TreeModel, measure: Measure | None = None) -> Solution:
    """Freeze the drift at ``y`` and solve the resulting reflected problem."""
    measure = model.P if measure is None else measure
    yv = y.y.values if isinstance(y, Solution) else (y.values if isinstance(y, AdaptedProcess)
                                                     else np.asarray(y, dtype=float))
    dv = drift(data, yv)
    return solve_underlying(dv, data.xi, data.obstacle, model, measure)


def _iterate(data: RBSDEData, model: TreeModel, measure: Measure, tol: float, max_iter: int,
             y0=None, slack: float = DEFAULT_SLACK) -> tuple[Solution, PicardTrace]:
    trace = PicardTrace(slack=slack)
    y = np.zeros(model.n_nodes) if y0 is None else np.array(y0, dtype=float)
    prev = None
    eps = np.finfo(float).eps
    for _ in range(max_iter):
        sol = sol_map(y, data, model, measure)
        ynew = sol.y.values
        diff = ynew - y
        dist = math.sqrt(sup_norm(diff) ** 2 + bmo_norm_sq(diff, model, measure))
        s_inf = sup_norm(ynew)
        trace.iterates.append((s_inf, bmo_norm_sq(sol.parts, model, measure), dist))
        if not math.isfinite(dist):
            raise ConvergenceError("Picard iteration produced non-finite values", trace)
        if prev is not None and prev > 4096 * eps * max(s_inf, 1e-300):
            trace.contraction_ratios.append(dist / prev)
        prev = dist
        y = ynew
        if dist <= tol:
            trace.converged = True
            trace.final_norm = math.sqrt(s_inf**2 + trace.iterates[-1][1])
            return sol, trace
    raise ConvergenceError(
        f"Picard iteration did not reach tol {tol:g} in {max_iter} iterations "
        f"(last step {trace.iterates[-1][2]:.3e})", trace)


def _is_linear_free(beta, gamma, spec: DriverSpec) -> bool:
    return not (np.any(beta != 0) or np.any(gamma != 0) or np.any(spec.nu != 0))


def picard_solve(data: RBSDEData, model: TreeModel | None = None, measure: Measure | None = None,
                 budget: SmallnessBudget | None = None, tol: float = DEFAULT_TOL,
                 max_iter: int = DEFAULT_MAX_ITER, force: bool = False, gauge: str = "auto",
                 slack: float = DEFAULT_SLACK) -> tuple[Solution, PicardTrace]:
    """Fixed point of the Sol map, gated by the smallness budget.

    With ``gauge="auto"`` linear terms (``beta``, ``gamma``, ``nu``) are
    removed by :func:`transform_out` before iterating and restored afterwards;
    ``gauge="direct"`` iterates in the original variables.
    """
    model = data.model if model is None else model
    measure = model.P if measure is None else measure
    beta, gamma, _ = linearize(data.driver)
    if budget is None:
        budget = budget_for(data, beta)
    if not budget.gate_passed:
        msg = (f"data size {budget.data_size:.4g} exceeds epsilon0 {budget.epsilon0:.4g}; "
               f"convergence not guaranteed (split into {budget.n_split} pieces)")
        if not force:
            raise GateError(msg, budget.n_split)
        log.warning(msg)
    if gauge == "direct" or (gauge == "auto" and _is_linear_free(beta, gamma, data.driver)):
        sol, trace = _iterate(data, model, measure, tol, max_iter, slack=slack)
    elif gauge == "auto":
        hat, bfac, q = transform_out(data, model, beta=beta, gamma=gamma)
        sol_hat, trace = _iterate(hat, model, q, tol, max_iter, slack=slack)
        sol = transform_back(sol_hat, bfac, q, model)
    else:
        raise ParameterError(f"unknown gauge {gauge!r}")
    trace.gate_passed = budget.gate_passed
    trace.r0 = budget.r0 if budget.gate_passed else None
    return sol, trace


# ---------------------------------------------------------------------------
# gauge transform

@dataclass(frozen=True)
class Gauge:
    """Integrating factor ``B`` (node process) and its value one step ahead."""

    b: np.ndarray
    b_next: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray


def transform_out(data: RBSDEData, model: TreeModel | None = None, beta=None, gamma=None
                  ) -> tuple[RBSDEData, Gauge, Measure]:
    """Remove the linear part of the driver by an integrating factor and a change of measure.

    Returns the transformed data (driver ``B' h(y/B, z/B')``, ``g/B'``,
    ``nu = 0``, terminal ``B_T xi``, obstacle ``B L``), the gauge and ``Q``.
    ``B' `` denotes ``B`` one step ahead; the implicit factor ``1/(1 - beta dt)``
    makes the transformed scheme exactly equivalent to the original one.
    """
    model = data.model if model is None else model
    spec = data.driver
    if beta is None or gamma is None:
        beta, gamma, _ = linearize(spec)
    n = model.n_internal
    bfac = integrating_factor(beta, model, scheme="implicit").values
    b_next = bfac[model.children[:, 0]]
    kernel = gamma[:, None] / model.sigma * model.dm[None, :] + spec.nu
    try:
        q = girsanov(model, model.P, np.ascontiguousarray(kernel), tag="Q")
    except StepSizeError as exc:
        raise StepSizeError(f"{exc}; the linear part of the driver is too large for this dt") from None
    b_int = bfac[:n].copy()
    bn = b_next.copy()
    beta_c, gamma_c = beta.copy(), gamma.copy()
    f = spec.f

    def fhat(y, z, nodes):
        yy = y / b_int[nodes]
        zz = z / bn[nodes]
        return bn[nodes] * (f.raw(yy, zz, nodes) - beta_c[nodes] * yy - gamma_c[nodes] * zz)

    g_hat = spec.g.copy()
    g_hat[:n] = spec.g[:n] / bn
    b1, _ = linf_norms(beta, model)
    consts = replace(spec.constants, lam=spec.constants.lam * math.exp(b1))
    spec_hat = DriverSpec(Driver(model, fhat, None), g_hat, np.zeros_like(spec.nu), consts, spec.family)
    extra = None if data.extra_drift is None else bn * data.extra_drift
    hat = RBSDEData(spec_hat, bfac[model.leaves] * data.xi, bfac * data.obstacle, extra)
    return hat, Gauge(bfac, b_next, beta_c, gamma_c), q


def transform_back(sol_hat: Solution, gauge: Gauge, q: Measure | None = None,
                   model: TreeModel | None = None) -> Solution:
    """Undo :func:`transform_out`: ``Y = Yhat/B`` and ``dK = dKhat/B'``; parts under P."""
    model = sol_hat.model if model is None else model
    y = sol_hat.y.values / gauge.b
    dk = sol_hat.dk / gauge.b_next
    return Solution.from_arrays(model, y, dk, model.P)


def solve_in_gauge(data: RBSDEData, tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER,
                   slack: float = DEFAULT_SLACK) -> tuple[Solution, PicardTrace, Solution]:
    """Transform, iterate under Q, transform back.  Returns (solution, trace, hat solution)."""
    model = data.model
    hat, gauge, q = transform_out(data, model)
    sol_hat, trace = _iterate(hat, model, q, tol, max_iter, slack=slack)
    return transform_back(sol_hat, gauge, q, model), trace, sol_hat


# ---------------------------------------------------------------------------
# perturbation stage

def rho_value(data: RBSDEData, y_bound: float | None = None) -> float:
    rho = data.driver.constants.rho
    if rho.is_constant:
        return rho.c
    if y_bound is None:
        raise ParameterError("non-constant rho needs an a priori bound on Y; use solve_superlinear")
    return float(rho(y_bound))


def perturbation_epsilon(data: RBSDEData, rho: float) -> tuple[float, float]:
    """``(epsilon0(rho, 2 lambda, r), |r|^2_{inf,2})`` for perturbation stages."""
    _, r2 = linf_norms(data.driver.constants.r, data.model)
    return epsilon0(2.0 * data.driver.constants.lam, r2, rho * r2), r2


@dataclass
class PerturbationResult:
    increment: Solution
    total: Solution
    trace: PicardTrace
    delta_d: float
    epsilon0: float
    hat_sup: float

    def to_dict(self) -> dict:
        return {"delta_d": self.delta_d, "epsilon0": self.epsilon0, "hat_sup": self.hat_sup,
                "n_iter": self.trace.n_iter, "max_ratio": self.trace.max_ratio,
                "increment_sup": sup_norm(self.increment.y)}


def increment_data(base: Solution, base_data: RBSDEData, xi2, alpha2) -> RBSDEData:
    """Equation for ``Y2 = Ybar - Y1`` where ``Ybar`` solves the incremented problem.

    The driver is ``f`` recentred at the base plus ``alpha2``; the extra drift
    ``E[Y1'] + dV(Y1) - Y1`` carries the base dynamics (it is ``-dK1`` for an
    exact base); obstacle ``L - Y1``.
    """
    model = base_data.model
    n = model.n_internal
    y1 = base.y.values
    alpha2 = np.broadcast_to(np.asarray(alpha2, dtype=float), (n,))
    xi2 = np.broadcast_to(np.asarray(xi2, dtype=float), (model.n_leaves,))
    spec2 = recenter(base_data.driver, y1, alpha=alpha2)
    e = model.P.expect_next(y1) + drift(base_data, y1) - y1[:n]
    xi_full = base_data.xi + xi2
    # piecewise sums of xi may land an ulp below a touching terminal obstacle
    lo_t = base_data.obstacle[model.leaves]
    ulp = 64 * np.finfo(float).eps * (np.abs(xi_full) + np.abs(lo_t))
    xi_full = np.where((xi_full < lo_t) & (xi_full >= lo_t - ulp), lo_t, xi_full)
    return RBSDEData(spec2, xi_full - y1[model.leaves], base_data.obstacle - y1, e)


def solve_perturbation(base: Solution, data_increment, base_data: RBSDEData,
                       model: TreeModel | None = None, budget: SmallnessBudget | None = None,
                       rho: float | None = None, tol: float = DEFAULT_TOL,
                       max_iter: int = DEFAULT_MAX_ITER, force: bool = False,
                       slack: float = DEFAULT_SLACK) -> PerturbationResult:
    """Solve for the increment produced by adding ``(xi2, alpha2)`` to the data of ``base``."""
    model = base_data.model if model is None else model
    xi2, alpha2 = data_increment
    n = model.n_internal
    alpha2 = np.broadcast_to(np.asarray(alpha2, dtype=float), (n,))
    xi2 = np.broadcast_to(np.asarray(xi2, dtype=float), (model.n_leaves,))
    l1, _ = linf_norms(alpha2, model)
    delta_d = float(np.abs(xi2).max() + l1)
    if budget is not None:
        eps = budget.epsilon0
    else:
        eps, _ = perturbation_epsilon(base_data, rho_value(base_data) if rho is None else rho)
    if delta_d > eps * (1 + 1e-12):
        suggested = math.ceil(delta_d / eps)
        msg = (f"perturbation size {delta_d:.4g} exceeds epsilon0 {eps:.4g}; "
               f"split finer (at least {suggested} pieces)")
        if not force:
            raise GateError(msg, suggested)
        log.warning(msg)
    d2 = increment_data(base, base_data, xi2, alpha2)
    inc, trace, hat = solve_in_gauge(d2, tol, max_iter, slack)
    y = base.y.values + inc.y.values
    total = Solution.from_arrays(model, y, inc.dk, model.P)
    increment = Solution.from_arrays(model, inc.y.values, inc.dk - base.dk, model.P)
    return PerturbationResult(increment, total, trace, delta_d, eps, sup_norm(hat.y))


# ---------------------------------------------------------------------------
# split-and-perturb procedures

@dataclass
class StagedResult:
    solution: Solution
    budget: SmallnessBudget
    shift: float
    stages: list[PerturbationResult]
    rho_max: float
    notes: dict = field(default_factory=dict)

    @property
    def n_split(self) -> int:
        return len(self.stages)

    def to_dict(self, with_stages: bool = True) -> dict:
        out = {"budget": self.budget.to_dict(), "shift": self.shift, "n_split": self.n_split,
               "rho_max": self.rho_max, **self.notes}
        if with_stages:
            out["stages"] = [s.to_dict() for s in self.stages]
        return out


def _staged(data: RBSDEData, rho_max: float, tol: float, max_iter: int, n_split: int | None,
            force: bool, slack: float, label: str) -> StagedResult:
    model = data.model
    moved, shift = translate_obstacle(data)
    eps, r2 = perturbation_epsilon(moved, rho_max)
    d = data_size(moved)
    budget = SmallnessBudget(2.0 * moved.driver.constants.lam, r2, rho_max * r2, eps,
                             r0(2.0 * moved.driver.constants.lam, r2, rho_max * r2), d,
                             max(1, math.ceil(d / eps - 1e-12)) if d > 0 else 1, label)
    n = budget.n_split if n_split is None else int(n_split)
    if n < 1:
        raise ParameterError("n_split must be at least 1")
    if d / n > eps * (1 + 1e-12):
        msg = f"{n} pieces leave stage size {d / n:.4g} above epsilon0 {eps:.4g}"
        if not force:
            raise GateError(msg, budget.n_split)
        log.warning(msg)
    budget = replace(budget, n_split=n)
    alpha = moved.alpha
    base = Solution.from_arrays(model, np.zeros(model.n_nodes), np.zeros(model.n_internal))
    stages = []
    for k in range(1, n + 1):
        base_data = scale_data(moved, (k - 1) / n)
        res = solve_perturbation(base, (moved.xi / n, alpha / n), base_data, model,
                                 budget=budget, tol=tol, max_iter=max_iter, force=True, slack=slack)
        stages.append(res)
        base = res.total
    y = base.y.values + shift
    sol = Solution.from_arrays(model, y, base.dk, model.P)
    return StagedResult(sol, budget, shift, stages, rho_max)


def solve_full(data: RBSDEData, model: TreeModel | None = None, tol: float = DEFAULT_TOL,
               max_iter: int = DEFAULT_MAX_ITER, n_split: int | None = None, force: bool = False,
               slack: float = DEFAULT_SLACK) -> StagedResult:
    """Translate the obstacle below zero, split the data uniformly into ``n`` pieces and
    add them one perturbation stage at a time."""
    rho = data.driver.constants.rho
    if not rho.is_constant:
        raise ParameterError("solve_full needs a constant rho; use solve_superlinear or solve_monotone")
    return _staged(data, rho.c, tol, max_iter, n_split, force, slack, "full")


def monotone_bound_sq(data: RBSDEData, mu: float | None = None) -> float:
    """``2 exp(4 mu |r|^2)(|xi|^2 + 2 |alpha|_{inf,1}^2)``."""
    model = data.model
    c = data.driver.constants
    mu = c.mu if mu is None else mu
    if mu is None:
        raise ParameterError("monotone bound needs mu")
    _, r2 = linf_norms(c.r, model)
    l1, _ = linf_norms(data.alpha, model)
    return 2.0 * math.exp(4.0 * mu * r2) * (float(np.abs(data.xi).max()) ** 2 + 2.0 * l1**2)


def solve_superlinear(data: RBSDEData, model: TreeModel | None = None, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER, bound=None, n_split: int | None = None,
                      force: bool = False, slack: float = DEFAULT_SLACK) -> StagedResult:
    """Staged solve with ``rho`` frozen at ``rho(F)`` for an a priori bound ``F`` on ``|Y|``.

    ``bound`` is a callable ``F(|xi|_inf, |alpha|_{inf,1})``; by default the
    monotone-case bound with the declared ``mu`` is used.  Bounds refer to
    the obstacle-translated data.
    """
    moved, shift = translate_obstacle(data)
    c = moved.driver.constants
    l1, _ = linf_norms(moved.alpha, moved.model)
    xi_inf = float(np.abs(moved.xi).max())
    if bound is None:
        if c.mu is None:
            raise ParameterError("superlinear solve needs a bound callable or a declared mu")
        f_bound = math.sqrt(monotone_bound_sq(moved))
    else:
        f_bound = float(bound(xi_inf, l1))
    rho_max = float(c.rho(f_bound))
    res = _staged(data, rho_max, tol, max_iter, n_split, force, slack, "superlinear")
    res.notes.update({"a_priori_bound": f_bound,
                      "a_priori_ok": bool(sup_norm(res.solution.y.values - shift) <= f_bound * (1 + 1e-9) + 1e-12),
                      "hat_sup_max": max((s.hat_sup for s in res.stages), default=0.0)})
    return res


def solve_monotone(data: RBSDEData, model: TreeModel | None = None, tol: float = DEFAULT_TOL,
                   max_iter: int = DEFAULT_MAX_ITER, n_split: int | None = None,
                   force: bool = False, slack: float = DEFAULT_SLACK, grid=None) -> StagedResult:
    """Staged solve for one-sided Lipschitz drivers, with the a priori bound asserted
    on the output when the obstacle is non-positive."""
    rep = validate_monotone(data, grid)
    if not rep.passed:
        w = rep.worst
        raise ContractError(
            f"monotonicity violated at node {w['node']} for y = {w['y']:.6g}, y' = {w['y_prime']:.6g}, "
            f"z = {w['z']:.6g}")
    res = solve_superlinear(data, tol=tol, max_iter=max_iter, n_split=n_split, force=force, slack=slack)
    bound_sq = monotone_bound_sq(data)
    lhs = sup_norm(res.solution.y) ** 2
    res.notes.update({"monotone_bound_sq": bound_sq, "sup_sq": lhs,
                      "monotone_bound_ok": bool(lhs <= bound_sq * (1 + 1e-9) + 1e-15)
                      if data.obstacle.max() <= 0 else None})
    return res


# ---------------------------------------------------------------------------
# direct backward solve (independent of the fixed-point machinery)

def _solve_scalar(f: Driver, c: np.ndarray, zs: np.ndarray, nodes: np.ndarray, dt: float) -> np.ndarray:
    """Solve ``Y = c + f(Y, zs) dt`` node-wise by damped Newton."""
    y = c + f(c, zs, nodes) * dt

    def resid(u):
        return u - c - f(u, zs, nodes) * dt

    r = resid(y)
    for _ in range(100):
        scale = np.abs(y) + np.abs(c) + 1e-300
        if np.all(np.abs(r) <= 8 * np.finfo(float).eps * (scale + np.abs(y - c))):
            break
        h = 1e-7 * (1.0 + np.abs(y))
        fy = (f(y + h, zs, nodes) - f(y - h, zs, nodes)) / (2 * h)
        slope = 1.0 - fy * dt
        if np.any(slope <= 0):
            v = int(nodes[np.argmin(slope)])
            raise StepSizeError(f"f_y * dt >= 1 near node {f.model.node_id(v)}; reduce dt")
        step = r / slope
        t = np.ones_like(y)
        ynew = y - step
        rnew = resid(ynew)
        for _ in range(30):
            worse = np.abs(rnew) > np.abs(r)
            if not np.any(worse):
                break
            t = np.where(worse, t / 2, t)
            ynew = y - t * step
            rnew = resid(ynew)
        if np.array_equal(ynew, y):
            break
        y, r = ynew, rnew
    return y


def solve_backward(data: RBSDEData, model: TreeModel | None = None) -> Solution:
    """Level-by-level solve of the implicit discrete scheme with a scalar root find per node.

    Used as an independent reference for the fixed-point procedures.
    """
    model = data.model if model is None else model
    spec = data.driver
    y = np.zeros(model.n_nodes)
    y[model.leaves] = data.xi
    dk = np.zeros(model.n_internal)
    extra = data.extra()
    p_all = model.P.probs
    for t in range(model.depth - 1, -1, -1):
        sl = model.level_slice(t)
        nodes = np.arange(sl.start, sl.stop)
        kids = y[model.children[sl]]
        p = p_all[sl]
        parts = _level_parts(model, kids, p)
        c = np.einsum("ij,ij->i", p, kids)
        c = c + np.einsum("ij,ij->i", p, spec.nu[sl] * parts[1]) + spec.g[sl] * parts[2] + extra[sl]
        zs = parts[0] * model.sigma
        ytilde = _solve_scalar(spec.f, c, zs, nodes, model.dt)
        y[sl] = np.maximum(ytilde, data.obstacle[sl])
        # drift is charged at the reflected value
        push = y[sl] - c - spec.f(y[sl], zs, nodes) * model.dt
        dk[sl] = np.where(ytilde >= data.obstacle[sl], 0.0, push)
    data.check_feasible()
    return Solution.from_arrays(model, y, dk, model.P)


def _level_parts(model: TreeModel, kids: np.ndarray, p: np.ndarray):
    x = kids - np.einsum("ij,ij->i", p, kids)[:, None]
    dm = model.dm[None, :]
    dmt = dm - (p @ model.dm)[:, None]
    z = np.einsum("ij,ij->i", p, dmt * x) / np.einsum("ij,ij->i", p, dmt * dmt)
    orth = x - z[:, None] * dmt
    if model.branching == 2:
        orth = np.zeros_like(orth)
    return z, orth, np.einsum("ij,ij->i", p, orth * orth)


def residual_norm(sol: Solution, data: RBSDEData, model: TreeModel | None = None,
                  measure: Measure | None = None) -> float:
    """``|Sol(S) - S|`` in the combined norm."""
    model = sol.model if model is None else model
    measure = model.P if measure is None else measure
    again = sol_map(sol.y.values, data, model, measure)
    diff = again.y.values - sol.y.values
    return math.sqrt(sup_norm(diff) ** 2 + bmo_norm_sq(diff, model, measure))


__all__ = [
    "DEFAULT_MAX_ITER", "DEFAULT_TOL", "Gauge", "PerturbationResult", "PicardTrace",
    "SmallnessBudget", "StagedResult", "budget_for", "data_size", "epsilon0", "increment_data",
    "monotone_bound_sq", "picard_solve", "r0", "residual_norm", "solve_backward", "solve_full",
    "solve_in_gauge", "solve_monotone", "solve_perturbation", "solve_superlinear", "sol_map",
    "stable_partials", "transform_back", "transform_out",
]
