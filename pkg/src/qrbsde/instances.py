"""Seeded random instances from a small catalog of smooth drivers.

Every instance declares constants that provably dominate its driver:
for ``a sq(z) + b u(y) + c v(z) + d k(t)`` with ``|u(y)| <= |y|``,
``|v(z)| <= |z|`` and ``|k| <= 1.5`` one may take
``lambda(y) = c0 (1 + |y|)`` with ``c0 = max(1, a + |c|, |b|)`` and
``h^2 = 1 + |c|/2 + 1.5|d|``.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .driver import Constants, Driver, DriverSpec, RBSDEData
from .growth import Growth
from .lattice import TreeModel, build_tree

CATALOG = {
    "quad_linear": "{a}*sq(z) + {b}*y + {c}*z + {d}",
    "quad_tanh_y": "{a}*sq(z) + {b}*tanh(y) + {c}*z + {d}",
    "quad_tanh_z": "{a}*sq(z) + {b}*y + {c}*tanh(z) + {d}*(1 + 0.5*tanh(t))",
    "quad_path": "{a}*sq(z) + {b}*tanh(y) + {c}*tanh(z) + {d}*tanh(m)",
}
PURE_QUADRATIC = {
    "pure_quad": "{a}*sq(z) + {d}",
    "pure_quad_tanh": "{a}*sq(z) + {a2}*sq(tanh(y)) + {d}*tanh(m)",
}
MONOTONE = {
    "cubic": "-{k}*y^3 + {a}*sq(z) + {d}",
    "cubic_linear": "-{k}*y^3 - {b}*y + {a}*sq(z) + {d}",
    "log_superlinear": "-{k}*y*(1 + log(1 + abs(y))) + {a}*sq(z) + {d}",
}


def fmt(x: float) -> str:
    return repr(float(x))


@dataclass
class Instance:
    data: RBSDEData
    meta: dict

    @property
    def model(self) -> TreeModel:
        return self.data.model


def random_tree(rng: np.random.Generator, depth=(2, 4), branching=(2, 4), horizon: float = 1.0) -> TreeModel:
    d = int(rng.integers(depth[0], depth[1] + 1)) if isinstance(depth, tuple) else int(depth)
    b = int(rng.choice(branching)) if isinstance(branching, tuple) else int(branching)
    sigma = float(rng.choice([0.5, 1.0, 1.5]))
    return build_tree(d, b, horizon / d, sigma)


def _coefs(rng, quaternary: bool, linear: bool = True, scale: float = 1.0) -> dict:
    out = {"a": rng.uniform(0.05, 0.5), "d": scale * rng.uniform(-1, 1),
           "b": rng.uniform(-1, 1) if linear else 0.0, "c": rng.uniform(-0.5, 0.5) if linear else 0.0,
           "g": rng.uniform(-0.3, 0.3) if quaternary else 0.0,
           "nu": rng.uniform(-0.3, 0.3) if quaternary and linear else 0.0}
    return out


def catalog_constants(model: TreeModel, a: float, b: float, c: float, d: float, g: float = 0.0,
                      lam_extra: float = 0.0) -> Constants:
    c0 = max(1.0, a + abs(c), abs(b))
    h = float(np.sqrt(1.0 + abs(c) / 2 + 1.5 * abs(d)))
    # |tanh''| < 0.77, so 2a + |c| and |b| dominate the second derivatives
    lam = max(1.0, 2 * a + abs(c), abs(b), abs(g), lam_extra)
    return Constants.default(model, r=1.0, h=h, lam=lam, lam_qg=Growth("linear", c0),
                             rho=Growth("constant", max(abs(b), 0.1)),
                             rho_prime=Growth("constant", max(2 * a, abs(c), 0.1)))


def terminal_and_obstacle(rng, model: TreeModel, xi_scale: float, binding: bool,
                          obstacle_floor: float | None = None):
    n = model.n_leaves
    kind = rng.integers(3)
    if kind == 0:
        xi = xi_scale * rng.uniform(-1, 1, n)
    else:
        m = model.m_value[model.leaves] / max(model.sigma * np.sqrt(model.horizon), 1e-12)
        w = model.w_value[model.leaves]
        xi = xi_scale * np.tanh(rng.uniform(0.5, 2) * m + rng.uniform(-1, 1) * w
                                + 0.3 * rng.uniform(-1, 1, n))
    if obstacle_floor is not None:
        lo = np.full(model.n_nodes, obstacle_floor)
    elif binding:
        level = rng.uniform(0.0, 0.6) * xi_scale
        lo = level + 0.3 * xi_scale * np.tanh(model.m_value) + 0.1 * xi_scale * rng.uniform(-1, 1, model.n_nodes)
    else:
        lo = np.full(model.n_nodes, -10.0 * max(xi_scale, 1.0))
    lo[model.leaves] = np.minimum(lo[model.leaves], xi)
    return xi, lo


def random_instance(rng: np.random.Generator, model: TreeModel | None = None, family: str = "catalog",
                    data_scale: float = 1.0, binding: bool | None = None,
                    obstacle_floor: float | None = None, linear: bool = True) -> Instance:
    """Draw a driver from a catalog, coefficients, terminal values and obstacle.

    ``data_scale`` multiplies ``xi``, the obstacle and the constant term ``d``.
    """
    model = random_tree(rng) if model is None else model
    quaternary = model.branching == 4
    if binding is None:
        binding = bool(rng.integers(2))
    co = _coefs(rng, quaternary, linear, data_scale)
    names = {"catalog": CATALOG, "pure": PURE_QUADRATIC}[family]
    key = sorted(names)[int(rng.integers(len(names)))]
    if family == "pure":
        co["a2"] = rng.uniform(0, 0.5)
        co["b"] = co["c"] = co["nu"] = 0.0
    text = names[key].format(**{k: fmt(v) for k, v in co.items()})
    consts = catalog_constants(model, co["a"], co["b"], co["c"], co["d"], co["g"],
                               lam_extra=2 * co.get("a2", 0.0))
    spec = DriverSpec.build(model, text, g=co["g"], nu=co["nu"], constants=consts)
    xi, lo = terminal_and_obstacle(rng, model, data_scale, binding, obstacle_floor)
    data = RBSDEData.build(spec, xi, lo)
    meta = {"driver": text, "key": key, "depth": model.depth, "branching": model.branching,
            "sigma": model.sigma, "g": co["g"], "nu": co["nu"], "binding": binding}
    return Instance(data, meta)


def monotone_instance(rng: np.random.Generator, model: TreeModel | None = None,
                      data_scale: float = 0.0005) -> Instance:
    """One-sided Lipschitz driver (``mu = 0``) with non-positive obstacle.

    Growth of ``f_y``: ``3k y^2 + b <= max(b, 1.5k) exp(2|y|)`` for the cubic
    drivers and ``k(2 + log(1+|y|)) <= 2k(1+|y|)`` for the logarithmic one.
    Coefficients are kept small so that the staged solve needs few pieces.
    """
    model = random_tree(rng, depth=(2, 4)) if model is None else model
    key = sorted(MONOTONE)[int(rng.integers(len(MONOTONE)))]
    co = {"k": rng.uniform(0.1, 0.4), "b": rng.uniform(0, 0.4), "a": rng.uniform(0.05, 0.25),
          "d": data_scale * rng.uniform(-1, 1)}
    text = MONOTONE[key].format(**{k: fmt(v) for k, v in co.items()})
    if key == "log_superlinear":
        rho = Growth("linear", 2 * co["k"])
        lam = max(1.0, 2 * co["a"], 2 * co["k"])
        phi = Growth("superlinear", 2 * co["k"])
    else:
        rho = Growth("exp", max(co["b"] if key == "cubic_linear" else 0.0, 1.5 * co["k"]), 2.0)
        lam = max(1.0, 2 * co["a"], 6 * co["k"])
        phi = None
    h = float(np.sqrt(1.0 + 1.5 * abs(co["d"])))
    consts = Constants.default(model, r=1.0, h=h, lam=lam,
                               lam_qg=Growth("exp", max(1.0, co["k"] + co["b"] + co["a"]), 1.0),
                               rho=rho, rho_prime=Growth("constant", max(2 * co["a"], 0.1)),
                               mu=0.0, phi=phi)
    family = "superlinear_y" if key == "log_superlinear" else "monotone_y"
    spec = DriverSpec.build(model, text, constants=consts, family=family)
    xi, lo = terminal_and_obstacle(rng, model, data_scale, binding=False,
                                   obstacle_floor=-float(rng.uniform(0.5, 2.0)) * data_scale)
    return Instance(RBSDEData.build(spec, xi, lo), {"driver": text, "key": key, "depth": model.depth,
                                                   "branching": model.branching, "sigma": model.sigma,
                                                   "family": family})


def ordered_pair(rng: np.random.Generator, inst: Instance, shared_obstacle: bool = False,
                 scale: float = 1.0) -> tuple[RBSDEData, RBSDEData, dict]:
    """Return ``(data, data')`` with ``f' = f - c``, ``xi' = xi - delta``,
    ``L' = L - eta``, ``g' = g - kappa`` and all shifts non-negative.

    With a shared obstacle the terminal obstacle of both problems is lowered
    to ``min(L_T, xi - delta)`` so both stay feasible.
    """
    data = inst.data
    model = data.model
    c = scale * rng.uniform(0, 0.5) * rng.integers(2)
    delta = scale * rng.uniform(0, 0.3) * rng.integers(2)
    eta = 0.0 if shared_obstacle else scale * rng.uniform(0, 0.3) * rng.integers(2)
    kappa = rng.uniform(0, 0.2) * rng.integers(2) if model.branching == 4 else 0.0
    if shared_obstacle:
        if c == 0.0 and delta == 0.0:
            c = scale * rng.uniform(0.05, 0.5)
        lo = data.obstacle.copy()
        lo[model.leaves] = np.minimum(lo[model.leaves], data.xi - delta)
        data = replace(data, obstacle=lo)
    f = data.driver.f
    fp = Driver(model, lambda y, z, nodes: f.raw(y, z, nodes) - c,
                None if f.text is None else f"({f.text}) - {fmt(c)}")
    g = data.driver.g - kappa
    lam = max(data.driver.constants.lam, float(np.abs(g).max()))
    spec = replace(data.driver, f=fp, g=g, constants=replace(data.driver.constants, lam=lam))
    xi = data.xi - delta
    if shared_obstacle:
        lo_p = data.obstacle.copy()
    else:
        lo_p = data.obstacle - eta
        lo_p[model.leaves] = np.minimum(lo_p[model.leaves], xi)
    shifts = {"c": float(c), "delta": float(delta), "eta": float(eta), "kappa": float(kappa)}
    return data, RBSDEData(spec, xi, lo_p), shifts
