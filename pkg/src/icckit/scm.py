"""Structural causal model over the features.

An Scm couples a CausalGraph with one structural assignment per node and a
per-node exogenous noise distribution. All mechanisms have the additive or
declared-inverse form ``x_j = f_j(pa_j, u_j)`` strictly increasing in u_j,
so the induced reduced-form map from noise to features is triangular and
invertible: forward sampling, vectorized push-forward, and node-by-node
abduction (recovering u from x) are all exact.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtr, ndtri

from . import sampler
from .errors import NonFiniteValue, NonIntegral, NotInvertible
from .graph import CausalGraph, build_graph

# ---------------------------------------------------------------------------
# noise distributions


class NoiseSpec:
    """Base for per-node exogenous distributions; subclasses implement quantile."""

    kind = "base"

    def quantile(self, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


class GaussianNoise(NoiseSpec):
    kind = "gaussian"

    def __init__(self, mean: float = 0.0, stddev: float = 1.0):
        if not stddev > 0:
            raise ValueError("stddev must be > 0")
        self.mean = float(mean)
        self.stddev = float(stddev)

    def quantile(self, q):
        return ndtri(q) * self.stddev + self.mean

    def to_json(self):
        return {"kind": self.kind, "mean": self.mean, "stddev": self.stddev}

    def __repr__(self):
        return f"GaussianNoise({self.mean}, {self.stddev})"


class UniformNoise(NoiseSpec):
    kind = "uniform"

    def __init__(self, lo: float = 0.0, hi: float = 1.0):
        if not hi > lo:
            raise ValueError("hi must be > lo")
        self.lo = float(lo)
        self.hi = float(hi)

    def quantile(self, q):
        return self.lo + np.asarray(q) * (self.hi - self.lo)

    def to_json(self):
        return {"kind": self.kind, "lo": self.lo, "hi": self.hi}

    def __repr__(self):
        return f"UniformNoise({self.lo}, {self.hi})"


class EmpiricalNoise(NoiseSpec):
    """Inverse-CDF sampling over a sorted sample table with linear interpolation."""

    kind = "empirical"

    def __init__(self, table):
        table = np.asarray(table, dtype=np.float64).ravel()
        if table.size == 0:
            raise ValueError("empirical table must be non-empty")
        if not np.isfinite(table).all():
            raise ValueError("empirical table must be finite")
        self.table = np.sort(table)

    def quantile(self, q):
        if self.table.size == 1:
            return np.full_like(np.asarray(q, dtype=np.float64), self.table[0])
        grid = np.linspace(0.0, 1.0, self.table.size)
        return np.interp(q, grid, self.table)

    def to_json(self):
        return {"kind": self.kind, "table": self.table.tolist()}

    def __repr__(self):
        return f"EmpiricalNoise(<{self.table.size} samples>)"


def noise_from_json(obj: dict) -> NoiseSpec:
    kind = obj["kind"]
    if kind == "gaussian":
        return GaussianNoise(obj["mean"], obj["stddev"])
    if kind == "uniform":
        return UniformNoise(obj["lo"], obj["hi"])
    if kind == "empirical":
        if "csv" in obj:
            return EmpiricalNoise(np.loadtxt(obj["csv"], ndmin=1))
        return EmpiricalNoise(obj["table"])
    raise ValueError(f"unknown noise kind {kind!r}")


# ---------------------------------------------------------------------------
# structural mechanisms

# Whitelisted names usable inside expression formulas, besides the parent
# columns and the noise/feature variable.
_EXPR_NAMES = {
    "sin": np.sin, "cos": np.cos, "tan": np.tan, "tanh": np.tanh,
    "exp": np.exp, "log": np.log, "sqrt": np.sqrt, "cbrt": np.cbrt,
    "abs": np.abs, "sign": np.sign, "minimum": np.minimum,
    "maximum": np.maximum, "ndtr": ndtr, "ndtri": ndtri,
    "pi": np.pi, "e": np.e,
}


class Mechanism:
    """Base for structural assignments x_j = f(pa_j, u_j)."""

    kind = "base"

    def evaluate(self, pa: np.ndarray, u: np.ndarray, names: tuple[str, ...]) -> np.ndarray:
        raise NotImplementedError

    def invert(self, pa: np.ndarray, x: np.ndarray, names: tuple[str, ...]) -> np.ndarray:
        raise NotImplementedError

    def to_json(self) -> dict:
        raise NotImplementedError


class LinearMechanism(Mechanism):
    """x = coefficients . parents + intercept + u."""

    kind = "linear"

    def __init__(self, coefficients=(), intercept: float = 0.0):
        self.coefficients = np.asarray(coefficients, dtype=np.float64).ravel()
        self.intercept = float(intercept)

    def _base(self, pa):
        if self.coefficients.size == 0:
            n = pa.shape[0] if pa.ndim == 2 else 1
            return np.full(n, self.intercept)
        return pa @ self.coefficients + self.intercept

    def evaluate(self, pa, u, names):
        return self._base(pa) + u

    def invert(self, pa, x, names):
        return x - self._base(pa)

    def to_json(self):
        return {"kind": self.kind, "coefficients": self.coefficients.tolist(),
                "intercept": self.intercept}


class AdditiveMechanism(Mechanism):
    """x = regressor(parents) + u, for a fitted regressor handle."""

    kind = "additive"

    def __init__(self, regressor):
        self.regressor = regressor

    def evaluate(self, pa, u, names):
        return self.regressor.predict(pa) + u

    def invert(self, pa, x, names):
        return x - self.regressor.predict(pa)

    def to_json(self):
        return {"kind": self.kind, "regressor": self.regressor.to_json()}


class ConstantMechanism(Mechanism):
    """x = value regardless of parents and noise; produced by intervene()."""

    kind = "constant"

    def __init__(self, value: float):
        self.value = float(value)

    def evaluate(self, pa, u, names):
        return np.full_like(np.asarray(u, dtype=np.float64), self.value)

    def invert(self, pa, x, names):
        raise NotInvertible("constant mechanism has no noise dependence")

    def to_json(self):
        return {"kind": self.kind, "value": self.value}


class ExpressionMechanism(Mechanism):
    """Closed-form mechanism given as formula strings.

    ``formula`` is evaluated with the parent columns bound by name plus the
    noise column as ``u``; the optional ``inverse`` recovers u and sees the
    parents plus the node value as ``x``. The formula must be strictly
    increasing in u for abduction to be meaningful; this is the caller's
    responsibility and is not checked symbolically.
    """

    kind = "expression"

    def __init__(self, formula: str, inverse: str | None = None):
        self.formula = formula
        self.inverse = inverse

    @staticmethod
    def _eval(expr, env):
        out = eval(expr, {"__builtins__": {}}, {**_EXPR_NAMES, **env})  # noqa: S307
        return np.asarray(out, dtype=np.float64)

    def evaluate(self, pa, u, names):
        env = {nm: pa[:, i] for i, nm in enumerate(names)}
        env["u"] = u
        return np.broadcast_to(self._eval(self.formula, env), np.shape(u)).copy()

    def invert(self, pa, x, names):
        if self.inverse is None:
            raise NotInvertible(f"expression mechanism {self.formula!r} declares no inverse")
        env = {nm: pa[:, i] for i, nm in enumerate(names)}
        env["x"] = x
        return np.broadcast_to(self._eval(self.inverse, env), np.shape(x)).copy()

    def to_json(self):
        return {"kind": self.kind, "formula": self.formula, "inverse": self.inverse}


def mechanism_from_json(obj: dict) -> Mechanism:
    kind = obj["kind"]
    if kind == "linear":
        return LinearMechanism(obj["coefficients"], obj["intercept"])
    if kind == "constant":
        return ConstantMechanism(obj["value"])
    if kind == "expression":
        return ExpressionMechanism(obj["formula"], obj.get("inverse"))
    if kind == "additive":
        from .scm_learn import regressor_from_json  # deferred: avoids import cycle

        return AdditiveMechanism(regressor_from_json(obj["regressor"]))
    raise ValueError(f"unknown mechanism kind {kind!r}")


@dataclass(frozen=True)
class StructuralAssignment:
    node: int
    parents: tuple[int, ...]
    mechanism: Mechanism


# ---------------------------------------------------------------------------
# the model itself


@dataclass(frozen=True)
class Scm:
    """Immutable tuple of (graph, assignments, noise); safe to share across workers."""

    graph: CausalGraph
    assignments: tuple[StructuralAssignment, ...]
    noise: tuple[NoiseSpec, ...]

    def __post_init__(self):
        p = self.graph.p
        if len(self.assignments) != p or len(self.noise) != p:
            raise ValueError("need exactly one assignment and one noise spec per node")
        by_node = {a.node: a for a in self.assignments}
        if sorted(by_node) != list(range(p)):
            raise ValueError("assignments must cover each node exactly once")
        object.__setattr__(
            self, "assignments", tuple(by_node[j] for j in range(p))
        )
        for j in range(p):
            declared = tuple(sorted(self.assignments[j].parents))
            if declared != self.graph.parents(j):
                raise ValueError(
                    f"assignment parents {declared} for node {self.graph.nodes[j]!r} "
                    f"differ from graph parents {self.graph.parents(j)}"
                )

    @property
    def p(self) -> int:
        return self.graph.p

    def to_json(self) -> dict:
        return {
            "graph": self.graph.to_json(),
            "noise": [n.to_json() for n in self.noise],
            "assignments": [
                {
                    "node": self.graph.nodes[a.node],
                    "parents": [self.graph.nodes[k] for k in a.parents],
                    "mechanism": a.mechanism.to_json(),
                }
                for a in self.assignments
            ],
        }

    @staticmethod
    def from_json(obj: dict) -> "Scm":
        graph = CausalGraph.from_json(obj["graph"])
        noise = tuple(noise_from_json(n) for n in obj["noise"])
        assignments = []
        for a in obj["assignments"]:
            j = graph.index(a["node"])
            parents = tuple(graph.index(nm) for nm in a["parents"])
            assignments.append(
                StructuralAssignment(j, parents, mechanism_from_json(a["mechanism"]))
            )
        return Scm(graph, tuple(assignments), noise)


def _as_matrix(arr) -> tuple[np.ndarray, bool]:
    arr = np.asarray(arr, dtype=np.float64)
    if arr.ndim == 1:
        return arr[None, :], True
    return arr, False


def push_forward(scm: Scm, u) -> np.ndarray:
    """Evaluate the reduced-form map row-wise: feature matrix from noise matrix."""
    u, squeeze = _as_matrix(u)
    if u.shape[1] != scm.p:
        raise ValueError(f"noise has {u.shape[1]} columns, expected {scm.p}")
    x = np.zeros_like(u)
    for j in scm.graph.topological_order():
        a = scm.assignments[j]
        names = tuple(scm.graph.nodes[k] for k in a.parents)
        pa = x[:, list(a.parents)]
        x[:, j] = a.mechanism.evaluate(pa, u[:, j], names)
        if not np.isfinite(x[:, j]).all():
            raise NonFiniteValue(f"mechanism for node {scm.graph.nodes[j]!r} "
                                 "produced a non-finite value")
    return x[0] if squeeze else x


def abduct(scm: Scm, x) -> np.ndarray:
    """Recover the noise vector(s) u with push_forward(scm, u) == x."""
    x, squeeze = _as_matrix(x)
    if x.shape[1] != scm.p:
        raise ValueError(f"features have {x.shape[1]} columns, expected {scm.p}")
    u = np.zeros_like(x)
    for j in scm.graph.topological_order():
        a = scm.assignments[j]
        names = tuple(scm.graph.nodes[k] for k in a.parents)
        pa = x[:, list(a.parents)]
        u[:, j] = a.mechanism.invert(pa, x[:, j], names)
    return u[0] if squeeze else u


def sample(scm: Scm, n: int, sampler_kind: str = "sobol", seed: int = 0,
           scramble: str = "nested") -> tuple[np.ndarray, np.ndarray]:
    """Draw (noise, features), both (n, p), deterministic given seed.

    ``sampler_kind`` selects the low-discrepancy ("sobol") or pseudorandom
    ("pseudo") source; both are pushed through the same inverse CDFs.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    pts = sampler.unit_points(scm.p, n, engine=sampler_kind, scramble=scramble, seed=seed)
    u = sampler.to_noise(pts, scm.noise)
    return u, push_forward(scm, u)


def intervene(scm: Scm, assignments: dict) -> Scm:
    """Return the mutilated model with targeted nodes pinned to constants.

    Keys may be node names or indices. Edges into each target are removed
    and its mechanism becomes the constant; everything else is shared.
    """
    targets = {}
    for key, val in assignments.items():
        j = key if isinstance(key, int) else scm.graph.index(key)
        targets[j] = float(val)
    new_edges = [e for e in scm.graph.edges if e[1] not in targets]
    graph = build_graph(scm.graph.nodes, new_edges)
    new_assign = []
    for a in scm.assignments:
        if a.node in targets:
            new_assign.append(
                StructuralAssignment(a.node, (), ConstantMechanism(targets[a.node]))
            )
        else:
            new_assign.append(a)
    return Scm(graph, tuple(new_assign), scm.noise)


def dequantize(column, seed: int = 0) -> np.ndarray:
    """Spread an integer-valued column to continuous values in [k, k+1).

    Adds independent uniform noise so the original value is recoverable as
    the floor of the output.
    """
    col = np.asarray(column, dtype=np.float64).ravel()
    if not np.all(col == np.floor(col)):
        raise NonIntegral("dequantize requires an integer-valued column")
    eps = np.random.default_rng(seed).random(col.size)
    return col + eps


def load_scm(path: str) -> Scm:
    with open(path) as fh:
        return Scm.from_json(json.load(fh))


def save_scm(scm: Scm, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(scm.to_json(), fh, indent=1)
        fh.write("\n")
