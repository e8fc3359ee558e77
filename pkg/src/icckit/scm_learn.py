"""Learn an additive-noise model from observational data given the graph.

Each node is regressed on its parents (ridge on degree-2 polynomial
features by default, a small neural net behind a flag) and the centered
residuals become that node's empirical noise distribution. The additive
form keeps every fitted mechanism strictly increasing in its noise, so
the resulting model supports the full sample/abduct/estimate pipeline.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .errors import IccKitError
from .graph import CausalGraph
from .predictor import Mlp, TrainConfig, train, weights_from_json, weights_to_json
from .scm import (
    AdditiveMechanism,
    EmpiricalNoise,
    LinearMechanism,
    Scm,
    StructuralAssignment,
)

MIN_ROWS = 50


class SingularFit(IccKitError):
    """A parent column is constant; the regression cannot be standardized."""


class TooFewRows(IccKitError):
    """Not enough rows to fit the model."""


class PolyRidgeRegressor:
    """Closed-form ridge on degree-2 polynomial features of standardized parents."""

    kind = "poly_ridge"

    def __init__(self, means, scales, powers, coefs):
        self.means = np.asarray(means, dtype=np.float64)
        self.scales = np.asarray(scales, dtype=np.float64)
        self.powers = np.asarray(powers, dtype=np.int64)  # (n_terms, k) exponents
        self.coefs = np.asarray(coefs, dtype=np.float64)

    @staticmethod
    def _power_matrix(k: int) -> np.ndarray:
        rows = [[0] * k]
        for i in range(k):
            e = [0] * k
            e[i] = 1
            rows.append(e)
        for i in range(k):
            for j in range(i, k):
                e = [0] * k
                e[i] += 1
                e[j] += 1
                rows.append(e)
        return np.asarray(rows, dtype=np.int64)

    @classmethod
    def fit(cls, pa: np.ndarray, y: np.ndarray, alpha: float = 1e-3) -> "PolyRidgeRegressor":
        k = pa.shape[1]
        means = pa.mean(axis=0)
        scales = pa.std(axis=0)
        if np.any(scales <= 0):
            bad = int(np.argmin(scales))
            raise SingularFit(f"parent column {bad} is constant")
        z = (pa - means) / scales
        powers = cls._power_matrix(k)
        design = np.column_stack([np.prod(z**e, axis=1) for e in powers])
        gram = design.T @ design
        penalty = alpha * np.eye(gram.shape[0])
        penalty[0, 0] = 0.0  # leave the intercept unpenalized
        coefs = np.linalg.solve(gram + penalty, design.T @ y)
        return cls(means, scales, powers, coefs)

    def predict(self, pa: np.ndarray) -> np.ndarray:
        z = (np.asarray(pa, dtype=np.float64) - self.means) / self.scales
        design = np.column_stack([np.prod(z**e, axis=1) for e in self.powers])
        return design @ self.coefs

    def shift_intercept(self, delta: float) -> None:
        self.coefs[0] += delta

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "means": self.means.tolist(),
            "scales": self.scales.tolist(),
            "powers": self.powers.tolist(),
            "coefs": self.coefs.tolist(),
        }

    @classmethod
    def from_json(cls, obj: dict) -> "PolyRidgeRegressor":
        return cls(obj["means"], obj["scales"], obj["powers"], obj["coefs"])


class MlpRegressor:
    """Small neural-net regressor behind the same predict/to_json surface."""

    kind = "mlp"

    def __init__(self, net: Mlp, offset: float = 0.0):
        self.net = net
        self.offset = offset

    @classmethod
    def fit(cls, pa: np.ndarray, y: np.ndarray, seed: int = 0) -> "MlpRegressor":
        cfg = TrainConfig(epochs=60, learning_rate=1e-3, hidden=(32, 32), seed=seed)
        return cls(train((pa, y), cfg))

    def predict(self, pa: np.ndarray) -> np.ndarray:
        return self.net.forward(np.asarray(pa, dtype=np.float64)) + self.offset

    def shift_intercept(self, delta: float) -> None:
        self.offset += delta

    def to_json(self) -> dict:
        return {"kind": self.kind, "offset": self.offset,
                "weights": weights_to_json(self.net)}

    @classmethod
    def from_json(cls, obj: dict) -> "MlpRegressor":
        return cls(weights_from_json(obj["weights"]), obj.get("offset", 0.0))


_REGRESSORS = {"poly_ridge": PolyRidgeRegressor, "mlp": MlpRegressor}


def regressor_from_json(obj: dict):
    kind = obj["kind"]
    if kind not in _REGRESSORS:
        raise ValueError(f"unknown regressor kind {kind!r}")
    return _REGRESSORS[kind].from_json(obj)


@dataclass
class AnmFit:
    """Fitted model plus per-node regressors, residuals, and diagnostics."""

    scm: Scm
    regressors: dict  # node index -> regressor or None for roots
    residuals: dict  # node index -> centered residual sample
    r_squared: dict  # node index -> training R^2 (0 for roots)
    residual_parent_corr: dict  # node index -> max |corr(residual, parent)|


def fit_anm(data: np.ndarray, graph: CausalGraph, regressor: str = "poly_ridge",
            seed: int = 0) -> AnmFit:
    """Fit one additive mechanism per node, in topological order.

    Root nodes get their centered marginal as empirical noise; child nodes
    get a fitted regressor plus centered empirical residuals (the residual
    mean is folded into the regressor so noises are exactly mean zero).
    The returned fit carries a complete model under ``.scm``.
    """
    data = np.asarray(data, dtype=np.float64)
    if data.ndim != 2 or data.shape[1] != graph.p:
        raise ValueError(f"data must be (n, {graph.p})")
    if data.shape[0] < MIN_ROWS:
        raise TooFewRows(f"need at least {MIN_ROWS} rows, got {data.shape[0]}")
    if regressor not in _REGRESSORS:
        raise ValueError(f"unknown regressor kind {regressor!r}")

    assignments = []
    noise = [None] * graph.p
    regs: dict = {}
    residuals: dict = {}
    r2: dict = {}
    corr: dict = {}
    for j in graph.topological_order():
        parents = graph.parents(j)
        col = data[:, j]
        if not parents:
            center = float(col.mean())
            resid = col - center
            assignments.append(StructuralAssignment(j, (), LinearMechanism((), center)))
            regs[j] = None
            r2[j] = 0.0
            corr[j] = 0.0
        else:
            pa = data[:, list(parents)]
            if regressor == "poly_ridge":
                reg = PolyRidgeRegressor.fit(pa, col)
            else:
                reg = MlpRegressor.fit(pa, col, seed=seed + j)
            resid = col - reg.predict(pa)
            reg.shift_intercept(float(resid.mean()))
            resid = col - reg.predict(pa)
            assignments.append(StructuralAssignment(j, tuple(parents), AdditiveMechanism(reg)))
            regs[j] = reg
            denom = col.var()
            r2[j] = float(1.0 - resid.var() / denom) if denom > 0 else 0.0
            corr[j] = _max_abs_corr(resid, pa)
        residuals[j] = resid
        noise[j] = EmpiricalNoise(resid)
    assignments.sort(key=lambda a: a.node)
    fitted = Scm(graph, tuple(assignments), tuple(noise))
    return AnmFit(fitted, regs, residuals, r2, corr)


def _max_abs_corr(resid: np.ndarray, pa: np.ndarray) -> float:
    out = 0.0
    for k in range(pa.shape[1]):
        col = pa[:, k]
        if resid.std() == 0 or col.std() == 0:
            continue
        out = max(out, abs(float(np.corrcoef(resid, col)[0, 1])))
    return out


def fit_quality(fit: AnmFit, holdout: np.ndarray, flag_threshold: float = 0.1) -> dict:
    """Hold-out diagnostics per node.

    Reports hold-out R^2, the largest |correlation| between each node's
    hold-out residual and its parents (dependence signals a mis-specified
    graph or mechanism class), and a two-sample KS distance between the
    model's resampled marginals and the hold-out columns.
    """
    holdout = np.asarray(holdout, dtype=np.float64)
    scm = fit.scm
    names = scm.graph.nodes
    from .scm import sample as scm_sample

    _, resampled = scm_sample(scm, max(len(holdout), 512), "pseudo", seed=0)
    per_node = {}
    flagged = []
    for j in range(scm.graph.p):
        parents = scm.graph.parents(j)
        col = holdout[:, j]
        if parents:
            reg = fit.regressors[j]
            resid = col - reg.predict(holdout[:, list(parents)])
            denom = col.var()
            r2 = float(1.0 - resid.var() / denom) if denom > 0 else 0.0
            rc = _max_abs_corr(resid, holdout[:, list(parents)])
        else:
            resid = col - col.mean()
            r2 = 0.0
            rc = 0.0
        ks = float(stats.ks_2samp(resampled[:, j], col).statistic)
        if rc > flag_threshold:
            flagged.append(names[j])
        per_node[names[j]] = {
            "r_squared": r2,
            "residual_parent_corr": rc,
            "marginal_ks": ks,
        }
    return {"per_node": per_node, "flagged": flagged}
