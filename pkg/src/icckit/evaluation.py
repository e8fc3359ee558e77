"""Evaluation harness: dataset generation and ingestion, the
prediction-gap-on-unimportant-features metric (PGU), and the permutation
and random-ranking baselines.

Features are always standardized against the training split, so "set to
zero" in the masking metric means "set to the training mean". PGU for a
ranking keeps the top-k features and zeroes the rest; smaller gaps mean
the ranking really did capture the features the model relies on.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import MissingColumn, NonNumeric, ParseError
from .graph import CausalGraph
from .reference import (
    reference_graph,
    reference_label,
    reference_linear_scm,
)
from .scm import (
    EmpiricalNoise,
    GaussianNoise,
    LinearMechanism,
    Scm,
    StructuralAssignment,
    UniformNoise,
    dequantize,
    sample,
)


@dataclass
class Dataset:
    """Standardized feature matrix plus target and a train/test split."""

    features: np.ndarray
    target: np.ndarray
    feature_names: tuple[str, ...]
    task: str  # "regression" | "binary"
    train_idx: np.ndarray
    test_idx: np.ndarray
    graph: CausalGraph | None = None
    feature_means: np.ndarray | None = None
    feature_scales: np.ndarray | None = None

    def __post_init__(self):
        if self.task not in ("regression", "binary"):
            raise ValueError("task must be regression or binary")
        if np.isnan(self.features).any() or np.isnan(self.target).any():
            raise ValueError("dataset contains NaN after ingestion")
        n = len(self.features)
        combined = np.concatenate([self.train_idx, self.test_idx])
        if len(np.unique(combined)) != n or len(combined) != n:
            raise ValueError("split indices must be disjoint and cover all rows")

    @property
    def p(self) -> int:
        return self.features.shape[1]

    @property
    def train_features(self) -> np.ndarray:
        return self.features[self.train_idx]

    @property
    def test_features(self) -> np.ndarray:
        return self.features[self.test_idx]

    @property
    def train_target(self) -> np.ndarray:
        return self.target[self.train_idx]

    @property
    def test_target(self) -> np.ndarray:
        return self.target[self.test_idx]


@dataclass(frozen=True)
class Ranking:
    """Feature indices by attributed importance, most important first."""

    order: tuple[int, ...]
    method: str
    scores: tuple[float, ...] | None = None

    def __post_init__(self):
        if sorted(self.order) != list(range(len(self.order))):
            raise ValueError("ranking must be a permutation of feature indices")


def _standardize(features, train_idx):
    means = features[train_idx].mean(axis=0)
    scales = features[train_idx].std(axis=0)
    scales = np.where(scales > 0, scales, 1.0)
    return (features - means) / scales, means, scales


def generate_synthetic(n_train: int = 700, n_test: int = 300, seed: int = 0) -> Dataset:
    """Draw the built-in synthetic regression task (default 700/300 split).

    Features come from the reference linear model; the target is the
    nonlinear label with scale-0.1 Gaussian noise. Features are
    standardized against the training rows.
    """
    scm = reference_linear_scm()
    n = n_train + n_test
    seeds = np.random.SeedSequence(seed).generate_state(2)
    _, x = sample(scm, n, "pseudo", seed=int(seeds[0]))
    u_y = np.random.default_rng(int(seeds[1])).standard_normal(n)
    y = reference_label(x, u_y)
    train_idx = np.arange(n_train)
    test_idx = np.arange(n_train, n)
    feats, means, scales = _standardize(x, train_idx)
    return Dataset(
        features=feats, target=y, feature_names=scm.graph.nodes,
        task="regression", train_idx=train_idx, test_idx=test_idx,
        graph=reference_graph(), feature_means=means, feature_scales=scales,
    )


def standardized_reference_scm(means, scales) -> Scm:
    """The reference linear model re-expressed in standardized coordinates.

    With z_j = (x_j - m_j) / s_j every mechanism stays linear:
    coefficients pick up s_k / s_j, the noise is scaled by 1 / s_j, and the
    intercept absorbs the means.
    """
    base = reference_linear_scm()
    means = np.asarray(means, dtype=np.float64)
    scales = np.asarray(scales, dtype=np.float64)
    assignments = []
    noise = []
    for a in base.assignments:
        j = a.node
        mech: LinearMechanism = a.mechanism
        coeffs = [
            float(c * scales[k] / scales[j]) for c, k in zip(mech.coefficients, a.parents)
        ]
        intercept = (
            mech.intercept
            + float(np.dot(mech.coefficients, means[list(a.parents)]))
            - means[j]
        ) / scales[j]
        assignments.append(
            StructuralAssignment(j, a.parents, LinearMechanism(coeffs, float(intercept)))
        )
        spec = base.noise[j]
        noise.append(GaussianNoise(spec.mean / scales[j], spec.stddev / scales[j]))
    return Scm(base.graph, tuple(assignments), tuple(noise))


# ---------------------------------------------------------------------------
# metrics


def pgu(model, test: np.ndarray, ranking: Ranking, k: int) -> float:
    """Mean |output change| when all but the top-k ranked features are zeroed."""
    test = np.asarray(test, dtype=np.float64)
    p = test.shape[1]
    if not 1 <= k <= p:
        raise ValueError(f"k must be in [1, {p}]")
    keep = set(ranking.order[:k])
    masked = test.copy()
    drop = [j for j in range(p) if j not in keep]
    if drop:
        masked[:, drop] = 0.0
    return float(np.mean(np.abs(np.asarray(model(test)) - np.asarray(model(masked)))))


def pgu_per_k(model, test: np.ndarray, ranking: Ranking) -> list[float]:
    return [pgu(model, test, ranking, k) for k in range(1, test.shape[1] + 1)]


def pgu_aggregate(model, test: np.ndarray, ranking: Ranking) -> float:
    """Sum of pgu over every k from 1 to p."""
    return float(sum(pgu_per_k(model, test, ranking)))


def _f1(y_true: np.ndarray, y_hat: np.ndarray) -> float:
    tp = float(np.sum((y_hat == 1) & (y_true == 1)))
    fp = float(np.sum((y_hat == 1) & (y_true == 0)))
    fn = float(np.sum((y_hat == 0) & (y_true == 1)))
    denom = 2 * tp + fp + fn
    return 2 * tp / denom if denom > 0 else 0.0


def _metric(kind: str, out: np.ndarray, y: np.ndarray) -> float:
    if kind == "rmse":
        return float(np.sqrt(np.mean((out - y) ** 2)))
    if kind == "f1_proxy":
        # higher-is-worse proxy so that degradation is an increase
        return 1.0 - _f1(y, (np.asarray(out) >= 0.5).astype(int))
    raise ValueError(f"unknown metric {kind!r}")


def pfi(model, data: Dataset, metric: str = "rmse", repeats: int = 10,
        seed: int = 0) -> Ranking:
    """Permutation feature importance on the test split.

    Importance of a feature is the mean increase of the loss metric when
    that column alone is shuffled, across ``repeats`` seeded shuffles.
    """
    feats = data.test_features
    y = data.test_target
    base = _metric(metric, np.asarray(model(feats)), y)
    importances = []
    for j in range(data.p):
        deg = 0.0
        for r in range(repeats):
            rng = np.random.default_rng(
                np.random.SeedSequence([seed, j, r]).generate_state(1)[0]
            )
            shuffled = feats.copy()
            shuffled[:, j] = rng.permutation(shuffled[:, j])
            deg += _metric(metric, np.asarray(model(shuffled)), y) - base
        importances.append(deg / repeats)
    order = tuple(int(i) for i in np.argsort(importances)[::-1])
    return Ranking(order=order, method="pfi", scores=tuple(importances))


def random_ranking(p: int, seed: int = 0) -> Ranking:
    order = tuple(int(i) for i in np.random.default_rng(seed).permutation(p))
    return Ranking(order=order, method=f"random-{seed}")


# ---------------------------------------------------------------------------
# CSV ingestion


def write_csv(path: str, names, features: np.ndarray, target: np.ndarray,
              target_name: str = "y") -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([*names, target_name])
        for row, t in zip(features, target):
            writer.writerow([repr(float(v)) for v in row] + [repr(float(t))])


def _read_csv(path: str) -> tuple[list[str], list[list[str]]]:
    try:
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
    except OSError as err:
        raise ParseError(f"cannot read {path}: {err}") from None
    if not rows:
        raise ParseError(f"{path} is empty")
    header, body = rows[0], rows[1:]
    width = len(header)
    for i, row in enumerate(body):
        if len(row) != width:
            raise ParseError(f"{path}: row {i + 2} has {len(row)} cells, expected {width}")
    return header, body


def _to_float(cell: str, where: str) -> float:
    try:
        return float(cell)
    except ValueError:
        raise NonNumeric(f"{where}: cannot parse {cell!r} as a number") from None


def load_csv(path: str, schema: dict, graph: CausalGraph | None = None,
             seed: int = 0, test_fraction: float = 0.3) -> Dataset:
    """Parse, dequantize, standardize, and split one CSV file.

    ``schema`` declares {"columns": {name: "real"|"integer"}, "target":
    name, "task": "regression"|"binary"}. Integer columns are spread to
    continuous values before standardization. The split is a seeded
    permutation of the rows.
    """
    header, body = _read_csv(path)
    col_types = schema["columns"]
    target_name = schema["target"]
    task = schema.get("task", "regression")
    for name in [*col_types, target_name]:
        if name not in header:
            raise MissingColumn(f"{path}: schema column {name!r} not in header {header}")
    names = tuple(n for n in header if n in col_types)
    name_pos = {n: header.index(n) for n in names}
    tpos = header.index(target_name)

    n = len(body)
    raw = np.empty((n, len(names)))
    target = np.empty(n)
    for i, row in enumerate(body):
        for c, nm in enumerate(names):
            raw[i, c] = _to_float(row[name_pos[nm]], f"{path}:{i + 2}:{nm}")
        target[i] = _to_float(row[tpos], f"{path}:{i + 2}:{target_name}")

    dq_seeds = np.random.SeedSequence([seed, 7]).generate_state(len(names))
    for c, nm in enumerate(names):
        if col_types[nm] == "integer":
            raw[:, c] = dequantize(raw[:, c], seed=int(dq_seeds[c]))

    perm = np.random.default_rng(seed).permutation(n)
    n_test = max(1, int(round(n * test_fraction)))
    test_idx = np.sort(perm[:n_test])
    train_idx = np.sort(perm[n_test:])
    feats, means, scales = _standardize(raw, train_idx)
    return Dataset(
        features=feats, target=target, feature_names=names, task=task,
        train_idx=train_idx, test_idx=test_idx, graph=graph,
        feature_means=means, feature_scales=scales,
    )


def load_split_csv(train_path: str, test_path: str, target_name: str = None,
                   task: str = "regression",
                   graph: CausalGraph | None = None) -> Dataset:
    """Assemble a Dataset from separate pre-split train/test CSVs.

    All columns are treated as real; the target defaults to the last
    column. Standardization uses the training rows.
    """
    header, train_rows = _read_csv(train_path)
    header2, test_rows = _read_csv(test_path)
    if header != header2:
        raise ParseError("train and test headers differ")
    if target_name is None:
        target_name = header[-1]
    if target_name not in header:
        raise MissingColumn(f"target column {target_name!r} not in header")
    names = tuple(h for h in header if h != target_name)
    tpos = header.index(target_name)
    fpos = [header.index(nm) for nm in names]

    def parse(rows, path):
        feats = np.empty((len(rows), len(names)))
        tgt = np.empty(len(rows))
        for i, row in enumerate(rows):
            for c, pos in enumerate(fpos):
                feats[i, c] = _to_float(row[pos], f"{path}:{i + 2}")
            tgt[i] = _to_float(row[tpos], f"{path}:{i + 2}")
        return feats, tgt

    ftr, ytr = parse(train_rows, train_path)
    fte, yte = parse(test_rows, test_path)
    features = np.vstack([ftr, fte])
    target = np.concatenate([ytr, yte])
    train_idx = np.arange(len(ftr))
    test_idx = np.arange(len(ftr), len(features))
    feats, means, scales = _standardize(features, train_idx)
    return Dataset(
        features=feats, target=target, feature_names=names, task=task,
        train_idx=train_idx, test_idx=test_idx, graph=graph,
        feature_means=means, feature_scales=scales,
    )
