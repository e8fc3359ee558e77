"""Aggregation of per-context contributions into feature attributions.

A feature's contribution relative to a context I is the phi increment
phi(I + j) - phi(I). Two schemes remove the context dependence:

* topological: average the increment over every topological ordering of
  the causal graph, conditioning each feature on its predecessors;
* shapley: the classical symmetric average over all subsets (exact, all
  2^p contexts estimated from one shared block pair) or over sampled
  permutations when p is large.

Within one ordering (or one full subset lattice) every context shares the
same sampled blocks, so the per-feature increments telescope to
phi(full) - phi(empty) at floating-point exactness; independent blocks
across orderings keep the averaged estimates honest.
"""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from math import comb

import numpy as np

from .errors import AllZero, TooManyOrderings
from .estimator import phi_batch
from .graph import enumerate_topological_orderings, sample_topological_orderings
from .sampler import QmcConfig
from .scm import Scm

DEFAULT_ORDERING_BUDGET = 10_000
DEFAULT_PERMUTATION_BUDGET = 200
EXACT_SHAPLEY_MAX_P = 20


@dataclass(frozen=True)
class ContextContribution:
    """phi(I + j) - phi(I) for one feature and one context, both parts kept."""

    feature: int
    context: frozenset[int]
    phi_with: float
    phi_without: float

    @property
    def value(self) -> float:
        return self.phi_with - self.phi_without


@dataclass
class AttributionReport:
    method: str
    feature_names: tuple[str, ...]
    raw: tuple[float, ...]
    normalized: tuple[float, ...] | None = None
    clamped: bool = False
    units_evaluated: int = 0
    exact: bool = True
    batch: int = 0
    seed: int = 0
    phi_full: float = float("nan")
    phi_empty: float = float("nan")
    residual: float | None = None
    backend: str = "scm"
    diagnostics: dict = field(default_factory=dict)

    @property
    def is_normalized(self) -> bool:
        return self.normalized is not None

    def ranking(self) -> tuple[int, ...]:
        """Feature indices sorted by attributed importance, descending."""
        vals = self.normalized if self.normalized is not None else self.raw
        return tuple(int(i) for i in np.argsort(vals)[::-1])

    def to_json(self) -> dict:
        feats = []
        for i, name in enumerate(self.feature_names):
            feats.append(
                {
                    "name": name,
                    "icc_raw": self.raw[i],
                    "icc_normalized": None if self.normalized is None else self.normalized[i],
                }
            )
        diag = {
            "B": self.batch,
            "seed": self.seed,
            "units_evaluated": self.units_evaluated,
            "exact": self.exact,
            "clamped": self.clamped,
            "phi_full": self.phi_full,
            "phi_empty": self.phi_empty,
            "residual": self.residual,
            "backend": self.backend,
            **self.diagnostics,
        }
        return {"method": self.method, "features": feats, "diagnostics": diag}

    def save_json(self, path: str) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(), fh, indent=1)
            fh.write("\n")

    def save_csv(self, path: str) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["feature", "icc_raw", "icc_normalized"])
            for i, name in enumerate(self.feature_names):
                norm = "" if self.normalized is None else repr(self.normalized[i])
                writer.writerow([name, repr(self.raw[i]), norm])


def _item_seed(seed: int, item: int) -> int:
    # Seeds keyed by item index, never by scheduling order. Key 0 is reserved
    # for drawing the work items themselves; items start at key 1.
    return int(np.random.SeedSequence([seed & 0xFFFFFFFF, item]).generate_state(1)[0])


def icc_context(scm: Scm, model, feature: int, context, B: int, *,
                scramble: str = "nested", engine: str = "sobol",
                seed: int = 0) -> ContextContribution:
    """Single-context contribution of one feature, both phi estimates shared-block."""
    ctx = frozenset(context)
    if feature in ctx:
        raise ValueError("feature must not already be in the context")
    cfg = QmcConfig(2 * scm.p, scramble, seed)
    lo, hi = phi_batch(scm, model, [ctx, ctx | {feature}], B, cfg, engine=engine)
    return ContextContribution(feature, ctx, phi_with=hi.value, phi_without=lo.value)


def _prefix_chain(perm) -> list[frozenset[int]]:
    chain = [frozenset()]
    for j in perm:
        chain.append(chain[-1] | {j})
    return chain


def _aggregate_orderings(scm, model, orderings, B, scramble, engine, seed):
    """Average per-feature increments over orderings; one block pair each."""
    p = scm.p
    totals = np.zeros(p)
    phi_full = 0.0
    phi_empty = 0.0
    for m, ordering in enumerate(orderings):
        cfg = QmcConfig(2 * p, scramble, _item_seed(seed, m + 1))
        chain = _prefix_chain(ordering)
        phis = phi_batch(scm, model, chain, B, cfg, engine=engine)
        vals = [est.value for est in phis]
        for pos, j in enumerate(ordering):
            totals[j] += vals[pos + 1] - vals[pos]
        phi_full += vals[-1]
        phi_empty += vals[0]
    n = len(orderings)
    return totals / n, phi_full / n, phi_empty / n


def icc_topological(scm: Scm, model, B: int = 4096, *,
                    ordering_budget: int = DEFAULT_ORDERING_BUDGET,
                    scramble: str = "nested", engine: str = "sobol",
                    seed: int = 0) -> AttributionReport:
    """Attributions averaged over the topological orderings of the graph.

    All orderings are enumerated when there are at most ``ordering_budget``
    of them; otherwise that many are drawn by sequential uniform
    tie-breaking and the report is marked approximate.
    """
    try:
        orderings = enumerate_topological_orderings(scm.graph, cap=ordering_budget)
        exact = True
    except TooManyOrderings:
        orderings = sample_topological_orderings(scm.graph, ordering_budget,
                                                 seed=_item_seed(seed, 0))
        exact = False
    raw, phi_full, phi_empty = _aggregate_orderings(
        scm, model, orderings, B, scramble, engine, seed
    )
    return AttributionReport(
        method="topological",
        feature_names=scm.graph.nodes,
        raw=tuple(float(v) for v in raw),
        units_evaluated=len(orderings),
        exact=exact,
        batch=B,
        seed=seed,
        phi_full=float(phi_full),
        phi_empty=float(phi_empty),
    )


def _shapley_weights(p: int) -> dict[int, float]:
    return {size: 1.0 / (p * comb(p - 1, size)) for size in range(p)}


def icc_shapley(scm: Scm, model, B: int = 4096, *,
                subset_budget: int = DEFAULT_PERMUTATION_BUDGET,
                exact: bool | None = None, scramble: str = "nested",
                engine: str = "sobol", seed: int = 0) -> AttributionReport:
    """Shapley-symmetrized attributions.

    Exact mode (default up to p = 20) evaluates phi on every subset of
    features once, from a single shared block pair, and applies the
    combinatorial weights; beyond that ``subset_budget`` random
    permutations are averaged, which is the same value in expectation.
    """
    p = scm.p
    if exact is None:
        exact = p <= EXACT_SHAPLEY_MAX_P
    if exact:
        subsets = [frozenset()]
        for j in range(p):
            subsets += [s | {j} for s in subsets]
        cfg = QmcConfig(2 * p, scramble, _item_seed(seed, 1))
        phis = {est.context: est.value
                for est in phi_batch(scm, model, subsets, B, cfg, engine=engine)}
        weights = _shapley_weights(p)
        raw = np.zeros(p)
        for j in range(p):
            for t in subsets:
                if j in t:
                    continue
                raw[j] += weights[len(t)] * (phis[t | {j}] - phis[t])
        units = len(subsets)
        phi_full = phis[frozenset(range(p))]
        phi_empty = phis[frozenset()]
    else:
        rng = np.random.default_rng(_item_seed(seed, 0))
        perms = [tuple(rng.permutation(p)) for _ in range(subset_budget)]
        raw, phi_full, phi_empty = _aggregate_orderings(
            scm, model, perms, B, scramble, engine, seed
        )
        units = subset_budget
    return AttributionReport(
        method="shapley",
        feature_names=scm.graph.nodes,
        raw=tuple(float(v) for v in raw),
        units_evaluated=units,
        exact=exact,
        batch=B,
        seed=seed,
        phi_full=float(phi_full),
        phi_empty=float(phi_empty),
    )


def normalize_and_clamp(report: AttributionReport, clamp: bool = True) -> AttributionReport:
    """Attach normalized values summing to one; optionally clamp negatives.

    The recorded residual is the pre-clamp gap |sum(raw) - 1|, i.e. how far
    the raw attributions already were from a full decomposition of the
    (normalized) output variance.
    """
    raw = np.asarray(report.raw, dtype=np.float64)
    residual = float(abs(raw.sum() - 1.0))
    vals = np.maximum(raw, 0.0) if clamp else raw
    total = vals.sum()
    if (clamp and total <= 0.0) or (not clamp and abs(total) < 1e-15):
        raise AllZero("all attributions are zero; cannot normalize")
    return replace(
        report,
        normalized=tuple(float(v) for v in vals / total),
        clamped=clamp,
        residual=residual,
    )


def efficiency_residual(report: AttributionReport) -> float:
    """|sum of raw attributions - (phi(full) - phi(empty))| as stored in the report."""
    return float(abs(sum(report.raw) - (report.phi_full - report.phi_empty)))
