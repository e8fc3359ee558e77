"""Paired-block estimation of the normalized variance of a conditional
expectation, phi(I) = Var(E(Yhat | U_I)) / Var(Yhat).

Two B-row noise blocks u_M, u_N are drawn (disjoint coordinate halves of a
single 2p-dimensional low-discrepancy stream, or pseudorandom uniforms);
the hybrid block u_Q copies u_N on the conditioned coordinates I and u_M
elsewhere. With y_* the predictor outputs on the pushed-forward blocks,
the Jansen form gives

    psi_hat = V - (1/2B) sum (y_N - y_Q)^2,      phi_hat = psi_hat / V,

where V is the pooled unbiased variance of {y_M, y_N}. The two calibration
identities hold by construction: I = [p] makes y_Q identical to y_N so
phi_hat = 1 exactly, and I = empty makes u_Q a copy of u_M so psi_hat is a
mean-zero fluctuation.

The data-backed variant resamples two disjoint row blocks from a dataset
instead of sampling a model. Its hybrid block mixes marginals, so it
matches the conditional-expectation variance exactly only for mutually
independent features; contexts are therefore gated to be ancestor-closed
under a declared graph (the setting where noise- and feature-conditioning
coincide) or the caller must assert independence outright. On dependent
features even ancestor-closed contexts carry the product-measure caveat;
fitting a model and using the model-backed path avoids it.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContextNotAncestorClosed, DegenerateVariance, InsufficientRows
from .graph import CausalGraph
from .sampler import QmcConfig, sobol_points, to_noise
from .scm import Scm, push_forward

DEGENERATE_VARIANCE = 1e-12


@dataclass(frozen=True)
class PhiEstimate:
    """One phi estimate with its sampling metadata."""

    value: float
    psi: float
    variance: float
    batch: int
    context: frozenset[int]
    backend: str
    seed: int


def _jansen(y_m: np.ndarray, y_n: np.ndarray, b: int):
    ybar = (y_m.sum() + y_n.sum()) / (2 * b)
    v = (((y_m - ybar) ** 2).sum() + ((y_n - ybar) ** 2).sum()) / (2 * b - 1)
    if v < DEGENERATE_VARIANCE:
        raise DegenerateVariance(f"pooled output variance {v:.3e} is numerically zero")
    return ybar, v


def _validate_contexts(contexts, p):
    out = []
    for ctx in contexts:
        s = frozenset(int(j) for j in ctx)
        if s and (min(s) < 0 or max(s) >= p):
            raise ValueError(f"context {sorted(s)} out of range for p={p}")
        out.append(s)
    return out


def phi_batch(
    backend,
    model,
    contexts,
    B: int,
    cfg: QmcConfig | None = None,
    *,
    engine: str = "sobol",
    seed: int = 0,
    graph: CausalGraph | None = None,
    independent: bool = False,
) -> list[PhiEstimate]:
    """Estimate phi for many contexts from one shared pair of blocks.

    Sharing (u_M, u_N) across contexts acts as common random numbers: the
    estimates for nested contexts telescope exactly, which the aggregation
    layer relies on. Results for a single context are identical to the
    corresponding phi_scm / phi_data call with the same seed.

    ``backend`` is either an Scm (model-backed sampling; ``cfg`` defaults to
    a nested-scrambled stream of dimension 2p seeded by ``seed``) or an
    (n, p) data matrix (row-resampling; ``graph``/``independent`` gate the
    context validity check).
    """
    if B < 2:
        raise ValueError("B must be >= 2")
    if isinstance(backend, Scm):
        p = backend.p
        contexts = _validate_contexts(contexts, p)
        if cfg is None:
            cfg = QmcConfig(dimension=2 * p, scramble="nested", seed=seed)
        if cfg.dimension != 2 * p:
            raise ValueError(f"cfg.dimension must be 2p = {2 * p}, got {cfg.dimension}")
        if engine == "sobol":
            pts = sobol_points(cfg, B)
        elif engine == "pseudo":
            pts = np.random.default_rng(cfg.seed).random((B, cfg.dimension))
        else:
            raise ValueError(f"unknown engine {engine!r}")
        u_m = to_noise(pts[:, :p], backend.noise)
        u_n = to_noise(pts[:, p:], backend.noise)
        x_m = push_forward(backend, u_m)
        x_n = push_forward(backend, u_n)
        used_seed = cfg.seed
        tag = "scm"

        def hybrid(idx):
            u_q = u_m.copy()
            if idx:
                u_q[:, idx] = u_n[:, idx]
            return push_forward(backend, u_q)

    else:
        data = np.asarray(backend, dtype=np.float64)
        if data.ndim != 2:
            raise ValueError("data backend must be an (n, p) matrix")
        p = data.shape[1]
        contexts = _validate_contexts(contexts, p)
        if 2 * B > data.shape[0]:
            raise InsufficientRows(
                f"need 2B = {2 * B} rows for disjoint blocks, have {data.shape[0]}"
            )
        full = frozenset(range(p))
        if not independent:
            for s in contexts:
                if s == full or not s:
                    continue
                if graph is None:
                    raise ContextNotAncestorClosed(
                        f"context {sorted(s)}: pass the causal graph or set "
                        "independent=True"
                    )
                if not graph.is_ancestor_closed(s):
                    raise ContextNotAncestorClosed(
                        f"context {sorted(s)} is not ancestor-closed"
                    )
        rows = np.random.default_rng(seed).permutation(data.shape[0])
        x_m = data[rows[:B]]
        x_n = data[rows[B : 2 * B]]
        used_seed = seed
        tag = "data"

        def hybrid(idx):
            x_q = x_m.copy()
            if idx:
                x_q[:, idx] = x_n[:, idx]
            return x_q

    y_m = np.asarray(model(x_m), dtype=np.float64)
    y_n = np.asarray(model(x_n), dtype=np.float64)
    _, v = _jansen(y_m, y_n, B)

    out = []
    for s in contexts:
        idx = sorted(s)
        y_q = np.asarray(model(hybrid(idx)), dtype=np.float64)
        psi = v - ((y_n - y_q) ** 2).sum() / (2 * B)
        out.append(
            PhiEstimate(
                value=psi / v, psi=float(psi), variance=float(v), batch=B,
                context=s, backend=tag, seed=int(used_seed),
            )
        )
    return out


def phi_scm(scm: Scm, model, I, B: int, cfg: QmcConfig | None = None, *,
            engine: str = "sobol", seed: int = 0) -> PhiEstimate:
    """phi for one context against the model-backed sampler."""
    return phi_batch(scm, model, [I], B, cfg, engine=engine, seed=seed)[0]


def phi_data(data, model, I, B: int, seed: int = 0, *,
             graph: CausalGraph | None = None, independent: bool = False) -> PhiEstimate:
    """phi for one context by resampling dataset rows (no model of the features).

    Requires I to be ancestor-closed under ``graph``, unless ``independent``
    declares the features mutually independent.
    """
    return phi_batch(data, model, [I], B, seed=seed, graph=graph,
                     independent=independent)[0]
