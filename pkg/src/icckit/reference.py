"""Built-in reference constructions used by tests, the verify command, and
the synthetic data generator.

The linear three-node model (W -> Z, W -> X, Z -> X with unit Gaussian
noises) is analytically tractable: its reduced form is linear in the noise
vector, so the normalized variance of any conditional expectation has a
closed form. That makes it the standard oracle for the estimator and the
aggregation schemes.
"""
from __future__ import annotations

import numpy as np

from .graph import CausalGraph, build_graph
from .scm import (
    GaussianNoise,
    LinearMechanism,
    NoiseSpec,
    Scm,
    StructuralAssignment,
    UniformNoise,
)

LABEL_NOISE_SCALE = 0.1


def reference_graph() -> CausalGraph:
    return build_graph(["W", "Z", "X"], [("W", "Z"), ("W", "X"), ("Z", "X")])


def reference_linear_scm() -> Scm:
    """W = U_W;  Z = 0.8 W + U_Z;  X = 0.5 W + 0.7 Z + U_X;  noises N(0, 1)."""
    g = reference_graph()
    assignments = (
        StructuralAssignment(0, (), LinearMechanism()),
        StructuralAssignment(1, (0,), LinearMechanism([0.8])),
        StructuralAssignment(2, (0, 1), LinearMechanism([0.5, 0.7])),
    )
    noise = (GaussianNoise(), GaussianNoise(), GaussianNoise())
    return Scm(g, assignments, noise)


def reference_label(features: np.ndarray, noise: np.ndarray) -> np.ndarray:
    """Nonlinear target reading only X and Z: tanh(X) + 0.5 Z^2 + 0.1 U_Y."""
    z, x = features[:, 1], features[:, 2]
    return np.tanh(x) + 0.5 * z**2 + LABEL_NOISE_SCALE * np.asarray(noise)


def bayes_label_predictor(features: np.ndarray) -> np.ndarray:
    """Noise-free part of the reference label; the best possible regressor."""
    return np.tanh(features[:, 2]) + 0.5 * features[:, 1] ** 2


def chain_scm(length: int = 2) -> Scm:
    """X1 -> X2 -> ... chain with unit coefficients and unit Gaussian noise."""
    names = [f"X{i + 1}" for i in range(length)]
    g = build_graph(names, [(names[i], names[i + 1]) for i in range(length - 1)])
    assignments = [StructuralAssignment(0, (), LinearMechanism())]
    for j in range(1, length):
        assignments.append(StructuralAssignment(j, (j - 1,), LinearMechanism([1.0])))
    return Scm(g, tuple(assignments), tuple(GaussianNoise() for _ in names))


def independent_scm(noise: tuple[NoiseSpec, ...], names=None) -> Scm:
    """Empty-graph model whose features equal their own noises."""
    p = len(noise)
    names = list(names) if names else [f"x{j + 1}" for j in range(p)]
    g = build_graph(names, [])
    assignments = tuple(StructuralAssignment(j, (), LinearMechanism()) for j in range(p))
    return Scm(g, assignments, noise)


def independent_uniform_scm(p: int, lo: float = -np.pi, hi: float = np.pi) -> Scm:
    return independent_scm(tuple(UniformNoise(lo, hi) for _ in range(p)))


# ---------------------------------------------------------------------------
# analytic oracle for linear-Gaussian models with a linear readout


def linear_coefficient_matrix(scm: Scm) -> np.ndarray:
    """Direct-effect matrix C with x = C x + b + u; requires linear mechanisms."""
    p = scm.p
    C = np.zeros((p, p))
    for a in scm.assignments:
        if not isinstance(a.mechanism, LinearMechanism):
            raise ValueError("analytic oracle needs linear mechanisms throughout")
        for k, coeff in zip(a.parents, a.mechanism.coefficients):
            C[a.node, k] = coeff
    return C


def reduced_form_coefficients(scm: Scm, readout: np.ndarray) -> np.ndarray:
    """Total path coefficients a with readout . x = a . u + const.

    Solves (I - C)^T a = readout, i.e. a = ((I - C)^{-1})^T readout.
    """
    C = linear_coefficient_matrix(scm)
    p = scm.p
    return np.linalg.solve((np.eye(p) - C).T, np.asarray(readout, dtype=np.float64))


def noise_variances(scm: Scm) -> np.ndarray:
    out = np.empty(scm.p)
    for j, spec in enumerate(scm.noise):
        if isinstance(spec, GaussianNoise):
            out[j] = spec.stddev**2
        elif isinstance(spec, UniformNoise):
            out[j] = (spec.hi - spec.lo) ** 2 / 12.0
        else:
            out[j] = np.var(spec.table)
        if out[j] <= 0:
            raise ValueError("degenerate noise variance")
    return out


def analytic_phi(scm: Scm, readout, context) -> float:
    """Exact normalized variance of E(readout.x | U_context) for linear models."""
    a = reduced_form_coefficients(scm, readout)
    v = noise_variances(scm)
    total = float(np.sum(a**2 * v))
    idx = list(context)
    return float(np.sum(a[idx] ** 2 * v[idx]) / total)


def analytic_icc(scm: Scm, readout) -> np.ndarray:
    """Per-feature share a_j^2 var(U_j) / total; equals both aggregation schemes
    because contributions of a linear readout are context independent."""
    a = reduced_form_coefficients(scm, readout)
    v = noise_variances(scm)
    contrib = a**2 * v
    return contrib / contrib.sum()
