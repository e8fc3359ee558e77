"""icckit: feature attribution for black-box tabular predictors.

The pipeline represents the feature-generating process as a structural
causal model, estimates how much of the predictor's output variance each
feature's own exogenous noise explains, and aggregates the per-context
increments over topological orderings or Shapley subsets. A quadrature
oracle for variance-based sensitivity indices and a prediction-gap
evaluation harness round out the toolkit.
"""
from .errors import IccKitError
from .estimator import PhiEstimate, phi_batch, phi_data, phi_scm
from .evaluation import (
    Dataset,
    Ranking,
    generate_synthetic,
    load_csv,
    pfi,
    pgu,
    pgu_aggregate,
    random_ranking,
)
from .graph import (
    CausalGraph,
    Ordering,
    build_graph,
    enumerate_topological_orderings,
    prefix_set,
    sample_topological_orderings,
)
from .icc import (
    AttributionReport,
    ContextContribution,
    efficiency_residual,
    icc_shapley,
    icc_topological,
    normalize_and_clamp,
)
from .predictor import Mlp, TrainConfig, init_mlp, load_weights, save_weights, train
from .sampler import QmcConfig, sobol_points, to_noise
from .scm import (
    EmpiricalNoise,
    ExpressionMechanism,
    GaussianNoise,
    LinearMechanism,
    Scm,
    StructuralAssignment,
    UniformNoise,
    abduct,
    dequantize,
    intervene,
    push_forward,
    sample,
)
from .scm_learn import AnmFit, fit_anm, fit_quality
from .sobol import HdmrDecomposition, hdmr, sobol_index, sobol_to_shapley

__version__ = "0.1.0"

__all__ = [
    "AnmFit", "AttributionReport", "CausalGraph", "ContextContribution",
    "Dataset", "EmpiricalNoise", "ExpressionMechanism", "GaussianNoise",
    "HdmrDecomposition", "IccKitError", "LinearMechanism", "Mlp", "Ordering",
    "PhiEstimate", "QmcConfig", "Ranking", "Scm", "StructuralAssignment",
    "TrainConfig", "UniformNoise", "abduct", "build_graph", "dequantize",
    "efficiency_residual", "enumerate_topological_orderings", "fit_anm",
    "fit_quality", "generate_synthetic", "hdmr", "icc_shapley",
    "icc_topological", "init_mlp", "intervene", "load_csv", "load_weights",
    "normalize_and_clamp", "pfi", "pgu", "pgu_aggregate", "phi_batch",
    "phi_data", "phi_scm", "prefix_set", "push_forward", "random_ranking",
    "sample", "sample_topological_orderings", "save_weights", "sobol_index",
    "sobol_points", "sobol_to_shapley", "to_noise", "train",
]
