"""Numerical laboratory for landscape trivialization of Gaussian random fields.

The package simulates confined Gaussian fields H(x) = X(x) + (mu/2) |x|^2 on
R^N, counts and classifies their critical points, measures Hessian spectra at
the minimum, and checks the closed-form predictions (ground-state energy and
radius, semicircular Hessian bulk, spectral edge, expected critical-point
counts and their exponential rates) that hold in the high-dimensional limit.
"""

from .complexity import (
    ComplexityPoint,
    PredictionReport,
    ReplicaSolution,
    big_f,
    big_f_maximizer,
    expected_crt_mc,
    expected_crt_quadrature,
    phi,
    predictions,
    psi_lrc,
    psi_lrc_maximizer,
    psi_src,
    psi_src_maximizer,
    psi_star_semicircle,
    replica_residuals,
    replica_solve,
)
from .field_sampler import (
    FieldRealization,
    HamiltonianEval,
    covariance_on_points,
    eval_hamiltonian,
    exact_sample_on_points,
    sample_field,
)
from .errors import (
    ConfigError,
    DegenerateConditioningError,
    GridCoverageError,
    IllConditionedCovarianceError,
    SearchFailureError,
    TrivlabError,
    UnsupportedRegimeError,
)
from .lrc_hessian import (
    BorderedHessianSample,
    CornerConditional,
    LrcConditionalConstants,
    constants,
    corner_conditional,
    edge_tail,
    sample_corner_pairs,
    sample_g,
    schur_det,
    second_moment_ratio,
    tridiag_w_lambda_max,
)
from .rmt import (
    DensityEstimate,
    SemicircleLaw,
    SpectrumSample,
    bl_distance,
    expected_abs_det_shifted_formula,
    expected_abs_det_shifted_mc,
    rho_n_estimate,
    sample_goe,
)
from .structure_functions import (
    LrcStructure,
    SrcCorrelator,
    alpha_beta,
    check_assumption3,
    eval_lrc,
    eval_src,
    trivialization_threshold,
)

__all__ = [
    "BorderedHessianSample",
    "ComplexityPoint",
    "ConfigError",
    "CornerConditional",
    "DegenerateConditioningError",
    "DensityEstimate",
    "FieldRealization",
    "GridCoverageError",
    "HamiltonianEval",
    "IllConditionedCovarianceError",
    "LrcConditionalConstants",
    "LrcStructure",
    "PredictionReport",
    "ReplicaSolution",
    "SearchFailureError",
    "SemicircleLaw",
    "SpectrumSample",
    "SrcCorrelator",
    "TrivlabError",
    "UnsupportedRegimeError",
    "alpha_beta",
    "big_f",
    "big_f_maximizer",
    "bl_distance",
    "check_assumption3",
    "constants",
    "corner_conditional",
    "covariance_on_points",
    "edge_tail",
    "eval_hamiltonian",
    "eval_lrc",
    "eval_src",
    "exact_sample_on_points",
    "expected_abs_det_shifted_formula",
    "expected_abs_det_shifted_mc",
    "expected_crt_mc",
    "expected_crt_quadrature",
    "phi",
    "predictions",
    "psi_lrc",
    "psi_lrc_maximizer",
    "psi_src",
    "psi_src_maximizer",
    "psi_star_semicircle",
    "replica_residuals",
    "replica_solve",
    "rho_n_estimate",
    "sample_corner_pairs",
    "sample_field",
    "sample_g",
    "sample_goe",
    "schur_det",
    "second_moment_ratio",
    "tridiag_w_lambda_max",
]
