"""Quantization-aware likelihoods under logconcave noise.

Evaluate and maximize the exact likelihood of quantized observations,
and verify the logconcavity and set-geometry facts that make those
likelihoods well behaved.
"""

from .estimate import FitConfig, FitMode, FitReport, fit, fit_ignoring_quantization
from .geometry import (
    MatrixCombinationSpec,
    MatrixFamily,
    PrekopaReport,
    SampledSet,
    diag_box_hull_check,
    minkowski_combine,
    noise_region_box,
    noise_region_membership,
    prekopa_check,
    psd_ball_hull_check,
    recombine_region_points,
    decompose_combination_point,
)
from .likelihood import (
    EvalMethod,
    LikelihoodValue,
    LocationScaleModel,
    MonteCarlo,
    Scale,
    ScaleDiagonal,
    ScaleFixed,
    ScaleScalar,
    continuous_loglik,
    dataset_loglik,
    grad_quantized_loglik,
    quantized_loglik,
    residual_logpdf,
)
from .noise import ConcavityReport, Family, NoiseModel, make_noise
from .quantizer import (
    AdcBank,
    Box,
    Code,
    Halfspace,
    HexagonalQuantizer,
    Polytope,
    PolytopeQuantizer,
    Quantizer,
    Region,
    contains,
    load_quantizer,
    quantizer_from_json,
    quantizer_to_json,
    sample_region,
)
from .verify import ClaimResult, SuiteReport, VerifyConfig, claim_ids, run_suite

__version__ = "0.1.0"

__all__ = [
    "AdcBank",
    "Box",
    "ClaimResult",
    "Code",
    "ConcavityReport",
    "EvalMethod",
    "Family",
    "FitConfig",
    "FitMode",
    "FitReport",
    "Halfspace",
    "HexagonalQuantizer",
    "LikelihoodValue",
    "LocationScaleModel",
    "MatrixCombinationSpec",
    "MatrixFamily",
    "MonteCarlo",
    "NoiseModel",
    "Polytope",
    "PolytopeQuantizer",
    "PrekopaReport",
    "Quantizer",
    "Region",
    "SampledSet",
    "Scale",
    "ScaleDiagonal",
    "ScaleFixed",
    "ScaleScalar",
    "SuiteReport",
    "VerifyConfig",
    "claim_ids",
    "contains",
    "continuous_loglik",
    "dataset_loglik",
    "decompose_combination_point",
    "diag_box_hull_check",
    "fit",
    "fit_ignoring_quantization",
    "grad_quantized_loglik",
    "load_quantizer",
    "make_noise",
    "minkowski_combine",
    "noise_region_box",
    "noise_region_membership",
    "prekopa_check",
    "psd_ball_hull_check",
    "quantized_loglik",
    "quantizer_from_json",
    "quantizer_to_json",
    "recombine_region_points",
    "residual_logpdf",
    "run_suite",
    "sample_region",
]
