"""prSAMP: phase retrieval through simulated multiply scattering media.

A swept approximate message passing solver with a phase retrieval output
channel, used twice: first to calibrate a complex transmission matrix from
binary patterns and intensity-only measurements, then to reconstruct
sparse binary images through the calibrated medium.
"""

from .bessel import bessel_ratio
from .calibration import (
    CalibrationReport,
    build_calibration_set,
    calibrate,
    gen_bernoulli_patterns,
    gen_structured_patterns,
    load_report,
)
from .channels import ChannelOutputs, gaussian_output, pr_output
from .imaging import ReconstructionResult, reconstruct, reconstruct_batch, sparsity_of
from .medium import NoiseModel, generate_tm, measure, measure_batch
from .metrics import dependence, held_out_dependence, pearson_correlation, row_recovery
from .model import (
    BinaryPrior,
    ComplexGaussianPrior,
    DivergenceError,
    MeasurementSet,
    PatternSet,
    PriorSpec,
    SolverOptions,
    SolverState,
    TransmissionMatrix,
    derive_seed,
    seeded_rng,
)
from .priors import binary_denoiser, complex_gaussian_denoiser, local_prior_estimate
from .solver import Problem, SolveResult, init_state, residual_of, solve, sweep

__version__ = "0.1.0"

__all__ = [
    "bessel_ratio",
    "CalibrationReport",
    "build_calibration_set",
    "calibrate",
    "gen_bernoulli_patterns",
    "gen_structured_patterns",
    "load_report",
    "ChannelOutputs",
    "gaussian_output",
    "pr_output",
    "ReconstructionResult",
    "reconstruct",
    "reconstruct_batch",
    "sparsity_of",
    "NoiseModel",
    "generate_tm",
    "measure",
    "measure_batch",
    "dependence",
    "held_out_dependence",
    "pearson_correlation",
    "row_recovery",
    "BinaryPrior",
    "ComplexGaussianPrior",
    "DivergenceError",
    "MeasurementSet",
    "PatternSet",
    "PriorSpec",
    "SolverOptions",
    "SolverState",
    "TransmissionMatrix",
    "derive_seed",
    "seeded_rng",
    "binary_denoiser",
    "complex_gaussian_denoiser",
    "local_prior_estimate",
    "Problem",
    "SolveResult",
    "init_state",
    "residual_of",
    "solve",
    "sweep",
    "__version__",
]
