"""Recovery of periodic Dirac streams from irregular low-pass samples.

CPGD alternates a gradient step on the data fidelity with Cadzow denoising
of the Toeplitz embedding of the Fourier coefficients. The package also
ships the two reference methods (LS-Cadzow, GenFRI), the signal model and
a benchmark harness.
"""

from .bench import ExperimentGrid, positioning_error, run_sweep, summarize
from .denoise import DenoiseConfig, cadzow_denoise, inexact_prox
from .fri import (
    DiracStream,
    SamplingScheme,
    build_forward_matrix,
    fourier_coefficients,
    random_sampling,
    random_stream,
    recover_amplitudes,
    recover_locations,
    synthesize_measurements,
)
from .lowrank import partial_svd, project_rank, truncated_svd
from .solvers import ForwardModel, SolverConfig, cpgd, genfri, ls_cadzow
from .toeplitz import ToeplitzEmbedding, toeplitz_adjoint, toeplitz_pinv, toeplitzify

__version__ = "0.1.0"

__all__ = [
    "DenoiseConfig",
    "DiracStream",
    "ExperimentGrid",
    "ForwardModel",
    "SamplingScheme",
    "SolverConfig",
    "ToeplitzEmbedding",
    "build_forward_matrix",
    "cadzow_denoise",
    "cpgd",
    "fourier_coefficients",
    "genfri",
    "inexact_prox",
    "ls_cadzow",
    "partial_svd",
    "positioning_error",
    "project_rank",
    "random_sampling",
    "random_stream",
    "recover_amplitudes",
    "recover_locations",
    "run_sweep",
    "summarize",
    "synthesize_measurements",
    "toeplitz_adjoint",
    "toeplitz_pinv",
    "toeplitzify",
    "truncated_svd",
]
