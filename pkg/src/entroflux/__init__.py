"""Bound-preserving entropy-variable solvers for cross-diffusion systems."""

from ._accel import HAVE_NUMBA, backend, set_backend
from .entropy import (LogarithmicEntropy, PDReport, PopulationPowerEntropy, SKTLogEntropy,
                      VolumeFillingEntropy, certify_H2, certify_H2prime_H2dprime,
                      default_entropy, eval_entropy, invert_grad, lemma_bounds_check)
from .errors import (ConfigurationError, DegenerateFitError, DomainError, EntrofluxError,
                     NumericalError, PreconditionError, StepFailure)
from .models import (CrossDiffusionModel, PowerLaw, ScalarFunction, StateDomain,
                     TransitionModel, build_model, make_burger_ion, make_electron_hole,
                     make_keller_segel_like, make_maxwell_stefan, make_power_population,
                     make_skt, make_tumor, make_volume_filling)
from .solver import Grid1D, SolverConfig, StateField, face_flux, residual, run, step

__version__ = "0.1.0"

__all__ = [
    "HAVE_NUMBA", "backend", "set_backend",
    "LogarithmicEntropy", "PDReport", "PopulationPowerEntropy", "SKTLogEntropy",
    "VolumeFillingEntropy", "certify_H2", "certify_H2prime_H2dprime", "default_entropy",
    "eval_entropy", "invert_grad", "lemma_bounds_check",
    "ConfigurationError", "DegenerateFitError", "DomainError", "EntrofluxError",
    "NumericalError", "PreconditionError", "StepFailure",
    "CrossDiffusionModel", "PowerLaw", "ScalarFunction", "StateDomain", "TransitionModel",
    "build_model", "make_burger_ion", "make_electron_hole", "make_keller_segel_like",
    "make_maxwell_stefan", "make_power_population", "make_skt", "make_tumor",
    "make_volume_filling",
    "Grid1D", "SolverConfig", "StateField", "face_flux", "residual", "run", "step",
]
