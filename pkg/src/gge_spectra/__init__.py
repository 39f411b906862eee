"""Generalized Gibbs ensembles of integrable lattices: seeds, sampling and transfer operators."""

from .errors import *  # noqa: F401,F403
from .models import ModelKind, Coordinates, build_matrix, trace_power, eigenvalues
from .potential import Polynomial
from .seeds import extract_seed, extract_seeds, trace_monomials, local_field
from .sampling import GGEConfig, SampleBatch, sample_direct, sample_mcmc

__version__ = "0.1.0"

__all__ = [
    "ModelKind",
    "Coordinates",
    "build_matrix",
    "trace_power",
    "eigenvalues",
    "Polynomial",
    "extract_seed",
    "extract_seeds",
    "trace_monomials",
    "local_field",
    "GGEConfig",
    "SampleBatch",
    "sample_direct",
    "sample_mcmc",
]
