"""Blind hyperspectral unmixing by entropic descent archetypal analysis."""

__version__ = "0.1.0"

from archetype.core import HsiImage, Prng, l2_normalize, matmul, spectral_norm
from archetype.edaa import RunResult, SolverConfig, run
from archetype.ensemble import EnsembleConfig, SelectionReport, run_ensemble
from archetype.metrics import EvaluationResult, evaluate

__all__ = [
    "HsiImage",
    "Prng",
    "l2_normalize",
    "matmul",
    "spectral_norm",
    "SolverConfig",
    "RunResult",
    "run",
    "EnsembleConfig",
    "SelectionReport",
    "run_ensemble",
    "EvaluationResult",
    "evaluate",
]
