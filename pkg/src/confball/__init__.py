"""Adaptive confidence balls for the Gaussian sequence model, with Monte-Carlo checks."""

from .balls import ConfidenceBall, adaptive_ball, honest_ball, single_level_ball, usual_ball
from .numerics import LAMBDA_STAR, solve_lambda
from .sequence import BesovBody, CoefficientVector, NoiseModel

__version__ = "0.1.0"

__all__ = [
    "LAMBDA_STAR",
    "BesovBody",
    "CoefficientVector",
    "ConfidenceBall",
    "NoiseModel",
    "adaptive_ball",
    "honest_ball",
    "single_level_ball",
    "solve_lambda",
    "usual_ball",
]
