"""Partial-linear single-index models with a neural link function."""

from ._core import (
    DivergenceError,
    DomainError,
    Error,
    FitConfig,
    FitResult,
    InferenceError,
    Model,
    ShapeError,
    bootstrap,
    fit,
    simulate,
    true_link,
)

__all__ = [
    "DivergenceError",
    "DomainError",
    "Error",
    "FitConfig",
    "FitResult",
    "InferenceError",
    "Model",
    "ShapeError",
    "bootstrap",
    "fit",
    "simulate",
    "true_link",
]
