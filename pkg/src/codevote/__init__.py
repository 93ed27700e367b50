"""Consensus selection over independently generated candidate programs."""

from .model import (
    Candidate,
    CodeBleuWeights,
    ConfigError,
    DiffReport,
    EnsembleConfig,
    ExecOutcome,
    ParseStatus,
    SelectionResult,
    SimilarityMatrix,
    Task,
    TieBreakReason,
    Witness,
    validate_config,
)

__all__ = [
    "Candidate",
    "CodeBleuWeights",
    "ConfigError",
    "DiffReport",
    "EnsembleConfig",
    "ExecOutcome",
    "ParseStatus",
    "SelectionResult",
    "SimilarityMatrix",
    "Task",
    "TieBreakReason",
    "Witness",
    "validate_config",
]

__version__ = "0.1.0"
