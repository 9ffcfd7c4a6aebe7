"""Multimodal screening pipeline: feature extraction, DTW cross-modal features,
stochastic embracement fusion, cross-validated evaluation and result analyses."""

from .dataset import (CROSS_MODALITIES, DISORDERS, MODALITIES, SINGLE_MODALITIES, TASKS, DataError, Dataset,
                      GeneratorConfig, ParticipantRecord, generate_synthetic, load_manifest, save_manifest)
from .dtw import BACKEND
from .embrace import FusionModel
from .evalharness import cross_validate, metrics, stratified_folds
from .trainer import TrainConfig

__version__ = "0.1.0"

__all__ = [
    "BACKEND", "CROSS_MODALITIES", "DISORDERS", "DataError", "Dataset", "FusionModel", "GeneratorConfig",
    "MODALITIES", "ParticipantRecord", "SINGLE_MODALITIES", "TASKS", "TrainConfig", "cross_validate",
    "generate_synthetic", "load_manifest", "metrics", "save_manifest",
    "stratified_folds",
]
