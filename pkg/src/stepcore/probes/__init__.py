"""Activation pooling, probes, training, transfer and the logit lens."""

from .lens import LayerLensRow, probe_logit_lens
from .models import ARCHS, ProbeError, ProbeModel, ProbeSpec, default_spec
from .optim import AdamW, CosineSchedule
from .pooling import POOLING_MODES, PooledActivation, pool_activations, select_layer
from .store import load_activation_blob, save_activation_blob
from .train import (
    EvalReport,
    TrainConfig,
    TrainResult,
    TrainingError,
    agreement,
    balanced_split,
    eval_probe,
    train_probe,
)
from .transfer import (
    CrossModelReport,
    FeatureExtraction,
    LabeledStep,
    cross_model_transfer,
    extract_features,
    random_init_twin,
    step_activation,
)

__all__ = [
    "ARCHS",
    "AdamW",
    "CosineSchedule",
    "CrossModelReport",
    "EvalReport",
    "FeatureExtraction",
    "LabeledStep",
    "LayerLensRow",
    "POOLING_MODES",
    "PooledActivation",
    "ProbeError",
    "ProbeModel",
    "ProbeSpec",
    "TrainConfig",
    "TrainResult",
    "TrainingError",
    "agreement",
    "balanced_split",
    "cross_model_transfer",
    "default_spec",
    "eval_probe",
    "extract_features",
    "load_activation_blob",
    "pool_activations",
    "probe_logit_lens",
    "random_init_twin",
    "save_activation_blob",
    "select_layer",
    "step_activation",
    "train_probe",
]
