"""Correlate surface features with probe predictions; combined regression.

The combined model is a logistic-linked linear classifier over
standardized features, trained and evaluated with the same balanced
split and seed protocol as the activation probes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..probes.models import ProbeSpec
from ..probes.train import TrainConfig, TrainResult, train_probe
from .features import FEATURE_NAMES


@dataclass(frozen=True)
class FeatureCorrelation:
    name: str
    correlation: float
    degenerate: bool  # zero-variance feature

    def to_dict(self) -> dict:
        return {
            "feature": self.name,
            "correlation": self.correlation,
            "degenerate": self.degenerate,
        }


def pearson(x: np.ndarray, y: np.ndarray) -> tuple[float, bool]:
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    sx = x.std()
    sy = y.std()
    if sx == 0.0 or sy == 0.0:
        return 0.0, True
    r = float(np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy))
    return max(-1.0, min(1.0, r)), False


def feature_correlation(
    features: np.ndarray,
    predictions: np.ndarray,
    names: tuple[str, ...] = FEATURE_NAMES,
) -> list[FeatureCorrelation]:
    """Pearson correlation of each feature column with 0/1 predictions."""
    if features.shape[0] != len(predictions):
        raise ValueError("features and predictions disagree on sample count")
    out = []
    for col, name in enumerate(names):
        r, degenerate = pearson(features[:, col], predictions)
        out.append(FeatureCorrelation(name, r, degenerate))
    return out


def standardize(features: np.ndarray) -> np.ndarray:
    mean = features.mean(axis=0)
    std = features.std(axis=0)
    std[std == 0.0] = 1.0
    return (features - mean) / std


def combined_regression(
    features: np.ndarray,
    labels: np.ndarray,
    config: TrainConfig = TrainConfig(),
) -> TrainResult:
    """Linear classifier on all standardized features, probe protocol."""
    x = standardize(np.asarray(features, dtype=np.float64))
    spec = ProbeSpec(arch="linear", input_shape=(x.shape[1],))
    return train_probe(x, np.asarray(labels, dtype=np.int64), spec, config)
