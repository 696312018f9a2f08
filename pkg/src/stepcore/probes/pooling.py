"""Pool step activation tensors into fixed-shape probe inputs."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..backend.types import ActivationTensor, InputError

POOLING_MODES = ("mean_tokens", "mean_tokens_mean_layers", "first", "middle", "last")
CONTEXT_MODES = ("full", "context_free")


@dataclass(frozen=True)
class PooledActivation:
    """(L, d) for token-pooled modes, (d,) when layers are averaged too."""

    values: np.ndarray
    pooling: str
    context: str

    def __post_init__(self) -> None:
        if not np.all(np.isfinite(self.values)):
            raise InputError("pooled activation contains non-finite values")


def pool_activations(
    tensor: ActivationTensor, mode: str, context: str = "full"
) -> PooledActivation:
    """Reduce an (S, L, d) tensor over the token dimension.

    ``mean_tokens`` averages tokens keeping layers, ``mean_tokens_mean_layers``
    averages both, and the position modes pick one token: first, middle
    (index S // 2), or last.
    """
    if mode not in POOLING_MODES:
        raise InputError(f"unknown pooling mode {mode!r}")
    if context not in CONTEXT_MODES:
        raise InputError(f"unknown context mode {context!r}")
    values = tensor.values
    if values.shape[0] == 0:
        raise InputError("cannot pool an empty token span")
    if mode == "mean_tokens":
        pooled = values.mean(axis=0)
    elif mode == "mean_tokens_mean_layers":
        pooled = values.mean(axis=(0, 1))
    elif mode == "first":
        pooled = values[0]
    elif mode == "middle":
        pooled = values[values.shape[0] // 2]
    else:  # last
        pooled = values[-1]
    return PooledActivation(pooled.copy(), mode, context)


def select_layer(pooled: PooledActivation, layer: int) -> PooledActivation:
    """Restrict an (L, d) pooled activation to one layer's (d,) slice."""
    if pooled.values.ndim != 2:
        raise InputError("layer selection needs an (L, d) pooled activation")
    if not (0 <= layer < pooled.values.shape[0]):
        raise InputError(f"layer {layer} out of range")
    return PooledActivation(
        pooled.values[layer].copy(), f"{pooled.pooling}[layer={layer}]", pooled.context
    )
