"""Project layerwise-linear probe weights through the unembedding.

Each layer's (d,) weight slice becomes a vocabulary score vector; the
top and bottom ten tokens per layer show whether the probe direction
aligns with any human-readable vocabulary structure.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..backend.types import UnsupportedCapabilityError
from .models import ProbeError, ProbeModel


@dataclass(frozen=True)
class LayerLensRow:
    layer: int
    top_tokens: tuple[str, ...]
    bottom_tokens: tuple[str, ...]
    degenerate: bool  # all-zero direction: ordering is arbitrary

    def to_dict(self) -> dict:
        return {
            "layer": self.layer,
            "top": list(self.top_tokens),
            "bottom": list(self.bottom_tokens),
            "degenerate": self.degenerate,
        }


def probe_logit_lens(model: ProbeModel, backend, top_k: int = 10) -> list[LayerLensRow]:
    if model.spec.arch != "lw_linear":
        raise ProbeError("logit lens needs a layerwise-linear probe")
    if not getattr(backend.capabilities, "unembedding", False):
        raise UnsupportedCapabilityError("backend does not expose an unembedding")
    n_layers, hidden = model.spec.input_shape
    directions = model.weights[0][:, 0].reshape(n_layers, hidden)
    unembedding = backend.unembedding()  # (vocab, d)
    vocab = backend.vocab_strings()
    rows: list[LayerLensRow] = []
    for layer in range(n_layers):
        vector = directions[layer]
        scores = unembedding @ vector
        order = np.argsort(-scores, kind="stable")
        top = tuple(vocab[i] for i in order[:top_k])
        bottom = tuple(vocab[i] for i in order[::-1][:top_k])
        rows.append(
            LayerLensRow(
                layer=layer,
                top_tokens=top,
                bottom_tokens=bottom,
                degenerate=bool(np.all(vector == 0.0)),
            )
        )
    return rows
