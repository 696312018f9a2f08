"""Shared value types and errors for language-model backends.

Every backend (the built-in tiny transformer and the remote HTTP client)
speaks in these types: token sequences that stay byte-faithful to their
source text, residual activation tensors of shape (S, L, d), and
per-position input-embedding gradients.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np


class BackendError(Exception):
    """Base class for backend failures."""


class InputError(BackendError):
    """Malformed input: bad spans, untokenizable text, id/text mismatch."""


class CapacityError(BackendError):
    """Requested sequence does not fit the backend's context window."""


class TransportError(BackendError):
    """Remote backend unreachable or returned a malformed response."""


class UnsupportedCapabilityError(BackendError):
    """Backend does not implement the requested operation (e.g. gradients)."""


@dataclass(frozen=True)
class BackendDescriptor:
    """Identity and geometry of a backend.

    ``seed`` is meaningful for built-in backends only; ``endpoint`` for
    remote ones. Two built-in backends with equal seed and dims are
    bit-identical.
    """

    id: str
    kind: str  # "builtin-tiny" | "remote"
    layer_count: int
    hidden_dim: int
    vocab_size: int
    elicitation_suffix: str
    endpoint: Optional[str] = None
    seed: Optional[int] = None

    def __post_init__(self) -> None:
        if self.kind not in ("builtin-tiny", "remote"):
            raise ValueError(f"unknown backend kind: {self.kind!r}")
        if self.layer_count < 1 or self.hidden_dim < 1 or self.vocab_size < 2:
            raise ValueError("descriptor dims out of range")

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "kind": self.kind,
            "layer_count": self.layer_count,
            "hidden_dim": self.hidden_dim,
            "vocab_size": self.vocab_size,
            "elicitation_suffix": self.elicitation_suffix,
            "endpoint": self.endpoint,
            "seed": self.seed,
        }


@dataclass(frozen=True)
class TokenSequence:
    """Tokenized text with per-token character spans.

    ``char_offsets[i]`` is the half-open span of token i in ``text``;
    spans are sorted, non-overlapping and tile the tokenized portion, so
    detokenization reproduces ``text`` byte for byte.
    """

    token_ids: tuple[int, ...]
    text: str
    char_offsets: tuple[tuple[int, int], ...]

    def __post_init__(self) -> None:
        if len(self.token_ids) != len(self.char_offsets):
            raise InputError("token_ids and char_offsets length mismatch")
        prev_end = 0
        for start, end in self.char_offsets:
            if start != prev_end or end < start:
                raise InputError("char_offsets must be sorted, non-overlapping and contiguous")
            prev_end = end
        if prev_end != len(self.text):
            raise InputError("char_offsets must cover the whole text")

    def __len__(self) -> int:
        return len(self.token_ids)


@dataclass(frozen=True)
class GenerationParams:
    """Decoding controls. Greedy mode ignores temperature/top_p."""

    mode: str = "greedy"  # "greedy" | "sampled"
    temperature: float = 0.6
    top_p: float = 0.95
    max_new_tokens: int = 8000

    def __post_init__(self) -> None:
        if self.mode not in ("greedy", "sampled"):
            raise ValueError(f"unknown generation mode: {self.mode!r}")
        if self.max_new_tokens < 1:
            raise ValueError("max_new_tokens must be >= 1")
        if self.mode == "sampled" and self.temperature <= 0:
            raise ValueError("sampled mode needs temperature > 0")


@dataclass(frozen=True)
class ActivationTensor:
    """Residual-stream activations, shape (S tokens, L layers, d dims)."""

    values: np.ndarray
    token_span: tuple[int, int]

    def __post_init__(self) -> None:
        if self.values.ndim != 3:
            raise InputError("activation tensor must be (S, L, d)")
        span_len = self.token_span[1] - self.token_span[0]
        if self.values.shape[0] != span_len:
            raise InputError("activation tensor S does not match token_span length")
        if not np.all(np.isfinite(self.values)):
            raise InputError("activation tensor contains non-finite values")

    @property
    def shape(self) -> tuple[int, int, int]:
        return tuple(self.values.shape)  # type: ignore[return-value]


@dataclass(frozen=True)
class EmbeddingGradient:
    """Gradient of a scalar w.r.t. every input token embedding.

    ``values`` has shape (tokens, embedding_dim) over the full input;
    causality makes rows strictly after ``target_span`` exactly zero.
    """

    values: np.ndarray
    target_span: tuple[int, int]

    def __post_init__(self) -> None:
        if self.values.ndim != 2:
            raise InputError("embedding gradient must be (tokens, embedding_dim)")


@dataclass(frozen=True)
class BackendCapabilities:
    """Feature flags a backend advertises."""

    gradients: bool = True
    activations: bool = True
    grad_norms: bool = True
    unembedding: bool = True


# Default answer-elicitation suffix for built-in backends. The leading
# space makes plain string concatenation after a sentence read naturally.
DEFAULT_ELICITATION_SUFFIX = " So the answer is \\boxed{"
