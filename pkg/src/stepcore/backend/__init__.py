"""Language-model backends: built-in tiny transformer and remote client."""

from .remote import ReferenceServer, RemoteBackend
from .tiny import (
    GenerationResult,
    TinyBackend,
    TinyConfig,
    TinyWeights,
    load_weight_file,
    save_weight_file,
)
from .tokenizer import TinyTokenizer, char_tokenizer, math_word_tokenizer, tokenizer_from_name
from .types import (
    ActivationTensor,
    BackendCapabilities,
    BackendDescriptor,
    BackendError,
    CapacityError,
    DEFAULT_ELICITATION_SUFFIX,
    EmbeddingGradient,
    GenerationParams,
    InputError,
    TokenSequence,
    TransportError,
    UnsupportedCapabilityError,
)

__all__ = [
    "ActivationTensor",
    "BackendCapabilities",
    "BackendDescriptor",
    "BackendError",
    "CapacityError",
    "DEFAULT_ELICITATION_SUFFIX",
    "EmbeddingGradient",
    "GenerationParams",
    "GenerationResult",
    "InputError",
    "ReferenceServer",
    "RemoteBackend",
    "TinyBackend",
    "TinyConfig",
    "TinyTokenizer",
    "TinyWeights",
    "TokenSequence",
    "TransportError",
    "UnsupportedCapabilityError",
    "char_tokenizer",
    "load_weight_file",
    "math_word_tokenizer",
    "save_weight_file",
    "tokenizer_from_name",
]
