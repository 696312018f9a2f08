"""Token-level baselines and surface-feature analysis."""

from .analysis import (
    FeatureCorrelation,
    combined_regression,
    feature_correlation,
    pearson,
    standardize,
)
from .embeddings import (
    CachedEmbeddings,
    EmbeddingError,
    HashEmbeddingBackend,
    SentenceTransformerBackend,
    embed_steps,
)
from .features import (
    CATEGORIES,
    FEATURE_NAMES,
    SurfaceFeatureVector,
    category_flags,
    feature_matrix,
    load_lexicon,
    surface_features,
)
from .judge_classify import JudgeVerdict, classification_prompt, judge_classify
from .tfidf import TfidfVocab, fit_vocab, tfidf_fit_transform, transform

__all__ = [
    "CATEGORIES",
    "CachedEmbeddings",
    "EmbeddingError",
    "FEATURE_NAMES",
    "FeatureCorrelation",
    "HashEmbeddingBackend",
    "JudgeVerdict",
    "SentenceTransformerBackend",
    "SurfaceFeatureVector",
    "TfidfVocab",
    "category_flags",
    "classification_prompt",
    "combined_regression",
    "embed_steps",
    "feature_correlation",
    "feature_matrix",
    "fit_vocab",
    "judge_classify",
    "load_lexicon",
    "pearson",
    "standardize",
    "surface_features",
    "tfidf_fit_transform",
    "transform",
]
