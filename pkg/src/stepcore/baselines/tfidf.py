"""Word n-gram TF-IDF vectors with pinned, hand-checkable conventions.

Tokens are lowercased ``\\w+`` runs; n-grams span 1..5 words joined by a
single space. Term frequency is sublinear (1 + ln count), inverse
document frequency is ln((1+N)/(1+df)) + 1, vectors are L2-normalized,
and the vocabulary keeps the 100,000 highest-document-frequency grams
with lexicographic tie-break. Every convention is fixed here rather than
inherited from a library so weights are reproducible to the digit.
"""

from __future__ import annotations

import math
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

_WORD = re.compile(r"\w+")

NGRAM_RANGE = (1, 5)
VOCAB_CAP = 100_000


def _grams(text: str, n_lo: int, n_hi: int) -> Counter:
    words = _WORD.findall(text.lower())
    counts: Counter = Counter()
    for n in range(n_lo, n_hi + 1):
        for i in range(len(words) - n + 1):
            counts[" ".join(words[i : i + n])] += 1
    return counts


@dataclass(frozen=True)
class TfidfVocab:
    index: dict  # gram -> column
    idf: np.ndarray
    ngram_range: tuple[int, int] = NGRAM_RANGE
    sublinear: bool = True

    @property
    def size(self) -> int:
        return len(self.index)


def fit_vocab(
    corpus: list[str],
    ngram_range: tuple[int, int] = NGRAM_RANGE,
    cap: int = VOCAB_CAP,
) -> TfidfVocab:
    if not corpus:
        raise ValueError("corpus must be non-empty")
    df: Counter = Counter()
    for text in corpus:
        df.update(set(_grams(text, *ngram_range)))
    # Highest document frequency first; ties break lexicographically.
    ranked = sorted(df.items(), key=lambda kv: (-kv[1], kv[0]))[:cap]
    n_docs = len(corpus)
    index = {gram: col for col, gram in enumerate(sorted(g for g, _ in ranked))}
    idf = np.zeros(len(index))
    for gram, col in index.items():
        idf[col] = math.log((1 + n_docs) / (1 + df[gram])) + 1.0
    return TfidfVocab(index, idf, ngram_range)


def transform(corpus: list[str], vocab: TfidfVocab) -> np.ndarray:
    """Dense (len(corpus), vocab.size) matrix of L2-normalized tf-idf."""
    out = np.zeros((len(corpus), vocab.size))
    for row, text in enumerate(corpus):
        for gram, count in _grams(text, *vocab.ngram_range).items():
            col = vocab.index.get(gram)
            if col is None:
                continue
            tf = 1.0 + math.log(count) if vocab.sublinear else float(count)
            out[row, col] = tf * vocab.idf[col]
        norm = np.linalg.norm(out[row])
        if norm > 0:
            out[row] /= norm
    return out


def tfidf_fit_transform(
    corpus: list[str],
    ngram_range: tuple[int, int] = NGRAM_RANGE,
    cap: int = VOCAB_CAP,
) -> tuple[np.ndarray, TfidfVocab]:
    vocab = fit_vocab(corpus, ngram_range, cap)
    return transform(corpus, vocab), vocab
