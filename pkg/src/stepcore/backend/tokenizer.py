"""Deterministic, reversible tokenizer for the built-in tiny models.

Greedy longest-match over a fixed string vocabulary. Special tokens
(BOS/EOS) never match text, so detokenize(tokenize(text)) == text holds
byte for byte. Multi-character tokens are optional sugar on top of a
single-character base vocabulary.
"""

from __future__ import annotations

import string

from .types import InputError, TokenSequence

BOS_TOKEN = "<bos>"
EOS_TOKEN = "<eos>"

# Single characters every preset vocabulary can spell.
_BASE_CHARS = sorted(set(string.printable))

# Word-level tokens for synthetic math text; keeps toy sequences short.
_MATH_WORDS = [
    "\\boxed{",
    "\n\n",
    "So the answer is",
    "alpha", "beta", "gamma", "delta", "epsilon", "zeta", "eta", "theta",
    "Combine", "code", "words", "means", "Also", "Now", "the", "digits",
    "Let", "me", "think", "We", "need", "and", "then", "join", "check",
    "values", "first", "second", "maps", "to", "digit", "of", "is",
]


class TinyTokenizer:
    """Fixed-vocabulary greedy longest-match tokenizer."""

    def __init__(self, tokens: list[str], name: str = "custom"):
        self.name = name
        self.vocab: list[str] = [BOS_TOKEN, EOS_TOKEN] + list(tokens)
        if len(set(self.vocab)) != len(self.vocab):
            raise ValueError("duplicate tokens in vocabulary")
        self.bos_id = 0
        self.eos_id = 1
        self._token_to_id = {tok: i for i, tok in enumerate(self.vocab)}
        # Text tokens grouped by first character, longest first, for greedy match.
        self._by_first: dict[str, list[str]] = {}
        for tok in self.vocab[2:]:
            self._by_first.setdefault(tok[0], []).append(tok)
        for bucket in self._by_first.values():
            bucket.sort(key=len, reverse=True)

    @property
    def vocab_size(self) -> int:
        return len(self.vocab)

    def tokenize(self, text: str) -> TokenSequence:
        ids: list[int] = []
        offsets: list[tuple[int, int]] = []
        pos = 0
        n = len(text)
        while pos < n:
            bucket = self._by_first.get(text[pos])
            match = None
            if bucket is not None:
                for tok in bucket:
                    if text.startswith(tok, pos):
                        match = tok
                        break
            if match is None:
                raise InputError(
                    f"cannot tokenize character {text[pos]!r} at position {pos}"
                )
            ids.append(self._token_to_id[match])
            offsets.append((pos, pos + len(match)))
            pos += len(match)
        return TokenSequence(tuple(ids), text, tuple(offsets))

    def detokenize(self, token_ids: list[int] | tuple[int, ...]) -> str:
        parts = []
        for tid in token_ids:
            if tid in (self.bos_id, self.eos_id):
                continue
            if not 0 <= tid < len(self.vocab):
                raise InputError(f"token id {tid} out of range")
            parts.append(self.vocab[tid])
        return "".join(parts)

    def sequence_from_ids(self, token_ids: list[int] | tuple[int, ...]) -> TokenSequence:
        """Build a TokenSequence (with offsets) from generated ids."""
        kept = [t for t in token_ids if t not in (self.bos_id, self.eos_id)]
        offsets = []
        pos = 0
        for tid in kept:
            tok = self.vocab[tid]
            offsets.append((pos, pos + len(tok)))
            pos += len(tok)
        text = "".join(self.vocab[t] for t in kept)
        return TokenSequence(tuple(kept), text, tuple(offsets))


def char_tokenizer() -> TinyTokenizer:
    """Single printable-character vocabulary (258 tokens with specials)."""
    return TinyTokenizer(list(_BASE_CHARS), name="chars-v1")


def math_word_tokenizer() -> TinyTokenizer:
    """Character base plus word tokens for synthetic math corpora."""
    return TinyTokenizer(list(_BASE_CHARS) + list(_MATH_WORDS), name="math-words-v1")


_PRESETS = {
    "chars-v1": char_tokenizer,
    "math-words-v1": math_word_tokenizer,
}


def tokenizer_from_name(name: str) -> TinyTokenizer:
    if name not in _PRESETS:
        raise ValueError(f"unknown tokenizer preset: {name!r}")
    return _PRESETS[name]()
