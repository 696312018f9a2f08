"""Surface-level step features: position, length, counts, category flags.

Category phrases live in a JSON lexicon shipped with the package and
match case-insensitively against the step text alone; context never
enters. Numeric literals are maximal digit runs with an optional decimal
point, so "3.14" counts once.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources

import numpy as np

_NUMBER_RUN = re.compile(r"\d+(?:\.\d+)?")
_OPERATORS = set("+-*/^=<>") | {"−", "≤", "≥", "≠", "±"}

CATEGORIES = ("filler", "verification", "planning", "computation", "fact_retrieval")

FEATURE_NAMES = (
    "relative_position",
    "token_length",
    "number_count",
    "operator_count",
) + CATEGORIES


def load_lexicon() -> dict[str, list[str]]:
    text = resources.files("stepcore.data").joinpath("lexicon.json").read_text("utf-8")
    return json.loads(text)


_LEXICON = load_lexicon()


@dataclass(frozen=True)
class SurfaceFeatureVector:
    relative_position: float
    token_length: int
    number_count: int
    operator_count: int
    categories: dict

    def as_array(self) -> np.ndarray:
        return np.array(
            [
                self.relative_position,
                float(self.token_length),
                float(self.number_count),
                float(self.operator_count),
            ]
            + [float(self.categories[c]) for c in CATEGORIES]
        )

    def to_dict(self) -> dict:
        out = {
            "relative_position": self.relative_position,
            "token_length": self.token_length,
            "number_count": self.number_count,
            "operator_count": self.operator_count,
        }
        out.update({c: bool(self.categories[c]) for c in CATEGORIES})
        return out


def category_flags(text: str) -> dict:
    lowered = text.lower()
    return {
        category: any(phrase in lowered for phrase in phrases)
        for category, phrases in _LEXICON.items()
    }


def surface_features(
    step_text: str,
    step_index: int,
    chain_length: int,
    token_length: int | None = None,
) -> SurfaceFeatureVector:
    """Features for step ``step_index`` (0-based) of ``chain_length`` steps.

    Relative position counts steps from one, so the last step sits at 1.0.
    ``token_length`` defaults to the whitespace token count when no
    backend tokenization is supplied.
    """
    if not (0 <= step_index < chain_length):
        raise ValueError("step_index out of range")
    if token_length is None:
        token_length = len(step_text.split())
    return SurfaceFeatureVector(
        relative_position=(step_index + 1) / chain_length,
        token_length=token_length,
        number_count=len(_NUMBER_RUN.findall(step_text)),
        operator_count=sum(1 for ch in step_text if ch in _OPERATORS),
        categories=category_flags(step_text),
    )


def feature_matrix(vectors: list[SurfaceFeatureVector]) -> np.ndarray:
    return np.stack([v.as_array() for v in vectors])
