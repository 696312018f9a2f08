"""Problems, reasoning chains, steps, subsequences and answer forms.

All types are immutable values; pipeline operations never mutate them,
which keeps per-problem processing trivially parallel.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional


class CorpusError(Exception):
    """Malformed corpus data (datasets, chains, subsequences)."""


class AnswerParseError(CorpusError):
    """Answer text could not be parsed; carries the failing position."""

    def __init__(self, message: str, position: int | None = None):
        super().__init__(message if position is None else f"{message} (at position {position})")
        self.position = position


@dataclass(frozen=True)
class AnswerForm:
    """A final answer in one of several comparable representations.

    ``normalized`` is canonical and idempotent; ``numeric_value`` is an
    exact rational when the answer is a single number or fraction;
    ``elements`` holds parsed endpoints/members for intervals and tuples.
    """

    raw: str
    normalized: str
    kind: str  # number | fraction | interval | tuple | expression
    numeric_value: Optional[Fraction] = None
    elements: Optional[tuple["AnswerForm", ...]] = None
    closed: tuple[bool, bool] = (True, True)  # interval endpoints

    def to_dict(self) -> dict:
        return {"raw": self.raw}


@dataclass(frozen=True)
class Problem:
    id: str
    prompt: str
    ground_truth: AnswerForm
    difficulty: Optional[int] = None

    def __post_init__(self) -> None:
        if not self.prompt:
            raise CorpusError(f"problem {self.id!r} has an empty prompt")

    def to_dict(self) -> dict:
        out = {"id": self.id, "prompt": self.prompt, "answer": self.ground_truth.raw}
        if self.difficulty is not None:
            out["difficulty"] = self.difficulty
        return out


@dataclass(frozen=True)
class Step:
    """One segmentation unit of a chain.

    ``char_span`` covers this step's slice of the chain text including
    the trailing separator whitespace; ``text`` is the stripped content.
    ``token_span`` is filled in per backend tokenization when needed.
    """

    index: int
    text: str
    char_span: tuple[int, int]
    token_span: Optional[tuple[int, int]] = None

    def to_dict(self) -> dict:
        out = {"index": self.index, "text": self.text, "char_span": list(self.char_span)}
        if self.token_span is not None:
            out["token_span"] = list(self.token_span)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "Step":
        return cls(
            index=d["index"],
            text=d["text"],
            char_span=tuple(d["char_span"]),
            token_span=tuple(d["token_span"]) if d.get("token_span") else None,
        )


@dataclass(frozen=True)
class ReasoningChain:
    problem_id: str
    full_text: str
    steps: tuple[Step, ...]
    terminated_naturally: bool = True

    def __post_init__(self) -> None:
        prev_end = None
        for i, step in enumerate(self.steps):
            a, b = step.char_span
            if step.index != i:
                raise CorpusError(f"step {i} carries index {step.index}")
            if not (0 <= a < b <= len(self.full_text)):
                raise CorpusError(f"step {i} span {step.char_span} out of range")
            if prev_end is not None and a < prev_end:
                raise CorpusError(f"step {i} overlaps its predecessor")
            if self.full_text[a:b].strip() != step.text:
                raise CorpusError(f"step {i} text inconsistent with its span")
            prev_end = b

    def __len__(self) -> int:
        return len(self.steps)

    def separator_after(self, index: int) -> str:
        """Whitespace between step ``index``'s content and the next step."""
        a, b = self.steps[index].char_span
        chunk = self.full_text[a:b]
        return chunk[len(chunk.rstrip()):]

    def paragraph_after(self, index: int) -> bool:
        return "\n\n" in self.separator_after(index)

    def to_dict(self) -> dict:
        return {
            "problem_id": self.problem_id,
            "full_text": self.full_text,
            "terminated_naturally": self.terminated_naturally,
            "steps": [s.to_dict() for s in self.steps],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ReasoningChain":
        return cls(
            problem_id=d["problem_id"],
            full_text=d["full_text"],
            steps=tuple(Step.from_dict(s) for s in d["steps"]),
            terminated_naturally=d.get("terminated_naturally", True),
        )


@dataclass(frozen=True)
class Subsequence:
    """Strictly increasing step indices into a chain."""

    indices: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        for prev, cur in zip(self.indices, self.indices[1:]):
            if cur <= prev:
                raise CorpusError("subsequence indices must be strictly increasing")
        if self.indices and self.indices[0] < 0:
            raise CorpusError("subsequence indices must be non-negative")

    def validate_for(self, chain_length: int) -> None:
        if self.indices and self.indices[-1] >= chain_length:
            raise CorpusError(
                f"subsequence index {self.indices[-1]} out of range for {chain_length} steps"
            )

    @classmethod
    def full(cls, chain_length: int) -> "Subsequence":
        return cls(tuple(range(chain_length)))

    @classmethod
    def prefix(cls, length: int) -> "Subsequence":
        return cls(tuple(range(length)))

    def __len__(self) -> int:
        return len(self.indices)

    def __contains__(self, index: int) -> bool:
        return index in self.indices
