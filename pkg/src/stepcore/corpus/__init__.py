"""Data model and text processing for problems, chains, steps and answers."""

from .answers import (
    answer_from_completion,
    answers_equivalent,
    extract_answer,
    parse_answer,
)
from .assemble import assemble, subsequence_text
from .datasets import DatasetError, load_dataset, read_jsonl, save_dataset, write_jsonl
from .segment import segment
from .types import (
    AnswerForm,
    AnswerParseError,
    CorpusError,
    Problem,
    ReasoningChain,
    Step,
    Subsequence,
)

__all__ = [
    "AnswerForm",
    "AnswerParseError",
    "CorpusError",
    "DatasetError",
    "Problem",
    "ReasoningChain",
    "Step",
    "Subsequence",
    "answer_from_completion",
    "answers_equivalent",
    "assemble",
    "extract_answer",
    "load_dataset",
    "parse_answer",
    "read_jsonl",
    "save_dataset",
    "segment",
    "subsequence_text",
    "write_jsonl",
]


def chain_from_text(problem_id: str, full_text: str, terminated_naturally: bool = True) -> ReasoningChain:
    """Segment generated text into a chain."""
    return ReasoningChain(
        problem_id=problem_id,
        full_text=full_text,
        steps=tuple(segment(full_text)),
        terminated_naturally=terminated_naturally,
    )


def token_spans_for_steps(token_offsets, steps) -> list[tuple[int, int] | None]:
    """Map step char spans to token spans under a given tokenization.

    ``token_offsets`` are (start, end) char offsets per token of the text
    the steps were segmented from. A token belongs to the step containing
    its first character; steps that end up with no tokens map to None.
    """
    spans: list[tuple[int, int] | None] = []
    for step in steps:
        a, b = step.char_span
        first = last = None
        for t, (ts, _te) in enumerate(token_offsets):
            if a <= ts < b:
                if first is None:
                    first = t
                last = t
        spans.append(None if first is None else (first, last + 1))
    return spans


__all__ += ["chain_from_text", "token_spans_for_steps"]
