"""Zero-shot removability classification through an external judge."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

from ..corpus import ReasoningChain
from ..judge import JudgeClient, JudgeParseError, parse_verdict, render, sentence_lines


@dataclass(frozen=True)
class JudgeVerdict:
    step_index: int
    context_mode: str  # "none" | "full"
    verdict: str  # "removable" | "nonremovable"
    raw_response: str

    def to_dict(self) -> dict:
        return {
            "step_index": self.step_index,
            "context_mode": self.context_mode,
            "verdict": self.verdict,
            "raw_response": self.raw_response,
        }


def classification_prompt(
    step_text: str,
    step_index: Optional[int] = None,
    question: Optional[str] = None,
    chain_steps: Optional[Sequence[tuple[int, str]]] = None,
) -> str:
    """Prompt for one step, with or without the full numbered chain."""
    if chain_steps is None:
        return render("classify_step", sentence=step_text)
    return render(
        "classify_step_in_context",
        question=question or "",
        sentence_lines=sentence_lines(chain_steps, marked_index=step_index),
    )


def judge_classify(
    step_index: int,
    judge: JudgeClient,
    chain: Optional[ReasoningChain] = None,
    question: Optional[str] = None,
    step_text: Optional[str] = None,
) -> JudgeVerdict:
    """Classify one step as removable or nonremovable.

    With a chain, the full-context prompt marks the target line; without
    one, the step text alone is judged. A malformed verdict gets one
    retry before failing with the raw response retained.
    """
    if chain is not None:
        text = chain.steps[step_index].text
        prompt = classification_prompt(
            text,
            step_index=step_index,
            question=question,
            chain_steps=[(s.index, s.text) for s in chain.steps],
        )
        mode = "full"
    else:
        if step_text is None:
            raise ValueError("need either a chain or the step text")
        text = step_text
        prompt = classification_prompt(text)
        mode = "none"
    response = judge.complete(prompt)
    try:
        verdict = parse_verdict(response)
    except JudgeParseError:
        response = judge.complete(prompt)
        verdict = parse_verdict(response)  # second failure propagates
    return JudgeVerdict(step_index, mode, verdict, response)
