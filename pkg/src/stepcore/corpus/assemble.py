"""Stitch a prompt, a step subsequence and an elicitation suffix into text.

Retained steps join with a single space; the original paragraph break is
kept only when the gap after the earlier retained step and the gap
before the later one were both paragraph breaks. The empty subsequence
degenerates to prompt + suffix, the direct-answer probe.
"""

from __future__ import annotations

from .types import ReasoningChain, Subsequence


def assemble(prompt: str, chain: ReasoningChain, sub: Subsequence, suffix: str) -> str:
    sub.validate_for(len(chain))
    if not sub.indices:
        return prompt + suffix
    parts: list[str] = [prompt]
    prev: int | None = None
    for idx in sub.indices:
        if prev is None:
            joiner = " "
        elif chain.paragraph_after(prev) and chain.paragraph_after(idx - 1):
            joiner = "\n\n"
        else:
            joiner = " "
        parts.append(joiner)
        parts.append(chain.steps[idx].text)
        prev = idx
    parts.append(suffix)
    return "".join(parts)


def subsequence_text(chain: ReasoningChain, sub: Subsequence) -> str:
    """The continuation text of a subsequence, without prompt or suffix.

    Keeps the leading separator so the result scores like a generated
    continuation; the full subsequence returns the original chain text
    exactly.
    """
    sub.validate_for(len(chain))
    if len(sub.indices) == len(chain):
        return chain.full_text
    assembled = assemble("", chain, sub, "")
    return assembled
