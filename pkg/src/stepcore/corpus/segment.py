"""Split chain text into sentence/paragraph-level steps.

Boundaries are paragraph breaks (two consecutive newlines) and sentence
enders (``.``, ``?``, ``!`` followed by a space or newline). The
delimiter and any following whitespace attach to the preceding step's
span, so spans tile the input exactly. A period inside ``3.14`` does not
split because it is not followed by whitespace.
"""

from __future__ import annotations

from .types import Step

_SENTENCE_END = ".?!"
_WHITESPACE = " \t\n\r"


def _whitespace_run_end(text: str, start: int) -> int:
    end = start
    while end < len(text) and text[end] in _WHITESPACE:
        end += 1
    return end


def segment(full_text: str) -> list[Step]:
    """Segment text into steps whose char spans tile the input."""
    if not full_text:
        return []
    breaks = {0, len(full_text)}
    n = len(full_text)
    for i, ch in enumerate(full_text):
        if ch in _SENTENCE_END and i + 1 < n and full_text[i + 1] in " \n":
            breaks.add(_whitespace_run_end(full_text, i + 1))
        elif ch == "\n" and i + 1 < n and full_text[i + 1] == "\n":
            breaks.add(_whitespace_run_end(full_text, i))
    bounds = sorted(breaks)
    steps: list[Step] = []
    carry_start: int | None = None
    for a, b in zip(bounds, bounds[1:]):
        start = a if carry_start is None else carry_start
        text = full_text[start:b].strip()
        if not text:
            # Pure-whitespace fragment: fold into a neighbor's span.
            if steps:
                prev = steps[-1]
                steps[-1] = Step(prev.index, prev.text, (prev.char_span[0], b))
            else:
                carry_start = start
            continue
        carry_start = None
        steps.append(Step(len(steps), text, (start, b)))
    return steps
