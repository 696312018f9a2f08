"""Answer extraction, normalization and equivalence checking.

Supported representations: plain numbers and decimals, LaTeX and slash
fractions, closed/open intervals (bracket or inequality-chain notation),
tuples, and free-form expressions compared after whitespace removal and
commutative reordering of top-level sums. Numeric comparisons are exact
rationals; no float tolerance anywhere.
"""

from __future__ import annotations

import re
from fractions import Fraction

from .types import AnswerForm, AnswerParseError

_NUMBER_RE = re.compile(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)$")
_LATEX_FRAC_RE = re.compile(r"^([+-]?)\\[dt]?frac\{([^{}]+)\}\{([^{}]+)\}$")
_SLASH_FRAC_RE = re.compile(r"^([+-]?\d+)\s*/\s*([+-]?\d+)$")
_INEQ_CHAIN_RE = re.compile(
    r"^(.+?)\s*(?:\\le[q]?|<=|≤)\s*[a-zA-Z]\w*\s*(?:\\le[q]?|<=|≤)\s*(.+)$"
)
_IN_INTERVAL_RE = re.compile(r"^[a-zA-Z]\w*\s*(?:\\in|∈)\s*(.+)$")
_ANSWER_PHRASE_RE = re.compile(
    r"(?:answer|result)\s*(?:is|was|equals|:|=)\s*", re.IGNORECASE
)


def _try_number(text: str) -> Fraction | None:
    if _NUMBER_RE.match(text):
        return Fraction(text)
    return None


def _try_fraction(text: str) -> Fraction | None:
    m = _LATEX_FRAC_RE.match(text)
    if m:
        sign, num, den = m.groups()
        try:
            value = Fraction(num.strip()) / Fraction(den.strip())
        except (ValueError, ZeroDivisionError):
            return None
        return -value if sign == "-" else value
    m = _SLASH_FRAC_RE.match(text)
    if m:
        try:
            return Fraction(int(m.group(1)), int(m.group(2)))
        except ZeroDivisionError:
            return None
    return None


def _split_top_level(text: str, sep: str) -> list[str] | None:
    """Split on sep at zero bracket depth; None when any part is empty."""
    parts, depth, cur = [], 0, []
    for ch in text:
        if ch in "([{":
            depth += 1
        elif ch in ")]}":
            depth -= 1
        if ch == sep and depth == 0:
            parts.append("".join(cur))
            cur = []
        else:
            cur.append(ch)
    parts.append("".join(cur))
    if any(not p.strip() for p in parts):
        return None
    return [p.strip() for p in parts]


def _try_interval(text: str) -> tuple[AnswerForm, AnswerForm, tuple[bool, bool]] | None:
    m = _IN_INTERVAL_RE.match(text)
    if m:
        text = m.group(1).strip()
    m = _INEQ_CHAIN_RE.match(text)
    if m:
        lo, hi = parse_answer(m.group(1).strip()), parse_answer(m.group(2).strip())
        return lo, hi, (True, True)
    if len(text) >= 2 and text[0] in "[(" and text[-1] in ")]":
        inner = _split_top_level(text[1:-1], ",")
        if inner is not None and len(inner) == 2 and text[0] == "[":
            lo, hi = parse_answer(inner[0]), parse_answer(inner[1])
            return lo, hi, (True, text[-1] == "]")
    return None


def _normalize_expression(text: str) -> str:
    """Strip whitespace and sort top-level '+' terms (commutative sums)."""
    compact = re.sub(r"\s+", "", text)
    terms = _split_top_level(compact, "+")
    if terms is not None and len(terms) > 1:
        return "+".join(sorted(terms))
    return compact


def parse_answer(raw: str) -> AnswerForm:
    """Parse answer text into its canonical comparable form."""
    text = raw.strip()
    if text.endswith(".") and len(text) > 1:
        # Trailing sentence period; harmless for decimals ("5." == "5").
        text = text[:-1].rstrip()
    value = _try_number(text)
    if value is not None:
        return AnswerForm(raw=raw, normalized=str(value), kind="number", numeric_value=value)
    value = _try_fraction(text)
    if value is not None:
        return AnswerForm(raw=raw, normalized=str(value), kind="fraction", numeric_value=value)
    interval = _try_interval(text)
    if interval is not None:
        lo, hi, closed = interval
        left, right = "[" if closed[0] else "(", "]" if closed[1] else ")"
        return AnswerForm(
            raw=raw,
            normalized=f"{left}{lo.normalized}, {hi.normalized}{right}",
            kind="interval",
            elements=(lo, hi),
            closed=closed,
        )
    if len(text) >= 2 and text[0] == "(" and text[-1] == ")":
        inner = _split_top_level(text[1:-1], ",")
        if inner is not None and len(inner) >= 2:
            elements = tuple(parse_answer(part) for part in inner)
            normalized = "(" + ", ".join(e.normalized for e in elements) + ")"
            return AnswerForm(raw=raw, normalized=normalized, kind="tuple", elements=elements)
    return AnswerForm(raw=raw, normalized=_normalize_expression(text), kind="expression")


def answers_equivalent(a: AnswerForm, b: AnswerForm) -> bool:
    if a.numeric_value is not None and b.numeric_value is not None:
        return a.numeric_value == b.numeric_value
    if a.kind == "interval" and b.kind == "interval":
        return (
            a.closed == b.closed
            and all(answers_equivalent(x, y) for x, y in zip(a.elements, b.elements))
        )
    if a.kind == "tuple" and b.kind == "tuple":
        return len(a.elements) == len(b.elements) and all(
            answers_equivalent(x, y) for x, y in zip(a.elements, b.elements)
        )
    return a.normalized == b.normalized


def _matching_brace(text: str, open_pos: int) -> int:
    depth = 0
    for i in range(open_pos, len(text)):
        if text[i] == "{":
            depth += 1
        elif text[i] == "}":
            depth -= 1
            if depth == 0:
                return i
    raise AnswerParseError("unbalanced braces in boxed expression", position=open_pos)


def extract_answer(text: str) -> AnswerForm | None:
    """Pull the final answer out of free text.

    Prefers the last ``\\boxed{...}`` (balanced braces); falls back to the
    value trailing an answer-statement phrase. Returns None when neither
    is present; raises AnswerParseError on unbalanced boxed braces.
    """
    marker = text.rfind("\\boxed")
    if marker != -1:
        open_pos = text.find("{", marker)
        if open_pos == -1:
            raise AnswerParseError("boxed marker without opening brace", position=marker)
        close_pos = _matching_brace(text, open_pos)
        return parse_answer(text[open_pos + 1 : close_pos])
    last = None
    for m in _ANSWER_PHRASE_RE.finditer(text):
        last = m
    if last is not None:
        tail = text[last.end():]
        value = _first_sentence(tail).strip()
        if value:
            return parse_answer(value)
    return None


def _first_sentence(text: str) -> str:
    for i, ch in enumerate(text):
        if ch in ".?!" and (i + 1 == len(text) or text[i + 1] in " \n"):
            return text[:i]
        if ch == "\n":
            return text[:i]
    return text


def answer_from_completion(suffix: str, completion: str) -> AnswerForm | None:
    """Parse the answer a sampled completion produced after the suffix.

    The elicitation suffix usually opens a ``\\boxed{`` that the
    completion is expected to close; parsing their concatenation handles
    both that case and completions that restate the answer on their own.
    Unparseable completions yield None.
    """
    try:
        return extract_answer(suffix + completion)
    except AnswerParseError:
        return None
