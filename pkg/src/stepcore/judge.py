"""External-judge client: prompt templates, transports, transcripts.

A judge is any chat-completion endpoint reachable through a transport
callable (prompt text in, response text out). The client runs greedy
decoding semantics (temperature 0, generous output budget) and records
every exchange so runs can be replayed bit for bit. Prompt templates
live as package data files with ``{question}``, ``{sentence_lines}``,
``{valid_indices}`` and ``{sentence}`` placeholders, substituted
literally (templates contain real braces, so no format-string parsing).
"""

from __future__ import annotations

import hashlib
import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Callable, Optional

PROMPT_FILES = {
    "influence_filter": "influence_filter.txt",
    "importance_ranking": "importance_ranking.txt",
    "classify_step": "classify_step.txt",
    "classify_step_in_context": "classify_step_in_context.txt",
}

_FENCED_JSON = re.compile(r"```json\s*(.*?)```", re.DOTALL)


class JudgeError(Exception):
    pass


class JudgeParseError(JudgeError):
    """Response not parseable; retains the raw response for inspection."""

    def __init__(self, message: str, raw_response: str):
        super().__init__(message)
        self.raw_response = raw_response


class JudgeValidationError(JudgeError):
    """Response parsed but violates the index contract."""


def load_template(name: str) -> str:
    filename = PROMPT_FILES[name]
    text = resources.files("stepcore.data.prompts").joinpath(filename).read_text("utf-8")
    return text[:-1] if text.endswith("\n") else text


def render(template_name: str, **fields: str) -> str:
    text = load_template(template_name)
    for key, value in fields.items():
        text = text.replace("{" + key + "}", value)
    return text


def sentence_lines(steps, marked_index: Optional[int] = None) -> str:
    """Numbered step lines; the marked target line gets a >>> prefix."""
    lines = []
    for index, text in steps:
        prefix = ">>> " if index == marked_index else ""
        lines.append(f"{prefix}[{index}] {text}")
    return "\n".join(lines)


@dataclass(frozen=True)
class JudgeExchange:
    prompt: str
    response: str

    def to_dict(self) -> dict:
        return {"prompt": self.prompt, "response": self.response}


@dataclass
class JudgeClient:
    """Chat-completion wrapper with a pluggable transport.

    ``transport`` is called once per prompt; decoding parameters travel
    with the client so remote transports can honor them.
    """

    transport: Callable[[str], str]
    model_id: str = "external-judge"
    temperature: float = 0.0
    max_output_tokens: int = 24000
    transcript: list[JudgeExchange] = field(default_factory=list)

    def complete(self, prompt: str) -> str:
        response = self.transport(prompt)
        self.transcript.append(JudgeExchange(prompt, response))
        return response

    def save_transcript(self, path) -> None:
        records = [e.to_dict() for e in self.transcript]
        Path(path).write_text(json.dumps(records, indent=2) + "\n", encoding="utf-8")


def prompt_key(prompt: str) -> str:
    return hashlib.sha256(prompt.encode("utf-8")).hexdigest()


class ReplayTransport:
    """Replays recorded exchanges, matched by prompt content."""

    def __init__(self, exchanges: list[dict]):
        self._by_key: dict[str, list[str]] = {}
        for e in exchanges:
            self._by_key.setdefault(prompt_key(e["prompt"]), []).append(e["response"])
        self._cursors: dict[str, int] = {}

    @classmethod
    def from_file(cls, path) -> "ReplayTransport":
        return cls(json.loads(Path(path).read_text("utf-8")))

    def __call__(self, prompt: str) -> str:
        key = prompt_key(prompt)
        responses = self._by_key.get(key)
        if not responses:
            raise JudgeError(f"no recorded response for prompt {key[:12]}")
        cursor = self._cursors.get(key, 0)
        self._cursors[key] = cursor + 1
        return responses[min(cursor, len(responses) - 1)]


class RuleBasedTransport:
    """Deterministic local stand-in for an external judge.

    Understands the four shipped prompts well enough to emit protocol-
    valid responses: declares nothing removable, ranks steps in index
    order, and classifies by sentence-hash parity. Useful for exercising
    the full pipeline without network access.
    """

    def __call__(self, prompt: str) -> str:
        if "output your final ranking" in prompt:
            match = re.search(r"exactly the indices \[(.*?)\]", prompt, re.DOTALL)
            inner = match.group(1).strip() if match else ""
            return f"Ranked by position.\n```json\n[{inner}]\n```"
        if "JSON list of step indices" in prompt:
            return "Nothing looks removable.\n```json\n[]\n```"
        if 'output ONLY the word "removable" or "nonremovable"' in prompt:
            target = _classification_target(prompt)
            parity = int(hashlib.sha256(target.encode("utf-8")).hexdigest(), 16) % 2
            return "Considering the role.\n" + ("removable" if parity else "nonremovable")
        raise JudgeError("rule-based judge cannot interpret this prompt")


def _classification_target(prompt: str) -> str:
    marked = re.search(r"^>>> \[\d+\] (.*)$", prompt, re.MULTILINE)
    if marked:
        return marked.group(1)
    single = re.search(r"^Sentence: (.*)$", prompt, re.DOTALL | re.MULTILINE)
    return single.group(1) if single else prompt


def parse_fenced_json_list(response: str) -> list[int]:
    """Last ```json fenced list of integers in the response."""
    matches = _FENCED_JSON.findall(response)
    if not matches:
        raise JudgeParseError("no ```json fenced block in response", response)
    try:
        payload = json.loads(matches[-1].strip())
    except json.JSONDecodeError as exc:
        raise JudgeParseError(f"fenced block is not valid JSON: {exc}", response) from exc
    if not isinstance(payload, list) or not all(isinstance(x, int) for x in payload):
        raise JudgeParseError("fenced JSON is not a list of integers", response)
    return payload


def parse_verdict(response: str) -> str:
    """Case-insensitive removable/nonremovable from the last non-empty line."""
    lines = [line.strip() for line in response.splitlines() if line.strip()]
    if not lines:
        raise JudgeParseError("empty judge response", response)
    word = lines[-1].strip().strip(".\"'*").lower()
    if word in ("removable", "nonremovable"):
        return word
    raise JudgeParseError(f"last line is not a verdict: {lines[-1]!r}", response)
