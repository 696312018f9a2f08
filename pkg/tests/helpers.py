"""Shared test doubles: scripted backends, judges and embedders."""

from __future__ import annotations

from typing import Callable

import numpy as np

from stepcore.backend import (
    ActivationTensor,
    BackendCapabilities,
    BackendDescriptor,
    GenerationParams,
    GenerationResult,
    char_tokenizer,
)
from stepcore.backend.types import DEFAULT_ELICITATION_SUFFIX


class ScriptedBackend:
    """Backend whose completions and perplexities follow a script.

    ``responder`` maps a prompt text to the completion text: either a
    dict of prompt -> list of completions (cycled per call), or a
    callable (prompt_text, seed) -> completion text. ``ppl_table`` maps
    continuation text to the exact perplexity score_continuation should
    induce; unknown texts get ``default_ppl``.
    """

    def __init__(
        self,
        responder=None,
        ppl_table: dict[str, float] | None = None,
        default_ppl: float = 4.0,
        suffix: str = DEFAULT_ELICITATION_SUFFIX,
    ):
        self.responder = responder or {}
        self.ppl_table = ppl_table or {}
        self.default_ppl = default_ppl
        self.tokenizer = char_tokenizer()
        self._suffix = suffix
        self._call_counts: dict[str, int] = {}
        self.generate_calls: list[str] = []

    @property
    def descriptor(self) -> BackendDescriptor:
        return BackendDescriptor(
            id="scripted",
            kind="builtin-tiny",
            layer_count=1,
            hidden_dim=8,
            vocab_size=self.tokenizer.vocab_size,
            elicitation_suffix=self._suffix,
            seed=0,
        )

    @property
    def capabilities(self) -> BackendCapabilities:
        return BackendCapabilities(gradients=False, grad_norms=False, unembedding=False)

    def tokenize(self, text: str):
        return self.tokenizer.tokenize(text)

    def detokenize(self, ids) -> str:
        return self.tokenizer.detokenize(ids)

    def generate(self, prompt, params: GenerationParams, seed=None) -> GenerationResult:
        text = prompt.text
        self.generate_calls.append(text)
        if callable(self.responder):
            completion = self.responder(text, seed)
        else:
            options = self.responder.get(text)
            if options is None:
                completion = ""
            else:
                count = self._call_counts.get(text, 0)
                self._call_counts[text] = count + 1
                completion = options[count % len(options)]
        return GenerationResult(self.tokenizer.tokenize(completion), "eos")

    def score_continuation(self, context, continuation) -> np.ndarray:
        ppl = self.ppl_table.get(continuation.text, self.default_ppl)
        return np.full(max(1, len(continuation)), -np.log(ppl))


def make_chain(problem_id: str, step_texts: list[str], prompt_gap: str = " "):
    """Build a chain whose full text is the space/period-joined steps."""
    from stepcore.corpus import chain_from_text

    full = prompt_gap + " ".join(step_texts)
    return chain_from_text(problem_id, full)


class ScriptedJudge:
    """Judge client replaying a fixed list of responses in order."""

    def __init__(self, responses: list[str]):
        self.responses = list(responses)
        self.prompts: list[str] = []
        self._cursor = 0

    def complete(self, prompt: str) -> str:
        self.prompts.append(prompt)
        if self._cursor >= len(self.responses):
            raise AssertionError("scripted judge ran out of responses")
        response = self.responses[self._cursor]
        self._cursor += 1
        return response
