"""Pairwise step-influence matrices from input-embedding attribution.

For each target step j in the analysis prefix, the gradient of the sum
of its token probabilities is taken with respect to every input token
embedding (teacher forcing over the original chain tokens, prompt
included); entry (j, i) is the Frobenius norm of that gradient restricted
to step i's token block. Self and backward influence are fixed at zero,
so matrices are strictly lower triangular in (j, i).

Methods: plain gradient norms, gradient elementwise times the embedding,
and integrated gradients along the straight path from a baseline (the
mean embedding of the chain tokens, by default) with right-endpoint
accumulation so a single step from a zero baseline degenerates to the
gradient-times-input attribution exactly.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .backend.types import TokenSequence, UnsupportedCapabilityError
from .corpus import Problem, ReasoningChain, token_spans_for_steps

METHODS = ("gradient", "grad_x_input", "integrated_gradients")


class InfluenceError(Exception):
    pass


@dataclass(frozen=True)
class InfluenceMatrix:
    """values[j, i] is the influence of step i on step j; zero for j <= i."""

    problem_id: str
    values: np.ndarray
    method: str

    def __post_init__(self) -> None:
        v = self.values
        if v.ndim != 2 or v.shape[0] != v.shape[1]:
            raise InfluenceError("influence matrix must be square")
        if self.method not in METHODS:
            raise InfluenceError(f"unknown attribution method {self.method!r}")
        if not np.all(np.isfinite(v)):
            raise InfluenceError("influence matrix contains non-finite entries")
        if np.any(v < 0):
            raise InfluenceError("influence entries must be non-negative")
        if np.any(np.triu(v) != 0):
            raise InfluenceError("influence must be strictly lower triangular")

    @property
    def p(self) -> int:
        return self.values.shape[0]


def concat_sequences(a: TokenSequence, b: TokenSequence) -> TokenSequence:
    shift = len(a.text)
    offsets = a.char_offsets + tuple((s + shift, e + shift) for s, e in b.char_offsets)
    return TokenSequence(a.token_ids + b.token_ids, a.text + b.text, offsets)


def prefix_token_layout(
    problem: Problem, chain: ReasoningChain, prefix_p: int, backend
) -> tuple[TokenSequence, list[tuple[int, int]]]:
    """Teacher-forcing tokens (prompt + chain) and prefix-step token spans.

    The prompt and the chain text are tokenized independently, mirroring
    how the chain was produced as a continuation, and step char spans map
    to token spans by the first-character rule.
    """
    ctx = backend.tokenize(problem.prompt)
    chain_seq = backend.tokenize(chain.full_text)
    spans = token_spans_for_steps(chain_seq.char_offsets, chain.steps[:prefix_p])
    shifted: list[tuple[int, int]] = []
    for step, span in zip(chain.steps[:prefix_p], spans):
        if span is None:
            raise InfluenceError(f"step {step.index} maps to no tokens")
        shifted.append((span[0] + len(ctx), span[1] + len(ctx)))
    return concat_sequences(ctx, chain_seq), shifted


def _attribution_for_target(
    backend,
    tokens: TokenSequence,
    target_span: tuple[int, int],
    method: str,
    ig_steps: int,
    ig_baseline: str,
    chain_token_range: tuple[int, int],
) -> np.ndarray:
    """Per-position attribution matrix (tokens, d) for one target step."""
    if method == "gradient":
        return backend.grad_scalar_wrt_embeddings(tokens, target_span).values
    emb_full = backend.input_embeddings(tokens.token_ids)  # includes BOS row
    emb_user = emb_full[1:]
    if method == "grad_x_input":
        grad = backend.grad_scalar_wrt_embeddings(tokens, target_span).values
        return grad * emb_user
    if method == "integrated_gradients":
        if ig_baseline == "zero":
            base = np.zeros_like(emb_user)
        elif ig_baseline == "chain_mean":
            lo, hi = chain_token_range
            base = np.broadcast_to(
                emb_user[lo:hi].mean(axis=0), emb_user.shape
            ).copy()
        else:
            raise InfluenceError(f"unknown integrated-gradients baseline {ig_baseline!r}")
        accumulated = np.zeros_like(emb_user)
        for k in range(1, ig_steps + 1):
            alpha = k / ig_steps
            interp = emb_full.copy()
            interp[1:] = base + alpha * (emb_user - base)
            grad = backend.grad_scalar_wrt_embeddings(
                tokens, target_span, emb_override=interp
            ).values
            accumulated += grad
        return (emb_user - base) * (accumulated / ig_steps)
    raise InfluenceError(f"unknown attribution method {method!r}")


def influence_matrix(
    problem: Problem,
    chain: ReasoningChain,
    prefix_p: int,
    method: str,
    backend,
    ig_steps: int = 5,
    ig_baseline: str = "chain_mean",
) -> InfluenceMatrix:
    if not (1 <= prefix_p <= len(chain)):
        raise InfluenceError(f"prefix_p {prefix_p} out of range for {len(chain)} steps")
    if method not in METHODS:
        raise InfluenceError(f"unknown attribution method {method!r}")
    tokens, spans = prefix_token_layout(problem, chain, prefix_p, backend)
    caps = backend.capabilities
    values = np.zeros((prefix_p, prefix_p))
    chain_range = (spans[0][0], spans[-1][1])
    if caps.gradients:
        for j in range(1, prefix_p):
            attribution = _attribution_for_target(
                backend, tokens, spans[j], method, ig_steps, ig_baseline, chain_range
            )
            for i in range(j):
                a, b = spans[i]
                values[j, i] = float(np.linalg.norm(attribution[a:b]))
    elif caps.grad_norms:
        if method != "gradient":
            raise UnsupportedCapabilityError(
                f"backend provides gradient norms only; method {method!r} needs full gradients"
            )
        for j in range(1, prefix_p):
            norms = backend.grad_span_norms(tokens, spans[j], spans[:j])
            values[j, :j] = norms
    else:
        raise UnsupportedCapabilityError("backend does not support gradients")
    return InfluenceMatrix(problem.id, values, method)


# ----------------------------------------------------------------------
# Binary persistence: one JSON header line + row-major float32 payload,
# with a JSON sidecar summarizing row and column sums.
# ----------------------------------------------------------------------


def save_influence(path, matrix: InfluenceMatrix) -> None:
    path = Path(path)
    header = {"problem_id": matrix.problem_id, "p": matrix.p, "method": matrix.method}
    with path.open("wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(matrix.values.astype("<f4").tobytes())
    summary = {
        "problem_id": matrix.problem_id,
        "method": matrix.method,
        "row_sums": matrix.values.sum(axis=1).tolist(),
        "col_sums": matrix.values.sum(axis=0).tolist(),
    }
    path.with_suffix(path.suffix + ".summary.json").write_text(
        json.dumps(summary, indent=2) + "\n", encoding="utf-8"
    )


def load_influence(path) -> InfluenceMatrix:
    with Path(path).open("rb") as fh:
        header = json.loads(fh.readline().decode("utf-8"))
        payload = fh.read()
    p = header["p"]
    values = np.frombuffer(payload, dtype="<f4").astype(np.float64).reshape(p, p)
    return InfluenceMatrix(header["problem_id"], values, header["method"])
