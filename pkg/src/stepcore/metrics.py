"""Removability metrics for reasoning-chain subsequences.

Sufficiency is the fraction of K sampled completions of
prompt + subsequence + elicitation suffix that reach the ground truth;
attainability reverse-normalizes the subsequence perplexity between the
full chain (lower reference) and the bare direct-answer string (upper
reference), clamped to [0, 1]. Necessity filtering, shortcut-step
detection and sufficient-prefix search are built on the same completion
machinery, deliberately sharing one code path for drawing and judging
completions.

Randomness is derived, never global: every evaluation seeds its own
stream from (run seed, problem id, purpose, subsequence), so results are
reproducible per run and independent of cross-problem execution order.
"""

from __future__ import annotations

import hashlib
import json
import math
import re
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .backend.types import GenerationParams
from .corpus import (
    AnswerForm,
    ReasoningChain,
    Problem,
    Subsequence,
    answer_from_completion,
    answers_equivalent,
    assemble,
    extract_answer,
    subsequence_text,
)
from .corpus.types import AnswerParseError

DEFAULT_SAMPLING = GenerationParams(
    mode="sampled", temperature=0.6, top_p=0.95, max_new_tokens=64
)

ATTAINABILITY_SWEEP = (0.6, 0.8, 0.9, 0.99)

_DIRECT_ANSWER_OPENERS = (
    "Thus", "Therefore", "So", "Hence", "Consequently", "This means", "My", "The",
)


@dataclass(frozen=True)
class MetricsConfig:
    """Thresholds, resample count, sampling params and suffix override."""

    tau_suff: float = 0.8
    tau_atnb: float = 0.8
    resamples: int = 5
    sampling: GenerationParams = DEFAULT_SAMPLING
    suffix: Optional[str] = None  # None: use the backend's elicitation suffix

    def __post_init__(self) -> None:
        if not (0.0 <= self.tau_suff <= 1.0 and 0.0 <= self.tau_atnb <= 1.0):
            raise ValueError("thresholds must lie in [0, 1]")
        if self.resamples < 1:
            raise ValueError("resamples must be >= 1")

    def to_dict(self) -> dict:
        return {
            "tau_suff": self.tau_suff,
            "tau_atnb": self.tau_atnb,
            "resamples": self.resamples,
            "sampling": {
                "mode": self.sampling.mode,
                "temperature": self.sampling.temperature,
                "top_p": self.sampling.top_p,
                "max_new_tokens": self.sampling.max_new_tokens,
            },
            "suffix": self.suffix,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MetricsConfig":
        sampling = d.get("sampling")
        params = GenerationParams(**sampling) if sampling else DEFAULT_SAMPLING
        return cls(
            tau_suff=d.get("tau_suff", 0.8),
            tau_atnb=d.get("tau_atnb", 0.8),
            resamples=d.get("resamples", 5),
            sampling=params,
            suffix=d.get("suffix"),
        )


@dataclass(frozen=True)
class Completion:
    text: str
    answer: Optional[AnswerForm]
    correct: bool


@dataclass(frozen=True)
class SubsequenceScore:
    sufficiency: float
    attainability: float
    attainability_raw: float
    ppl_sub: float
    ppl_chain: float
    ppl_direct: float
    completions: tuple[Completion, ...] = ()
    attainability_valid: bool = True

    def passes(self, config: MetricsConfig) -> bool:
        return (
            self.sufficiency >= config.tau_suff
            and self.attainability_valid
            and self.attainability >= config.tau_atnb
        )

    def to_record(self, problem_id: str, indices, seed: int) -> dict:
        return {
            "problem_id": problem_id,
            "sub_indices": list(indices),
            "sufficiency": self.sufficiency,
            "attainability": self.attainability,
            "ppl_T": self.ppl_sub,
            "ppl_o": self.ppl_chain,
            "ppl_direct": self.ppl_direct,
            "seed": seed,
        }


@dataclass(frozen=True)
class PrefixResult:
    found: bool
    p: Optional[int]
    score: Optional[SubsequenceScore]
    scanned: tuple[tuple[int, float, float], ...]


@dataclass(frozen=True)
class ShortcutResult:
    indices: tuple[int, ...]
    remaining_sufficient: bool
    remaining_sufficiency: Optional[float]
    singleton_sufficiency: dict = field(default_factory=dict)


def derive_seed(*parts) -> int:
    """Deterministic 63-bit seed from arbitrary hashable parts."""
    blob = json.dumps([str(p) for p in parts], separators=(",", ":")).encode("utf-8")
    return int.from_bytes(hashlib.sha256(blob).digest()[:8], "big") >> 1


def resolve_suffix(config: MetricsConfig, backend) -> str:
    return config.suffix if config.suffix is not None else backend.descriptor.elicitation_suffix


def direct_answer_text(suffix: str, answer: AnswerForm) -> str:
    """The bare answer statement: suffix plus ground truth, braces closed."""
    closing = "}" if suffix.count("{") > suffix.count("}") else ""
    return suffix + answer.raw + closing


def perplexity(logprobs: np.ndarray) -> float:
    return float(np.exp(-np.mean(logprobs)))


# ----------------------------------------------------------------------
# Completion drawing: the single code path behind sufficiency and
# necessity (identical sampling, identical answer judging).
# ----------------------------------------------------------------------


def draw_completions(
    prompt_text: str,
    problem: Problem,
    config: MetricsConfig,
    backend,
    eval_seed: int,
) -> list[Completion]:
    suffix = resolve_suffix(config, backend)
    prompt = backend.tokenize(prompt_text)
    out: list[Completion] = []
    for k in range(config.resamples):
        result = backend.generate(prompt, config.sampling, seed=derive_seed(eval_seed, k))
        answer = answer_from_completion(suffix, result.tokens.text)
        correct = answer is not None and answers_equivalent(answer, problem.ground_truth)
        out.append(Completion(result.tokens.text, answer, correct))
    return out


def sufficiency(
    problem: Problem,
    chain: ReasoningChain,
    sub: Subsequence,
    config: MetricsConfig,
    backend,
    eval_seed: int,
) -> tuple[float, list[Completion]]:
    suffix = resolve_suffix(config, backend)
    prompt_text = assemble(problem.prompt, chain, sub, suffix)
    completions = draw_completions(prompt_text, problem, config, backend, eval_seed)
    fraction = sum(c.correct for c in completions) / config.resamples
    return fraction, completions


@dataclass(frozen=True)
class ReferencePerplexities:
    """Per-problem attainability bounds, computed once and reused."""

    ppl_chain: float
    ppl_direct: float


def reference_perplexities(
    problem: Problem, chain: ReasoningChain, config: MetricsConfig, backend
) -> ReferencePerplexities:
    suffix = resolve_suffix(config, backend)
    context = backend.tokenize(problem.prompt)
    ppl_chain = perplexity(
        backend.score_continuation(context, backend.tokenize(chain.full_text))
    )
    direct = direct_answer_text(suffix, problem.ground_truth)
    ppl_direct = perplexity(backend.score_continuation(context, backend.tokenize(direct)))
    return ReferencePerplexities(ppl_chain, ppl_direct)


def attainability(
    problem: Problem,
    chain: ReasoningChain,
    sub: Subsequence,
    config: MetricsConfig,
    backend,
    refs: Optional[ReferencePerplexities] = None,
) -> tuple[float, float, float, ReferencePerplexities, bool]:
    """Returns (clamped, raw, ppl_sub, refs, valid)."""
    if refs is None:
        refs = reference_perplexities(problem, chain, config, backend)
    suffix = resolve_suffix(config, backend)
    if not sub.indices:
        text = direct_answer_text(suffix, problem.ground_truth)
    else:
        text = subsequence_text(chain, sub)
    context = backend.tokenize(problem.prompt)
    ppl_sub = perplexity(backend.score_continuation(context, backend.tokenize(text)))
    denom = refs.ppl_direct - refs.ppl_chain
    if abs(denom) < 1e-12:
        return 0.0, math.nan, ppl_sub, refs, False
    raw = 1.0 - (ppl_sub - refs.ppl_chain) / denom
    return min(1.0, max(0.0, raw)), raw, ppl_sub, refs, True


def necessity_filter(
    problem: Problem, config: MetricsConfig, backend, eval_seed: int
) -> tuple[bool, list[Completion]]:
    """True when the model cannot answer directly: at most one in five
    suffix-only completions is correct."""
    suffix = resolve_suffix(config, backend)
    completions = draw_completions(
        problem.prompt + suffix, problem, config, backend, eval_seed
    )
    correct = sum(c.correct for c in completions)
    return correct * 5 <= config.resamples, completions


# ----------------------------------------------------------------------
# Shortcut steps
# ----------------------------------------------------------------------

_NUMERIC_LITERAL = re.compile(r"-?\d+(?:\.\d+)?(?:/\d+)?")


def _states_answer_directly(step_text: str, truth: AnswerForm) -> bool:
    if not step_text.startswith(_DIRECT_ANSWER_OPENERS):
        return False
    lowered = step_text.lower()
    if "answer" not in lowered and "result" not in lowered:
        return False
    return _contains_equivalent_value(step_text, truth)


def _contains_equivalent_value(text: str, truth: AnswerForm) -> bool:
    from .corpus import parse_answer

    for match in _NUMERIC_LITERAL.finditer(text):
        try:
            if answers_equivalent(parse_answer(match.group()), truth):
                return True
        except AnswerParseError:
            continue
    return False


def _contains_equivalent_boxed(step_text: str, truth: AnswerForm) -> bool:
    if "\\boxed" not in step_text:
        return False
    try:
        found = extract_answer(step_text)
    except AnswerParseError:
        return False
    return found is not None and answers_equivalent(found, truth)


def detect_shortcut_steps(
    problem: Problem,
    chain: ReasoningChain,
    config: MetricsConfig,
    backend,
    run_seed: int,
) -> ShortcutResult:
    """Steps that alone give the answer away, plus a post-removal check.

    A step is a shortcut when its singleton sufficiency clears the
    threshold, it contains a boxed value equivalent to the ground truth,
    or it states the answer directly. When any were found, the surviving
    chain is re-scored for sufficiency; a failure marks the chain invalid.
    """
    shortcuts: list[int] = []
    singleton: dict[int, float] = {}
    for step in chain.steps:
        if _contains_equivalent_boxed(step.text, problem.ground_truth) or _states_answer_directly(
            step.text, problem.ground_truth
        ):
            shortcuts.append(step.index)
            continue
        seed = derive_seed(run_seed, problem.id, "shortcut", step.index)
        frac, _ = sufficiency(
            problem, chain, Subsequence((step.index,)), config, backend, seed
        )
        singleton[step.index] = frac
        if frac >= config.tau_suff:
            shortcuts.append(step.index)
    if not shortcuts:
        return ShortcutResult((), True, None, singleton)
    kept = tuple(i for i in range(len(chain)) if i not in shortcuts)
    if not kept:
        return ShortcutResult(tuple(shortcuts), False, 0.0, singleton)
    seed = derive_seed(run_seed, problem.id, "shortcut-reverify")
    frac, _ = sufficiency(problem, chain, Subsequence(kept), config, backend, seed)
    return ShortcutResult(tuple(shortcuts), frac >= config.tau_suff, frac, singleton)


def filter_chain(chain: ReasoningChain, kept_indices) -> ReasoningChain:
    """Chain restricted to the kept steps, re-indexed contiguously."""
    steps = tuple(
        replace(chain.steps[original], index=new)
        for new, original in enumerate(kept_indices)
    )
    return ReasoningChain(
        problem_id=chain.problem_id,
        full_text=chain.full_text,
        steps=steps,
        terminated_naturally=chain.terminated_naturally,
    )


# ----------------------------------------------------------------------
# Chain evaluator: memoized subsequence scoring with derived seeds
# ----------------------------------------------------------------------


class ChainEvaluator:
    """Scores step subsequences of one chain against both thresholds.

    Scores are memoized by index set (greedy extraction re-tests sets
    repeatedly and each evaluation costs K generations). Seeds derive
    from (run seed, problem id, purpose, index set), so a post-hoc
    re-check of any subsequence reproduces the recorded score exactly.
    """

    def __init__(
        self,
        problem: Problem,
        chain: ReasoningChain,
        config: MetricsConfig,
        backend,
        run_seed: int,
        purpose: str = "eval",
    ):
        self.problem = problem
        self.chain = chain
        self.config = config
        self.backend = backend
        self.run_seed = run_seed
        self.purpose = purpose
        self._refs: Optional[ReferencePerplexities] = None
        self._memo: dict[frozenset, SubsequenceScore] = {}
        self.evaluation_count = 0

    def subsequence_seed(self, indices) -> int:
        return derive_seed(
            self.run_seed, self.problem.id, self.purpose, tuple(sorted(indices))
        )

    def score_subsequence(self, indices, fresh: bool = False) -> SubsequenceScore:
        key = frozenset(indices)
        if not fresh and key in self._memo:
            return self._memo[key]
        sub = Subsequence(tuple(sorted(indices)))
        seed = self.subsequence_seed(indices)
        if fresh:
            seed = derive_seed(seed, "recheck")
        suff, completions = sufficiency(
            self.problem, self.chain, sub, self.config, self.backend, seed
        )
        clamped, raw, ppl_sub, refs, valid = attainability(
            self.problem, self.chain, sub, self.config, self.backend, self._refs
        )
        self._refs = refs
        score = SubsequenceScore(
            sufficiency=suff,
            attainability=clamped,
            attainability_raw=raw,
            ppl_sub=ppl_sub,
            ppl_chain=refs.ppl_chain,
            ppl_direct=refs.ppl_direct,
            completions=tuple(completions),
            attainability_valid=valid,
        )
        self.evaluation_count += 1
        if not fresh:
            self._memo[key] = score
        return score

    def passes(self, indices, fresh: bool = False) -> bool:
        return self.score_subsequence(indices, fresh=fresh).passes(self.config)


# ----------------------------------------------------------------------
# Sufficient prefix
# ----------------------------------------------------------------------


def sufficient_prefix(
    problem: Problem,
    chain: ReasoningChain,
    config: MetricsConfig,
    backend,
    run_seed: int,
    scan: str = "gallop",
) -> PrefixResult:
    """Shortest contiguous prefix clearing both thresholds.

    The gallop schedule doubles the candidate length until one passes,
    bisects back to the boundary, then re-verifies the boundary with a
    fresh evaluation (falling back to a forward linear scan if the
    re-check disagrees, since sufficiency need not be monotone in length).
    ``scan="linear"`` forces the exhaustive schedule.
    """
    if scan not in ("gallop", "linear"):
        raise ValueError(f"unknown prefix scan mode: {scan!r}")
    n = len(chain)
    evaluator = ChainEvaluator(problem, chain, config, backend, run_seed, purpose="prefix")
    scanned: list[tuple[int, float, float]] = []

    def evaluate(p: int, fresh: bool = False) -> SubsequenceScore:
        score = evaluator.score_subsequence(range(p), fresh=fresh)
        scanned.append((p, score.sufficiency, score.attainability))
        return score

    def result(p: Optional[int], score: Optional[SubsequenceScore]) -> PrefixResult:
        return PrefixResult(p is not None, p, score, tuple(scanned))

    if n == 0:
        return result(None, None)

    if scan == "linear":
        for p in range(1, n + 1):
            score = evaluate(p)
            if score.passes(config):
                return result(p, score)
        return result(None, None)

    last_fail = 0
    p = 1
    first_pass: Optional[int] = None
    while p < n:
        if evaluate(p).passes(config):
            first_pass = p
            break
        last_fail = p
        p *= 2
    if first_pass is None:
        if evaluate(n).passes(config):
            first_pass = n
        else:
            return result(None, None)
    lo, hi = last_fail, first_pass
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if evaluate(mid).passes(config):
            hi = mid
        else:
            lo = mid
    verify = evaluate(hi, fresh=True)
    if verify.passes(config):
        return result(hi, verify)
    for p in range(hi + 1, n + 1):
        score = evaluate(p)
        if score.passes(config):
            return result(p, score)
    return result(None, None)
