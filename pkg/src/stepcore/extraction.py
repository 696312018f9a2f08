"""Two-stage greedy extraction of the core reasoning subsequence.

Stage 1 masks the steps with direct or transitive influence on the final
prefix step, sweeping retention thresholds from permissive to total
until the masked subsequence clears both removability thresholds.
Stage 2 walks the masked steps from least to most mean influence,
tentatively dropping each and keeping the drop only when the remaining
subsequence still clears both thresholds; a step that fails re-enters
the back of the queue, and the loop stops once every remaining candidate
has failed since the last successful removal.

Variants swap the ranking signal: activation (mean influence from the
attribution matrix), token judge (an external model filters and ranks),
or a seeded random order over the whole prefix.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .corpus import Step, Subsequence
from .influence import InfluenceMatrix
from .judge import (
    JudgeClient,
    JudgeValidationError,
    parse_fenced_json_list,
    render,
    sentence_lines,
)
from .metrics import ChainEvaluator, MetricsConfig

VARIANTS = ("activation", "token_judge", "random")
THRESHOLD_SWEEP = tuple(round(0.1 * k, 1) for k in range(1, 11))

LABEL_REMOVABLE = "removable"
LABEL_NON_REMOVABLE = "non_removable"
LABEL_UNLABELED = "unlabeled"


class ExtractionError(Exception):
    pass


@dataclass(frozen=True)
class InfluenceMask:
    """Stage-1 retention mask over the prefix; the final step is always set."""

    included: tuple[bool, ...]
    threshold: Optional[float]

    def __post_init__(self) -> None:
        if not self.included or not self.included[-1]:
            raise ExtractionError("mask must retain the final prefix step")

    @property
    def indices(self) -> tuple[int, ...]:
        return tuple(i for i, kept in enumerate(self.included) if kept)

    def __len__(self) -> int:
        return len(self.included)


@dataclass(frozen=True)
class RemovalAttempt:
    step: int
    removed: bool
    sufficiency: float
    attainability: float


@dataclass(frozen=True)
class CoreResult:
    core: Subsequence
    mask: InfluenceMask
    removal_log: tuple[RemovalAttempt, ...]
    variant: str
    passed_final_check: bool
    final_sufficiency: float
    final_attainability: float

    def to_dict(self, problem_id: str) -> dict:
        return {
            "problem_id": problem_id,
            "variant": self.variant,
            "core": list(self.core.indices),
            "mask": list(self.mask.indices),
            "threshold": self.mask.threshold,
            "passed_final_check": self.passed_final_check,
            "final_sufficiency": self.final_sufficiency,
            "final_attainability": self.final_attainability,
            "removal_log": [
                {
                    "step": a.step,
                    "removed": a.removed,
                    "sufficiency": a.sufficiency,
                    "attainability": a.attainability,
                }
                for a in self.removal_log
            ],
        }


@dataclass(frozen=True)
class StepLabel:
    step_index: int
    label: str
    source_stage: str  # "mask" | "core" | "pruned"

    def to_dict(self) -> dict:
        return {"step_index": self.step_index, "label": self.label, "stage": self.source_stage}


# ----------------------------------------------------------------------
# Evaluator adapter
# ----------------------------------------------------------------------

Evaluate = Callable[[Sequence[int]], tuple[float, float]]


class EvaluatorAdapter:
    """Bridges ChainEvaluator to the (indices) -> (suff, atnb) protocol."""

    def __init__(self, evaluator: ChainEvaluator):
        self._evaluator = evaluator

    def __call__(self, indices: Sequence[int]) -> tuple[float, float]:
        score = self._evaluator.score_subsequence(indices)
        return score.sufficiency, score.attainability

    def recheck(self, indices: Sequence[int]) -> tuple[float, float]:
        score = self._evaluator.score_subsequence(indices, fresh=True)
        return score.sufficiency, score.attainability


def _recheck_fn(evaluate: Evaluate) -> Evaluate:
    return getattr(evaluate, "recheck", evaluate)


# ----------------------------------------------------------------------
# Stage 1: influence mask
# ----------------------------------------------------------------------


def influence_mask(matrix: InfluenceMatrix, threshold: float) -> InfluenceMask:
    """Steps whose cumulative influence on retained steps clears the
    retention fraction, walked from the final step backwards."""
    if not (0.0 < threshold <= 1.0):
        raise ExtractionError(f"threshold {threshold} outside (0, 1]")
    p = matrix.p
    mask = np.zeros(p, dtype=bool)
    mask[p - 1] = True
    for ref_idx in range(p - 1, 0, -1):
        if not mask[ref_idx]:
            continue
        row = matrix.values[ref_idx]
        total = row.sum()
        if total <= 0.0:
            continue
        sorted_desc = np.sort(row)[::-1]
        cumulative = np.cumsum(sorted_desc) / total
        cut = int(np.searchsorted(cumulative, threshold, side="left"))
        cut = min(cut, p - 1)
        cutoff = sorted_desc[cut]
        # The positivity guard keeps float fuzz in the cumulative sum from
        # sweeping zero-influence steps into the mask.
        mask |= (row >= cutoff) & (row > 0.0)
    return InfluenceMask(tuple(bool(b) for b in mask), threshold)


# ----------------------------------------------------------------------
# Stage 2: greedy removal loop (shared by all variants)
# ----------------------------------------------------------------------


def _removal_loop(
    mask: np.ndarray,
    queue: list[int],
    evaluate: Evaluate,
    config: MetricsConfig,
) -> tuple[np.ndarray, list[RemovalAttempt]]:
    log: list[RemovalAttempt] = []
    failures_since_last_removal = 0
    while queue and failures_since_last_removal < len(queue):
        step_idx = queue.pop(0)
        trial = mask.copy()
        trial[step_idx] = False
        suff, atnb = evaluate(tuple(np.flatnonzero(trial)))
        if suff >= config.tau_suff and atnb >= config.tau_atnb:
            mask = trial
            failures_since_last_removal = 0
            log.append(RemovalAttempt(step_idx, True, suff, atnb))
        else:
            queue.append(step_idx)
            failures_since_last_removal += 1
            log.append(RemovalAttempt(step_idx, False, suff, atnb))
    return mask, log


def mean_influence_ranking(matrix: InfluenceMatrix) -> np.ndarray:
    """Column mean over strictly nonzero entries, ascending; ties by index.

    Columns with no nonzero entries get mean zero and therefore sort
    first, making zero-influence steps the earliest removal attempts.
    """
    values = matrix.values
    counts = (values != 0).sum(axis=0)
    sums = values.sum(axis=0)
    means = np.divide(sums, counts, out=np.zeros_like(sums), where=counts > 0)
    return np.argsort(means, kind="stable")


def core_subsequence(
    matrix: InfluenceMatrix,
    evaluate: Evaluate,
    config: MetricsConfig,
) -> CoreResult:
    """Activation-based variant: threshold sweep, then greedy removal."""
    chosen_mask: Optional[InfluenceMask] = None
    for threshold in THRESHOLD_SWEEP:
        candidate = influence_mask(matrix, threshold)
        suff, atnb = evaluate(candidate.indices)
        if suff >= config.tau_suff and atnb >= config.tau_atnb:
            chosen_mask = candidate
            break
    if chosen_mask is None:
        # No threshold passes: proceed with the most inclusive mask.
        chosen_mask = influence_mask(matrix, 1.0)
    p = matrix.p
    mask_array = np.zeros(p, dtype=bool)
    mask_array[list(chosen_mask.indices)] = True
    ranking = mean_influence_ranking(matrix)
    queue = [int(i) for i in ranking if mask_array[i] and i != p - 1]
    mask_array, log = _removal_loop(mask_array, queue, evaluate, config)
    return _build_result(mask_array, chosen_mask, log, "activation", evaluate, config)


def _build_result(
    mask_array: np.ndarray,
    mask: InfluenceMask,
    log: list[RemovalAttempt],
    variant: str,
    evaluate: Evaluate,
    config: MetricsConfig,
) -> CoreResult:
    core = Subsequence(tuple(int(i) for i in np.flatnonzero(mask_array)))
    suff, atnb = _recheck_fn(evaluate)(core.indices)
    return CoreResult(
        core=core,
        mask=mask,
        removal_log=tuple(log),
        variant=variant,
        passed_final_check=bool(suff >= config.tau_suff and atnb >= config.tau_atnb),
        final_sufficiency=suff,
        final_attainability=atnb,
    )


# ----------------------------------------------------------------------
# Token-judge variant
# ----------------------------------------------------------------------


def _validate_indices(values: Sequence[int], valid: Sequence[int], what: str) -> None:
    invalid = sorted(set(values) - set(valid))
    if invalid:
        raise JudgeValidationError(f"{what} contains invalid indices {invalid}")


def token_judge_variant(
    problem,
    prefix_steps: Sequence[Step],
    judge: JudgeClient,
    evaluate: Evaluate,
    config: MetricsConfig,
) -> CoreResult:
    """External-judge variant: the judge filters, then ranks, the steps."""
    p = len(prefix_steps)
    if p < 1:
        raise ExtractionError("prefix must contain at least one step")
    all_lines = sentence_lines([(s.index, s.text) for s in prefix_steps])
    filter_prompt = render(
        "influence_filter", question=problem.prompt, sentence_lines=all_lines
    )
    removable = parse_fenced_json_list(judge.complete(filter_prompt))
    _validate_indices(removable, range(p - 1), "removable list")
    removed = set(removable)
    masked = [i for i in range(p) if i not in removed or i == p - 1]
    mask = InfluenceMask(tuple(i in masked for i in range(p)), None)

    candidates = [i for i in masked if i != p - 1]
    ranking: list[int] = []
    if candidates:
        masked_lines = sentence_lines(
            [(s.index, s.text) for s in prefix_steps if s.index in masked]
        )
        rank_prompt = render(
            "importance_ranking",
            question=problem.prompt,
            sentence_lines=masked_lines,
            valid_indices=str(candidates),
        )
        ranking = _ranking_with_retry(judge, rank_prompt, candidates)

    mask_array = np.zeros(p, dtype=bool)
    mask_array[masked] = True
    # Removal attempts run from least to most important.
    queue = [int(i) for i in reversed(ranking)]
    mask_array, log = _removal_loop(mask_array, queue, evaluate, config)
    return _build_result(mask_array, mask, log, "token_judge", evaluate, config)


def _ranking_with_retry(judge: JudgeClient, prompt: str, candidates: list[int]) -> list[int]:
    ranking = parse_fenced_json_list(judge.complete(prompt))
    if len(set(ranking)) != len(ranking):
        ranking = parse_fenced_json_list(judge.complete(prompt))
        if len(set(ranking)) != len(ranking):
            raise JudgeValidationError("ranking contains duplicates after retry")
    _validate_indices(ranking, candidates, "ranking")
    missing = sorted(set(candidates) - set(ranking))
    if missing:
        raise JudgeValidationError(f"ranking is missing required indices {missing}")
    return ranking


# ----------------------------------------------------------------------
# Random variant
# ----------------------------------------------------------------------


def random_variant(
    prefix_length: int,
    evaluate: Evaluate,
    config: MetricsConfig,
    seed: int,
) -> CoreResult:
    """Whole prefix masked; removal order is a seeded uniform shuffle."""
    if prefix_length < 1:
        raise ExtractionError("prefix must contain at least one step")
    p = prefix_length
    mask = InfluenceMask(tuple(True for _ in range(p)), None)
    mask_array = np.ones(p, dtype=bool)
    queue = list(range(p - 1))
    rng = np.random.default_rng(seed)
    rng.shuffle(queue)
    mask_array, log = _removal_loop(mask_array, [int(i) for i in queue], evaluate, config)
    return _build_result(mask_array, mask, log, "random", evaluate, config)


# ----------------------------------------------------------------------
# Labels
# ----------------------------------------------------------------------


def assign_labels(mask: InfluenceMask, core: Subsequence, p: int) -> list[StepLabel]:
    """Removable if excluded at the mask stage, non-removable if retained
    in the core, unlabeled for steps pruned in between."""
    if len(mask) != p:
        raise ExtractionError("mask length does not match prefix length")
    labels = []
    core_set = set(core.indices)
    for i in range(p):
        if not mask.included[i]:
            labels.append(StepLabel(i, LABEL_REMOVABLE, "mask"))
        elif i in core_set:
            labels.append(StepLabel(i, LABEL_NON_REMOVABLE, "core"))
        else:
            labels.append(StepLabel(i, LABEL_UNLABELED, "pruned"))
    return labels


# ----------------------------------------------------------------------
# Exhaustive reference search (small prefixes only)
# ----------------------------------------------------------------------


def exhaustive_core(
    p: int,
    evaluate: Evaluate,
    config: MetricsConfig,
    max_p: int = 15,
) -> Optional[Subsequence]:
    """Smallest subsequence clearing both thresholds, by brute force."""
    if p > max_p:
        raise ExtractionError(f"exhaustive search gated to p <= {max_p}, got {p}")
    for size in range(0, p + 1):
        for combo in itertools.combinations(range(p), size):
            suff, atnb = evaluate(combo)
            if suff >= config.tau_suff and atnb >= config.tau_atnb:
                return Subsequence(combo)
    return None
