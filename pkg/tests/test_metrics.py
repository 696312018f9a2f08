"""Sufficiency, attainability, necessity, shortcuts and prefix search."""

from __future__ import annotations

import math

import pytest

from stepcore.corpus import Problem, Subsequence, chain_from_text, parse_answer
from stepcore.metrics import (
    ChainEvaluator,
    MetricsConfig,
    attainability,
    detect_shortcut_steps,
    direct_answer_text,
    filter_chain,
    necessity_filter,
    sufficiency,
    sufficient_prefix,
)

from helpers import ScriptedBackend

SUFFIX = " So the answer is \\boxed{"


def _problem(answer: str = "-21") -> Problem:
    return Problem(id="p1", prompt="What is it?", ground_truth=parse_answer(answer))


def _chain(texts=None) -> object:
    texts = texts or ["Think a bit.", "Compute stuff.", "Combine results."]
    return chain_from_text("p1", " " + " ".join(texts))


def _config(**kw) -> MetricsConfig:
    return MetricsConfig(**kw)


# ----------------------------------------------------------------------
# Sufficiency
# ----------------------------------------------------------------------


def test_sufficiency_four_of_five():
    problem = _problem()
    chain = _chain()
    prompt = "What is it? Think a bit. Compute stuff. Combine results." + SUFFIX
    backend = ScriptedBackend({prompt: ["-21}", "-21}", "-21}", "-21}", "7}"]})
    frac, completions = sufficiency(
        problem, chain, Subsequence.full(3), _config(), backend, eval_seed=0
    )
    assert frac == pytest.approx(0.8)
    assert [c.correct for c in completions] == [True, True, True, True, False]


def test_sufficiency_all_literal_boxed_truth():
    problem = _problem()
    chain = _chain()
    backend = ScriptedBackend(lambda prompt, seed: "-21}")
    frac, _ = sufficiency(problem, chain, Subsequence.full(3), _config(), backend, 0)
    assert frac == 1.0


def test_sufficiency_is_multiple_of_one_over_k():
    problem = _problem()
    chain = _chain()
    calls = iter(["-21}", "oops", "-21}", "nah", "zzz", "-21}", "-21}"])
    backend = ScriptedBackend(lambda prompt, seed: next(calls))
    config = _config(resamples=7)
    frac, _ = sufficiency(problem, chain, Subsequence.full(3), config, backend, 0)
    assert frac == pytest.approx(4 / 7)
    assert (frac * 7) == pytest.approx(round(frac * 7))


def test_unparseable_completion_counts_incorrect():
    problem = _problem()
    chain = _chain()
    backend = ScriptedBackend(lambda prompt, seed: "-21 but never closed")
    frac, completions = sufficiency(problem, chain, Subsequence.full(3), _config(), backend, 0)
    assert frac == 0.0
    assert all(c.answer is None for c in completions)


# ----------------------------------------------------------------------
# Attainability
# ----------------------------------------------------------------------


def test_attainability_direct_substitution():
    problem = _problem()
    chain = _chain()
    sub = Subsequence((0, 1))
    sub_text = " Think a bit. Compute stuff."
    direct = direct_answer_text(SUFFIX, problem.ground_truth)
    backend = ScriptedBackend(
        ppl_table={chain.full_text: 2.0, direct: 10.0, sub_text: 4.0}
    )
    clamped, raw, ppl_sub, refs, valid = attainability(
        problem, chain, sub, _config(), backend
    )
    assert valid
    assert raw == pytest.approx(0.75)
    assert clamped == pytest.approx(0.75)
    assert ppl_sub == pytest.approx(4.0)
    assert refs.ppl_chain == pytest.approx(2.0)
    assert refs.ppl_direct == pytest.approx(10.0)


def test_attainability_full_chain_is_one():
    problem = _problem()
    chain = _chain()
    direct = direct_answer_text(SUFFIX, problem.ground_truth)
    backend = ScriptedBackend(ppl_table={chain.full_text: 2.0, direct: 10.0})
    clamped, raw, *_ = attainability(problem, chain, Subsequence.full(3), _config(), backend)
    assert raw == pytest.approx(1.0, abs=1e-12)
    assert clamped == 1.0


def test_attainability_empty_subsequence_is_zero():
    problem = _problem()
    chain = _chain()
    direct = direct_answer_text(SUFFIX, problem.ground_truth)
    backend = ScriptedBackend(ppl_table={chain.full_text: 2.0, direct: 10.0})
    clamped, raw, *_ = attainability(problem, chain, Subsequence(()), _config(), backend)
    assert raw == pytest.approx(0.0, abs=1e-12)
    assert clamped == 0.0


def test_attainability_degenerate_bounds_flagged():
    problem = _problem()
    chain = _chain()
    backend = ScriptedBackend(default_ppl=5.0)  # all texts identical ppl
    clamped, raw, _, _, valid = attainability(
        problem, chain, Subsequence((0,)), _config(), backend
    )
    assert not valid
    assert math.isnan(raw)
    assert clamped == 0.0


def test_attainability_clamps_out_of_range():
    problem = _problem()
    chain = _chain()
    direct = direct_answer_text(SUFFIX, problem.ground_truth)
    backend = ScriptedBackend(
        ppl_table={chain.full_text: 4.0, direct: 10.0, " Think a bit.": 2.0}
    )
    clamped, raw, *_ = attainability(problem, chain, Subsequence((0,)), _config(), backend)
    assert raw > 1.0
    assert clamped == 1.0


# ----------------------------------------------------------------------
# Necessity
# ----------------------------------------------------------------------


@pytest.mark.parametrize("correct_count,expected", [(0, True), (1, True), (2, False), (5, False)])
def test_necessity_thresholds(correct_count, expected):
    problem = _problem()
    answers = ["-21}"] * correct_count + ["0}"] * (5 - correct_count)
    backend = ScriptedBackend({problem.prompt + SUFFIX: answers})
    necessary, completions = necessity_filter(problem, _config(), backend, eval_seed=0)
    assert necessary is expected
    assert len(completions) == 5


def test_necessity_and_sufficiency_share_completion_path():
    """Both metrics must parse and judge completions identically."""
    problem = _problem()
    chain = _chain()
    tricky = ["-21}", "-21 never closed", "\\boxed{-21}", "junk", "-21.0}"]
    backend_a = ScriptedBackend({problem.prompt + SUFFIX: list(tricky)})
    necessary, comps_a = necessity_filter(problem, _config(), backend_a, 0)
    prompt_b = "What is it?" + SUFFIX
    assert prompt_b == problem.prompt + SUFFIX
    backend_b = ScriptedBackend({prompt_b: list(tricky)})
    frac, comps_b = sufficiency(problem, chain, Subsequence(()), _config(), backend_b, 0)
    assert [c.correct for c in comps_a] == [c.correct for c in comps_b]
    assert frac == pytest.approx(sum(c.correct for c in comps_a) / 5)


# ----------------------------------------------------------------------
# Shortcut steps
# ----------------------------------------------------------------------


def _no_singleton_suffices(prompt, seed):
    return "0}"


def test_shortcut_boxed_rule():
    problem = _problem()
    chain = chain_from_text("p1", " Work here. So the answer is \\boxed{-21}.")
    backend = ScriptedBackend(_no_singleton_suffices)
    result = detect_shortcut_steps(problem, chain, _config(), backend, run_seed=0)
    assert 1 in result.indices


def test_shortcut_pattern_rule():
    problem = _problem("80200")
    chain = chain_from_text("p1", " Some algebra. Therefore the result is 80200.")
    backend = ScriptedBackend(_no_singleton_suffices)
    result = detect_shortcut_steps(problem, chain, _config(), backend, run_seed=0)
    assert 1 in result.indices
    assert 0 not in result.indices


def test_shortcut_negative_example():
    problem = _problem()
    chain = chain_from_text("p1", " So we need to find intersection with AC.")
    backend = ScriptedBackend(_no_singleton_suffices)
    result = detect_shortcut_steps(problem, chain, _config(), backend, run_seed=0)
    assert result.indices == ()
    assert result.remaining_sufficient


def test_shortcut_singleton_sufficiency_rule():
    problem = _problem()
    chain = chain_from_text("p1", " Alpha step. Beta gives it away.")

    def responder(prompt, seed):
        return "-21}" if "Beta gives it away" in prompt else "0}"

    backend = ScriptedBackend(responder)
    result = detect_shortcut_steps(problem, chain, _config(), backend, run_seed=0)
    assert result.indices == (1,)
    # Remaining chain (Alpha only) fails re-verification.
    assert not result.remaining_sufficient


def test_shortcut_removal_keeps_sufficient_chain():
    problem = _problem()
    chain = chain_from_text(
        "p1", " Take alpha part. Take beta part. So the answer is \\boxed{-21}."
    )

    def responder(prompt, seed):
        # Correct only when both working steps survive; no single step
        # suffices, so only the boxed step is a shortcut.
        return "-21}" if ("alpha" in prompt and "beta" in prompt) else "0}"

    backend = ScriptedBackend(responder)
    result = detect_shortcut_steps(problem, chain, _config(), backend, run_seed=0)
    assert result.indices == (2,)
    assert result.remaining_sufficient
    filtered = filter_chain(chain, [0, 1])
    assert [s.index for s in filtered.steps] == [0, 1]
    assert filtered.steps[0].text == "Take alpha part."


# ----------------------------------------------------------------------
# Sufficient prefix
# ----------------------------------------------------------------------


def _prefix_backend(chain, direct, threshold_step: int):
    """Completions are correct iff the prompt contains the marker step."""
    marker = chain.steps[threshold_step].text

    def responder(prompt, seed):
        return "-21}" if marker in prompt else "0}"

    return ScriptedBackend(
        responder, ppl_table={chain.full_text: 2.0, direct: 10.0}, default_ppl=3.0
    )


def test_sufficient_prefix_matches_linear_scan():
    problem = _problem()
    texts = [f"Step number {i} text." for i in range(7)]
    chain = chain_from_text("p1", " " + " ".join(texts))
    direct = direct_answer_text(SUFFIX, problem.ground_truth)
    backend = _prefix_backend(chain, direct, threshold_step=2)
    result = sufficient_prefix(problem, chain, _config(), backend, run_seed=0)
    linear = sufficient_prefix(problem, chain, _config(), backend, run_seed=0, scan="linear")
    assert result.found and linear.found
    assert result.p == linear.p == 3


def test_sufficient_prefix_full_chain_only():
    problem = _problem()
    texts = [f"Step number {i} text." for i in range(4)]
    chain = chain_from_text("p1", " " + " ".join(texts))
    direct = direct_answer_text(SUFFIX, problem.ground_truth)
    backend = _prefix_backend(chain, direct, threshold_step=3)
    result = sufficient_prefix(problem, chain, _config(), backend, run_seed=0)
    assert result.found
    assert result.p == 4


def test_sufficient_prefix_absent_when_nothing_passes():
    problem = _problem()
    chain = _chain()
    direct = direct_answer_text(SUFFIX, problem.ground_truth)
    backend = ScriptedBackend(
        lambda prompt, seed: "0}",
        ppl_table={chain.full_text: 2.0, direct: 10.0},
        default_ppl=3.0,
    )
    result = sufficient_prefix(problem, chain, _config(), backend, run_seed=0)
    assert not result.found
    assert result.p is None


def test_prefix_result_never_longer_than_chain():
    problem = _problem()
    texts = [f"Step number {i} text." for i in range(5)]
    chain = chain_from_text("p1", " " + " ".join(texts))
    direct = direct_answer_text(SUFFIX, problem.ground_truth)
    backend = _prefix_backend(chain, direct, threshold_step=0)
    result = sufficient_prefix(problem, chain, _config(), backend, run_seed=0)
    assert result.found
    assert result.p == 1


# ----------------------------------------------------------------------
# Evaluator
# ----------------------------------------------------------------------


def test_evaluator_memoizes_and_rechecks():
    problem = _problem()
    chain = _chain()
    direct = direct_answer_text(SUFFIX, problem.ground_truth)
    backend = ScriptedBackend(
        lambda prompt, seed: "-21}",
        ppl_table={chain.full_text: 2.0, direct: 10.0},
        default_ppl=2.5,
    )
    ev = ChainEvaluator(problem, chain, _config(), backend, run_seed=0)
    first = ev.score_subsequence([0, 2])
    count = ev.evaluation_count
    again = ev.score_subsequence([2, 0])
    assert again is first
    assert ev.evaluation_count == count
    fresh = ev.score_subsequence([0, 2], fresh=True)
    assert fresh.sufficiency == first.sufficiency
    assert ev.evaluation_count == count + 1


def test_evaluator_seed_depends_on_index_set_not_order():
    problem = _problem()
    chain = _chain()
    backend = ScriptedBackend(lambda prompt, seed: "-21}")
    ev = ChainEvaluator(problem, chain, _config(), backend, run_seed=9)
    assert ev.subsequence_seed([2, 0]) == ev.subsequence_seed([0, 2])
    assert ev.subsequence_seed([0, 1]) != ev.subsequence_seed([0, 2])
