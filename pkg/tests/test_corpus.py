"""Segmentation, answer forms, assembly and dataset IO."""

from __future__ import annotations

import json

import pytest
from hypothesis import given, settings, strategies as st

from stepcore.corpus import (
    AnswerParseError,
    DatasetError,
    Problem,
    Subsequence,
    answers_equivalent,
    assemble,
    chain_from_text,
    extract_answer,
    load_dataset,
    parse_answer,
    save_dataset,
    segment,
    subsequence_text,
    token_spans_for_steps,
)
from stepcore.backend import char_tokenizer


# ----------------------------------------------------------------------
# Segmentation
# ----------------------------------------------------------------------


def test_segment_paragraphs_and_sentences():
    steps = segment("A b.\n\nC d? E!")
    assert [s.text for s in steps] == ["A b.", "C d?", "E!"]


def test_segment_does_not_split_inline_decimal():
    assert [s.text for s in segment("3.14 is pi")] == ["3.14 is pi"]


def test_segment_empty_input():
    assert segment("") == []


def test_segment_spans_tile_text():
    text = "One two.  Three four!\n\nFive.\nSix seven? End"
    steps = segment(text)
    assert steps[0].char_span[0] == 0
    assert steps[-1].char_span[1] == len(text)
    rebuilt = "".join(text[a:b] for a, b in (s.char_span for s in steps))
    assert rebuilt == text


def test_segment_whitespace_only_input():
    assert segment("  \n\n  ") == []


_sentences = st.lists(
    st.text(alphabet="abcXY 3.1", min_size=1, max_size=8).map(lambda s: s.strip() or "w"),
    min_size=1,
    max_size=5,
)


@given(_sentences, st.sampled_from([". ", "? ", "! ", "\n\n", ".\n"]))
@settings(max_examples=80, deadline=None)
def test_segment_reconstruction_property(parts, sep):
    text = sep.join(parts)
    steps = segment(text)
    rebuilt = "".join(text[a:b] for a, b in (s.char_span for s in steps))
    assert rebuilt == text
    for step in steps:
        assert step.text == text[step.char_span[0] : step.char_span[1]].strip()


# ----------------------------------------------------------------------
# Answers
# ----------------------------------------------------------------------


def test_extract_boxed_number():
    answer = extract_answer("so \\boxed{-21}.")
    assert answer.kind == "number"
    assert answer.numeric_value == -21


def test_extract_boxed_fraction():
    answer = extract_answer("\\boxed{\\frac{1}{2}}")
    assert answer.numeric_value == parse_answer("1/2").numeric_value


def test_extract_absent():
    assert extract_answer("no marker here") is None


def test_extract_unbalanced_braces_reports_position():
    with pytest.raises(AnswerParseError) as err:
        extract_answer("text \\boxed{1 + (2")
    assert err.value.position is not None


def test_extract_answer_phrase_fallback():
    answer = extract_answer("Blah blah. The answer is 80200. Trailing text.")
    assert answer.numeric_value == 80200


def test_interval_equivalence():
    a = parse_answer("-10 \\le x \\le 1")
    b = parse_answer("x \\in [-10, 1]")
    assert answers_equivalent(a, b)


def test_expression_commutative_sum():
    assert answers_equivalent(parse_answer("5 + x"), parse_answer("x+5"))
    assert not answers_equivalent(parse_answer("5 - x"), parse_answer("x-5"))


def test_exact_rational_comparison():
    assert answers_equivalent(parse_answer("0.5"), parse_answer("1/2"))
    assert not answers_equivalent(parse_answer("0.5"), parse_answer("1/3"))
    assert answers_equivalent(parse_answer("0.1"), parse_answer("1/10"))


def test_tuple_equivalence():
    assert answers_equivalent(parse_answer("(1, 2.0)"), parse_answer("(1, 2)"))
    assert not answers_equivalent(parse_answer("(1, 2)"), parse_answer("(1, 2, 3)"))


def test_normalization_idempotent():
    for raw in ["  42 ", "x + 5", "[0, 1]", "(3, 4)", "\\frac{2}{4}"]:
        once = parse_answer(raw)
        twice = parse_answer(once.normalized)
        assert twice.normalized == once.normalized


@given(st.sampled_from(["5", "1/2", "x+5", "[0, 1]", "(1, 2)", "-3.25", "word salad"]))
@settings(max_examples=20, deadline=None)
def test_equivalence_reflexive_symmetric(raw):
    a = parse_answer(raw)
    b = parse_answer(raw + " ")
    assert answers_equivalent(a, a)
    assert answers_equivalent(a, b) == answers_equivalent(b, a)


# ----------------------------------------------------------------------
# Assembly
# ----------------------------------------------------------------------


def _chain3():
    return chain_from_text("p", " First one. Second two. Third three.")


def test_assemble_full_identity_recovers_step_count():
    chain = _chain3()
    text = assemble("Q?", chain, Subsequence.full(3), "")
    assert len(segment(text[2:])) == len(chain)


def test_assemble_empty_is_prompt_plus_suffix():
    chain = _chain3()
    assert assemble("Q?", chain, Subsequence(()), "SUF") == "Q?SUF"


def test_assemble_selection():
    chain = _chain3()
    out = assemble("Q?", chain, Subsequence((0, 2)), " ANS")
    assert out == "Q? First one. Third three. ANS"


def test_assemble_preserves_paragraph_breaks():
    chain = chain_from_text("p", "Alpha one.\n\nBeta two.\n\nGamma three.")
    both = assemble("Q", chain, Subsequence((0, 2)), "")
    assert both == "Q Alpha one.\n\nGamma three."
    mixed = chain_from_text("p", "Alpha one. Beta two.\n\nGamma three.")
    out = assemble("Q", mixed, Subsequence((0, 2)), "")
    assert out == "Q Alpha one. Gamma three."


def test_subsequence_text_full_is_exact():
    chain = _chain3()
    assert subsequence_text(chain, Subsequence.full(3)) == chain.full_text


def test_token_span_mapping_first_character_rule():
    chain = chain_from_text("p", " Alpha beta. Gamma delta.")
    seq = char_tokenizer().tokenize(chain.full_text)
    spans = token_spans_for_steps(seq.char_offsets, chain.steps)
    assert all(span is not None for span in spans)
    (a0, a1), (b0, b1) = spans
    # Tiled step spans partition the tokens: each token joins the step
    # containing its first character.
    assert (a0, b1) == (0, len(seq))
    assert a1 == b0
    assert chain.full_text[seq.char_offsets[b0][0]] == "G"


def test_token_span_mapping_handles_multichar_tokens():
    from stepcore.backend import math_word_tokenizer

    chain = chain_from_text("p", " alpha means 4. beta means 7.")
    seq = math_word_tokenizer().tokenize(chain.full_text)
    spans = token_spans_for_steps(seq.char_offsets, chain.steps)
    assert spans[0][1] == spans[1][0]
    assert spans[1][1] == len(seq)


# ----------------------------------------------------------------------
# Datasets
# ----------------------------------------------------------------------


def test_dataset_roundtrip(tmp_path):
    problems = [
        Problem(id=f"p{i}", prompt=f"Question {i}?", ground_truth=parse_answer(str(i)))
        for i in range(10)
    ]
    path = tmp_path / "data.jsonl"
    save_dataset(path, problems)
    loaded = load_dataset(path)
    assert [p.id for p in loaded] == [p.id for p in problems]
    assert all(
        answers_equivalent(a.ground_truth, b.ground_truth)
        for a, b in zip(loaded, problems)
    )


def test_dataset_missing_field_names_field_and_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "a", "prompt": "x", "answer": "1"}\n{"id": "b", "prompt": "y"}\n')
    with pytest.raises(DatasetError) as err:
        load_dataset(path)
    message = str(err.value)
    assert "answer" in message and ":2" in message


def test_dataset_invalid_json_reports_line(tmp_path):
    path = tmp_path / "bad.jsonl"
    path.write_text('{"id": "a", "prompt": "x", "answer": "1"}\nnot json\n')
    with pytest.raises(DatasetError) as err:
        load_dataset(path)
    assert ":2" in str(err.value)


def test_dataset_preserves_input_order(tmp_path):
    path = tmp_path / "many.jsonl"
    with path.open("w") as fh:
        for i in range(500):
            fh.write(json.dumps({"id": f"q{i}", "prompt": "p", "answer": str(i)}) + "\n")
    problems = load_dataset(path)
    assert len(problems) == 500
    assert [p.id for p in problems] == [f"q{i}" for i in range(500)]


def test_dataset_duplicate_id_rejected(tmp_path):
    path = tmp_path / "dup.jsonl"
    path.write_text(
        '{"id": "a", "prompt": "x", "answer": "1"}\n{"id": "a", "prompt": "y", "answer": "2"}\n'
    )
    with pytest.raises(DatasetError):
        load_dataset(path)
