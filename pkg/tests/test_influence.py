"""Influence matrices: structure, finite-difference oracle, variants, IO."""

from __future__ import annotations

import numpy as np
import pytest

from stepcore.backend import (
    ReferenceServer,
    RemoteBackend,
    TinyBackend,
    TinyConfig,
    UnsupportedCapabilityError,
    char_tokenizer,
)
from stepcore.corpus import Problem, chain_from_text, parse_answer
from stepcore.influence import (
    InfluenceError,
    InfluenceMatrix,
    influence_matrix,
    load_influence,
    prefix_token_layout,
    save_influence,
)

CFG = TinyConfig(layer_count=2, hidden_dim=32, n_heads=2, max_seq=96)


@pytest.fixture(scope="module")
def backend():
    return TinyBackend.seeded(1, tokenizer=char_tokenizer(), cfg=CFG)


@pytest.fixture(scope="module")
def problem():
    return Problem(id="pi", prompt="Do it?", ground_truth=parse_answer("5"))


@pytest.fixture(scope="module")
def chain():
    return chain_from_text("pi", " Aa bb. Cc dd. Ee ff. Gg hh.")


def test_matrix_structure(backend, problem, chain):
    m = influence_matrix(problem, chain, 4, "gradient", backend)
    assert m.p == 4
    assert np.all(np.triu(m.values) == 0)
    assert np.all(m.values >= 0)
    # Causal structure leaves real mass below the diagonal.
    assert np.any(m.values[np.tril_indices(4, k=-1)] > 0)


def test_gradient_entries_match_finite_difference_block_norms(backend, problem, chain):
    m = influence_matrix(problem, chain, 3, "gradient", backend)
    tokens, spans = prefix_token_layout(problem, chain, 3, backend)
    h = 1e-6
    base = backend.input_embeddings(tokens.token_ids)
    for j in range(1, 3):
        fd = np.zeros((len(tokens), backend.cfg.hidden_dim))
        for pos in range(spans[j][0]):
            for dim in range(backend.cfg.hidden_dim):
                plus = base.copy()
                plus[pos + 1, dim] += h
                minus = base.copy()
                minus[pos + 1, dim] -= h
                fd[pos, dim] = (
                    backend.span_probability_sum(tokens, spans[j], plus)
                    - backend.span_probability_sum(tokens, spans[j], minus)
                ) / (2 * h)
        for i in range(j):
            a, b = spans[i]
            expected = np.linalg.norm(fd[a:b])
            assert m.values[j, i] == pytest.approx(expected, rel=1e-4)


def test_grad_x_input_differs_from_gradient(backend, problem, chain):
    grad = influence_matrix(problem, chain, 3, "gradient", backend)
    gxi = influence_matrix(problem, chain, 3, "grad_x_input", backend)
    assert not np.allclose(grad.values, gxi.values)


def test_integrated_gradients_single_step_zero_baseline_is_grad_x_input(
    backend, problem, chain
):
    gxi = influence_matrix(problem, chain, 4, "grad_x_input", backend)
    ig = influence_matrix(
        problem, chain, 4, "integrated_gradients", backend, ig_steps=1, ig_baseline="zero"
    )
    assert np.allclose(ig.values, gxi.values, atol=1e-6)


def test_integrated_gradients_default_runs(backend, problem, chain):
    ig = influence_matrix(problem, chain, 3, "integrated_gradients", backend)
    assert ig.method == "integrated_gradients"
    assert np.all(np.isfinite(ig.values))


def test_remote_backend_supports_gradient_method_only(backend, problem, chain):
    with ReferenceServer(backend) as server:
        remote = RemoteBackend(server.url)
        local = influence_matrix(problem, chain, 3, "gradient", backend)
        wire = influence_matrix(problem, chain, 3, "gradient", remote)
        assert np.allclose(wire.values, local.values, rtol=1e-10)
        with pytest.raises(UnsupportedCapabilityError):
            influence_matrix(problem, chain, 3, "grad_x_input", remote)


def test_matrix_validation_rejects_upper_triangle():
    bad = np.zeros((3, 3))
    bad[0, 2] = 1.0
    with pytest.raises(InfluenceError):
        InfluenceMatrix("x", bad, "gradient")


def test_influence_file_roundtrip(tmp_path, backend, problem, chain):
    m = influence_matrix(problem, chain, 3, "gradient", backend)
    path = tmp_path / "pi.gradient.bin"
    save_influence(path, m)
    loaded = load_influence(path)
    assert loaded.problem_id == "pi"
    assert loaded.method == "gradient"
    assert np.allclose(loaded.values, m.values, atol=1e-6)
    summary_path = tmp_path / "pi.gradient.bin.summary.json"
    assert summary_path.exists()


def test_prefix_out_of_range(backend, problem, chain):
    with pytest.raises(InfluenceError):
        influence_matrix(problem, chain, 99, "gradient", backend)
