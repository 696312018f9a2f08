"""Step-activation feature extraction and cross-model probe transfer.

Chains generated by one model are re-run through another: the chain text
is re-tokenized under the second model, step character spans map to
token spans by first-character containment, and probes train on the
resulting pooled activations with the original labels. A randomly
initialized model of the same architecture serves as the
informative-features control.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from ..backend import TinyBackend, TinyConfig
from ..corpus import Problem, ReasoningChain, token_spans_for_steps
from ..influence import concat_sequences
from .models import ProbeSpec, default_spec
from .pooling import PooledActivation, pool_activations
from .train import TrainConfig, TrainResult, agreement, train_probe


@dataclass(frozen=True)
class LabeledStep:
    """One training example: a step of a chain plus its binary label."""

    problem: Problem
    chain: ReasoningChain
    step_index: int
    label: int  # 1 = non-removable (important), 0 = removable


@dataclass(frozen=True)
class FeatureExtraction:
    features: np.ndarray  # (N, L, d) or (N, d)
    labels: np.ndarray  # (N,)
    kept: tuple[int, ...]  # indices into the input items
    dropped: int  # steps whose span mapped to no tokens


@dataclass(frozen=True)
class CrossModelReport:
    self_model_id: str
    cross_model_id: str
    within_accuracy: float
    within_std: float
    cross_accuracy: float
    cross_std: float
    agreement_ratio: float

    def to_dict(self) -> dict:
        return {
            "self_model_id": self.self_model_id,
            "cross_model_id": self.cross_model_id,
            "within_accuracy": self.within_accuracy,
            "within_std": self.within_std,
            "cross_accuracy": self.cross_accuracy,
            "cross_std": self.cross_std,
            "agreement_ratio": self.agreement_ratio,
        }


def step_activation(
    problem: Problem,
    chain: ReasoningChain,
    step_index: int,
    backend,
    pooling: str = "mean_tokens",
    context: str = "full",
) -> Optional[PooledActivation]:
    """Pooled activations for one step; None if it maps to no tokens.

    Full context runs prompt + chain through the model and reads the
    step's positions; context_free encodes the step text alone.
    """
    step = chain.steps[step_index]
    if context == "context_free":
        tokens = backend.tokenize(step.text)
        if len(tokens) == 0:
            return None
        tensor = backend.capture_activations(tokens, (0, len(tokens)))
        return pool_activations(tensor, pooling, context)
    ctx = backend.tokenize(problem.prompt)
    chain_seq = backend.tokenize(chain.full_text)
    span = token_spans_for_steps(chain_seq.char_offsets, [step])[0]
    if span is None:
        return None
    tokens = concat_sequences(ctx, chain_seq)
    shifted = (span[0] + len(ctx), span[1] + len(ctx))
    tensor = backend.capture_activations(tokens, shifted)
    return pool_activations(tensor, pooling, context)


def extract_features(
    items: Sequence[LabeledStep],
    backend,
    pooling: str = "mean_tokens",
    context: str = "full",
) -> FeatureExtraction:
    rows, labels, kept = [], [], []
    dropped = 0
    for i, item in enumerate(items):
        pooled = step_activation(
            item.problem, item.chain, item.step_index, backend, pooling, context
        )
        if pooled is None:
            dropped += 1
            continue
        rows.append(pooled.values)
        labels.append(item.label)
        kept.append(i)
    if not rows:
        return FeatureExtraction(np.zeros((0,)), np.zeros(0, dtype=np.int64), (), dropped)
    return FeatureExtraction(
        np.stack(rows), np.asarray(labels, dtype=np.int64), tuple(kept), dropped
    )


def random_init_twin(backend: TinyBackend, seed: int) -> TinyBackend:
    """Same architecture and tokenizer, freshly seeded random weights."""
    return TinyBackend.seeded(
        seed,
        tokenizer=backend.tokenizer,
        cfg=TinyConfig(
            layer_count=backend.cfg.layer_count,
            hidden_dim=backend.cfg.hidden_dim,
            n_heads=backend.cfg.n_heads,
            max_seq=backend.cfg.max_seq,
        ),
        backend_id=f"{backend.descriptor.id}-random-init-{seed}",
    )


def cross_model_transfer(
    items: Sequence[LabeledStep],
    self_backend,
    cross_backend,
    spec: Optional[ProbeSpec] = None,
    config: TrainConfig = TrainConfig(),
    pooling: str = "mean_tokens",
) -> tuple[CrossModelReport, TrainResult, TrainResult]:
    """Train twin probes on self and cross activations, same labels.

    Both probes follow the identical seed protocol, so when the two
    backends coincide the report degenerates to the within-model numbers
    and the agreement ratio is exactly one. Agreement is measured on each
    seed's shared eval split and averaged.
    """
    self_feats = extract_features(items, self_backend, pooling)
    cross_feats = extract_features(items, cross_backend, pooling)
    shared = sorted(set(self_feats.kept) & set(cross_feats.kept))
    self_rows = {k: i for i, k in enumerate(self_feats.kept)}
    cross_rows = {k: i for i, k in enumerate(cross_feats.kept)}
    x_self = self_feats.features[[self_rows[k] for k in shared]]
    x_cross = cross_feats.features[[cross_rows[k] for k in shared]]
    labels = self_feats.labels[[self_rows[k] for k in shared]]
    if spec is None:
        spec = default_spec(x_self.shape[1:])
    cross_spec = ProbeSpec(
        arch=spec.arch,
        input_shape=tuple(x_cross.shape[1:]),
        hidden_dim=spec.hidden_dim,
        depth=spec.depth,
    )
    self_result = train_probe(x_self, labels, spec, config)
    cross_result = train_probe(x_cross, labels, cross_spec, config)
    agreements = []
    for run_self, run_cross in zip(self_result.runs, cross_result.runs):
        # Splits depend only on (labels, seed), so both runs share them.
        eval_idx = run_self.eval_indices
        agreements.append(
            float(
                np.mean(
                    run_self.model.predict(x_self[eval_idx])
                    == run_cross.model.predict(x_cross[eval_idx])
                )
            )
        )
    report = CrossModelReport(
        self_model_id=self_backend.descriptor.id,
        cross_model_id=cross_backend.descriptor.id,
        within_accuracy=self_result.report.mean,
        within_std=self_result.report.std,
        cross_accuracy=cross_result.report.mean,
        cross_std=cross_result.report.std,
        agreement_ratio=float(np.mean(agreements)),
    )
    return report, self_result, cross_result
