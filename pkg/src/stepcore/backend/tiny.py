"""Built-in tiny causal transformer with exact input-embedding gradients.

Pure-numpy float64 decoder: learned positional embeddings, pre-norm
blocks (causal multi-head attention + ReLU MLP), tied unembedding. A BOS
token is prepended internally so every user token has a well-defined
conditional probability; user-facing positions never include it.

The backward pass propagates a scalar (a sum of target-token
probabilities) down to the per-position input embeddings only; parameter
gradients are intentionally not computed. Everything is deterministic
given (weights, inputs, seed).
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .tokenizer import TinyTokenizer, TinyTokenizer as _Tok, tokenizer_from_name
from .types import (
    ActivationTensor,
    BackendCapabilities,
    BackendDescriptor,
    CapacityError,
    DEFAULT_ELICITATION_SUFFIX,
    EmbeddingGradient,
    GenerationParams,
    InputError,
    TokenSequence,
)

_LN_EPS = 1e-5
_INIT_STD = 0.02
WEIGHT_FORMAT = "stepcore-tiny-v1"


@dataclass(frozen=True)
class TinyConfig:
    """Geometry of a tiny model. hidden_dim must divide by n_heads."""

    layer_count: int = 2
    hidden_dim: int = 64
    n_heads: int = 4
    max_seq: int = 256

    def __post_init__(self) -> None:
        if self.hidden_dim % self.n_heads != 0:
            raise ValueError("hidden_dim must be divisible by n_heads")


def _param_layout(vocab_size: int, cfg: TinyConfig) -> list[tuple[str, tuple[int, ...]]]:
    d, ff = cfg.hidden_dim, 4 * cfg.hidden_dim
    layout: list[tuple[str, tuple[int, ...]]] = [
        ("tok_emb", (vocab_size, d)),
        ("pos_emb", (cfg.max_seq, d)),
    ]
    for i in range(cfg.layer_count):
        layout += [
            (f"l{i}.ln1.g", (d,)),
            (f"l{i}.ln1.b", (d,)),
            (f"l{i}.wq", (d, d)),
            (f"l{i}.wk", (d, d)),
            (f"l{i}.wv", (d, d)),
            (f"l{i}.wo", (d, d)),
            (f"l{i}.ln2.g", (d,)),
            (f"l{i}.ln2.b", (d,)),
            (f"l{i}.w_in", (d, ff)),
            (f"l{i}.w_out", (ff, d)),
        ]
    layout += [("lnf.g", (d,)), ("lnf.b", (d,))]
    return layout


class TinyWeights:
    """Named float64 parameter arrays with a fixed serialization layout."""

    def __init__(self, vocab_size: int, cfg: TinyConfig, arrays: dict[str, np.ndarray]):
        self.vocab_size = vocab_size
        self.cfg = cfg
        self.arrays = arrays
        for name, shape in _param_layout(vocab_size, cfg):
            if name not in arrays or arrays[name].shape != shape:
                raise ValueError(f"weight {name} missing or wrong shape")

    @classmethod
    def seeded(cls, vocab_size: int, cfg: TinyConfig, seed: int) -> "TinyWeights":
        rng = np.random.default_rng(seed)
        arrays: dict[str, np.ndarray] = {}
        for name, shape in _param_layout(vocab_size, cfg):
            if name.endswith(".g"):
                arrays[name] = np.ones(shape)
            elif name.endswith(".b"):
                arrays[name] = np.zeros(shape)
            else:
                arrays[name] = rng.normal(0.0, _INIT_STD, size=shape)
        return cls(vocab_size, cfg, arrays)

    @classmethod
    def zeroed(cls, vocab_size: int, cfg: TinyConfig) -> "TinyWeights":
        arrays = {name: np.zeros(shape) for name, shape in _param_layout(vocab_size, cfg)}
        return cls(vocab_size, cfg, arrays)

    def __getitem__(self, name: str) -> np.ndarray:
        return self.arrays[name]


def _layernorm_fwd(x: np.ndarray, g: np.ndarray, b: np.ndarray):
    """x (T, d) -> normalized (T, d); cache for backward."""
    mu = x.mean(axis=-1, keepdims=True)
    var = x.var(axis=-1, keepdims=True)
    inv_std = 1.0 / np.sqrt(var + _LN_EPS)
    xhat = (x - mu) * inv_std
    return xhat * g + b, (xhat, inv_std, g)


def _layernorm_bwd(dout: np.ndarray, cache) -> np.ndarray:
    xhat, inv_std, g = cache
    dxhat = dout * g
    m1 = dxhat.mean(axis=-1, keepdims=True)
    m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
    return inv_std * (dxhat - m1 - xhat * m2)


def _softmax(z: np.ndarray, axis: int = -1) -> np.ndarray:
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=axis, keepdims=True)


class TinyBackend:
    """Backend facade over TinyWeights + TinyTokenizer."""

    def __init__(
        self,
        weights: TinyWeights,
        tokenizer: TinyTokenizer,
        backend_id: str = "tiny",
        elicitation_suffix: str = DEFAULT_ELICITATION_SUFFIX,
        seed: int | None = None,
    ):
        if tokenizer.vocab_size != weights.vocab_size:
            raise ValueError("tokenizer vocabulary does not match weights")
        self.weights = weights
        self.tokenizer = tokenizer
        self.cfg = weights.cfg
        self._suffix = elicitation_suffix
        self._id = backend_id
        self._seed = seed

    # ------------------------------------------------------------------
    # Construction helpers
    # ------------------------------------------------------------------

    @classmethod
    def seeded(
        cls,
        seed: int,
        tokenizer: TinyTokenizer | None = None,
        cfg: TinyConfig | None = None,
        backend_id: str | None = None,
        elicitation_suffix: str = DEFAULT_ELICITATION_SUFFIX,
    ) -> "TinyBackend":
        tok = tokenizer if tokenizer is not None else tokenizer_from_name("math-words-v1")
        cfg = cfg or TinyConfig()
        weights = TinyWeights.seeded(tok.vocab_size, cfg, seed)
        return cls(
            weights,
            tok,
            backend_id=backend_id or f"tiny-seed{seed}",
            elicitation_suffix=elicitation_suffix,
            seed=seed,
        )

    @classmethod
    def zeroed(
        cls,
        tokenizer: TinyTokenizer | None = None,
        cfg: TinyConfig | None = None,
    ) -> "TinyBackend":
        tok = tokenizer if tokenizer is not None else tokenizer_from_name("chars-v1")
        cfg = cfg or TinyConfig()
        weights = TinyWeights.zeroed(tok.vocab_size, cfg)
        return cls(weights, tok, backend_id="tiny-zeroed", seed=None)

    @property
    def descriptor(self) -> BackendDescriptor:
        return BackendDescriptor(
            id=self._id,
            kind="builtin-tiny",
            layer_count=self.cfg.layer_count,
            hidden_dim=self.cfg.hidden_dim,
            vocab_size=self.weights.vocab_size,
            elicitation_suffix=self._suffix,
            seed=self._seed,
        )

    @property
    def capabilities(self) -> BackendCapabilities:
        return BackendCapabilities()

    # ------------------------------------------------------------------
    # Tokenization
    # ------------------------------------------------------------------

    def tokenize(self, text: str) -> TokenSequence:
        return self.tokenizer.tokenize(text)

    def detokenize(self, token_ids) -> str:
        return self.tokenizer.detokenize(token_ids)

    def _check_sequence(self, seq: TokenSequence) -> None:
        if self.tokenizer.detokenize(seq.token_ids) != seq.text:
            raise InputError("token ids do not reproduce the sequence text")

    # ------------------------------------------------------------------
    # Forward pass
    # ------------------------------------------------------------------

    def _internal_ids(self, user_ids) -> np.ndarray:
        ids = np.concatenate(([self.tokenizer.bos_id], np.asarray(user_ids, dtype=np.int64)))
        if len(ids) > self.cfg.max_seq:
            raise CapacityError(
                f"sequence of {len(ids)} tokens exceeds context window {self.cfg.max_seq}"
            )
        return ids

    def input_embeddings(self, user_ids) -> np.ndarray:
        """Token-embedding rows for [BOS] + user tokens, shape (T+1, d)."""
        ids = self._internal_ids(user_ids)
        return self.weights["tok_emb"][ids].copy()

    def _forward(self, emb: np.ndarray, want_cache: bool = False):
        """emb (T, d) token embeddings incl. BOS row -> logits (T, V)."""
        w = self.weights
        cfg = self.cfg
        T = emb.shape[0]
        H, dh = cfg.n_heads, cfg.hidden_dim // cfg.n_heads
        x = emb + w["pos_emb"][:T]
        cache: dict = {"emb": emb, "layers": [], "resid": []}
        neg = np.finfo(np.float64).min
        causal = np.triu(np.ones((T, T), dtype=bool), k=1)
        for i in range(cfg.layer_count):
            lc: dict = {"x_in": x}
            ln1_out, lc["ln1"] = _layernorm_fwd(x, w[f"l{i}.ln1.g"], w[f"l{i}.ln1.b"])
            q = ln1_out @ w[f"l{i}.wq"]
            k = ln1_out @ w[f"l{i}.wk"]
            v = ln1_out @ w[f"l{i}.wv"]
            q_h = q.reshape(T, H, dh)
            k_h = k.reshape(T, H, dh)
            v_h = v.reshape(T, H, dh)
            scores = np.einsum("ihd,jhd->hij", q_h, k_h) / np.sqrt(dh)
            scores = np.where(causal[None, :, :], neg, scores)
            attn = _softmax(scores, axis=-1)  # (H, T, T)
            ctx = np.einsum("hij,jhd->ihd", attn, v_h).reshape(T, -1)
            attn_out = ctx @ w[f"l{i}.wo"]
            x = x + attn_out
            lc.update(q_h=q_h, k_h=k_h, v_h=v_h, attn=attn, ctx=ctx, x_mid=x)
            ln2_out, lc["ln2"] = _layernorm_fwd(x, w[f"l{i}.ln2.g"], w[f"l{i}.ln2.b"])
            pre = ln2_out @ w[f"l{i}.w_in"]
            act = np.maximum(pre, 0.0)
            x = x + act @ w[f"l{i}.w_out"]
            lc["pre"] = pre
            lc["act"] = act
            cache["layers"].append(lc)
            cache["resid"].append(x)
        xf, lnf_cache = _layernorm_fwd(x, w["lnf.g"], w["lnf.b"])
        logits = xf @ w["tok_emb"].T
        if want_cache:
            cache["lnf"] = lnf_cache
            return logits, cache
        return logits

    def _backward_to_embeddings(self, dlogits: np.ndarray, cache: dict) -> np.ndarray:
        """dlogits (T, V) -> gradient w.r.t. input embedding rows (T, d)."""
        w = self.weights
        cfg = self.cfg
        T = dlogits.shape[0]
        H, dh = cfg.n_heads, cfg.hidden_dim // cfg.n_heads
        dxf = dlogits @ w["tok_emb"]
        dx = _layernorm_bwd(dxf, cache["lnf"])
        for i in reversed(range(cfg.layer_count)):
            lc = cache["layers"][i]
            # MLP sub-block: x_out = x_mid + relu(ln2(x_mid) @ w_in) @ w_out
            d_act = dx @ w[f"l{i}.w_out"].T
            d_pre = d_act * (lc["pre"] > 0)
            d_ln2 = d_pre @ w[f"l{i}.w_in"].T
            dx = dx + _layernorm_bwd(d_ln2, lc["ln2"])
            # Attention sub-block: x_mid = x_in + attn(ln1(x_in)) @ wo
            d_ctx = (dx @ w[f"l{i}.wo"].T).reshape(T, H, dh)
            attn, v_h, q_h, k_h = lc["attn"], lc["v_h"], lc["q_h"], lc["k_h"]
            d_attn = np.einsum("ihd,jhd->hij", d_ctx, v_h)
            d_v = np.einsum("hij,ihd->jhd", attn, d_ctx)
            d_scores = attn * (d_attn - (d_attn * attn).sum(axis=-1, keepdims=True))
            d_q = np.einsum("hij,jhd->ihd", d_scores, k_h) / np.sqrt(dh)
            d_k = np.einsum("hij,ihd->jhd", d_scores, q_h) / np.sqrt(dh)
            d_ln1 = (
                d_q.reshape(T, -1) @ w[f"l{i}.wq"].T
                + d_k.reshape(T, -1) @ w[f"l{i}.wk"].T
                + d_v.reshape(T, -1) @ w[f"l{i}.wv"].T
            )
            dx = dx + _layernorm_bwd(d_ln1, lc["ln1"])
        return dx

    # ------------------------------------------------------------------
    # Operations
    # ------------------------------------------------------------------

    def generate(
        self,
        prompt: TokenSequence,
        params: GenerationParams,
        seed: int | None = None,
    ) -> "GenerationResult":
        if len(prompt) == 0:
            raise InputError("prompt must be non-empty")
        self._check_sequence(prompt)
        ids = list(self._internal_ids(prompt.token_ids))
        if len(ids) >= self.cfg.max_seq:
            raise CapacityError("prompt fills the context window, nothing to generate")
        rng = np.random.default_rng(seed)
        out: list[int] = []
        stop_reason = "max_tokens"
        for _ in range(params.max_new_tokens):
            logits = self._forward(self.weights["tok_emb"][np.asarray(ids)])[-1]
            if params.mode == "greedy":
                nxt = int(np.argmax(logits))
            else:
                nxt = self._sample(logits, params, rng)
            if nxt == self.tokenizer.eos_id:
                stop_reason = "eos"
                break
            out.append(nxt)
            ids.append(nxt)
            if len(ids) >= self.cfg.max_seq:
                stop_reason = "window"
                break
        return GenerationResult(self.tokenizer.sequence_from_ids(out), stop_reason)

    def _sample(self, logits: np.ndarray, params: GenerationParams, rng) -> int:
        probs = _softmax(logits / params.temperature)
        order = np.argsort(-probs, kind="stable")
        sorted_p = probs[order]
        cum = np.cumsum(sorted_p)
        cutoff = int(np.searchsorted(cum, params.top_p, side="left")) + 1
        kept = order[:cutoff]
        kept_p = probs[kept] / probs[kept].sum()
        return int(rng.choice(kept, p=kept_p))

    def score_continuation(
        self, context: TokenSequence, continuation: TokenSequence
    ) -> np.ndarray:
        """Log-probability of each continuation token given context, (n,)."""
        if len(continuation) == 0:
            raise InputError("continuation must be non-empty")
        self._check_sequence(context)
        self._check_sequence(continuation)
        user_ids = np.asarray(context.token_ids + continuation.token_ids, dtype=np.int64)
        logits = self._forward(self.weights["tok_emb"][self._internal_ids(user_ids)])
        # User token u sits at internal position u+1, predicted by row u.
        rows = np.arange(len(context), len(user_ids))
        z = logits[rows]
        z = z - z.max(axis=-1, keepdims=True)
        logp = z - np.log(np.exp(z).sum(axis=-1, keepdims=True))
        return logp[np.arange(len(rows)), user_ids[rows]]

    def capture_activations(
        self, tokens: TokenSequence, span: tuple[int, int]
    ) -> ActivationTensor:
        start, end = span
        if not (0 <= start < end <= len(tokens)):
            raise InputError(f"span {span} out of range for {len(tokens)} tokens")
        self._check_sequence(tokens)
        emb = self.weights["tok_emb"][self._internal_ids(tokens.token_ids)]
        _, cache = self._forward(emb, want_cache=True)
        # Residual stream after each block, at the user positions of span.
        stacked = np.stack(cache["resid"], axis=1)  # (T_int, L, d)
        return ActivationTensor(stacked[start + 1 : end + 1].copy(), (start, end))

    def grad_scalar_wrt_embeddings(
        self,
        tokens: TokenSequence,
        target_span: tuple[int, int],
        emb_override: np.ndarray | None = None,
    ) -> EmbeddingGradient:
        """Gradient of sum of target-token probabilities w.r.t. input embeddings.

        ``emb_override`` (tokens+1, d), when given, replaces the token
        embedding rows (BOS included) before the forward pass; used by
        path-integration attribution methods.
        """
        start, end = target_span
        if not (0 <= start < end <= len(tokens)):
            raise InputError(f"target_span {target_span} out of range")
        self._check_sequence(tokens)
        user_ids = np.asarray(tokens.token_ids, dtype=np.int64)
        emb = self.input_embeddings(user_ids) if emb_override is None else emb_override
        if emb.shape != (len(user_ids) + 1, self.cfg.hidden_dim):
            raise InputError("embedding override has wrong shape")
        logits, cache = self._forward(emb, want_cache=True)
        dlogits = np.zeros_like(logits)
        for u in range(start, end):
            row_probs = _softmax(logits[u])
            tok = user_ids[u]
            grad_row = -row_probs[tok] * row_probs
            grad_row[tok] += row_probs[tok]
            dlogits[u] += grad_row
        demb = self._backward_to_embeddings(dlogits, cache)
        return EmbeddingGradient(demb[1:].copy(), (start, end))

    def span_probability_sum(
        self,
        tokens: TokenSequence,
        target_span: tuple[int, int],
        emb_override: np.ndarray | None = None,
    ) -> float:
        """Sum of model probabilities of the span's actual tokens.

        The scalar whose embedding gradient grad_scalar_wrt_embeddings
        returns; exposed so finite-difference oracles can recompute it.
        """
        start, end = target_span
        user_ids = np.asarray(tokens.token_ids, dtype=np.int64)
        emb = self.input_embeddings(user_ids) if emb_override is None else emb_override
        logits = self._forward(emb)
        total = 0.0
        for u in range(start, end):
            total += float(_softmax(logits[u])[user_ids[u]])
        return total

    def grad_span_norms(
        self,
        tokens: TokenSequence,
        target_span: tuple[int, int],
        source_spans: list[tuple[int, int]],
    ) -> np.ndarray:
        """Frobenius norm of the embedding-gradient block over each source span."""
        grad = self.grad_scalar_wrt_embeddings(tokens, target_span).values
        return np.array(
            [float(np.linalg.norm(grad[s:e])) for s, e in source_spans]
        )

    # ------------------------------------------------------------------
    # Introspection and persistence
    # ------------------------------------------------------------------

    def unembedding(self) -> np.ndarray:
        """Unembedding matrix (vocab, d); tied to the token embedding."""
        return self.weights["tok_emb"].copy()

    def vocab_strings(self) -> list[str]:
        return list(self.tokenizer.vocab)

    def save_weights(self, path) -> None:
        save_weight_file(path, self)


@dataclass(frozen=True)
class GenerationResult:
    tokens: TokenSequence
    stop_reason: str  # "eos" | "max_tokens" | "window"

    @property
    def natural_stop(self) -> bool:
        return self.stop_reason == "eos"


# ----------------------------------------------------------------------
# Flat weight file: one JSON header line, then little-endian float32.
# ----------------------------------------------------------------------


def save_weight_file(path, backend: TinyBackend) -> None:
    w = backend.weights
    layout = _param_layout(w.vocab_size, w.cfg)
    header = {
        "format": WEIGHT_FORMAT,
        "dims": {
            "vocab": w.vocab_size,
            "hidden": w.cfg.hidden_dim,
            "layers": w.cfg.layer_count,
            "heads": w.cfg.n_heads,
            "max_seq": w.cfg.max_seq,
        },
        "layout": [[name, list(shape)] for name, shape in layout],
        "seed": backend._seed,
        "tokenizer": {
            "name": backend.tokenizer.name,
            "tokens": backend.tokenizer.vocab[2:],
        },
        "backend_id": backend._id,
        "elicitation_suffix": backend._suffix,
    }
    payload = np.concatenate([w[name].ravel() for name, _ in layout]).astype("<f4")
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(payload.tobytes())


def load_weight_file(path) -> TinyBackend:
    with open(path, "rb") as fh:
        header_line = fh.readline()
        blob = fh.read()
    header = json.loads(header_line.decode("utf-8"))
    if header.get("format") != WEIGHT_FORMAT:
        raise ValueError(f"unrecognized weight file format in {path}")
    dims = header["dims"]
    cfg = TinyConfig(
        layer_count=dims["layers"],
        hidden_dim=dims["hidden"],
        n_heads=dims["heads"],
        max_seq=dims["max_seq"],
    )
    flat = np.frombuffer(blob, dtype="<f4").astype(np.float64)
    arrays: dict[str, np.ndarray] = {}
    pos = 0
    for name, shape in header["layout"]:
        size = int(np.prod(shape))
        arrays[name] = flat[pos : pos + size].reshape(shape).copy()
        pos += size
    if pos != flat.size:
        raise ValueError("weight payload size does not match layout")
    weights = TinyWeights(dims["vocab"], cfg, arrays)
    tokenizer = _Tok(header["tokenizer"]["tokens"], name=header["tokenizer"]["name"])
    return TinyBackend(
        weights,
        tokenizer,
        backend_id=header.get("backend_id", "tiny-file"),
        elicitation_suffix=header.get("elicitation_suffix", DEFAULT_ELICITATION_SUFFIX),
        seed=header.get("seed"),
    )
