"""HTTP+JSON remote backend: client and a loopback reference server.

Wire format (all arrays are flat JSON lists with declared shapes):

    GET  /v1/capabilities -> {gradients, activations, L, d, vocab, ...}
    POST /v1/generate     {token_ids, mode, temperature, top_p,
                           max_new_tokens, seed} -> {token_ids, stop_reason}
    POST /v1/logprobs     {context_ids, continuation_ids} -> {logprobs}
    POST /v1/activations  {token_ids, span} -> {shape: [S,L,d], values}
    POST /v1/grad_norms   {token_ids, target_span, source_spans} -> {norms}

Gradient support on the wire is span-norm only: servers reduce the
embedding-gradient tensor to per-source-span Frobenius norms instead of
shipping the full tensor. Text/ids conversion is client-side; the
capabilities payload carries the tokenizer vocabulary so a client can
self-configure against a cooperative server.
"""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import requests

from .tiny import GenerationResult, TinyBackend
from .tokenizer import TinyTokenizer
from .types import (
    ActivationTensor,
    BackendCapabilities,
    BackendDescriptor,
    BackendError,
    CapacityError,
    GenerationParams,
    InputError,
    TokenSequence,
    TransportError,
    UnsupportedCapabilityError,
)

_ERROR_KINDS = {
    "input": InputError,
    "capacity": CapacityError,
    "unsupported": UnsupportedCapabilityError,
}


class RemoteBackend:
    """Client for the /v1 inference protocol.

    Sessions are pooled and requests serialized per call; the handle
    itself holds no mutable inference state and is thread-safe.
    """

    def __init__(
        self,
        endpoint: str,
        tokenizer: TinyTokenizer | None = None,
        timeout: float = 30.0,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self._session = requests.Session()
        self._caps_raw = self._get("/v1/capabilities")
        if tokenizer is None:
            tok_info = self._caps_raw.get("tokenizer")
            if not tok_info:
                raise TransportError(
                    "server did not advertise a tokenizer; pass one explicitly"
                )
            tokenizer = TinyTokenizer(tok_info["tokens"], name=tok_info.get("name", "remote"))
        self.tokenizer = tokenizer
        if self.tokenizer.vocab_size != self._caps_raw["vocab"]:
            raise InputError("client tokenizer vocabulary does not match server vocab size")

    # -- transport ------------------------------------------------------

    def _get(self, path: str) -> dict:
        try:
            resp = self._session.get(self.endpoint + path, timeout=self.timeout)
        except requests.RequestException as exc:
            raise TransportError(f"GET {path} failed: {exc}") from exc
        return self._decode(resp, path)

    def _post(self, path: str, payload: dict) -> dict:
        try:
            resp = self._session.post(
                self.endpoint + path, json=payload, timeout=self.timeout
            )
        except requests.RequestException as exc:
            raise TransportError(f"POST {path} failed: {exc}") from exc
        return self._decode(resp, path)

    @staticmethod
    def _decode(resp, path: str) -> dict:
        try:
            body = resp.json()
        except ValueError as exc:
            raise TransportError(f"{path}: non-JSON response (HTTP {resp.status_code})") from exc
        if resp.status_code != 200 or "error" in body:
            kind = body.get("kind", "")
            exc_type = _ERROR_KINDS.get(kind, TransportError)
            raise exc_type(body.get("error", f"HTTP {resp.status_code} on {path}"))
        return body

    # -- backend surface -------------------------------------------------

    @property
    def descriptor(self) -> BackendDescriptor:
        c = self._caps_raw
        return BackendDescriptor(
            id=c.get("model_id", "remote"),
            kind="remote",
            layer_count=c["L"],
            hidden_dim=c["d"],
            vocab_size=c["vocab"],
            elicitation_suffix=c.get("elicitation_suffix", ""),
            endpoint=self.endpoint,
        )

    @property
    def capabilities(self) -> BackendCapabilities:
        c = self._caps_raw
        return BackendCapabilities(
            gradients=False,  # full gradient tensors never cross the wire
            activations=bool(c.get("activations", False)),
            grad_norms=bool(c.get("gradients", False)),
            unembedding=False,
        )

    def tokenize(self, text: str) -> TokenSequence:
        return self.tokenizer.tokenize(text)

    def detokenize(self, token_ids) -> str:
        return self.tokenizer.detokenize(token_ids)

    def generate(
        self, prompt: TokenSequence, params: GenerationParams, seed: int | None = None
    ) -> GenerationResult:
        if len(prompt) == 0:
            raise InputError("prompt must be non-empty")
        body = self._post(
            "/v1/generate",
            {
                "token_ids": list(prompt.token_ids),
                "mode": params.mode,
                "temperature": params.temperature,
                "top_p": params.top_p,
                "max_new_tokens": params.max_new_tokens,
                "seed": seed,
            },
        )
        seq = self.tokenizer.sequence_from_ids(body["token_ids"])
        return GenerationResult(seq, body.get("stop_reason", "max_tokens"))

    def score_continuation(
        self, context: TokenSequence, continuation: TokenSequence
    ) -> np.ndarray:
        if len(continuation) == 0:
            raise InputError("continuation must be non-empty")
        body = self._post(
            "/v1/logprobs",
            {
                "context_ids": list(context.token_ids),
                "continuation_ids": list(continuation.token_ids),
            },
        )
        return np.asarray(body["logprobs"], dtype=np.float64)

    def capture_activations(
        self, tokens: TokenSequence, span: tuple[int, int]
    ) -> ActivationTensor:
        if not self.capabilities.activations:
            raise UnsupportedCapabilityError("server does not expose activations")
        body = self._post(
            "/v1/activations",
            {"token_ids": list(tokens.token_ids), "span": list(span)},
        )
        values = np.asarray(body["values"], dtype=np.float64).reshape(body["shape"])
        return ActivationTensor(values, (span[0], span[1]))

    def grad_scalar_wrt_embeddings(self, tokens, target_span, emb_override=None):
        raise UnsupportedCapabilityError(
            "remote backends expose span gradient norms, not full gradient tensors"
        )

    def grad_span_norms(
        self,
        tokens: TokenSequence,
        target_span: tuple[int, int],
        source_spans: list[tuple[int, int]],
    ) -> np.ndarray:
        if not self.capabilities.grad_norms:
            raise UnsupportedCapabilityError("server does not expose gradients")
        body = self._post(
            "/v1/grad_norms",
            {
                "token_ids": list(tokens.token_ids),
                "target_span": list(target_span),
                "source_spans": [list(s) for s in source_spans],
            },
        )
        return np.asarray(body["norms"], dtype=np.float64)


# ----------------------------------------------------------------------
# Reference server wrapping a built-in backend.
# ----------------------------------------------------------------------


def _error_payload(exc: Exception) -> tuple[int, dict]:
    if isinstance(exc, CapacityError):
        return 413, {"error": str(exc), "kind": "capacity"}
    if isinstance(exc, UnsupportedCapabilityError):
        return 501, {"error": str(exc), "kind": "unsupported"}
    if isinstance(exc, (InputError, KeyError, ValueError)):
        return 400, {"error": str(exc), "kind": "input"}
    return 500, {"error": str(exc), "kind": "internal"}


class _Handler(BaseHTTPRequestHandler):
    backend: TinyBackend  # set by serve()
    serve_gradients: bool = True
    serve_activations: bool = True

    def log_message(self, *args) -> None:  # silence request logging
        pass

    def _reply(self, status: int, payload: dict) -> None:
        data = json.dumps(payload).encode("utf-8")
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(data)))
        self.end_headers()
        self.wfile.write(data)

    def do_GET(self) -> None:
        if self.path != "/v1/capabilities":
            self._reply(404, {"error": f"no such endpoint {self.path}", "kind": "input"})
            return
        be = self.backend
        self._reply(
            200,
            {
                "gradients": self.serve_gradients,
                "activations": self.serve_activations,
                "L": be.cfg.layer_count,
                "d": be.cfg.hidden_dim,
                "vocab": be.weights.vocab_size,
                "max_seq": be.cfg.max_seq,
                "model_id": be.descriptor.id,
                "elicitation_suffix": be.descriptor.elicitation_suffix,
                "tokenizer": {
                    "name": be.tokenizer.name,
                    "tokens": be.tokenizer.vocab[2:],
                },
            },
        )

    def do_POST(self) -> None:
        length = int(self.headers.get("Content-Length", "0"))
        try:
            req = json.loads(self.rfile.read(length).decode("utf-8"))
            self._reply(200, self._dispatch(req))
        except BackendError as exc:
            self._reply(*_error_payload(exc))
        except Exception as exc:  # noqa: BLE001 - survive malformed requests
            self._reply(*_error_payload(exc))

    def _dispatch(self, req: dict) -> dict:
        be = self.backend
        if self.path == "/v1/generate":
            seq = be.tokenizer.sequence_from_ids(req["token_ids"])
            params = GenerationParams(
                mode=req["mode"],
                temperature=req.get("temperature", 0.6),
                top_p=req.get("top_p", 0.95),
                max_new_tokens=req["max_new_tokens"],
            )
            result = be.generate(seq, params, seed=req.get("seed"))
            return {
                "token_ids": list(result.tokens.token_ids),
                "stop_reason": result.stop_reason,
            }
        if self.path == "/v1/logprobs":
            ctx = be.tokenizer.sequence_from_ids(req["context_ids"])
            cont = be.tokenizer.sequence_from_ids(req["continuation_ids"])
            return {"logprobs": be.score_continuation(ctx, cont).tolist()}
        if self.path == "/v1/activations":
            if not self.serve_activations:
                raise UnsupportedCapabilityError("activations disabled")
            seq = be.tokenizer.sequence_from_ids(req["token_ids"])
            act = be.capture_activations(seq, tuple(req["span"]))
            values = act.values.astype(np.float32)
            return {"shape": list(values.shape), "values": values.ravel().tolist()}
        if self.path == "/v1/grad_norms":
            if not self.serve_gradients:
                raise UnsupportedCapabilityError("gradients disabled")
            seq = be.tokenizer.sequence_from_ids(req["token_ids"])
            norms = be.grad_span_norms(
                seq, tuple(req["target_span"]), [tuple(s) for s in req["source_spans"]]
            )
            return {"norms": norms.tolist()}
        raise InputError(f"no such endpoint {self.path}")


class ReferenceServer:
    """Serve a TinyBackend over the /v1 protocol on a background thread."""

    def __init__(
        self,
        backend: TinyBackend,
        host: str = "127.0.0.1",
        port: int = 0,
        gradients: bool = True,
        activations: bool = True,
    ):
        handler = type(
            "_BoundHandler",
            (_Handler,),
            {
                "backend": backend,
                "serve_gradients": gradients,
                "serve_activations": activations,
            },
        )
        self._httpd = ThreadingHTTPServer((host, port), handler)
        self._thread = threading.Thread(target=self._httpd.serve_forever, daemon=True)

    @property
    def url(self) -> str:
        host, port = self._httpd.server_address[:2]
        return f"http://{host}:{port}"

    def __enter__(self) -> "ReferenceServer":
        self._thread.start()
        return self

    def __exit__(self, *exc) -> None:
        self._httpd.shutdown()
        self._httpd.server_close()
