"""Probe architectures: linear and MLP heads over pooled activations.

``linear`` and ``mlp`` consume (d,)-shaped inputs (token- and
layer-averaged); ``lw_linear`` and ``lw_mlp`` consume (L, d) inputs
flattened across layers. All probes emit one logit; binary predictions
threshold at zero. Forward and backward passes are plain numpy so a
seed pins the whole trajectory.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

ARCHS = ("linear", "mlp", "lw_linear", "lw_mlp")

_MLP_HIDDEN = (128, 256)
_MLP_DEPTH = (2, 5)
_LW_MLP_HIDDEN = (16, 128, 1024, 4096)


class ProbeError(Exception):
    pass


@dataclass(frozen=True)
class ProbeSpec:
    """Architecture choice plus the pooled input shape it expects."""

    arch: str
    input_shape: tuple[int, ...]
    hidden_dim: int = 128
    depth: int = 2

    def __post_init__(self) -> None:
        if self.arch not in ARCHS:
            raise ProbeError(f"unknown probe arch {self.arch!r}")
        if self.arch in ("linear", "mlp") and len(self.input_shape) != 1:
            raise ProbeError(f"{self.arch} probes expect flat (d,) inputs")
        if self.arch in ("lw_linear", "lw_mlp") and len(self.input_shape) != 2:
            raise ProbeError(f"{self.arch} probes expect (L, d) inputs")
        if self.arch == "mlp":
            if self.hidden_dim not in _MLP_HIDDEN:
                raise ProbeError(f"mlp hidden_dim must be one of {_MLP_HIDDEN}")
            if self.depth not in _MLP_DEPTH:
                raise ProbeError(f"mlp depth must be one of {_MLP_DEPTH}")
        if self.arch == "lw_mlp" and self.hidden_dim not in _LW_MLP_HIDDEN:
            raise ProbeError(f"lw_mlp hidden_dim must be one of {_LW_MLP_HIDDEN}")

    @property
    def flat_input_dim(self) -> int:
        return int(np.prod(self.input_shape))

    @property
    def layer_dims(self) -> list[tuple[int, int]]:
        d = self.flat_input_dim
        if self.arch in ("linear", "lw_linear"):
            return [(d, 1)]
        n_linear = self.depth if self.arch == "mlp" else 2
        dims = [(d, self.hidden_dim)]
        for _ in range(n_linear - 2):
            dims.append((self.hidden_dim, self.hidden_dim))
        dims.append((self.hidden_dim, 1))
        return dims

    def to_dict(self) -> dict:
        return {
            "arch": self.arch,
            "input_shape": list(self.input_shape),
            "hidden_dim": self.hidden_dim,
            "depth": self.depth,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "ProbeSpec":
        return cls(
            arch=d["arch"],
            input_shape=tuple(d["input_shape"]),
            hidden_dim=d.get("hidden_dim", 128),
            depth=d.get("depth", 2),
        )


def default_spec(input_shape: tuple[int, ...]) -> ProbeSpec:
    """The standard probe: layerwise MLP with hidden dimension 128."""
    return ProbeSpec(arch="lw_mlp", input_shape=input_shape, hidden_dim=128)


class ProbeModel:
    """Weights plus forward/backward for one probe."""

    def __init__(self, spec: ProbeSpec, weights: list[np.ndarray], biases: list[np.ndarray]):
        self.spec = spec
        self.weights = weights
        self.biases = biases

    @classmethod
    def initialized(cls, spec: ProbeSpec, seed: int) -> "ProbeModel":
        rng = np.random.default_rng(seed)
        weights, biases = [], []
        for fan_in, fan_out in spec.layer_dims:
            weights.append(rng.normal(0.0, 1.0 / np.sqrt(fan_in), size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(spec, weights, biases)

    def parameters(self) -> list[np.ndarray]:
        params: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            params.append(w)
            params.append(b)
        return params

    def _flatten_inputs(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        expected = self.spec.input_shape
        if x.shape[1:] != expected:
            raise ProbeError(f"expected inputs of shape (N, {expected}), got {x.shape}")
        return x.reshape(x.shape[0], -1)

    def logits(self, x: np.ndarray) -> np.ndarray:
        h = self._flatten_inputs(x)
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w + b
            if i < last:
                h = np.maximum(h, 0.0)
        return h[:, 0]

    def predict(self, x: np.ndarray) -> np.ndarray:
        return (self.logits(x) > 0.0).astype(np.int64)

    def loss_and_grads(
        self, x: np.ndarray, y: np.ndarray
    ) -> tuple[float, list[np.ndarray]]:
        """Binary cross-entropy with logits; grads in parameters() order."""
        flat = self._flatten_inputs(x)
        y = np.asarray(y, dtype=np.float64)
        acts = [flat]
        pre: list[np.ndarray] = []
        h = flat
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            z = h @ w + b
            pre.append(z)
            h = np.maximum(z, 0.0) if i < last else z
            acts.append(h)
        logit = h[:, 0]
        # Stable BCE-with-logits.
        loss = float(
            np.mean(np.maximum(logit, 0.0) - logit * y + np.log1p(np.exp(-np.abs(logit))))
        )
        n = len(y)
        dlogit = (1.0 / (1.0 + np.exp(-logit)) - y) / n
        dh = dlogit[:, None]
        grads_w: list[np.ndarray] = [None] * len(self.weights)
        grads_b: list[np.ndarray] = [None] * len(self.biases)
        for i in range(last, -1, -1):
            dz = dh if i == last else dh * (pre[i] > 0.0)
            grads_w[i] = acts[i].T @ dz
            grads_b[i] = dz.sum(axis=0)
            if i > 0:
                dh = dz @ self.weights[i].T
        grads: list[np.ndarray] = []
        for gw, gb in zip(grads_w, grads_b):
            grads.append(gw)
            grads.append(gb)
        return loss, grads

    def copy(self) -> "ProbeModel":
        return ProbeModel(
            self.spec,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )

    # Serialization: flat float arrays plus a JSON spec.

    def save(self, path) -> None:
        path = Path(path)
        flat = np.concatenate(
            [p.ravel() for p in self.parameters()] or [np.zeros(0)]
        ).astype("<f8")
        header = {"spec": self.spec.to_dict()}
        with path.open("wb") as fh:
            fh.write(json.dumps(header).encode("utf-8"))
            fh.write(b"\n")
            fh.write(flat.tobytes())

    @classmethod
    def load(cls, path) -> "ProbeModel":
        with Path(path).open("rb") as fh:
            header = json.loads(fh.readline().decode("utf-8"))
            flat = np.frombuffer(fh.read(), dtype="<f8")
        spec = ProbeSpec.from_dict(header["spec"])
        model = cls.initialized(spec, seed=0)
        pos = 0
        for p in model.parameters():
            p[...] = flat[pos : pos + p.size].reshape(p.shape)
            pos += p.size
        if pos != flat.size:
            raise ProbeError("probe weight payload does not match spec")
        return model
