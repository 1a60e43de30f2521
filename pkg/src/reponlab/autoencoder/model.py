"""Embedding + tanh-MLP autoencoder with hand-written reverse mode.

Node ``i`` is encoded by row ``i`` of the embedding table. The decoder reads
one of three combinations of the two embeddings, runs ``depth`` tanh hidden
layers of width ``width`` and a linear output unit, and a sigmoid turns the
output into ``P(R(i, j) = 1)``.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from reponlab.kernels.mlp import bias_tanh, tanh_backward

EPS = 1e-12


class Mode(str, enum.Enum):
    CONCAT = "concat"
    DIFFERENCE = "difference"
    SQUARED_DIFFERENCE = "squared_difference"


@dataclass(frozen=True)
class ModelConfig:
    n: int
    embed_dim: int = 2
    depth: int = 3
    width: int = 50
    mode: Mode = Mode.CONCAT

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if self.n < 1 or self.embed_dim < 1 or self.width < 1 or self.depth < 0:
            raise ValueError(f"invalid model config {self}")

    @property
    def input_dim(self) -> int:
        return 2 * self.embed_dim if self.mode is Mode.CONCAT else self.embed_dim

    def layer_shapes(self) -> list[tuple[int, int]]:
        dims = [self.input_dim] + [self.width] * self.depth + [1]
        return list(zip(dims[:-1], dims[1:]))


@dataclass
class ModelParams:
    """Embedding table and decoder layers; weights are ``(fan_in, fan_out)``."""

    embeddings: np.ndarray
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    mode: Mode = Mode.CONCAT

    def __post_init__(self):
        self.mode = Mode(self.mode)
        d = self.embeddings.shape[1]
        fan_in = 2 * d if self.mode is Mode.CONCAT else d
        for W, b in zip(self.weights, self.biases):
            if W.shape[0] != fan_in or b.shape != (W.shape[1],):
                raise ValueError(f"layer shapes do not chain: {W.shape}, {b.shape} after width {fan_in}")
            fan_in = W.shape[1]
        if fan_in != 1:
            raise ValueError("decoder must end in a single output unit")

    def tensors(self) -> list[np.ndarray]:
        out = [self.embeddings]
        for W, b in zip(self.weights, self.biases):
            out += [W, b]
        return out

    def tensor_names(self) -> list[str]:
        names = ["embeddings"]
        for l in range(len(self.weights)):
            names += [f"W{l}", f"b{l}"]
        return names

    def astype(self, dtype) -> ModelParams:
        return ModelParams(
            self.embeddings.astype(dtype),
            [W.astype(dtype) for W in self.weights],
            [b.astype(dtype) for b in self.biases],
            self.mode,
        )

    def copy(self) -> ModelParams:
        return ModelParams(
            self.embeddings.copy(), [W.copy() for W in self.weights], [b.copy() for b in self.biases], self.mode
        )

    @property
    def depth(self) -> int:
        return len(self.weights) - 1


def init_model(config: ModelConfig, init_scale: float = 1.0, seed: int = 0) -> ModelParams:
    """Every parameter i.i.d. ``normal(0, init_scale**2)``."""
    rng = np.random.default_rng(seed)
    E = init_scale * rng.standard_normal((config.n, config.embed_dim))
    weights, biases = [], []
    for fan_in, fan_out in config.layer_shapes():
        weights.append(init_scale * rng.standard_normal((fan_in, fan_out)))
        biases.append(init_scale * rng.standard_normal(fan_out))
    return ModelParams(E, weights, biases, config.mode)


def sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def combine(ei: np.ndarray, ej: np.ndarray, mode: Mode) -> np.ndarray:
    if mode is Mode.CONCAT:
        return np.concatenate([ei, ej], axis=-1)
    if mode is Mode.DIFFERENCE:
        return ei - ej
    return (ei - ej) ** 2


def _forward(params: ModelParams, I, J):
    x = combine(params.embeddings[I], params.embeddings[J], params.mode)
    acts = [x]
    h = x
    last = len(params.weights) - 1
    for l, (W, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ W
        if l == last:
            z += b
        else:
            bias_tanh(z, b)
        h = z
        acts.append(h)
    return acts


def logits(params: ModelParams, I, J) -> np.ndarray:
    return _forward(params, np.asarray(I), np.asarray(J))[-1][:, 0]


def predict_proba(params: ModelParams, I, J) -> np.ndarray:
    return sigmoid(logits(params, I, J))


def forward(params: ModelParams, i: int, j: int, mode: Mode | None = None) -> float:
    if mode is not None and Mode(mode) is not params.mode:
        params = ModelParams(params.embeddings, params.weights, params.biases, mode)
    return float(predict_proba(params, [i], [j])[0])


def bce(p: np.ndarray, y: np.ndarray) -> float:
    pc = np.clip(np.asarray(p, dtype=np.float64), EPS, 1.0 - EPS)
    return float(-np.mean(y * np.log(pc) + (1.0 - y) * np.log1p(-pc)))


def loss_and_gradients(params: ModelParams, pairs, labels, weight_decay_dec: float = 0.0):
    """Mean binary cross-entropy plus ``wd/2 * sum ||W||^2`` over decoder weights.

    Returns ``(loss, grads)`` with ``grads`` a :class:`ModelParams` of the
    same shapes. Probabilities are clipped to ``[1e-12, 1 - 1e-12]`` inside
    the log only; the logit gradient is always ``(p - y) / batch``.
    """
    pairs = np.asarray(pairs, dtype=np.int64).reshape(-1, 2)
    y = np.asarray(labels, dtype=params.embeddings.dtype)
    I, J = pairs[:, 0], pairs[:, 1]
    B = max(len(y), 1)
    acts = _forward(params, I, J)
    z = acts[-1][:, 0]
    p = sigmoid(z)
    loss = bce(p, y) if len(y) else 0.0
    loss += 0.5 * weight_decay_dec * sum(float(np.sum(W * W)) for W in params.weights)

    g = ((p - y) / B)[:, None]
    L = len(params.weights)
    gW = [None] * L
    gb = [None] * L
    for l in range(L - 1, -1, -1):
        W = params.weights[l]
        gW[l] = acts[l].T @ g + weight_decay_dec * W
        gb[l] = g.sum(axis=0)
        g = g @ W.T
        if l > 0:
            tanh_backward(g, acts[l])

    E = params.embeddings
    n, d = E.shape
    if params.mode is Mode.CONCAT:
        gi, gj = g[:, :d], g[:, d:]
    elif params.mode is Mode.DIFFERENCE:
        gi, gj = g, -g
    else:
        u = 2.0 * (E[I] - E[J]) * g
        gi, gj = u, -u
    gE = np.empty_like(E)
    for k in range(d):
        gE[:, k] = np.bincount(I, gi[:, k], minlength=n) + np.bincount(J, gj[:, k], minlength=n)
    return loss, ModelParams(gE, gW, gb, params.mode)


# checkpoints --------------------------------------------------------------

CHECKPOINT_FORMAT = "reponlab-checkpoint"
CHECKPOINT_VERSION = 1


def save_checkpoint(params: ModelParams, path) -> None:
    """Write one JSON header line, then every tensor as little-endian float64.

    Header keys: ``format``, ``version``, ``mode``, ``tensors`` (a list of
    ``{"name", "shape"}`` in storage order).
    """
    tensors = params.tensors()
    header = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "mode": params.mode.value,
        "tensors": [{"name": nm, "shape": list(t.shape)} for nm, t in zip(params.tensor_names(), tensors)],
    }
    with open(path, "wb") as fh:
        fh.write(json.dumps(header).encode() + b"\n")
        for t in tensors:
            fh.write(np.ascontiguousarray(t, dtype="<f8").tobytes())


def load_checkpoint(path) -> ModelParams:
    raw = Path(path).read_bytes()
    head, _, body = raw.partition(b"\n")
    header = json.loads(head)
    if header.get("format") != CHECKPOINT_FORMAT:
        raise ValueError(f"{path}: not a {CHECKPOINT_FORMAT} file")
    if header.get("version") != CHECKPOINT_VERSION:
        raise ValueError(f"{path}: unsupported checkpoint version {header.get('version')}")
    arrays = []
    offset = 0
    for spec in header["tensors"]:
        count = int(np.prod(spec["shape"], dtype=np.int64))
        arr = np.frombuffer(body, dtype="<f8", count=count, offset=offset).reshape(spec["shape"])
        arrays.append(arr.astype(np.float64))
        offset += 8 * count
    if offset != len(body):
        raise ValueError(f"{path}: payload size does not match header")
    E, rest = arrays[0], arrays[1:]
    return ModelParams(E, rest[0::2], rest[1::2], header["mode"])
