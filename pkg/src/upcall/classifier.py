"""Feed-forward sigmoid network trained by per-sample gradient descent.

Model file layout (all integers little-endian uint32, all reals float64 LE)::

    magic        8 bytes  b"UPCALLNN"
    version      uint32   (FORMAT_VERSION)
    meta_len     uint32   length of the UTF-8 metadata block
    metadata     key=value lines
    n_layers     uint32
    per layer:   rows uint32, cols uint32, weights rows*cols f64 (row-major),
                 biases rows f64
    n_in         uint32
    feat_mean    n_in f64
    feat_scale   n_in f64
"""

from __future__ import annotations

import os
import struct
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

MAGIC = b"UPCALLNN"
FORMAT_VERSION = 1
HIDDEN_SIZES = (32, 16)


class ModelFormatError(ValueError):
    """Bad magic, unsupported version or truncated model file."""


class ShapeError(ValueError):
    pass


def sigmoid(z: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 100
    learning_rate: float = 0.05
    seed: int = 0
    batch_mode: str = "sample"  # "sample" (shuffled per-sample) or "full"

    def __post_init__(self) -> None:
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.batch_mode not in ("sample", "full"):
            raise ValueError(f"batch_mode must be 'sample' or 'full', got {self.batch_mode!r}")


@dataclass
class Network:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    feat_mean: np.ndarray
    feat_scale: np.ndarray
    metadata: dict[str, str] = field(default_factory=dict)

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[1]] + [w.shape[0] for w in self.weights]

    @property
    def n_in(self) -> int:
        return self.weights[0].shape[1]

    @property
    def activations(self) -> list[str]:
        return ["sigmoid"] * len(self.weights)

    def copy(self) -> Network:
        return Network(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.feat_mean.copy(),
            self.feat_scale.copy(),
            dict(self.metadata),
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Network):
            return NotImplemented

        def same(a, b):
            return a.shape == b.shape and a.tobytes() == b.tobytes()

        return (
            len(self.weights) == len(other.weights)
            and all(same(a, b) for a, b in zip(self.weights, other.weights))
            and all(same(a, b) for a, b in zip(self.biases, other.biases))
            and same(self.feat_mean, other.feat_mean)
            and same(self.feat_scale, other.feat_scale)
            and self.metadata == other.metadata
        )

    def standardize(self, X: np.ndarray) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        return (X - self.feat_mean) / self.feat_scale

    def check_input(self, n: int) -> None:
        if n != self.n_in:
            raise ShapeError(f"model expects {self.n_in} features, got {n}")


def init_network(n_in: int, seed: int = 0, hidden: Sequence[int] = HIDDEN_SIZES) -> Network:
    """Weights ~ U[-1/sqrt(fan_in), 1/sqrt(fan_in)] from numpy's PCG64 seeded by ``seed``; zero biases."""
    if n_in < 1:
        raise ValueError("n_in must be >= 1")
    rng = np.random.Generator(np.random.PCG64(seed))
    sizes = [n_in, *hidden, 1]
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return Network(weights, biases, np.zeros(n_in), np.ones(n_in))


def _forward_raw(net: Network, x: np.ndarray) -> list[np.ndarray]:
    """Activations of every layer (input included) for one row or a batch of rows."""
    acts = [x]
    for w, b in zip(net.weights, net.biases):
        acts.append(sigmoid(acts[-1] @ w.T + b))
    return acts


def forward(net: Network, x: np.ndarray) -> float:
    """Up-call score in (0, 1) for one raw feature vector."""
    x = np.asarray(getattr(x, "values", x), dtype=np.float64)
    net.check_input(x.shape[-1])
    return float(_forward_raw(net, net.standardize(x))[-1][0])


def predict(net: Network, X: np.ndarray) -> np.ndarray:
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    net.check_input(X.shape[1])
    # row by row: a batched matmul may round differently from a single-row
    # product, and scores must not depend on how many clips are scored at once
    Z = net.standardize(X)
    return np.array([_forward_raw(net, z)[-1][0] for z in Z], dtype=np.float64)


def _backward(net: Network, acts: list[np.ndarray], target) -> tuple[list, list]:
    """Gradients of summed squared error for already-computed activations."""
    delta = 2.0 * (acts[-1] - target) * acts[-1] * (1.0 - acts[-1])
    gw: list = [None] * len(net.weights)
    gb: list = [None] * len(net.weights)
    for k in range(len(net.weights) - 1, -1, -1):
        a_prev = acts[k]
        if delta.ndim == 1:
            gw[k] = np.outer(delta, a_prev)
            gb[k] = delta
        else:
            gw[k] = delta.T @ a_prev
            gb[k] = delta.sum(axis=0)
        if k:
            delta = (delta @ net.weights[k]) * a_prev * (1.0 - a_prev)
    return gw, gb


def gradient(net: Network, x: np.ndarray, label: float) -> tuple[list[np.ndarray], list[np.ndarray]]:
    """Analytic gradient of ``(score - label)**2`` w.r.t. every weight and bias.

    ``x`` is taken as the network input as-is (no standardization).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ShapeError("gradient expects a single feature vector")
    net.check_input(x.shape[0])
    return _backward(net, _forward_raw(net, x), np.array([label], dtype=np.float64))


def loss(net: Network, X: np.ndarray, y: np.ndarray) -> float:
    """Mean squared error on raw features."""
    return float(np.mean((predict(net, X) - np.asarray(y, dtype=np.float64)) ** 2))


def fit_standardization(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


@dataclass
class TrainResult:
    network: Network
    loss_trace: list[float]


def train(
    X: np.ndarray,
    y: np.ndarray,
    cfg: TrainConfig | None = None,
    hidden: Sequence[int] = HIDDEN_SIZES,
    metadata: dict[str, str] | None = None,
) -> TrainResult:
    """Fit by gradient-descent backpropagation on mean squared error.

    Features are standardized with training-set statistics, which are stored
    on the returned network. ``loss_trace[i]`` is the training MSE after
    epoch ``i``.
    """
    cfg = cfg or TrainConfig()
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if X.ndim != 2 or len(X) != len(y):
        raise ShapeError(f"feature matrix {X.shape} does not match {len(y)} labels")
    if not np.all(np.isfinite(X)):
        raise ValueError("training features contain non-finite values")
    if set(np.unique(y)) != {0.0, 1.0}:
        raise ValueError("training data must contain both classes (labels 0 and 1)")

    net = init_network(X.shape[1], cfg.seed, hidden)
    net.feat_mean, net.feat_scale = fit_standardization(X)
    net.metadata = dict(metadata or {})
    Z = net.standardize(X)
    rng = np.random.Generator(np.random.PCG64(cfg.seed + 1))
    lr = cfg.learning_rate
    trace = []
    for _ in range(cfg.epochs):
        if cfg.batch_mode == "full":
            gw, gb = _backward(net, _forward_raw(net, Z), y[:, None])
            for k in range(len(net.weights)):
                net.weights[k] -= lr * gw[k] / len(Z)
                net.biases[k] -= lr * gb[k] / len(Z)
        else:
            for i in rng.permutation(len(Z)):
                gw, gb = _backward(net, _forward_raw(net, Z[i]), y[i : i + 1])
                for k in range(len(net.weights)):
                    net.weights[k] -= lr * gw[k]
                    net.biases[k] -= lr * gb[k]
        trace.append(float(np.mean((_forward_raw(net, Z)[-1][:, 0] - y) ** 2)))
    if not all(np.all(np.isfinite(w)) for w in net.weights):
        raise FloatingPointError("training diverged to non-finite weights")
    return TrainResult(net, trace)


def _pack_meta(meta: dict[str, str]) -> bytes:
    lines = []
    for k, v in meta.items():
        if "=" in k or "\n" in k or "\n" in str(v):
            raise ValueError(f"metadata entry {k!r} cannot be serialized")
        lines.append(f"{k}={v}")
    return "\n".join(lines).encode("utf-8")


def dumps(net: Network) -> bytes:
    meta = _pack_meta(net.metadata)
    parts = [MAGIC, struct.pack("<II", FORMAT_VERSION, len(meta)), meta]
    parts.append(struct.pack("<I", len(net.weights)))
    for w, b in zip(net.weights, net.biases):
        parts.append(struct.pack("<II", *w.shape))
        parts.append(np.ascontiguousarray(w, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f8").tobytes())
    parts.append(struct.pack("<I", net.n_in))
    parts.append(np.asarray(net.feat_mean, dtype="<f8").tobytes())
    parts.append(np.asarray(net.feat_scale, dtype="<f8").tobytes())
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data, self.pos = data, 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise ModelFormatError("model file is truncated")
        out = self.data[self.pos : self.pos + n]
        self.pos += n
        return out

    def u32(self) -> int:
        return struct.unpack("<I", self.take(4))[0]

    def f64(self, n: int) -> np.ndarray:
        return np.frombuffer(self.take(8 * n), dtype="<f8").astype(np.float64)


def loads(data: bytes) -> Network:
    rd = _Reader(data)
    if rd.take(len(MAGIC)) != MAGIC:
        raise ModelFormatError("not a model file (bad magic bytes); version unknown")
    version = rd.u32()
    if version != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model format version {version} (expected {FORMAT_VERSION})")
    try:
        text = rd.take(rd.u32()).decode("utf-8")
    except UnicodeDecodeError as exc:
        raise ModelFormatError("corrupt metadata block") from exc
    meta = dict(line.split("=", 1) for line in text.splitlines() if line)
    weights, biases = [], []
    for _ in range(rd.u32()):
        rows, cols = rd.u32(), rd.u32()
        weights.append(rd.f64(rows * cols).reshape(rows, cols))
        biases.append(rd.f64(rows))
    if not weights:
        raise ModelFormatError("model has no layers")
    for prev, nxt in zip(weights[:-1], weights[1:]):
        if nxt.shape[1] != prev.shape[0]:
            raise ModelFormatError("layer shapes do not chain")
    n_in = rd.u32()
    if n_in != weights[0].shape[1]:
        raise ModelFormatError("standardization size does not match input layer")
    mean, scale = rd.f64(n_in), rd.f64(n_in)
    if rd.pos != len(data):
        raise ModelFormatError("trailing bytes after model payload")
    return Network(weights, biases, mean, scale, meta)


def save_model(net: Network, path: str | os.PathLike) -> None:
    with open(path, "wb") as fh:
        fh.write(dumps(net))


def load_model(path: str | os.PathLike) -> Network:
    with open(path, "rb") as fh:
        return loads(fh.read())
