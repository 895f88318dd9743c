"""Dense multilayer perceptron with an optional auxiliary outlier output.

The classifier maps ``input_dim`` features through ReLU hidden layers to
``k`` in-distribution logits, plus one extra logit when ``aux_class`` is
set (the outlier head: its softmax probability is read as "this input is
not from the training distribution"). The activation entering the final
linear layer is exposed as the penultimate feature vector for
feature-space detectors; with no hidden layers that is the input itself.

Checkpoint file layout (version 1, little-endian):

====================  ==========================================
magic                 4 bytes, ``b"VOOD"``
version               u32 (readers reject anything but 1)
input_dim, k          u32, u32
aux_flag              u8 (0/1)
n_hidden              u32, then n_hidden u32 widths
seed                  i64 (the init seed from ModelConfig)
epoch                 i64 (-1 when the model was never trained)
val_accuracy          f64 (-inf when never evaluated)
parameters            f64, per layer: W row-major, then bias
====================  ==========================================

Models are immutable during inference and therefore safe to score from
multiple threads; training mutates parameters in place and must own the
model exclusively.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import CheckpointFormatError, ConfigError, ShapeError
from .tensor import Tape, Tensor, bias_add, matmul, relu, reshape

CHECKPOINT_MAGIC = b"VOOD"
CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class ModelConfig:
    input_dim: int
    hidden: tuple = ()
    k: int = 2
    aux_class: bool = False
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        if self.input_dim < 1:
            raise ConfigError(f"input_dim must be positive, got {self.input_dim}")
        if self.k < 1:
            raise ConfigError(f"k must be positive, got {self.k}")
        if any(h < 1 for h in self.hidden):
            raise ConfigError(f"hidden widths must be positive, got {self.hidden}")

    @property
    def out_width(self) -> int:
        return self.k + (1 if self.aux_class else 0)

    @property
    def widths(self) -> tuple:
        """Layer width chain from input to output."""
        return (self.input_dim, *self.hidden, self.out_width)

    @property
    def penultimate_width(self) -> int:
        return self.hidden[-1] if self.hidden else self.input_dim


class Model:
    """Stack of (weight, bias) tensor pairs; ReLU between, linear last."""

    def __init__(self, config: ModelConfig, layers):
        self.config = config
        self.layers = list(layers)
        widths = config.widths
        for i, (w, b) in enumerate(self.layers):
            if w.shape != (widths[i], widths[i + 1]) or b.shape != (widths[i + 1],):
                raise ShapeError(
                    f"layer {i} shapes {w.shape}/{b.shape} do not chain for widths {widths}"
                )

    def parameters(self):
        for w, b in self.layers:
            yield w
            yield b

    def param_count(self) -> int:
        return sum(p.size for p in self.parameters())

    def snapshot(self) -> "Model":
        """Deep copy; training keeps mutating the original."""
        return Model(self.config, [(w.copy(), b.copy()) for w, b in self.layers])


@dataclass
class ForwardResult:
    logits: Tensor
    penultimate: Tensor


def init(config: ModelConfig) -> Model:
    """Fresh model: weights ~ N(0, 2/fan_in), biases zero, seeded."""
    rng = np.random.default_rng(config.seed)
    widths = config.widths
    layers = []
    for fan_in, fan_out in zip(widths, widths[1:]):
        w = rng.normal(0.0, math.sqrt(2.0 / fan_in), size=(fan_in, fan_out))
        layers.append((Tensor(w), Tensor(np.zeros(fan_out))))
    return Model(config, layers)


def forward(model: Model, x: Tensor, tape: Tape) -> ForwardResult:
    """Run the network, recording every op on ``tape``.

    Accepts a single sample (input_dim,) or a batch (m, input_dim); the
    returned logits/penultimate mirror the input's rank.
    """
    single = x.data.ndim == 1
    if single:
        if x.shape != (model.config.input_dim,):
            raise ShapeError(f"input shape {x.shape} != ({model.config.input_dim},)")
        h = reshape(x, (1, model.config.input_dim), tape)
    else:
        if x.data.ndim != 2 or x.data.shape[1] != model.config.input_dim:
            raise ShapeError(f"input shape {x.shape} incompatible with input_dim {model.config.input_dim}")
        h = x
    for w, b in model.layers[:-1]:
        h = relu(bias_add(matmul(h, w, tape), b, tape), tape)
    penultimate = h
    w, b = model.layers[-1]
    logits = bias_add(matmul(h, w, tape), b, tape)
    if single:
        logits = reshape(logits, (model.config.out_width,), tape)
        penultimate = reshape(penultimate, (penultimate.shape[1],), tape)
    return ForwardResult(logits=logits, penultimate=penultimate)


def softmax(values: np.ndarray) -> np.ndarray:
    """Stable softmax over the last axis (plain array helper, untaped)."""
    z = values - values.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def predict(model: Model, x) -> int:
    """1-based argmax class; ties go to the lowest index; the auxiliary
    output (when present) is class k+1."""
    xt = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))
    result = forward(model, xt, Tape())
    probs = softmax(result.logits.data.reshape(-1))
    return int(np.argmax(probs)) + 1


# ---------------------------------------------------------------------------
# checkpoint io


def save_checkpoint(path, model: Model, *, epoch: int = -1, val_accuracy: float = float("-inf")):
    cfg = model.config
    parts = [
        CHECKPOINT_MAGIC,
        struct.pack("<I", CHECKPOINT_VERSION),
        struct.pack("<II", cfg.input_dim, cfg.k),
        struct.pack("<B", 1 if cfg.aux_class else 0),
        struct.pack("<I", len(cfg.hidden)),
        struct.pack(f"<{len(cfg.hidden)}I", *cfg.hidden) if cfg.hidden else b"",
        struct.pack("<q", cfg.seed),
        struct.pack("<q", epoch),
        struct.pack("<d", val_accuracy),
    ]
    for w, b in model.layers:
        parts.append(w.data.astype("<f8").tobytes())
        parts.append(b.data.astype("<f8").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


class _Reader:
    def __init__(self, blob: bytes):
        self.blob = blob
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.blob):
            raise CheckpointFormatError("checkpoint truncated")
        out = self.blob[self.pos : self.pos + n]
        self.pos += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def load_checkpoint(path):
    """Read a checkpoint; returns (model, epoch, val_accuracy)."""
    with open(path, "rb") as fh:
        rd = _Reader(fh.read())
    if rd.take(4) != CHECKPOINT_MAGIC:
        raise CheckpointFormatError("bad checkpoint magic")
    (version,) = rd.unpack("<I")
    if version != CHECKPOINT_VERSION:
        raise CheckpointFormatError(f"unsupported checkpoint version {version}")
    input_dim, k = rd.unpack("<II")
    (aux_flag,) = rd.unpack("<B")
    (n_hidden,) = rd.unpack("<I")
    hidden = rd.unpack(f"<{n_hidden}I") if n_hidden else ()
    (seed,) = rd.unpack("<q")
    (epoch,) = rd.unpack("<q")
    (val_accuracy,) = rd.unpack("<d")
    config = ModelConfig(input_dim=input_dim, hidden=hidden, k=k, aux_class=bool(aux_flag), seed=seed)
    layers = []
    widths = config.widths
    for fan_in, fan_out in zip(widths, widths[1:]):
        w = np.frombuffer(rd.take(8 * fan_in * fan_out), dtype="<f8").reshape(fan_in, fan_out)
        b = np.frombuffer(rd.take(8 * fan_out), dtype="<f8")
        layers.append((Tensor(w), Tensor(b)))
    if rd.pos != len(rd.blob):
        raise CheckpointFormatError("trailing bytes after checkpoint payload")
    return Model(config, layers), epoch, val_accuracy
