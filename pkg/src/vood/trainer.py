"""Training loops: plain empirical risk and its vicinal counterpart.

Both modes share batch composition so they are directly comparable: each
minibatch takes ``batch_size - n_ood`` rows from the shuffled
in-distribution epoch stream plus ``n_ood`` outlier rows (``n_ood`` =
round(ood_batch_fraction * batch_size)). Outlier rows need the model's
auxiliary class and are labeled k+1.

* ``erm`` trains on the rows as drawn. When an outlier pool and a noise
  source are both configured, each outlier slot is a raw noise draw with
  probability ``p_noise``, otherwise a raw pool row, so the auxiliary
  class sees the same raw material the vicinal mode mixes.
* ``vrm`` mixes every in-distribution row with a same-class partner and
  every outlier row through :func:`vood.vicinal.ood_augment`.

Randomness is split into two streams derived from ``config.seed``:
``default_rng([seed, 0])`` drives batch composition (shuffles, outlier
slot draws) and ``default_rng([seed, 1])`` drives augmentation (partners,
mixing coefficients, partner noise). Given one seed, a full run is
bit-reproducible, and erm/vrm see identical batches.

The optimizer is SGD with momentum and coupled weight decay
(g' = g + wd*w; v = momentum*v + g'; w -= lr*v). The learning rate starts
at ``lr0`` and is multiplied by ``lr_factor`` at each milestone, where
milestone fractions f fire from epoch ceil(f * epochs) on. After every
epoch the model is scored on the validation set (argmax over the k
in-distribution logits only, so the auxiliary head never influences
checkpoint selection) and the best-so-far snapshot is kept; ties keep the
earlier epoch.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import ConfigError, DomainError, TapeError
from .model import Model, forward, load_checkpoint, save_checkpoint
from .tensor import GradientMap, Tape, Tensor, backward, cross_entropy, log_softmax
from .vicinal import (
    MixPolicy,
    NoiseSpec,
    draw_lambda,
    mixup,
    noise_like,
    ood_augment,
    same_class_partner,
    sample_noise,
)

MODES = ("erm", "vrm")


@dataclass(frozen=True)
class TrainConfig:
    epochs: int
    batch_size: int
    lr0: float = 1e-2
    momentum: float = 0.9
    weight_decay: float = 5e-4
    milestones: tuple = (0.6, 0.8)
    lr_factor: float = 0.1
    seed: int = 0
    mix_policy: MixPolicy = field(default_factory=MixPolicy)
    ood_batch_fraction: float = 1.0 / 3.0

    def __post_init__(self):
        object.__setattr__(self, "milestones", tuple(float(m) for m in self.milestones))
        if self.epochs < 0:
            raise ConfigError(f"epochs must be nonnegative, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be positive, got {self.batch_size}")
        if self.lr0 <= 0 or self.lr_factor <= 0:
            raise ConfigError("lr0 and lr_factor must be positive")
        if not 0.0 <= self.momentum < 1.0:
            raise ConfigError(f"momentum must be in [0, 1), got {self.momentum}")
        if self.weight_decay < 0:
            raise ConfigError(f"weight_decay must be nonnegative, got {self.weight_decay}")
        if not 0.0 <= self.ood_batch_fraction < 1.0:
            raise ConfigError(f"ood_batch_fraction must be in [0, 1), got {self.ood_batch_fraction}")
        ms = self.milestones
        if any(not 0.0 < m < 1.0 for m in ms) or any(a >= b for a, b in zip(ms, ms[1:])):
            raise ConfigError(f"milestones must be strictly increasing within (0, 1), got {ms}")


@dataclass
class Checkpoint:
    """Best-validation snapshot. ``epoch`` is -1 and ``val_accuracy`` is
    -inf when training never evaluated (0 epochs)."""

    model: Model
    epoch: int
    val_accuracy: float

    def save(self, path):
        save_checkpoint(path, self.model, epoch=self.epoch, val_accuracy=self.val_accuracy)

    @classmethod
    def load(cls, path) -> "Checkpoint":
        model, epoch, val_accuracy = load_checkpoint(path)
        return cls(model=model, epoch=epoch, val_accuracy=val_accuracy)


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    train_loss: float
    val_accuracy: float
    lr: float


@dataclass
class Batch:
    """Raw minibatch: feature rows, 1-based labels (k+1 marks outlier
    slots), and for in-distribution rows their index into the training
    set (-1 on outlier rows)."""

    x: np.ndarray
    labels: np.ndarray
    in_indices: np.ndarray

    def __len__(self):
        return self.x.shape[0]


def lr_at(config: TrainConfig, epoch: int) -> float:
    """Stepped schedule: lr0 * lr_factor^(milestones already reached),
    where milestone f is reached at epoch ceil(f * epochs)."""
    if not 0 <= epoch < max(config.epochs, 1):
        raise ConfigError(f"epoch {epoch} outside [0, {config.epochs})")
    passed = sum(1 for m in config.milestones if epoch >= math.ceil(m * config.epochs))
    return config.lr0 * config.lr_factor**passed


def sgd_step(model: Model, grads: GradientMap, velocity, lr, momentum, weight_decay) -> Model:
    """One coupled-weight-decay momentum step, updating in place."""
    params = list(model.parameters())
    if len(velocity) != len(params):
        raise ConfigError("velocity state does not match parameter count")
    for p, v in zip(params, velocity):
        if not grads.has(p):
            raise TapeError(f"missing gradient for parameter {p!r}")
        g = grads.of(p) + weight_decay * p.data
        v *= momentum
        v += g
        p.data -= lr * v
    return model


def one_hot(labels: np.ndarray, width: int) -> np.ndarray:
    labels = np.asarray(labels)
    if labels.min() < 1 or labels.max() > width:
        raise ConfigError(f"labels outside [1, {width}] (is the auxiliary class enabled?)")
    out = np.zeros((labels.shape[0], width))
    out[np.arange(labels.shape[0]), labels - 1] = 1.0
    return out


def _batch_loss(model: Model, x: np.ndarray, soft_labels: np.ndarray, tape: Tape) -> Tensor:
    result = forward(model, Tensor(x), tape)
    return cross_entropy(log_softmax(result.logits, tape), Tensor(soft_labels), tape)


def empirical_risk(model: Model, batch: Batch, tape: Tape = None) -> Tensor:
    """Mean cross-entropy of the raw batch (scalar tensor on ``tape``)."""
    if len(batch) == 0:
        raise DomainError("empirical_risk of an empty batch")
    tape = tape if tape is not None else Tape()
    return _batch_loss(model, batch.x, one_hot(batch.labels, model.config.out_width), tape)


def vicinal_risk(
    model: Model,
    batch: Batch,
    d_in: Dataset,
    d_out: Dataset,
    noise: NoiseSpec,
    policy: MixPolicy,
    rng: np.random.Generator,
    tape: Tape = None,
) -> Tensor:
    """Mean cross-entropy of the vicinally transformed batch.

    Rows labeled <= k are mixed with a same-class partner from ``d_in``;
    rows labeled k+1 go through :func:`ood_augment`. With a fixed mixing
    coefficient of 1 and p_noise 0 this equals :func:`empirical_risk` on
    the same batch exactly.
    """
    if len(batch) == 0:
        raise DomainError("vicinal_risk of an empty batch")
    tape = tape if tape is not None else Tape()
    width = model.config.out_width
    k = model.config.k
    aux_label = k + 1
    ys = one_hot(batch.labels, width)
    xs = np.empty_like(batch.x)
    for i in range(len(batch)):
        label = int(batch.labels[i])
        if label <= k:
            partner_x, _ = same_class_partner(d_in, int(batch.in_indices[i]), rng)
            lam = draw_lambda(policy, rng)
            xs[i], ys[i] = mixup(batch.x[i], ys[i], partner_x, ys[i], lam)
        else:
            xs[i], _ = ood_augment(batch.x[i], d_out, noise, policy, rng, aux_label=aux_label)
    return _batch_loss(model, xs, ys, tape)


def classification_accuracy(model: Model, dataset: Dataset) -> float:
    """Fraction of samples whose argmax over the k in-distribution logits
    matches the label (the auxiliary logit is ignored)."""
    if len(dataset) == 0:
        raise DomainError("accuracy of an empty dataset")
    result = forward(model, Tensor(dataset.features), Tape())
    logits = result.logits.data[:, : model.config.k]
    predicted = np.argmax(logits, axis=1) + 1
    return float(np.mean(predicted == dataset.labels))


def _draw_ood_base(mode, d_out, noise, policy, rng):
    """Raw material for one outlier slot, drawn from the composition rng."""
    have_pool = d_out is not None and len(d_out) > 0
    have_noise = noise is not None and policy.noise_kind != "none"
    if mode == "erm" and have_noise:
        if not have_pool or policy.p_noise >= 1.0:
            return sample_noise(noise, rng)
        if policy.p_noise > 0.0 and rng.random() < policy.p_noise:
            return sample_noise(noise, rng)
        return d_out.features[int(rng.integers(len(d_out)))]
    if have_pool:
        return d_out.features[int(rng.integers(len(d_out)))]
    if have_noise:
        return sample_noise(noise, rng)
    raise ConfigError("outlier slots requested but no outlier pool or noise configured")


def train(
    model: Model,
    d_train_in: Dataset,
    d_train_out: Dataset,
    d_val: Dataset,
    config: TrainConfig,
    mode: str,
):
    """Run the full loop; returns (best Checkpoint, per-epoch history)."""
    mode = mode.lower()
    if mode not in MODES:
        raise ConfigError(f"mode must be one of {MODES}, got {mode!r}")
    policy = config.mix_policy
    want_ood = config.ood_batch_fraction > 0.0
    have_pool = d_train_out is not None and len(d_train_out) > 0
    have_noise = policy.noise_kind != "none"
    if (have_pool or (want_ood and have_noise)) and not model.config.aux_class:
        raise ConfigError("outlier training requires a model with the auxiliary class")
    if want_ood and not have_pool and not have_noise:
        raise ConfigError("ood_batch_fraction > 0 but neither outlier pool nor noise configured")

    n_ood = int(round(config.batch_size * config.ood_batch_fraction)) if want_ood else 0
    n_in = config.batch_size - n_ood
    if n_in < 1:
        raise ConfigError("batch_size and ood_batch_fraction leave no in-distribution rows")

    noise = noise_like(d_train_in, policy.noise_kind) if have_noise else None
    rng_batch = np.random.default_rng([config.seed, 0])
    rng_aug = np.random.default_rng([config.seed, 1])
    velocity = [np.zeros_like(p.data) for p in model.parameters()]

    aux_label = model.config.k + 1
    best: Checkpoint = None
    history: list[EpochRecord] = []
    for epoch in range(config.epochs):
        lr = lr_at(config, epoch)
        perm = rng_batch.permutation(len(d_train_in))
        loss_sum = 0.0
        row_count = 0
        for start in range(0, len(perm), n_in):
            in_idx = perm[start : start + n_in]
            rows = [d_train_in.features[j] for j in in_idx]
            labels = [int(d_train_in.labels[j]) for j in in_idx]
            indices = [int(j) for j in in_idx]
            for _ in range(n_ood):
                rows.append(_draw_ood_base(mode, d_train_out, noise, policy, rng_batch))
                labels.append(aux_label)
                indices.append(-1)
            batch = Batch(
                x=np.asarray(rows),
                labels=np.asarray(labels, dtype=np.int64),
                in_indices=np.asarray(indices, dtype=np.int64),
            )
            tape = Tape()
            if mode == "erm":
                loss = empirical_risk(model, batch, tape)
            else:
                loss = vicinal_risk(model, batch, d_train_in, d_train_out, noise, policy, rng_aug, tape)
            grads = backward(tape, loss)
            sgd_step(model, grads, velocity, lr, config.momentum, config.weight_decay)
            loss_sum += loss.item() * len(batch)
            row_count += len(batch)
        val_accuracy = classification_accuracy(model, d_val)
        history.append(EpochRecord(epoch, loss_sum / row_count, val_accuracy, lr))
        if best is None or val_accuracy > best.val_accuracy:
            best = Checkpoint(model=model.snapshot(), epoch=epoch, val_accuracy=val_accuracy)
    if best is None:
        best = Checkpoint(model=model.snapshot(), epoch=-1, val_accuracy=float("-inf"))
    return best, history


def train_erm(model, d_train_in, d_train_out, d_val, config):
    return train(model, d_train_in, d_train_out, d_val, config, "erm")


def train_vrm(model, d_train_in, d_train_out, d_val, config):
    return train(model, d_train_in, d_train_out, d_val, config, "vrm")


def write_history_csv(path, history):
    """epoch,train_loss,val_acc,lr with 6-decimal fixed-point floats."""
    with open(path, "w", newline="") as fh:
        fh.write("epoch,train_loss,val_acc,lr\n")
        for rec in history:
            fh.write(
                f"{rec.epoch},{rec.train_loss:.6f},{rec.val_accuracy:.6f},{rec.lr:.6f}\n"
            )
