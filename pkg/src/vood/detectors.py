"""Outlier scoring functions under one convention: higher = more likely
out-of-distribution.

* ``msp_score``: one minus the maximum softmax probability over the k
  in-distribution outputs (the auxiliary logit, if any, is excluded so
  the baseline stays the baseline).
* ``aux_score``: the softmax probability of the auxiliary output, taken
  over all k+1 outputs. One forward pass, nothing else.
* ``odin_score``: temperature-scaled softmax after a sign-of-gradient
  input perturbation. Pipeline: forward; pick the predicted
  in-distribution class; differentiate the temperature-scaled log-softmax
  of that class w.r.t. the input; step the input against the gradient
  sign (x - eps * sign(-grad)); forward again; score = 1 - max
  temperature-scaled softmax over classes 1..k. With eps=0 and T=1 this
  is bit-identical to ``msp_score``.
* ``mahalanobis_score``: minimum class-conditional squared Mahalanobis
  distance of the penultimate features under a tied covariance with
  ridge shrinkage. No input preprocessing and a single feature layer:
  the minimal form of the feature-space detector (multi-layer ensembles
  and input perturbation variants are out of scope here).

Scoring never mutates the model, so everything in this module is safe to
call concurrently over one shared (model, stats) pair.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigError, NumericError, ShapeError
from .model import Model, forward
from .tensor import Tape, Tensor, backward, log_softmax, narrow, pick

DETECTORS = ("msp", "aux", "odin", "mahalanobis")

DEFAULT_ODIN_TEMPERATURE = 1000.0
DEFAULT_ODIN_EPSILON_SCALE = 0.0014  # multiplied by the data's feature range
DEFAULT_SHRINKAGE = 1e-6


@dataclass(frozen=True)
class OdinParams:
    temperature: float = DEFAULT_ODIN_TEMPERATURE
    epsilon: float = 0.0

    def __post_init__(self):
        if self.temperature <= 0:
            raise ConfigError(f"temperature must be positive, got {self.temperature}")
        if self.epsilon < 0:
            raise ConfigError(f"epsilon must be nonnegative, got {self.epsilon}")


def default_odin_epsilon(dataset: Dataset) -> float:
    """Perturbation magnitude scaled to the data: 0.0014 times the mean
    per-dimension feature range (0.0014 exactly for [0, 1] data)."""
    span = dataset.features.max(axis=0) - dataset.features.min(axis=0)
    return DEFAULT_ODIN_EPSILON_SCALE * float(span.mean())


@dataclass(frozen=True)
class MahalanobisStats:
    """Per-class feature means plus the inverse of the shrunk tied
    covariance."""

    class_means: np.ndarray  # (k, d)
    precision: np.ndarray  # (d, d), symmetric positive-definite
    shrinkage: float


@dataclass(frozen=True)
class OodScore:
    value: float
    detector: str


def _as_input_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _inlier_score_from_logits(logits: np.ndarray, k: int, temperature: float) -> float:
    """1 - max softmax probability over the k in-distribution logits."""
    z = logits[:k] / temperature
    z = z - z.max()
    p = np.exp(z)
    p /= p.sum()
    return float(1.0 - p.max())


def msp_score(model: Model, x) -> OodScore:
    """Maximum-softmax-probability baseline (aux output excluded)."""
    result = forward(model, _as_input_tensor(x), Tape())
    value = _inlier_score_from_logits(result.logits.data.reshape(-1), model.config.k, 1.0)
    return OodScore(value=value, detector="msp")


def aux_score(model: Model, x) -> OodScore:
    """Probability the auxiliary output assigns to "outlier"."""
    if not model.config.aux_class:
        raise ConfigError("aux_score needs a model with the auxiliary class")
    result = forward(model, _as_input_tensor(x), Tape())
    logits = result.logits.data.reshape(-1)
    z = logits - logits.max()
    p = np.exp(z)
    p /= p.sum()
    return OodScore(value=float(p[model.config.k]), detector="aux")


def _odin_passes(model: Model, x, params: OdinParams):
    """Both ODIN passes; returns (score, first tape, second tape) so the
    profiler can read the measured MAC counts off the same code path."""
    k = model.config.k
    x_arr = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64).reshape(-1)

    tape1 = Tape()
    x_t = Tensor(x_arr)
    result = forward(model, x_t, tape1)
    logits = result.logits
    inlier_logits = narrow(logits, 0, k, tape1) if model.config.aux_class else logits
    predicted = int(np.argmax(inlier_logits.data))
    target = pick(log_softmax(inlier_logits, tape1, temperature=params.temperature), predicted, tape1)
    grads = backward(tape1, target)
    grad = grads.of(x_t)
    if not np.all(np.isfinite(grad)):
        raise NumericError("non-finite input gradient in odin_score")

    x_pert = x_arr - params.epsilon * np.sign(-grad)

    tape2 = Tape()
    result2 = forward(model, Tensor(x_pert), tape2)
    value = _inlier_score_from_logits(result2.logits.data.reshape(-1), k, params.temperature)
    return value, tape1, tape2


def odin_score(model: Model, x, params: OdinParams) -> OodScore:
    value, _, _ = _odin_passes(model, x, params)
    return OodScore(value=value, detector="odin")


def _penultimate_features(model: Model, features: np.ndarray) -> np.ndarray:
    result = forward(model, Tensor(features), Tape())
    return result.penultimate.data


def fit_mahalanobis(model: Model, d_train_in: Dataset, shrinkage: float = DEFAULT_SHRINKAGE) -> MahalanobisStats:
    """Class means and shrunk tied covariance of penultimate features.

    Covariance is the mean outer product of per-class-centered features;
    precision inverts (cov + shrinkage * I). A covariance that stays
    numerically singular raises with advice to raise the shrinkage.
    """
    if shrinkage < 0:
        raise ConfigError(f"shrinkage must be nonnegative, got {shrinkage}")
    k = d_train_in.k
    for c in range(1, k + 1):
        if d_train_in.class_indices(c).size < 2:
            raise ConfigError(f"class {c} needs at least 2 samples to fit")
    feats = _penultimate_features(model, d_train_in.features)
    d = feats.shape[1]
    means = np.zeros((k, d))
    cov = np.zeros((d, d))
    for c in range(1, k + 1):
        rows = feats[d_train_in.class_indices(c)]
        means[c - 1] = rows.mean(axis=0)
        centered = rows - means[c - 1]
        cov += centered.T @ centered
    cov /= len(d_train_in)
    shrunk = cov + shrinkage * np.eye(d)
    try:
        precision = np.linalg.inv(shrunk)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            f"covariance singular even with shrinkage {shrinkage}; increase shrinkage"
        ) from exc
    precision = (precision + precision.T) / 2.0  # inv() need not be exactly symmetric
    try:
        np.linalg.cholesky(precision)
    except np.linalg.LinAlgError as exc:
        raise NumericError(
            f"precision not positive-definite with shrinkage {shrinkage}; increase shrinkage"
        ) from exc
    return MahalanobisStats(class_means=means, precision=precision, shrinkage=shrinkage)


def mahalanobis_score(stats: MahalanobisStats, model: Model, x) -> OodScore:
    """Minimum over classes of (f(x) - mu_c)^T P (f(x) - mu_c)."""
    x_arr = np.asarray(x.data if isinstance(x, Tensor) else x, dtype=np.float64)
    single = x_arr.ndim == 1
    feats = _penultimate_features(model, x_arr if not single else x_arr[None, :])
    if feats.shape[1] != stats.class_means.shape[1]:
        raise ShapeError(
            f"feature dim {feats.shape[1]} != fitted dim {stats.class_means.shape[1]}"
        )
    diffs = feats[:, None, :] - stats.class_means[None, :, :]  # (n, k, d)
    quad = np.einsum("nkd,de,nke->nk", diffs, stats.precision, diffs)
    value = np.maximum(quad.min(axis=1), 0.0)
    return OodScore(value=float(value[0]), detector="mahalanobis")


def mahalanobis_scores_batch(stats: MahalanobisStats, model: Model, features: np.ndarray) -> np.ndarray:
    """Vectorized scores for many samples (same math as
    :func:`mahalanobis_score`)."""
    feats = _penultimate_features(model, features)
    if feats.shape[1] != stats.class_means.shape[1]:
        raise ShapeError(
            f"feature dim {feats.shape[1]} != fitted dim {stats.class_means.shape[1]}"
        )
    diffs = feats[:, None, :] - stats.class_means[None, :, :]
    quad = np.einsum("nkd,de,nke->nk", diffs, stats.precision, diffs)
    return np.maximum(quad.min(axis=1), 0.0)
