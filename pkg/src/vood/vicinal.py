"""Vicinal sample construction: mixup, partner selection, noise mixing.

All randomness flows through an explicit ``numpy.random.Generator`` owned
by the caller, so everything here is a pure function of (arguments, rng
state) and parallelizes across disjoint rng streams.

In-distribution samples are only ever mixed with partners of their own
class, which leaves the label vector untouched. Outlier samples are mixed
within the outlier pool or, with probability ``p_noise``, with a fresh
noise draw whose statistics match the in-distribution data; either way
the result carries the hard auxiliary label.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import Dataset
from .errors import ConfigError, DomainError, ShapeError

LAMBDA_DISTS = ("uniform01", "beta", "fixed")
NOISE_KINDS = ("gaussian", "uniform", "none")

STD_FLOOR = 1e-8  # zero-variance dimensions are clamped, not rejected


@dataclass(frozen=True)
class MixPolicy:
    """How vicinal samples are built.

    ``lambda_dist`` picks the mixing-coefficient law: ``uniform01`` (the
    default; one draw per sample), ``beta`` with shape ``alpha``, or
    ``fixed`` at ``lam``. ``p_noise`` is the probability that an outlier
    sample is mixed with fresh noise rather than another outlier;
    ``noise_kind`` selects the noise family (``none`` disables noise
    mixing entirely).
    """

    lambda_dist: str = "uniform01"
    alpha: float = None
    lam: float = None
    p_noise: float = 0.5
    noise_kind: str = "gaussian"

    def __post_init__(self):
        if self.lambda_dist not in LAMBDA_DISTS:
            raise ConfigError(f"lambda_dist must be one of {LAMBDA_DISTS}, got {self.lambda_dist!r}")
        if self.lambda_dist == "beta" and (self.alpha is None or self.alpha <= 0):
            raise ConfigError(f"beta lambda needs alpha > 0, got {self.alpha}")
        if self.lambda_dist == "fixed" and (self.lam is None or not 0.0 <= self.lam <= 1.0):
            raise ConfigError(f"fixed lambda needs lam in [0, 1], got {self.lam}")
        if not 0.0 <= self.p_noise <= 1.0:
            raise ConfigError(f"p_noise must be in [0, 1], got {self.p_noise}")
        if self.noise_kind not in NOISE_KINDS:
            raise ConfigError(f"noise_kind must be one of {NOISE_KINDS}, got {self.noise_kind!r}")


def draw_lambda(policy: MixPolicy, rng: np.random.Generator) -> float:
    """One mixing coefficient; ``fixed`` consumes no rng state."""
    if policy.lambda_dist == "fixed":
        return float(policy.lam)
    if policy.lambda_dist == "beta":
        return float(rng.beta(policy.alpha, policy.alpha))
    return float(rng.random())


@dataclass(frozen=True)
class NoiseSpec:
    """Dataset-matched noise source.

    ``gaussian`` holds per-dimension mean/std; ``uniform`` holds
    per-dimension low/high bounds.
    """

    kind: str
    mean: np.ndarray = None
    std: np.ndarray = None
    low: np.ndarray = None
    high: np.ndarray = None

    def __post_init__(self):
        if self.kind == "gaussian":
            if self.mean is None or self.std is None or np.any(self.std <= 0):
                raise ConfigError("gaussian noise needs mean and strictly positive std")
        elif self.kind == "uniform":
            if self.low is None or self.high is None or np.any(self.low >= self.high):
                raise ConfigError("uniform noise needs low < high elementwise")
        else:
            raise ConfigError(f"noise kind must be gaussian or uniform, got {self.kind!r}")


def noise_like(dataset: Dataset, kind: str) -> NoiseSpec:
    """Noise matched to the dataset's per-dimension statistics.

    Gaussian uses the dataset mean/std (population convention, std
    clamped to 1e-8 on constant dimensions); uniform uses the [min, max]
    envelope (degenerate dimensions widened by the same floor). Samples
    are deliberately NOT clamped back into the data range.
    """
    if len(dataset) == 0:
        raise DomainError("noise_like needs a nonempty dataset")
    if kind == "gaussian":
        std = np.maximum(dataset.stats.std, STD_FLOOR)
        return NoiseSpec(kind="gaussian", mean=dataset.stats.mean.copy(), std=std)
    if kind == "uniform":
        low = dataset.features.min(axis=0)
        high = dataset.features.max(axis=0)
        high = np.where(high - low <= 0, low + STD_FLOOR, high)
        return NoiseSpec(kind="uniform", low=low, high=high)
    raise ConfigError(f"cannot build noise of kind {kind!r}")


def sample_noise(spec: NoiseSpec, rng: np.random.Generator) -> np.ndarray:
    if spec.kind == "gaussian":
        return spec.mean + spec.std * rng.standard_normal(spec.mean.shape[0])
    return rng.uniform(spec.low, spec.high)


def mixup(x_i, y_i, x_j, y_j, lam: float):
    """Convex combination of two samples and their soft labels.

    Equal inputs come back exactly (not merely up to rounding), so
    same-class mixing provably never perturbs a label vector.
    """
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must be in [0, 1], got {lam}")
    x_i, x_j = np.asarray(x_i, dtype=np.float64), np.asarray(x_j, dtype=np.float64)
    y_i, y_j = np.asarray(y_i, dtype=np.float64), np.asarray(y_j, dtype=np.float64)
    if x_i.shape != x_j.shape:
        raise ShapeError(f"mixup feature shapes differ: {x_i.shape} vs {x_j.shape}")
    if y_i.shape != y_j.shape:
        raise ShapeError(f"mixup label shapes differ: {y_i.shape} vs {y_j.shape}")
    x_hat = x_i.copy() if np.array_equal(x_i, x_j) else lam * x_i + (1.0 - lam) * x_j
    y_hat = y_i.copy() if np.array_equal(y_i, y_j) else lam * y_i + (1.0 - lam) * y_j
    return x_hat, y_hat


def same_class_partner(dataset: Dataset, index: int, rng: np.random.Generator):
    """Uniform draw from the sample's own class (the sample itself is a
    legal partner). Returns (features, label)."""
    if not 0 <= index < len(dataset):
        raise DomainError(f"index {index} out of range for dataset of size {len(dataset)}")
    label = int(dataset.labels[index])
    members = dataset.class_indices(label)
    if members.size == 0:
        raise DomainError(f"class {label} is empty")
    pick = int(members[rng.integers(members.size)])
    return dataset.features[pick].copy(), label


def ood_augment(
    x_out: np.ndarray,
    d_out: Dataset,
    noise: NoiseSpec,
    policy: MixPolicy,
    rng: np.random.Generator,
    *,
    aux_label: int,
):
    """Vicinal outlier sample: mix ``x_out`` with a pool partner or fresh
    noise, return it under the hard auxiliary label.

    With ``noise_kind='none'`` (or no noise spec) the partner always
    comes from the pool. An empty pool is allowed only when noise can
    stand in for it.
    """
    x_out = np.asarray(x_out, dtype=np.float64)
    have_pool = d_out is not None and len(d_out) > 0
    have_noise = noise is not None and policy.noise_kind != "none"
    if not have_pool and not have_noise:
        raise DomainError("ood_augment needs a nonempty outlier pool or a noise source")

    if not have_noise:
        use_noise = False
    elif not have_pool or policy.p_noise >= 1.0:
        use_noise = True
    elif policy.p_noise <= 0.0:
        use_noise = False
    else:
        use_noise = bool(rng.random() < policy.p_noise)

    if use_noise:
        partner = sample_noise(noise, rng)
    else:
        partner = d_out.features[int(rng.integers(len(d_out)))]
    lam = draw_lambda(policy, rng)
    zeros = np.zeros(1)
    x_hat, _ = mixup(x_out, zeros, partner, zeros, lam)
    return x_hat, aux_label
