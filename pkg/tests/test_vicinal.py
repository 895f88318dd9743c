import numpy as np
import pytest

from vood.data import Dataset, gen_blobs
from vood.errors import ConfigError, DomainError, ShapeError
from vood.vicinal import (
    MixPolicy,
    NoiseSpec,
    draw_lambda,
    mixup,
    noise_like,
    ood_augment,
    same_class_partner,
    sample_noise,
)


def small_dataset():
    feats = np.array([[0.0, 0.0], [0.1, 0.0], [0.0, 0.1], [5.0, 5.0], [5.1, 5.0]])
    labels = np.array([1, 1, 1, 2, 2])
    return Dataset(feats, labels, 2)


class TestMixup:
    def test_lambda_one_returns_first_exactly(self):
        x_i, y_i = np.array([0.3, -0.7]), np.array([1.0, 0.0])
        x_j, y_j = np.array([9.9, 9.9]), np.array([0.0, 1.0])
        x_hat, y_hat = mixup(x_i, y_i, x_j, y_j, 1.0)
        np.testing.assert_array_equal(x_hat, x_i)
        np.testing.assert_array_equal(y_hat, y_i)

    def test_quarter_blend(self):
        x_hat, y_hat = mixup([0.0, 4.0], [1.0, 0.0], [4.0, 0.0], [0.0, 1.0], 0.25)
        np.testing.assert_allclose(x_hat, [3.0, 1.0], atol=1e-15)
        np.testing.assert_allclose(y_hat, [0.25, 0.75], atol=1e-15)

    def test_equal_labels_unchanged_for_every_lambda(self):
        y = np.array([0.0, 1.0, 0.0])
        rng = np.random.default_rng(0)
        for lam in rng.random(50):
            _, y_hat = mixup(rng.random(4), y, rng.random(4), y, float(lam))
            np.testing.assert_array_equal(y_hat, y)

    def test_output_inside_segment(self):
        rng = np.random.default_rng(1)
        for _ in range(200):
            x_i, x_j = rng.random(6), rng.random(6)
            x_hat, _ = mixup(x_i, [1.0], x_j, [1.0], float(rng.random()))
            assert np.all(x_hat >= np.minimum(x_i, x_j))
            assert np.all(x_hat <= np.maximum(x_i, x_j))

    def test_label_sum_preserved(self):
        rng = np.random.default_rng(2)
        for _ in range(100):
            y_i = rng.dirichlet(np.ones(5))
            y_j = rng.dirichlet(np.ones(5))
            _, y_hat = mixup(rng.random(2), y_i, rng.random(2), y_j, float(rng.random()))
            assert abs(y_hat.sum() - 1.0) < 1e-12

    def test_lambda_out_of_range(self):
        with pytest.raises(DomainError):
            mixup([0.0], [1.0], [1.0], [1.0], 1.5)

    def test_shape_mismatch(self):
        with pytest.raises(ShapeError):
            mixup([0.0, 1.0], [1.0], [1.0], [1.0], 0.5)


class TestSameClassPartner:
    def test_singleton_returns_itself(self):
        ds = Dataset(np.array([[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]]), np.array([1, 2, 2]), 2)
        x, label = same_class_partner(ds, 0, np.random.default_rng(0))
        assert label == 1
        np.testing.assert_array_equal(x, [1.0, 2.0])

    def test_uniform_over_class(self):
        ds = small_dataset()
        rng = np.random.default_rng(3)
        counts = np.zeros(3)
        draws = 10_000
        for _ in range(draws):
            x, _ = same_class_partner(ds, 0, rng)
            for j in range(3):
                if np.array_equal(x, ds.features[j]):
                    counts[j] += 1
                    break
        freq = counts / draws
        np.testing.assert_allclose(freq, 1 / 3, atol=0.05 / 3 + 0.02)
        assert counts.sum() == draws

    def test_label_matches_class(self):
        ds = small_dataset()
        rng = np.random.default_rng(4)
        for idx in range(len(ds)):
            _, label = same_class_partner(ds, idx, rng)
            assert label == ds.labels[idx]

    def test_bad_index(self):
        with pytest.raises(DomainError):
            same_class_partner(small_dataset(), 99, np.random.default_rng(0))


class TestNoiseLike:
    def test_constant_dataset_clamps_std(self):
        ds = Dataset(np.ones((5, 3)), np.ones(5, dtype=int), 1)
        spec = noise_like(ds, "gaussian")
        np.testing.assert_array_equal(spec.std, np.full(3, 1e-8))

    def test_two_point_population_stats(self):
        ds = Dataset(np.array([[0.0], [2.0]]), np.array([1, 1]), 1)
        spec = noise_like(ds, "gaussian")
        np.testing.assert_array_equal(spec.mean, [1.0])
        np.testing.assert_array_equal(spec.std, [1.0])

    def test_gaussian_sample_statistics(self):
        ds = gen_blobs(100, 2, [[0.0, 0.0], [4.0, 2.0]], 0.8, seed=5)
        spec = noise_like(ds, "gaussian")
        rng = np.random.default_rng(6)
        draws = np.array([sample_noise(spec, rng) for _ in range(10_000)])
        np.testing.assert_allclose(draws.mean(axis=0), spec.mean, atol=0.05 * np.abs(spec.mean).max() + 0.05)
        np.testing.assert_allclose(draws.std(axis=0), spec.std, rtol=0.05)

    def test_uniform_bounds(self):
        ds = small_dataset()
        spec = noise_like(ds, "uniform")
        np.testing.assert_array_equal(spec.low, ds.features.min(axis=0))
        np.testing.assert_array_equal(spec.high, ds.features.max(axis=0))
        rng = np.random.default_rng(7)
        draws = np.array([sample_noise(spec, rng) for _ in range(500)])
        assert np.all(draws >= spec.low) and np.all(draws <= spec.high)

    def test_empty_dataset(self):
        ds = Dataset(np.zeros((0, 2)), np.zeros(0, dtype=int), 1)
        with pytest.raises(DomainError):
            noise_like(ds, "gaussian")


class TestPolicy:
    def test_validation(self):
        with pytest.raises(ConfigError):
            MixPolicy(lambda_dist="beta", alpha=-1.0)
        with pytest.raises(ConfigError):
            MixPolicy(lambda_dist="fixed", lam=1.5)
        with pytest.raises(ConfigError):
            MixPolicy(p_noise=-0.1)
        with pytest.raises(ConfigError):
            MixPolicy(noise_kind="pink")

    def test_fixed_lambda_consumes_no_rng(self):
        rng = np.random.default_rng(8)
        before = rng.bit_generator.state
        assert draw_lambda(MixPolicy(lambda_dist="fixed", lam=0.4), rng) == 0.4
        assert rng.bit_generator.state == before

    def test_lambda_ranges(self):
        rng = np.random.default_rng(9)
        for policy in (MixPolicy(), MixPolicy(lambda_dist="beta", alpha=0.5)):
            for _ in range(200):
                assert 0.0 <= draw_lambda(policy, rng) <= 1.0


class TestOodAugment:
    def _pool(self):
        return Dataset(np.array([[10.0, 10.0], [12.0, 12.0]]), np.array([1, 1]), 1)

    def test_p_noise_zero_always_pool(self):
        pool = self._pool()
        noise = NoiseSpec(kind="gaussian", mean=np.zeros(2), std=np.ones(2))
        policy = MixPolicy(lambda_dist="fixed", lam=0.0, p_noise=0.0)
        rng = np.random.default_rng(10)
        for _ in range(50):
            x_hat, label = ood_augment(np.array([0.0, 0.0]), pool, noise, policy, rng, aux_label=3)
            assert label == 3
            assert any(np.array_equal(x_hat, row) for row in pool.features)

    def test_noise_kind_none_degenerates_to_pool_mixup(self):
        pool = self._pool()
        policy = MixPolicy(lambda_dist="fixed", lam=0.5, p_noise=0.9, noise_kind="none")
        rng = np.random.default_rng(11)
        x_hat, _ = ood_augment(np.array([0.0, 0.0]), pool, None, policy, rng, aux_label=2)
        assert any(np.allclose(x_hat, 0.5 * row) for row in pool.features)

    def test_pure_noise_identity_endpoint(self):
        pool = self._pool()
        noise = NoiseSpec(kind="gaussian", mean=np.zeros(2), std=np.ones(2))
        policy = MixPolicy(lambda_dist="fixed", lam=1.0, p_noise=1.0)
        x = np.array([-3.0, 4.0])
        x_hat, label = ood_augment(x, pool, noise, policy, np.random.default_rng(12), aux_label=4)
        np.testing.assert_array_equal(x_hat, x)
        assert label == 4

    def test_empty_pool_without_noise_rejected(self):
        policy = MixPolicy(noise_kind="none")
        with pytest.raises(DomainError):
            ood_augment(np.zeros(2), None, None, policy, np.random.default_rng(0), aux_label=2)

    def test_reproducible_under_seed(self):
        pool = self._pool()
        noise = NoiseSpec(kind="uniform", low=np.zeros(2), high=np.ones(2))
        policy = MixPolicy(p_noise=0.5, noise_kind="uniform")
        a, _ = ood_augment(np.zeros(2), pool, noise, policy, np.random.default_rng(13), aux_label=2)
        b, _ = ood_augment(np.zeros(2), pool, noise, policy, np.random.default_rng(13), aux_label=2)
        np.testing.assert_array_equal(a, b)
