import math

import numpy as np
import pytest

from vood.errors import DomainError
from vood.metrics import (
    RocPoint,
    ScoredSample,
    auprc,
    auroc,
    auroc_counts,
    confusion_at_threshold,
    detection_accuracy,
    roc_curve,
    write_curve_csv,
)


def make(scores, flags):
    return [ScoredSample(score=float(s), is_ood=bool(f)) for s, f in zip(scores, flags)]


def random_set(rng, n=None, tie_prone=True):
    n = n if n is not None else int(rng.integers(4, 65))
    if tie_prone:
        scores = rng.integers(0, 6, n).astype(float) / 4.0
    else:
        scores = rng.standard_normal(n)
    flags = rng.random(n) < 0.5
    # both classes must appear
    flags[0], flags[1] = True, False
    return make(scores, flags)


# ---------------------------------------------------------------------------
# brute-force oracles (independent code paths)


def oracle_thresholds(samples):
    return [math.inf] + sorted({s.score for s in samples}, reverse=True)


def oracle_roc_points(samples):
    pos = sum(s.is_ood for s in samples)
    neg = len(samples) - pos
    pts = []
    for tau in oracle_thresholds(samples):
        tp, fp, tn, fn = confusion_at_threshold(samples, tau)
        pts.append((tp / pos, fp / neg))
    return pts


def oracle_auroc_trapezoid(samples):
    pts = oracle_roc_points(samples)
    area = 0.0
    for (tpr0, fpr0), (tpr1, fpr1) in zip(pts, pts[1:]):
        area += (fpr1 - fpr0) * (tpr1 + tpr0) / 2.0
    return area


def oracle_auroc_pairs(samples):
    pos = [s.score for s in samples if s.is_ood]
    neg = [s.score for s in samples if not s.is_ood]
    total = 0.0
    for p in pos:
        for n in neg:
            if p > n:
                total += 1.0
            elif p == n:
                total += 0.5
    return total / (len(pos) * len(neg))


def oracle_auprc_sweep(samples):
    pos = sum(s.is_ood for s in samples)
    area = 0.0
    prev_recall = 0.0
    for tau in sorted({s.score for s in samples}, reverse=True):
        tp, fp, tn, fn = confusion_at_threshold(samples, tau)
        recall = tp / pos
        precision = tp / (tp + fp)
        area += (recall - prev_recall) * precision
        prev_recall = recall
    return area


def oracle_detection_accuracy(samples):
    pos = sum(s.is_ood for s in samples)
    neg = len(samples) - pos
    best = 0.5
    for tau in oracle_thresholds(samples):
        tp, fp, tn, fn = confusion_at_threshold(samples, tau)
        best = max(best, 0.5 * (tp / pos + tn / neg))
    return best


# ---------------------------------------------------------------------------


class TestConfusion:
    def test_minus_inf_all_positive(self):
        samples = make([0.1, 0.9, 0.5], [1, 0, 1])
        tp, fp, tn, fn = confusion_at_threshold(samples, -math.inf)
        assert (tp, fp, tn, fn) == (2, 1, 0, 0)

    def test_plus_inf_all_negative(self):
        samples = make([0.1, 0.9, 0.5], [1, 0, 1])
        tp, fp, tn, fn = confusion_at_threshold(samples, math.inf)
        assert (tp, fp, tn, fn) == (0, 0, 1, 2)

    def test_hand_counted(self):
        samples = make([0.9, 0.6, 0.4, 0.2], [1, 0, 1, 0])
        tp, fp, tn, fn = confusion_at_threshold(samples, 0.5)
        assert (tp, fp, tn, fn) == (1, 1, 1, 1)

    def test_counts_partition(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            samples = random_set(rng)
            tau = float(rng.standard_normal())
            assert sum(confusion_at_threshold(samples, tau)) == len(samples)

    def test_empty_rejected(self):
        with pytest.raises(DomainError):
            confusion_at_threshold([], 0.0)


class TestRocCurve:
    def test_perfect_separation_passes_through_0_1(self):
        samples = make([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])
        pts = roc_curve(samples)
        assert any(p.fpr == 0.0 and p.tpr == 1.0 for p in pts)

    def test_all_tied_collapses_to_endpoints(self):
        samples = make([0.5] * 6, [1, 0, 1, 0, 1, 0])
        pts = roc_curve(samples)
        assert len(pts) == 2
        assert (pts[0].tpr, pts[0].fpr) == (0.0, 0.0)
        assert (pts[1].tpr, pts[1].fpr) == (1.0, 1.0)

    def test_matches_threshold_enumeration(self):
        samples = make([0.9, 0.7, 0.7, 0.4, 0.3, 0.1], [1, 1, 0, 1, 0, 0])
        pts = roc_curve(samples)
        oracle = oracle_roc_points(samples)
        assert len(pts) == len(oracle)
        for p, (tpr, fpr) in zip(pts, oracle):
            assert p.tpr == tpr and p.fpr == fpr

    def test_monotone_as_threshold_decreases(self):
        rng = np.random.default_rng(1)
        for _ in range(30):
            pts = roc_curve(random_set(rng))
            for a, b in zip(pts, pts[1:]):
                assert b.tpr >= a.tpr and b.fpr >= a.fpr
                assert b.threshold < a.threshold

    def test_ends_at_1_1(self):
        rng = np.random.default_rng(2)
        for _ in range(10):
            pts = roc_curve(random_set(rng))
            assert pts[-1].tpr == 1.0 and pts[-1].fpr == 1.0

    def test_single_class_rejected(self):
        with pytest.raises(DomainError):
            roc_curve(make([0.1, 0.2], [1, 1]))


class TestAuroc:
    def test_perfect_separation(self):
        assert auroc(make([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])) == 1.0

    def test_all_tied_gives_half(self):
        assert auroc(make([0.3] * 4, [1, 0, 1, 0])) == 0.5

    def test_rank_equals_trapezoid(self):
        rng = np.random.default_rng(3)
        for _ in range(50):
            samples = random_set(rng, n=50)
            assert abs(auroc(samples) - oracle_auroc_trapezoid(samples)) <= 1e-12

    def test_rank_equals_pair_count(self):
        rng = np.random.default_rng(4)
        for _ in range(50):
            samples = random_set(rng)
            assert abs(auroc(samples) - oracle_auroc_pairs(samples)) <= 1e-12

    def test_invariant_under_increasing_transform(self):
        rng = np.random.default_rng(5)
        for transform in (lambda s: 3.0 * s + 1.0, math.exp, lambda s: s**3):
            for _ in range(20):
                samples = random_set(rng)
                mapped = [ScoredSample(transform(s.score), s.is_ood) for s in samples]
                assert auroc(mapped) == auroc(samples)

    def test_label_flip_complement_no_ties(self):
        rng = np.random.default_rng(6)
        for _ in range(30):
            samples = random_set(rng, tie_prone=False)
            flipped = [ScoredSample(s.score, not s.is_ood) for s in samples]
            wins2, total2 = auroc_counts(samples)
            wins2_f, total2_f = auroc_counts(flipped)
            assert total2 == total2_f
            assert wins2_f == total2 - wins2  # exact integer complement
            assert abs(auroc(flipped) - (1.0 - auroc(samples))) < 1e-15

    def test_single_class_rejected(self):
        with pytest.raises(DomainError):
            auroc(make([0.1, 0.2], [0, 0]))


class TestAuprc:
    def test_perfect_separation(self):
        assert auprc(make([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])) == 1.0

    def test_all_tied_gives_prevalence(self):
        samples = make([0.3] * 8, [1, 1, 1, 0, 0, 0, 0, 0])
        assert auprc(samples) == 3 / 8

    def test_eight_sample_fixture_matches_sweep(self):
        samples = make(
            [0.95, 0.8, 0.8, 0.6, 0.5, 0.5, 0.3, 0.1],
            [1, 1, 0, 1, 0, 1, 0, 0],
        )
        assert abs(auprc(samples) - oracle_auprc_sweep(samples)) <= 1e-12

    def test_random_sets_match_sweep(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            samples = random_set(rng)
            assert abs(auprc(samples) - oracle_auprc_sweep(samples)) <= 1e-12

    def test_no_positives_rejected(self):
        with pytest.raises(DomainError):
            auprc(make([0.5, 0.6], [0, 0]))


class TestDetectionAccuracy:
    def test_perfect_separation(self):
        assert detection_accuracy(make([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0])) == 1.0

    def test_all_tied_gives_half(self):
        assert detection_accuracy(make([0.4] * 4, [1, 1, 0, 0])) == 0.5

    def test_ten_sample_fixture_matches_exhaustive(self):
        samples = make(
            [0.9, 0.85, 0.7, 0.7, 0.6, 0.5, 0.4, 0.3, 0.3, 0.05],
            [1, 0, 1, 1, 0, 1, 0, 0, 1, 0],
        )
        assert abs(detection_accuracy(samples) - oracle_detection_accuracy(samples)) <= 1e-12

    def test_random_sets_match_exhaustive(self):
        rng = np.random.default_rng(8)
        for _ in range(50):
            samples = random_set(rng)
            assert abs(detection_accuracy(samples) - oracle_detection_accuracy(samples)) <= 1e-12

    def test_never_below_half(self):
        rng = np.random.default_rng(9)
        for _ in range(50):
            assert detection_accuracy(random_set(rng)) >= 0.5


class TestCurveCsv:
    def test_round_trip_text(self, tmp_path):
        pts = [RocPoint(math.inf, 0.0, 0.0, 1.0), RocPoint(0.5, 1.0, 0.25, 0.8)]
        path = tmp_path / "curve.csv"
        write_curve_csv(path, pts)
        lines = path.read_text().splitlines()
        assert lines[0] == "threshold,tpr,fpr,precision"
        assert lines[2].split(",") == ["0.5", "1.0", "0.25", "0.8"]
