"""Metrics, confidence intervals, ROC/AUC, fold plans, run aggregation."""

import numpy as np
import pytest
from statsmodels.stats.proportion import proportion_confint

from speechscreen.errors import ValidationError
from speechscreen.evaluation import (
    ConfusionMatrix,
    accuracy_ci95,
    compute_metrics,
    evaluate_run,
    evaluate_split,
    roc_curve,
    speaker_disjoint_folds,
)


def wilcoxon_auc(scores, labels):
    """Concordant-pair statistic with ties counted one half."""
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels)
    pos = scores[labels > 0]
    neg = scores[labels < 0]
    total = 0.0
    for p in pos:
        for q in neg:
            if p > q:
                total += 1.0
            elif p == q:
                total += 0.5
    return total / (len(pos) * len(neg))


# ------------------------------------------------------------------- metrics

def test_single_true_positive_is_perfect():
    rep = compute_metrics(ConfusionMatrix(tp=1))
    assert rep.precision == rep.recall == rep.f1 == rep.accuracy == 1.0


def test_consistency_with_reported_rates():
    # 157 positives at sensitivity 0.93 and 44 negatives at specificity
    # 0.73 round-trip to tp=146/fn=11 and tn=32/fp=12
    cm = ConfusionMatrix(tp=146, fp=12, tn=32, fn=11)
    assert cm.n == 201
    rep = compute_metrics(cm)
    assert rep.accuracy == pytest.approx(0.886, abs=1e-3)
    assert rep.f1 == pytest.approx(0.927, abs=1e-3)
    assert round(rep.sensitivity, 2) == 0.93
    assert round(rep.specificity, 2) == 0.73


def test_hand_arithmetic_two_thirds():
    rep = compute_metrics(ConfusionMatrix(tp=2, fp=1, fn=1, tn=0))
    assert rep.precision == pytest.approx(2.0 / 3.0)
    assert rep.recall == pytest.approx(2.0 / 3.0)
    assert rep.f1 == pytest.approx(2.0 / 3.0)


def test_degenerate_divisions_flagged():
    rep = compute_metrics(ConfusionMatrix(tn=5))
    assert rep.precision == 0.0
    assert rep.recall == 0.0
    assert rep.f1 == 0.0
    assert rep.degenerate


def test_empty_confusion_matrix_rejected():
    with pytest.raises(ValidationError):
        compute_metrics(ConfusionMatrix())


def test_f1_identity_on_random_matrices():
    rng = np.random.default_rng(0)
    for _ in range(200):
        tp, fp, tn, fn = (int(v) for v in rng.integers(0, 40, size=4))
        if tp + fp + tn + fn == 0 or 2 * tp + fp + fn == 0:
            continue
        rep = compute_metrics(ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn))
        assert rep.f1 == pytest.approx(2.0 * tp / (2.0 * tp + fp + fn), abs=1e-12)


def test_confusion_addition():
    total = ConfusionMatrix(tp=1, fp=2) + ConfusionMatrix(tn=3, fn=4)
    assert (total.tp, total.fp, total.tn, total.fn) == (1, 2, 3, 4)
    assert total.n == 10
    assert total.correct == 4


# ----------------------------------------------------------------- intervals

def test_wilson_against_statsmodels():
    rng = np.random.default_rng(1)
    for _ in range(100):
        n = int(rng.integers(1, 500))
        correct = int(rng.integers(0, n + 1))
        lo, hi = accuracy_ci95(correct, n)
        want_lo, want_hi = proportion_confint(correct, n, alpha=0.05,
                                              method="wilson")
        # z is pinned to 1.959964, statsmodels uses the full-precision
        # quantile; the bounds differ by a few 1e-9
        assert lo == pytest.approx(want_lo, abs=1e-7)
        assert hi == pytest.approx(want_hi, abs=1e-7)


def test_wilson_worked_example():
    # exact interval is (0.834153, 0.922530)
    lo, hi = accuracy_ci95(178, 201)
    assert lo == pytest.approx(0.8341527, abs=1e-6)
    assert hi == pytest.approx(0.9225300, abs=1e-6)
    assert lo == pytest.approx(0.833, abs=2e-3)
    assert hi == pytest.approx(0.924, abs=2e-3)


def test_wilson_boundaries():
    lo, hi = accuracy_ci95(500, 500)
    assert hi == 1.0
    assert lo < 1.0
    lo, hi = accuracy_ci95(0, 1)
    assert lo == 0.0
    with pytest.raises(ValidationError):
        accuracy_ci95(1, 0)
    with pytest.raises(ValidationError):
        accuracy_ci95(5, 4)


def test_wilson_brackets_the_estimate():
    rng = np.random.default_rng(2)
    for _ in range(50):
        n = int(rng.integers(1, 50))
        correct = int(rng.integers(0, n + 1))
        lo, hi = accuracy_ci95(correct, n)
        assert 0.0 <= lo <= correct / n <= hi <= 1.0


# ----------------------------------------------------------------------- roc

def test_roc_perfect_separation():
    curve = roc_curve([0.9, 0.8, -0.5, -0.7], [1, 1, -1, -1])
    assert curve.auc == pytest.approx(1.0)


def test_roc_uninformative_scores():
    curve = roc_curve([0.3, 0.3, 0.3, 0.3], [1, -1, 1, -1])
    assert curve.auc == pytest.approx(0.5)


def test_roc_interleaved_example():
    # one discordant pair out of four
    curve = roc_curve([0.1, 0.4, 0.45, 0.8], [-1, 1, -1, 1])
    assert curve.auc == pytest.approx(0.75)
    assert curve.auc == pytest.approx(
        wilcoxon_auc([0.1, 0.4, 0.45, 0.8], [-1, 1, -1, 1]))


def test_roc_all_positives_ranked_higher():
    scores = [0.1, 0.4, 0.35, 0.8]
    labels = [-1, 1, -1, 1]
    # every positive outscores every negative here, so the pairwise
    # oracle puts the area at exactly 1
    assert wilcoxon_auc(scores, labels) == 1.0
    assert roc_curve(scores, labels).auc == pytest.approx(1.0)


def test_roc_matches_wilcoxon_on_random_sets():
    rng = np.random.default_rng(3)
    for _ in range(1000):
        n = int(rng.integers(2, 40))
        labels = np.where(rng.random(n) < 0.5, 1, -1)
        labels[0], labels[1] = 1, -1
        scores = np.round(rng.standard_normal(n), 1)  # rounding forces ties
        curve = roc_curve(scores, labels)
        assert abs(curve.auc - wilcoxon_auc(scores, labels)) < 1e-9


def test_roc_points_monotone():
    rng = np.random.default_rng(4)
    labels = np.where(rng.random(30) < 0.4, 1, -1)
    labels[:2] = [1, -1]
    curve = roc_curve(rng.standard_normal(30), labels)
    assert np.all(np.diff(curve.fpr) >= 0)
    assert np.all(np.diff(curve.tpr) >= 0)
    assert curve.fpr[0] == curve.tpr[0] == 0.0
    assert curve.fpr[-1] == curve.tpr[-1] == 1.0


def test_roc_rejects_single_class():
    with pytest.raises(ValidationError):
        roc_curve([0.1, 0.2], [1, 1])


# --------------------------------------------------------------------- folds

def speaker_map(n_pos, n_neg):
    labels = {}
    for i in range(n_pos):
        labels[f"p{i:02d}"] = 1
    for i in range(n_neg):
        labels[f"n{i:02d}"] = -1
    return labels


def test_twelve_speakers_six_folds():
    plan = speaker_disjoint_folds(speaker_map(6, 6), k=6, seed=42)
    sizes = [len(plan.test_speakers(f)) for f in range(6)]
    assert sizes == [2] * 6


def test_leave_one_speaker_out():
    plan = speaker_disjoint_folds(speaker_map(3, 3), k=6, seed=1)
    sizes = [len(plan.test_speakers(f)) for f in range(6)]
    assert sizes == [1] * 6


def test_folds_disjoint_and_cover():
    rng = np.random.default_rng(5)
    for _ in range(20):
        n_pos = int(rng.integers(2, 10))
        n_neg = int(rng.integers(2, 10))
        k = int(rng.integers(2, n_pos + n_neg + 1))
        labels = speaker_map(n_pos, n_neg)
        plan = speaker_disjoint_folds(labels, k=k, seed=int(rng.integers(1000)))
        seen = []
        for f in range(k):
            test = plan.test_speakers(f)
            train = plan.train_speakers(f)
            assert not (set(test) & set(train))
            assert set(test) | set(train) == set(labels)
            seen.extend(test)
        assert sorted(seen) == sorted(labels)
        sizes = [len(plan.test_speakers(f)) for f in range(k)]
        assert max(sizes) - min(sizes) <= 1


def test_fold_plan_deterministic():
    labels = speaker_map(5, 5)
    a = speaker_disjoint_folds(labels, k=4, seed=7)
    b = speaker_disjoint_folds(labels, k=4, seed=7)
    c = speaker_disjoint_folds(labels, k=4, seed=8)
    assert a.fold_of == b.fold_of
    assert a.fold_of != c.fold_of


def test_fold_validation_errors():
    labels = speaker_map(2, 2)
    with pytest.raises(ValidationError, match="at least 2"):
        speaker_disjoint_folds(labels, k=1)
    with pytest.raises(ValidationError, match="4 speakers into 9 folds"):
        speaker_disjoint_folds(labels, k=9)


def test_stratification_spreads_classes():
    plan = speaker_disjoint_folds(speaker_map(6, 6), k=6, seed=0)
    labels = speaker_map(6, 6)
    for f in range(6):
        test = plan.test_speakers(f)
        classes = {labels[s] for s in test}
        assert classes == {1, -1}


# --------------------------------------------------------------- aggregation

def test_weighted_aggregate_arithmetic():
    # folds at accuracy 0.5 of 10 and 1.0 of 30 pool to (5+30)/40
    fold_a = ConfusionMatrix(tp=3, fp=3, tn=2, fn=2)
    fold_b = ConfusionMatrix(tp=15, tn=15)
    pooled = fold_a + fold_b
    assert compute_metrics(fold_a).accuracy == pytest.approx(0.5)
    assert compute_metrics(fold_b).accuracy == pytest.approx(1.0)
    assert compute_metrics(pooled).accuracy == pytest.approx(0.875)


class _Rec:
    """Minimal stand-in for an extracted utterance record."""

    def __init__(self, utt, spk, label, vec, mass, rng):
        dim = len(vec)
        self.utterance_id = utt
        self.speaker_id = spk
        self.label = label
        self.stats = np.asarray(vec, dtype=np.float64).reshape(1, dim)
        self.mass = np.array([mass], dtype=np.float64)
        base = self.stats[0]
        self.segment_stats = [
            (base + rng.standard_normal(dim) * 0.05).reshape(1, dim)
            for _ in range(3)
        ]
        self.segment_mass = [np.array([mass]) for _ in range(3)]
        self.n_frames = 400


def toy_records(n_speakers=8, mass=40.0, seed=0):
    rng = np.random.default_rng(seed)
    records = []
    for s in range(n_speakers):
        label = 1 if s % 2 == 0 else -1
        for u in range(2):
            center = np.full(4, 2.0 * label, dtype=np.float64)
            vec = center + rng.standard_normal(4) * 0.1
            records.append(_Rec(f"s{s}u{u}", f"s{s}", label, vec, mass, rng))
    return records


def test_evaluate_run_separable_data():
    records = toy_records()
    result = evaluate_run(records, indices=[0], k=4, seed=42,
                          c_grid=[1.0], gamma_grid=[0.25],
                          threshold=30.0, gated=False)
    assert result.aggregate.accuracy == 1.0
    assert result.aggregate.n == 16
    # aggregate equals pooled fold confusions by construction of the counts
    pooled = sum(result.fold_confusions, ConfusionMatrix())
    assert pooled.correct == result.aggregate.correct
    assert result.aggregate.auc == pytest.approx(result.roc.auc)


def test_evaluate_run_gate_excludes_low_mass_utterances():
    records = toy_records(mass=40.0)
    for rec in records[:4]:
        rec.mass = np.array([10.0])
    result = evaluate_run(records, indices=[0], k=4, seed=42,
                          c_grid=[1.0], gamma_grid=[0.25],
                          threshold=30.0, gated=True)
    assert result.aggregate.n == 12
    assert result.retained_test == pytest.approx(12.0 / 16.0)


def test_evaluate_run_single_class_fold_rejected():
    records = toy_records()
    # one class only in the training data once gating removes the rest
    for rec in records:
        if rec.label == -1:
            rec.mass = np.array([0.0])
            rec.segment_mass = [np.array([0.0])] * 3
    with pytest.raises(ValidationError, match="single class"):
        evaluate_run(records, indices=[0], k=4, seed=42,
                     c_grid=[1.0], gamma_grid=[0.25],
                     threshold=30.0, gated=True)


def test_evaluate_split_rejects_speaker_overlap():
    records = toy_records()
    with pytest.raises(ValidationError, match="both training and test"):
        evaluate_split(records, records[:4], indices=[0], k=2, seed=42,
                       c_grid=[1.0], gamma_grid=[0.25],
                       threshold=30.0, gated=False)


def test_evaluate_split_reports_test_metrics():
    records = toy_records(n_speakers=10)
    train_recs = [r for r in records if r.speaker_id not in ("s8", "s9")]
    test_recs = [r for r in records if r.speaker_id in ("s8", "s9")]
    result = evaluate_split(train_recs, test_recs, indices=[0], k=2, seed=42,
                            c_grid=[1.0], gamma_grid=[0.25],
                            threshold=30.0, gated=False)
    assert result.metrics.n == 4
    assert result.metrics.accuracy == 1.0
    assert len(result.scores) == 4
