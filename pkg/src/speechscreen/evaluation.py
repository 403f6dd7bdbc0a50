"""Speaker-disjoint evaluation: fold construction, confusion-matrix
metrics, ROC/AUC, Wilson confidence intervals, and the cross-validation
and train/test orchestration used by the command-line tools.

Training examples are 3 s segment statistics; test examples are whole
utterances. When a phone subset is evaluated, examples whose subset
posterior mass falls below the gate threshold are dropped (training
segments by their own mass, test utterances by whole-utterance mass).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .pooling import MASS_THRESHOLD
from .svm import (
    DEFAULT_MAX_KERNEL_EVALS,
    DEFAULT_TOL,
    Hyperparams,
    SvmModel,
    decision_values,
    fit_scaler,
    grid_search,
    resolve_gamma,
    train,
)

Z95 = 1.959964


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int = 0
    fp: int = 0
    tn: int = 0
    fn: int = 0

    @property
    def n(self) -> int:
        return self.tp + self.fp + self.tn + self.fn

    @property
    def correct(self) -> int:
        return self.tp + self.tn

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.tp + other.tp, self.fp + other.fp,
                               self.tn + other.tn, self.fn + other.fn)


@dataclass
class MetricReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    sensitivity: float
    specificity: float
    n: int
    correct: int
    ci_low: float
    ci_high: float
    degenerate: bool = False
    auc: float | None = None


@dataclass(frozen=True)
class FoldPlan:
    """Assignment of every speaker to exactly one of k folds."""

    k: int
    seed: int
    fold_of: dict

    def folds(self):
        out = [[] for _ in range(self.k)]
        for speaker in sorted(self.fold_of):
            out[self.fold_of[speaker]].append(speaker)
        return out

    def test_speakers(self, fold: int):
        return sorted(s for s, f in self.fold_of.items() if f == fold)

    def train_speakers(self, fold: int):
        return sorted(s for s, f in self.fold_of.items() if f != fold)


@dataclass
class RocCurve:
    thresholds: np.ndarray
    fpr: np.ndarray
    tpr: np.ndarray
    auc: float


@dataclass
class ScoreRow:
    utterance_id: str
    speaker_id: str
    fold: int | None
    label: int
    score: float
    prediction: int


@dataclass
class CvResult:
    plan: FoldPlan
    speaker_labels: dict
    hyperparams: Hyperparams
    grid_rows: list
    fold_confusions: list
    fold_metrics: list
    aggregate_confusion: ConfusionMatrix
    aggregate: MetricReport
    roc: RocCurve
    scores: list
    retained_train: float | None
    retained_test: float | None


@dataclass
class SplitResult:
    model: SvmModel
    hyperparams: Hyperparams
    grid_rows: list
    confusion: ConfusionMatrix
    metrics: MetricReport
    roc: RocCurve
    scores: list
    retained_train: float | None
    retained_test: float | None


def speaker_disjoint_folds(speaker_labels, k: int, seed: int = 42) -> FoldPlan:
    """Deal speakers into k folds, stratified by class.

    Accepts a {speaker_id: label} mapping or any object exposing one as
    .speaker_labels (e.g. a manifest). Speakers of each class are
    shuffled with the seeded generator and dealt round-robin; the deal
    position carries over between classes so fold sizes differ by at
    most one overall.
    """
    if hasattr(speaker_labels, "speaker_labels"):
        speaker_labels = speaker_labels.speaker_labels
    if k < 2:
        raise ValidationError(f"need at least 2 folds, got {k}")
    if k > len(speaker_labels):
        raise ValidationError(
            f"cannot split {len(speaker_labels)} speakers into {k} folds"
        )
    rng = np.random.default_rng(seed)
    fold_of = {}
    cursor = 0
    for wanted in (1, -1):
        speakers = sorted(s for s, lab in speaker_labels.items() if lab == wanted)
        for idx in rng.permutation(len(speakers)):
            fold_of[speakers[int(idx)]] = cursor % k
            cursor += 1
    return FoldPlan(k=k, seed=seed, fold_of=fold_of)


def compute_metrics(cm: ConfusionMatrix) -> MetricReport:
    """Accuracy, precision, recall, F1 and class-conditional rates.

    Undefined ratios (0/0) are reported as 0.0 and flagged degenerate
    rather than raising, so sparse folds still produce a row.
    """
    n = cm.n
    if n == 0:
        raise ValidationError("empty confusion matrix")
    degenerate = False

    accuracy = cm.correct / n
    if cm.tp + cm.fp > 0:
        precision = cm.tp / (cm.tp + cm.fp)
    else:
        precision, degenerate = 0.0, True
    if cm.tp + cm.fn > 0:
        recall = cm.tp / (cm.tp + cm.fn)
    else:
        recall, degenerate = 0.0, True
    if precision + recall > 0:
        f1 = 2.0 * precision * recall / (precision + recall)
    else:
        f1, degenerate = 0.0, True
    if cm.tn + cm.fp > 0:
        specificity = cm.tn / (cm.tn + cm.fp)
    else:
        specificity, degenerate = 0.0, True

    ci_low, ci_high = accuracy_ci95(cm.correct, n)
    return MetricReport(accuracy=accuracy, precision=precision, recall=recall,
                        f1=f1, sensitivity=recall, specificity=specificity,
                        n=n, correct=cm.correct, ci_low=ci_low, ci_high=ci_high,
                        degenerate=degenerate)


def accuracy_ci95(correct: int, n: int):
    """95% Wilson score interval for a binomial proportion."""
    if n <= 0:
        raise ValidationError("interval needs n > 0")
    if not 0 <= correct <= n:
        raise ValidationError(f"correct={correct} outside [0, {n}]")
    z = Z95
    p = correct / n
    denom = 1.0 + z * z / n
    center = (p + z * z / (2.0 * n)) / denom
    half = z * np.sqrt(p * (1.0 - p) / n + z * z / (4.0 * n * n)) / denom
    # shave float dust so the interval always brackets p within [0, 1]
    lo = min(max(center - half, 0.0), p)
    hi = max(min(center + half, 1.0), p)
    return float(lo), float(hi)


def roc_curve(scores, labels) -> RocCurve:
    """ROC by threshold sweep over the observed scores (ties grouped).

    A point is predicted positive when its score is >= the threshold.
    The curve starts at (0, 0); AUC is the trapezoidal area, which for
    tied scores equals the concordant-pair (Wilcoxon) statistic.
    """
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=np.float64)
    if labels.shape != scores.shape or labels.ndim != 1:
        raise ValidationError("labels and scores must be equal-length vectors")
    n_pos = int(np.sum(labels > 0))
    n_neg = int(np.sum(labels < 0))
    if n_pos == 0 or n_neg == 0:
        raise ValidationError("ROC needs at least one example of each class")

    order = np.argsort(-scores, kind="stable")
    thresholds = [np.inf]
    fpr = [0.0]
    tpr = [0.0]
    tp = fp = 0
    i = 0
    n = len(scores)
    while i < n:
        s = scores[order[i]]
        while i < n and scores[order[i]] == s:
            if labels[order[i]] > 0:
                tp += 1
            else:
                fp += 1
            i += 1
        thresholds.append(float(s))
        tpr.append(tp / n_pos)
        fpr.append(fp / n_neg)

    fpr_arr = np.array(fpr)
    tpr_arr = np.array(tpr)
    auc = float(np.dot(np.diff(fpr_arr), (tpr_arr[1:] + tpr_arr[:-1]) / 2.0))
    return RocCurve(thresholds=np.array(thresholds), fpr=fpr_arr,
                    tpr=tpr_arr, auc=auc)


def _confusion_from_scores(labels, scores) -> ConfusionMatrix:
    tp = fp = tn = fn = 0
    for lab, s in zip(labels, scores):
        pred = 1 if s >= 0.0 else -1
        if lab > 0:
            if pred > 0:
                tp += 1
            else:
                fn += 1
        else:
            if pred > 0:
                fp += 1
            else:
                tn += 1
    return ConfusionMatrix(tp=tp, fp=fp, tn=tn, fn=fn)


def subset_vector(stats: np.ndarray, indices) -> np.ndarray:
    """Concatenate the per-phone statistic rows for the given phones."""
    return stats[np.asarray(indices, dtype=int)].reshape(-1)


def subset_mass(mass: np.ndarray, indices) -> float:
    return float(np.asarray(mass, dtype=np.float64)[np.asarray(indices, dtype=int)].sum())


def _train_examples(record, indices, threshold, gate_train):
    out = []
    for stats, mass in zip(record.segment_stats, record.segment_mass):
        if gate_train and subset_mass(mass, indices) < threshold:
            continue
        out.append(subset_vector(stats, indices))
    return out


def build_fold_sets(records, plan: FoldPlan, indices, threshold: float,
                    gated: bool, gate_scope: str = "both"):
    """Per-fold (x_train, y_train, x_test, y_test) plus test metadata.

    Training rows are segment vectors, test rows whole-utterance
    vectors. With gating on, training segments are kept by their own
    mass (unless gate_scope is 'test') and test utterances by
    whole-utterance mass.
    """
    if gate_scope not in ("both", "test"):
        raise ValidationError(f"unknown gate_scope {gate_scope!r}")
    gate_train = gated and gate_scope == "both"
    fold_sets = []
    fold_meta = []
    for fold in range(plan.k):
        x_tr, y_tr, x_te, y_te, meta = [], [], [], [], []
        for rec in records:
            if plan.fold_of[rec.speaker_id] == fold:
                if gated and subset_mass(rec.mass, indices) < threshold:
                    continue
                x_te.append(subset_vector(rec.stats, indices))
                y_te.append(rec.label)
                meta.append((rec.utterance_id, rec.speaker_id, rec.label))
            else:
                segs = _train_examples(rec, indices, threshold, gate_train)
                x_tr.extend(segs)
                y_tr.extend([rec.label] * len(segs))
        if not x_tr:
            raise ValidationError(f"fold {fold}: no training segments pass the gate")
        y_tr_arr = np.array(y_tr)
        if not (np.any(y_tr_arr > 0) and np.any(y_tr_arr < 0)):
            raise ValidationError(f"fold {fold}: training data has a single class")
        fold_sets.append((np.array(x_tr), y_tr_arr,
                          np.array(x_te) if x_te else np.empty((0, len(x_tr[0]))),
                          np.array(y_te)))
        fold_meta.append(meta)
    return fold_sets, fold_meta


def corpus_retention(records, indices, threshold: float):
    """Fraction of segments / utterances whose subset mass meets the gate."""
    seg_total = seg_kept = utt_kept = 0
    for rec in records:
        for mass in rec.segment_mass:
            seg_total += 1
            if subset_mass(mass, indices) >= threshold:
                seg_kept += 1
        if subset_mass(rec.mass, indices) >= threshold:
            utt_kept += 1
    n_utt = len(records)
    seg_frac = seg_kept / seg_total if seg_total else 0.0
    utt_frac = utt_kept / n_utt if n_utt else 0.0
    return seg_frac, utt_frac


def _resolve_gamma_grid(gamma_grid, records, indices, threshold, gate_train):
    pool = _pooled_train(records, indices, threshold, gate_train)
    # The scale heuristic sizes gamma against what the kernel sees, and
    # training standardizes its inputs, so resolve on standardized vectors.
    pool_std = fit_scaler(pool).transform(pool)
    resolved = sorted({resolve_gamma(g, pool_std) for g in gamma_grid})
    return resolved, pool


def evaluate_run(records, indices, k: int, seed: int, c_grid, gamma_grid,
                 threshold: float = MASS_THRESHOLD, gated: bool = True,
                 gate_scope: str = "both", class_weighting: bool = True,
                 fixed_c: float | None = None, fixed_gamma=None,
                 tol: float = DEFAULT_TOL,
                 max_kernel_evals: int = DEFAULT_MAX_KERNEL_EVALS) -> CvResult:
    """Speaker-disjoint k-fold cross-validation over extracted records.

    Hyperparameters are either fixed by the caller or picked by a grid
    search maximizing unweighted mean fold accuracy. The aggregate row
    pools the per-fold confusion matrices, so its accuracy is total
    correct over total examples; the aggregate ROC pools test scores.
    """
    records = list(records)
    if not records:
        raise ValidationError("no utterance records to evaluate")
    speaker_labels = {}
    for rec in records:
        prev = speaker_labels.get(rec.speaker_id)
        if prev is not None and prev != rec.label:
            raise ValidationError(f"speaker {rec.speaker_id} has conflicting labels")
        speaker_labels[rec.speaker_id] = rec.label

    plan = speaker_disjoint_folds(speaker_labels, k, seed)
    fold_sets, fold_meta = build_fold_sets(records, plan, indices, threshold,
                                           gated, gate_scope)

    gate_train = gated and gate_scope == "both"
    if fixed_c is not None and fixed_gamma is not None:
        if isinstance(fixed_gamma, str):
            pool = _pooled_train(records, indices, threshold, gate_train)
            fixed_gamma = resolve_gamma(fixed_gamma,
                                        fit_scaler(pool).transform(pool))
        hp = Hyperparams(c=fixed_c, gamma=fixed_gamma,
                         class_weighting=class_weighting)
        grid_rows = []
    else:
        gamma_values, _ = _resolve_gamma_grid(gamma_grid, records, indices,
                                              threshold, gate_train)
        hp, grid_rows = grid_search(fold_sets, c_grid, gamma_values,
                                    class_weighting=class_weighting, tol=tol,
                                    max_kernel_evals=max_kernel_evals)

    fold_confusions = []
    fold_metrics = []
    scores: list[ScoreRow] = []
    all_labels = []
    all_scores = []
    for fold, ((x_tr, y_tr, x_te, y_te), meta) in enumerate(zip(fold_sets, fold_meta)):
        model = train(x_tr, y_tr, hp, tol=tol, max_kernel_evals=max_kernel_evals)
        if len(y_te):
            s = decision_values(model, x_te)
        else:
            s = np.empty(0)
        cm = _confusion_from_scores(y_te, s)
        fold_confusions.append(cm)
        if cm.n:
            fold_metrics.append(compute_metrics(cm))
        else:
            fold_metrics.append(None)
        for (utt, spk, lab), sc in zip(meta, s):
            scores.append(ScoreRow(utterance_id=utt, speaker_id=spk, fold=fold,
                                   label=lab, score=float(sc),
                                   prediction=1 if sc >= 0.0 else -1))
            all_labels.append(lab)
            all_scores.append(float(sc))

    aggregate_cm = ConfusionMatrix()
    for cm in fold_confusions:
        aggregate_cm = aggregate_cm + cm
    if aggregate_cm.n == 0:
        raise ValidationError("no test utterances pass the posterior-mass gate")
    aggregate = compute_metrics(aggregate_cm)
    roc = roc_curve(np.array(all_scores), np.array(all_labels))
    aggregate.auc = roc.auc

    if gated:
        retained_train, retained_test = corpus_retention(records, indices, threshold)
        if not gate_train:
            retained_train = None
    else:
        retained_train = retained_test = None

    return CvResult(plan=plan, speaker_labels=speaker_labels,
                    hyperparams=hp, grid_rows=grid_rows,
                    fold_confusions=fold_confusions, fold_metrics=fold_metrics,
                    aggregate_confusion=aggregate_cm, aggregate=aggregate,
                    roc=roc, scores=scores, retained_train=retained_train,
                    retained_test=retained_test)


def _pooled_train(records, indices, threshold, gate_train):
    pool = []
    for rec in records:
        pool.extend(_train_examples(rec, indices, threshold, gate_train))
    if not pool:
        raise ValidationError("no training segments pass the posterior-mass gate")
    return np.array(pool)


def evaluate_split(train_records, test_records, indices, k: int, seed: int,
                   c_grid, gamma_grid, threshold: float = MASS_THRESHOLD,
                   gated: bool = True, gate_scope: str = "both",
                   class_weighting: bool = True, fixed_c: float | None = None,
                   fixed_gamma=None, tol: float = DEFAULT_TOL,
                   max_kernel_evals: int = DEFAULT_MAX_KERNEL_EVALS) -> SplitResult:
    """Train on one manifest, score another; speakers must not overlap."""
    train_records = list(train_records)
    test_records = list(test_records)
    if not train_records or not test_records:
        raise ValidationError("both training and test records are required")
    train_speakers = {rec.speaker_id for rec in train_records}
    overlap = train_speakers & {rec.speaker_id for rec in test_records}
    if overlap:
        raise ValidationError(
            f"speakers appear in both training and test data: {sorted(overlap)[:5]}"
        )

    gate_train = gated and gate_scope == "both"
    if fixed_c is not None and fixed_gamma is not None:
        if isinstance(fixed_gamma, str):
            pool = _pooled_train(train_records, indices, threshold, gate_train)
            fixed_gamma = resolve_gamma(fixed_gamma,
                                        fit_scaler(pool).transform(pool))
        hp = Hyperparams(c=fixed_c, gamma=fixed_gamma,
                         class_weighting=class_weighting)
        grid_rows = []
    else:
        speaker_labels = {}
        for rec in train_records:
            prev = speaker_labels.get(rec.speaker_id)
            if prev is not None and prev != rec.label:
                raise ValidationError(f"speaker {rec.speaker_id} has conflicting labels")
            speaker_labels[rec.speaker_id] = rec.label
        plan = speaker_disjoint_folds(speaker_labels, k, seed)
        fold_sets, _ = build_fold_sets(train_records, plan, indices, threshold,
                                       gated, gate_scope)
        gamma_values, _ = _resolve_gamma_grid(gamma_grid, train_records, indices,
                                              threshold, gate_train)
        hp, grid_rows = grid_search(fold_sets, c_grid, gamma_values,
                                    class_weighting=class_weighting, tol=tol,
                                    max_kernel_evals=max_kernel_evals)

    x_tr, y_tr = [], []
    for rec in train_records:
        segs = _train_examples(rec, indices, threshold, gate_train)
        x_tr.extend(segs)
        y_tr.extend([rec.label] * len(segs))
    if not x_tr:
        raise ValidationError("no training segments pass the posterior-mass gate")
    model = train(np.array(x_tr), np.array(y_tr), hp, tol=tol,
                  max_kernel_evals=max_kernel_evals)

    scores: list[ScoreRow] = []
    labels, vals = [], []
    for rec in test_records:
        if gated and subset_mass(rec.mass, indices) < threshold:
            continue
        sc = float(decision_values(model, subset_vector(rec.stats, indices))[0])
        scores.append(ScoreRow(utterance_id=rec.utterance_id,
                               speaker_id=rec.speaker_id, fold=None,
                               label=rec.label, score=sc,
                               prediction=1 if sc >= 0.0 else -1))
        labels.append(rec.label)
        vals.append(sc)
    if not scores:
        raise ValidationError("no test utterances pass the posterior-mass gate")

    cm = _confusion_from_scores(labels, vals)
    metrics = compute_metrics(cm)
    roc = roc_curve(np.array(vals), np.array(labels))
    metrics.auc = roc.auc

    if gated:
        retained_train, _ = corpus_retention(train_records, indices, threshold)
        _, retained_test = corpus_retention(test_records, indices, threshold)
        if not gate_train:
            retained_train = None
    else:
        retained_train = retained_test = None

    return SplitResult(model=model, hyperparams=hp, grid_rows=grid_rows,
                       confusion=cm, metrics=metrics, roc=roc, scores=scores,
                       retained_train=retained_train, retained_test=retained_test)
