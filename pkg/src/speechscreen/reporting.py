"""Report files for evaluation runs.

Every delimited report starts with the fully resolved run configuration
as '# key = value' comment lines, so numbers can always be traced back
to their settings. Numeric cells are written with repr() of the Python
float, which round-trips exactly and keeps reruns byte-identical.
"""

from __future__ import annotations

import csv
from pathlib import Path

from .evaluation import CvResult, MetricReport, SplitResult

METRIC_COLUMNS = ("run", "fold", "phone_class", "n", "correct", "accuracy",
                  "precision", "recall", "f1", "sensitivity", "specificity",
                  "auc", "ci_low", "ci_high", "degenerate",
                  "tp", "fp", "tn", "fn")


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(float(value))
    return str(value)


def _write_csv(path, header, rows, config_text: str | None) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        if config_text:
            for line in config_text.rstrip("\n").splitlines():
                fh.write(f"# {line}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([_cell(v) for v in row])


def metric_row(run: str, fold, phone_class: str, metrics: MetricReport | None,
               cm) -> list:
    if metrics is None:
        return [run, fold, phone_class, cm.n if cm else 0, "", "", "", "", "",
                "", "", "", "", "", "", cm.tp if cm else "", cm.fp if cm else "",
                cm.tn if cm else "", cm.fn if cm else ""]
    return [run, fold, phone_class, metrics.n, metrics.correct,
            metrics.accuracy, metrics.precision, metrics.recall, metrics.f1,
            metrics.sensitivity, metrics.specificity, metrics.auc,
            metrics.ci_low, metrics.ci_high, metrics.degenerate,
            cm.tp, cm.fp, cm.tn, cm.fn]


def write_metrics_csv(path, rows, config_text: str | None) -> None:
    _write_csv(path, METRIC_COLUMNS, rows, config_text)


def write_roc_csv(path, roc, config_text: str | None) -> None:
    rows = [(float(t), float(f), float(tp))
            for t, f, tp in zip(roc.thresholds, roc.fpr, roc.tpr)]
    _write_csv(path, ("threshold", "fpr", "tpr"), rows, config_text)


def write_scores_csv(path, scores, config_text: str | None) -> None:
    rows = [(s.utterance_id, s.speaker_id,
             s.fold if s.fold is not None else "", s.label, s.score,
             s.prediction) for s in scores]
    _write_csv(path, ("utterance_id", "speaker_id", "fold", "label", "score",
                      "prediction"), rows, config_text)


def write_grid_csv(path, grid_rows, config_text: str | None) -> None:
    rows = [(r["c"], r["gamma"], r["fold"], r["n"], r["correct"], r["accuracy"])
            for r in grid_rows]
    _write_csv(path, ("c", "gamma", "fold", "n", "correct", "accuracy"),
               rows, config_text)


def write_folds_csv(path, plan, speaker_labels, config_text: str | None) -> None:
    rows = [(spk, plan.fold_of[spk],
             "positive" if speaker_labels[spk] > 0 else "negative")
            for spk in sorted(plan.fold_of)]
    _write_csv(path, ("speaker_id", "fold", "label"), rows, config_text)


def _fmt_metrics(m: MetricReport) -> str:
    auc = f" auc={m.auc:.4f}" if m.auc is not None else ""
    flag = " (degenerate)" if m.degenerate else ""
    return (f"n={m.n} accuracy={m.accuracy:.4f} "
            f"ci95=[{m.ci_low:.4f}, {m.ci_high:.4f}] "
            f"precision={m.precision:.4f} recall={m.recall:.4f} "
            f"f1={m.f1:.4f} sensitivity={m.sensitivity:.4f} "
            f"specificity={m.specificity:.4f}{auc}{flag}")


def render_text_report(result, phone_class: str) -> str:
    """Human-readable summary for a CV or train/test run."""
    lines = [f"phone class: {phone_class}"]
    hp = result.hyperparams
    weighting = "on" if hp.class_weighting else "off"
    lines.append(f"hyperparameters: C={hp.c:g} gamma={hp.gamma:.6g} "
                 f"(class weighting {weighting})")
    if isinstance(result, CvResult):
        lines.append(f"folds: {result.plan.k} seed: {result.plan.seed}")
        lines.append("aggregate: " + _fmt_metrics(result.aggregate))
        for fold, m in enumerate(result.fold_metrics):
            if m is None:
                lines.append(f"fold {fold}: no test utterances")
            else:
                lines.append(f"fold {fold}: " + _fmt_metrics(m))
    else:
        lines.append("test: " + _fmt_metrics(result.metrics))
    if result.retained_train is not None:
        lines.append(f"retained training segments: {result.retained_train:.4f}")
    if result.retained_test is not None:
        lines.append(f"retained test utterances: {result.retained_test:.4f}")
    return "\n".join(lines) + "\n"


def write_run_reports(out_dir, result, phone_class: str, config_text: str,
                      run_name: str, render_figures: bool = True) -> None:
    """Write the full report set for a finished run into out_dir."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "resolved_config.txt").write_text(config_text, encoding="utf-8")

    rows = []
    if isinstance(result, CvResult):
        for fold, (m, cm) in enumerate(zip(result.fold_metrics, result.fold_confusions)):
            rows.append(metric_row(run_name, fold, phone_class, m, cm))
        rows.append(metric_row(run_name, "aggregate", phone_class,
                               result.aggregate, result.aggregate_confusion))
        write_folds_csv(out / "folds.csv", result.plan, result.speaker_labels,
                        config_text)
    else:
        rows.append(metric_row(run_name, "test", phone_class,
                               result.metrics, result.confusion))
    write_metrics_csv(out / "metrics.csv", rows, config_text)
    write_roc_csv(out / "roc.csv", result.roc, config_text)
    write_scores_csv(out / "scores.csv", result.scores, config_text)
    if result.grid_rows:
        write_grid_csv(out / "grid.csv", result.grid_rows, config_text)
    (out / "report.txt").write_text(render_text_report(result, phone_class),
                                    encoding="utf-8")
    if render_figures:
        from . import plots

        plots.render_run_figures(out, result, phone_class)
