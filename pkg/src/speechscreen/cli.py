"""Command-line interface: validate, extract, cv, evaluate.

Every command takes a manifest plus an optional config file; a handful
of flags override config keys directly. Exit codes: 0 success, 1
validation error, 2 runtime or extraction error.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

from .config import RunConfig, load_config
from .errors import ConvergenceError, ExtractionError, ValidationError
from .evaluation import evaluate_run, evaluate_split, subset_mass, subset_vector
from .extract import extract_corpus
from .manifest import load_manifest
from .pooling import SegmentSpec, SuperVector, write_supervectors
from .posteriors import class_indices, default_inventory, load_inventory
from .reporting import write_run_reports
from .svm import save_model

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_RUNTIME = 2

_OVERRIDE_FLAGS = {
    "phone_class": "phone_class",
    "threshold": "threshold",
    "seed": "seed",
    "workers": "workers",
    "out": "out_dir",
}


def _resolve_setup(cfg: RunConfig):
    inventory = (load_inventory(cfg.inventory_path) if cfg.inventory_path
                 else default_inventory())
    spec = SegmentSpec(window_seconds=cfg.window_seconds,
                       shift_seconds=cfg.shift_seconds)
    if cfg.phone_class == "full":
        indices = list(range(len(inventory.phones)))
        gated = False
    else:
        indices = class_indices(inventory, cfg.phone_class)
        gated = True
    return inventory, spec, indices, gated


def _require_out(cfg: RunConfig) -> Path:
    if not cfg.out_dir:
        raise ValidationError("an output directory is required (--out or out_dir)")
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out


def cmd_validate(args, cfg: RunConfig) -> int:
    manifest = load_manifest(args.manifest)
    summary = manifest.summary()
    print(f"manifest: {manifest.path}")
    print(f"utterances: {summary['utterances']} "
          f"(positive {summary['positive_utterances']}, "
          f"negative {summary['negative_utterances']})")
    print(f"speakers: {summary['speakers']} "
          f"(positive {summary['positive_speakers']}, "
          f"negative {summary['negative_speakers']})")
    return EXIT_OK


def cmd_extract(args, cfg: RunConfig) -> int:
    manifest = load_manifest(args.manifest)
    inventory, spec, indices, _ = _resolve_setup(cfg)
    out = _require_out(cfg)

    records, failures = extract_corpus(manifest.entries, inventory, spec,
                                       workers=cfg.workers, on_error="collect")
    dim = len(indices) * 40

    utt_vectors = []
    seg_vectors = []
    mass_rows = []
    for rec in records:
        utt_vectors.append(SuperVector(values=subset_vector(rec.stats, indices),
                                       utterance_id=rec.utterance_id,
                                       speaker_id=rec.speaker_id,
                                       label=rec.label))
        mass_rows.append((rec.utterance_id, "", subset_mass(rec.mass, indices)))
        for i, (st, ms) in enumerate(zip(rec.segment_stats, rec.segment_mass)):
            seg_vectors.append(SuperVector(values=subset_vector(st, indices),
                                           utterance_id=f"{rec.utterance_id}#{i:04d}",
                                           speaker_id=rec.speaker_id,
                                           label=rec.label))
            mass_rows.append((rec.utterance_id, str(i), subset_mass(ms, indices)))

    write_supervectors(out / "supervectors_utterances.svv", utt_vectors, dim=dim)
    write_supervectors(out / "supervectors_segments.svv", seg_vectors, dim=dim)
    with open(out / "mass.csv", "w", newline="", encoding="utf-8") as fh:
        for line in cfg.resolved_text().rstrip("\n").splitlines():
            fh.write(f"# {line}\n")
        fh.write("utterance_id,segment,mass\n")
        for utt, seg, mass in mass_rows:
            fh.write(f"{utt},{seg},{mass!r}\n")
    (out / "resolved_config.txt").write_text(cfg.resolved_text(), encoding="utf-8")

    print(f"extracted {len(records)} utterances "
          f"({len(seg_vectors)} segments, dimension {dim}) to {out}")
    if failures:
        for utt, message in failures:
            print(f"extraction failed: {utt}: {message}", file=sys.stderr)
        print(f"{len(failures)} of {len(manifest.entries)} utterances failed",
              file=sys.stderr)
        return EXIT_RUNTIME
    return EXIT_OK


def cmd_cv(args, cfg: RunConfig) -> int:
    manifest = load_manifest(args.manifest)
    inventory, spec, indices, gated = _resolve_setup(cfg)
    out = _require_out(cfg)

    records, _ = extract_corpus(manifest.entries, inventory, spec,
                                workers=cfg.workers, on_error="raise")
    result = evaluate_run(records, indices, k=cfg.folds, seed=cfg.seed,
                          c_grid=cfg.c_grid, gamma_grid=cfg.gamma_grid,
                          threshold=cfg.threshold, gated=gated,
                          gate_scope=cfg.gate_scope,
                          class_weighting=cfg.class_weighting,
                          fixed_c=cfg.c, fixed_gamma=cfg.gamma,
                          tol=cfg.smo_tol,
                          max_kernel_evals=cfg.max_kernel_evals)
    write_run_reports(out, result, cfg.phone_class, cfg.resolved_text(),
                      run_name=f"cv-{cfg.phone_class}")

    hp = result.hyperparams
    agg = result.aggregate
    print(f"phone class {cfg.phone_class}: C={hp.c:g} gamma={hp.gamma:.6g}")
    print(f"aggregate accuracy {agg.accuracy:.4f} "
          f"[{agg.ci_low:.4f}, {agg.ci_high:.4f}] "
          f"f1 {agg.f1:.4f} auc {agg.auc:.4f} (n={agg.n})")
    if result.retained_test is not None:
        print(f"retained test utterances: {result.retained_test:.4f}")
    print(f"reports written to {out}")
    return EXIT_OK


def cmd_evaluate(args, cfg: RunConfig) -> int:
    train_manifest = load_manifest(args.manifest)
    test_manifest = load_manifest(args.test_manifest)
    inventory, spec, indices, gated = _resolve_setup(cfg)
    out = _require_out(cfg)

    train_records, _ = extract_corpus(train_manifest.entries, inventory, spec,
                                      workers=cfg.workers, on_error="raise")
    test_records, _ = extract_corpus(test_manifest.entries, inventory, spec,
                                     workers=cfg.workers, on_error="raise")
    result = evaluate_split(train_records, test_records, indices,
                            k=cfg.folds, seed=cfg.seed,
                            c_grid=cfg.c_grid, gamma_grid=cfg.gamma_grid,
                            threshold=cfg.threshold, gated=gated,
                            gate_scope=cfg.gate_scope,
                            class_weighting=cfg.class_weighting,
                            fixed_c=cfg.c, fixed_gamma=cfg.gamma,
                            tol=cfg.smo_tol,
                            max_kernel_evals=cfg.max_kernel_evals)
    write_run_reports(out, result, cfg.phone_class, cfg.resolved_text(),
                      run_name=f"evaluate-{cfg.phone_class}")
    save_model(out / "model.svm", result.model)

    hp = result.hyperparams
    m = result.metrics
    print(f"phone class {cfg.phone_class}: C={hp.c:g} gamma={hp.gamma:.6g}")
    print(f"test accuracy {m.accuracy:.4f} [{m.ci_low:.4f}, {m.ci_high:.4f}] "
          f"f1 {m.f1:.4f} auc {m.auc:.4f} (n={m.n})")
    if result.retained_test is not None:
        print(f"retained test utterances: {result.retained_test:.4f}")
    print(f"reports and model written to {out}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="speechscreen",
        description="Telephone-band speech screening: pooled posterior "
                    "statistics with an RBF-SVM classifier.")
    sub = parser.add_subparsers(dest="command", required=True)

    def add_common(sp):
        sp.add_argument("--manifest", required=True, help="manifest CSV")
        sp.add_argument("--config", help="key = value config file")
        sp.add_argument("--phone-class", dest="phone_class",
                        help="full or one of the eight phoneme classes")
        sp.add_argument("--threshold", help="posterior-mass gate threshold")
        sp.add_argument("--seed", help="fold-assignment seed")
        sp.add_argument("--out", help="output directory")
        sp.add_argument("--workers", help="parallel extraction workers")

    add_common(sub.add_parser("validate", help="check a manifest"))
    add_common(sub.add_parser("extract", help="write super-vector files"))
    add_common(sub.add_parser("cv", help="speaker-disjoint cross-validation"))
    sp_eval = sub.add_parser("evaluate", help="train/test split evaluation")
    add_common(sp_eval)
    sp_eval.add_argument("--test-manifest", dest="test_manifest", required=True,
                         help="manifest CSV for the held-out test set")
    return parser


_COMMANDS = {
    "validate": cmd_validate,
    "extract": cmd_extract,
    "cv": cmd_cv,
    "evaluate": cmd_evaluate,
}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    overrides = {}
    for flag, key in _OVERRIDE_FLAGS.items():
        value = getattr(args, flag if flag != "out" else "out", None)
        if value is not None:
            overrides[key] = value
    try:
        cfg = load_config(args.config, overrides)
        return _COMMANDS[args.command](args, cfg)
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (ExtractionError, ConvergenceError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
