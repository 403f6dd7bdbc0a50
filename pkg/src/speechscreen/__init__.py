"""Telephone-band speech screening toolkit.

Pools frame-level phoneme posteriors into utterance-level super vectors
and classifies them with an RBF-kernel SVM trained by SMO.
"""

__version__ = "0.1.0"

from .dsp import AudioClip, load_audio, bandpass_telephone, resample_8k, melfbank_features
from .posteriors import (
    PosteriorGram,
    PhonemeInventory,
    default_inventory,
    class_indices,
    load_posteriorgram,
    write_posteriorgram,
    collapse_to_ci,
    strip_silence,
)
from .pooling import (
    SegmentSpec,
    SuperVector,
    first_order_stats,
    build_supervector,
    posterior_mass,
    segment_utterance,
)
from .svm import Hyperparams, Scaler, SvmModel, fit_scaler, rbf_kernel, train, decision_value
from .evaluation import (
    ConfusionMatrix,
    MetricReport,
    FoldPlan,
    speaker_disjoint_folds,
    compute_metrics,
    roc_curve,
    accuracy_ci95,
)

__all__ = [
    "AudioClip",
    "load_audio",
    "bandpass_telephone",
    "resample_8k",
    "melfbank_features",
    "PosteriorGram",
    "PhonemeInventory",
    "default_inventory",
    "class_indices",
    "load_posteriorgram",
    "write_posteriorgram",
    "collapse_to_ci",
    "strip_silence",
    "SegmentSpec",
    "SuperVector",
    "first_order_stats",
    "build_supervector",
    "posterior_mass",
    "segment_utterance",
    "Hyperparams",
    "Scaler",
    "SvmModel",
    "fit_scaler",
    "rbf_kernel",
    "train",
    "decision_value",
    "ConfusionMatrix",
    "MetricReport",
    "FoldPlan",
    "speaker_disjoint_folds",
    "compute_metrics",
    "roc_curve",
    "accuracy_ci95",
]
