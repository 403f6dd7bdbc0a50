"""Utterance-level pooling of frame features by phoneme posteriors.

For phoneme i with per-frame posteriors p_i and frame features x, the
pooled statistic is the posterior-weighted mean

    f_i = sum_j p_ij * x_j / sum_j p_ij

and a super vector concatenates f_i over a chosen phone subset.
Accumulation is float64 and frame-major so results are bit-reproducible.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ValidationError
from .posteriors import PosteriorGram

SV_MAGIC = b"SVV1"

DEFAULT_WINDOW_SECONDS = 3.0
DEFAULT_SHIFT_SECONDS = 0.1
FRAMES_PER_SECOND = 100  # 10 ms hop

MASS_THRESHOLD = 30.0


@dataclass(frozen=True)
class SegmentSpec:
    """Sliding-window segmentation for training augmentation."""

    window_seconds: float = DEFAULT_WINDOW_SECONDS
    shift_seconds: float = DEFAULT_SHIFT_SECONDS

    def __post_init__(self):
        if not (self.window_seconds > self.shift_seconds > 0):
            raise ValidationError(
                f"need window > shift > 0, got {self.window_seconds}/{self.shift_seconds}"
            )

    @property
    def window_frames(self) -> int:
        return int(round(self.window_seconds * FRAMES_PER_SECOND))

    @property
    def shift_frames(self) -> int:
        return int(round(self.shift_seconds * FRAMES_PER_SECOND))


@dataclass
class SuperVector:
    """Pooled utterance (or segment) feature with its provenance."""

    values: np.ndarray
    utterance_id: str
    speaker_id: str
    label: int  # +1 positive, -1 negative, 0 unknown


def _check_aligned(features: np.ndarray, pg: PosteriorGram):
    if features.ndim != 2:
        raise ValidationError("feature matrix must be 2-D")
    if features.shape[0] != pg.n_frames:
        raise ValidationError(
            f"frame-count mismatch: {features.shape[0]} feature rows vs "
            f"{pg.n_frames} posterior rows"
        )
    if features.shape[0] < 1:
        raise ValidationError("need at least one frame")


def first_order_stats(features: np.ndarray, pg: PosteriorGram, phone: int) -> np.ndarray:
    """Posterior-weighted mean of the frame features for one phoneme.

    Returns the zero vector when the phoneme's total posterior mass is
    zero, keeping the super-vector dimension fixed.
    """
    features = np.asarray(features, dtype=np.float64)
    _check_aligned(features, pg)
    if not np.all(np.isfinite(features)):
        raise ValidationError("non-finite feature values")
    if not (0 <= phone < pg.n_phones):
        raise ValidationError(f"phone index {phone} out of range [0, {pg.n_phones})")
    return _stats_unchecked(features, pg.probs, phone)


def _stats_unchecked(features: np.ndarray, probs: np.ndarray, phone: int) -> np.ndarray:
    weights = probs[:, phone]
    mass = float(weights.sum())
    if mass == 0.0:
        return np.zeros(features.shape[1])
    return (weights @ features) / mass


def build_supervector(features: np.ndarray, pg: PosteriorGram, subset) -> np.ndarray:
    """Concatenate first-order statistics over an ordered phone subset."""
    subset = list(subset)
    if not subset:
        raise ValidationError("empty phone subset")
    parts = [first_order_stats(features, pg, i) for i in subset]
    return np.concatenate(parts)


def phone_stats(features: np.ndarray, pg: PosteriorGram):
    """Per-phone statistics and masses for a whole feature/posterior pair.

    Returns (stats, mass): stats[i] is first_order_stats for phone i and
    mass[i] its total posterior mass. Any subset's super vector is then
    stats[subset].ravel() and its gate mass mass[subset].sum().
    """
    features = np.asarray(features, dtype=np.float64)
    _check_aligned(features, pg)
    if not np.all(np.isfinite(features)):
        raise ValidationError("non-finite feature values")
    stats = np.stack([_stats_unchecked(features, pg.probs, i) for i in range(pg.n_phones)])
    mass = pg.probs.sum(axis=0)
    return stats, mass


def posterior_mass(pg: PosteriorGram, subset) -> float:
    """Total posterior mass over all frames within a phone subset."""
    subset = list(subset)
    if any(not (0 <= i < pg.n_phones) for i in subset):
        raise ValidationError(f"invalid phone indices in subset {subset}")
    return float(pg.probs[:, subset].sum())


def passes_gate(mass: float, threshold: float = MASS_THRESHOLD) -> bool:
    """Inclusive posterior-mass gate: mass >= threshold is retained."""
    return mass >= threshold


def segment_utterance(features: np.ndarray, pg: PosteriorGram,
                      spec: SegmentSpec = SegmentSpec()):
    """Cut aligned features/posteriors into overlapping windows.

    Windows of spec.window_frames every spec.shift_frames; an utterance
    shorter than one window yields itself as a single segment rather
    than being dropped.
    """
    features = np.asarray(features, dtype=np.float64)
    _check_aligned(features, pg)
    t = features.shape[0]
    win, hop = spec.window_frames, spec.shift_frames
    if t < win:
        return [(features, pg)]
    out = []
    for start in range(0, t - win + 1, hop):
        out.append((
            features[start:start + win],
            PosteriorGram(probs=pg.probs[start:start + win], labels=pg.labels),
        ))
    return out


def write_supervectors(path, records, dim: int | None = None) -> None:
    """Write SuperVector records in the little-endian SVV1 binary format."""
    records = list(records)
    if dim is None:
        if not records:
            raise ValidationError("cannot infer dimension from an empty record list")
        dim = records[0].values.size
    with open(path, "wb") as fh:
        fh.write(SV_MAGIC)
        fh.write(struct.pack("<II", dim, len(records)))
        for rec in records:
            values = np.asarray(rec.values, dtype=np.float64)
            if values.size != dim:
                raise ValidationError(
                    f"record {rec.utterance_id}: dimension {values.size} != {dim}"
                )
            if rec.label not in (-1, 0, 1):
                raise ValidationError(f"record {rec.utterance_id}: bad label {rec.label}")
            for text in (rec.utterance_id, rec.speaker_id):
                data = text.encode("ascii")
                fh.write(struct.pack("<H", len(data)))
                fh.write(data)
            fh.write(struct.pack("<b", rec.label))
            fh.write(values.astype("<f4").tobytes(order="C"))


def read_supervectors(path):
    """Read an SVV1 file back into a list of SuperVector records."""
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != SV_MAGIC:
            raise ValidationError(f"{path}: bad magic {magic!r}, expected {SV_MAGIC!r}")
        dim, count = struct.unpack("<II", fh.read(8))
        records = []
        for _ in range(count):
            texts = []
            for _ in range(2):
                (length,) = struct.unpack("<H", fh.read(2))
                texts.append(fh.read(length).decode("ascii"))
            (label,) = struct.unpack("<b", fh.read(1))
            raw = fh.read(dim * 4)
            if len(raw) != dim * 4:
                raise ValidationError(f"{path}: truncated record data")
            values = np.frombuffer(raw, dtype="<f4").astype(np.float64)
            records.append(SuperVector(values=values, utterance_id=texts[0],
                                       speaker_id=texts[1], label=int(label)))
    return records
