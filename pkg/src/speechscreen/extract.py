"""Per-utterance feature extraction: audio through the telephone-band
front end, posteriorgram alignment, and pooled per-phone statistics for
the whole utterance and for overlapping 3 s training segments.

Keeping the full per-phone statistics matrix (rather than one subset's
super vector) lets a single extraction pass serve every phone-class run
and gate threshold.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .dsp import bandpass_telephone, load_audio, melfbank_features, resample_8k
from .errors import ExtractionError, ValidationError
from .manifest import ManifestEntry
from .pooling import SegmentSpec, phone_stats, segment_utterance
from .posteriors import PhonemeInventory, PosteriorGram, conform_to_inventory, load_posteriorgram


@dataclass
class UtteranceRecord:
    """Pooled statistics for one utterance and its training segments."""

    utterance_id: str
    speaker_id: str
    label: int
    stats: np.ndarray  # n_phones x n_dims, whole utterance
    mass: np.ndarray  # n_phones
    segment_stats: list
    segment_mass: list
    n_frames: int


def extract_utterance(entry: ManifestEntry, inventory: PhonemeInventory,
                      spec: SegmentSpec) -> UtteranceRecord:
    """Run one utterance through the full front end.

    The posteriorgram is aligned to the feature frame count (small
    mismatches are trimmed to the shorter side) and conformed to the
    inventory before pooling.
    """
    clip = load_audio(entry.audio_path)
    clip = bandpass_telephone(clip)
    clip = resample_8k(clip)
    feats = melfbank_features(clip)

    pg = load_posteriorgram(entry.posteriorgram_path, expected_frames=feats.shape[0])
    pg = conform_to_inventory(pg, inventory)
    n = min(feats.shape[0], pg.n_frames)
    feats = feats[:n]
    if pg.n_frames > n:
        pg = PosteriorGram(probs=pg.probs[:n], labels=pg.labels)

    stats, mass = phone_stats(feats, pg)
    segment_stats = []
    segment_mass = []
    for seg_feats, seg_pg in segment_utterance(feats, pg, spec):
        st, ms = phone_stats(seg_feats, seg_pg)
        segment_stats.append(st)
        segment_mass.append(ms)
    return UtteranceRecord(utterance_id=entry.utterance_id,
                           speaker_id=entry.speaker_id, label=entry.label,
                           stats=stats, mass=mass, segment_stats=segment_stats,
                           segment_mass=segment_mass, n_frames=n)


def _extract_one(args):
    entry, inventory, spec = args
    try:
        return entry.utterance_id, extract_utterance(entry, inventory, spec), None
    except Exception as exc:  # noqa: BLE001 - reported per utterance
        return entry.utterance_id, None, f"{type(exc).__name__}: {exc}"


def extract_corpus(entries, inventory: PhonemeInventory, spec: SegmentSpec,
                   workers: int = 1, on_error: str = "raise"):
    """Extract every manifest entry, preserving manifest order.

    With on_error='raise' the first failure aborts; with 'collect' the
    failing utterances are skipped and returned as (utterance_id,
    message) pairs alongside the successful records.
    """
    if on_error not in ("raise", "collect"):
        raise ValidationError(f"unknown on_error mode {on_error!r}")
    jobs = [(entry, inventory, spec) for entry in entries]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_extract_one, jobs, chunksize=1))
    else:
        results = [_extract_one(job) for job in jobs]

    records = []
    failures = []
    for utt, record, message in results:
        if record is not None:
            records.append(record)
        elif on_error == "collect":
            failures.append((utt, message))
        else:
            raise ExtractionError(f"{utt}: {message}")
    return records, failures
