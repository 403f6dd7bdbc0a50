"""Corpus manifests: a CSV with one row per utterance.

Required columns: utterance_id, speaker_id, label, audio_path,
posteriorgram_path. Labels are the strings "positive" or "negative";
paths are resolved relative to the manifest's directory. Validation
collects every problem before raising so a single run reports all of
them.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

from .errors import ValidationError

REQUIRED_COLUMNS = ("utterance_id", "speaker_id", "label",
                    "audio_path", "posteriorgram_path")
LABEL_MAP = {"positive": 1, "negative": -1}


@dataclass(frozen=True)
class ManifestEntry:
    utterance_id: str
    speaker_id: str
    label: int
    audio_path: Path
    posteriorgram_path: Path


@dataclass
class Manifest:
    path: Path
    entries: list

    @property
    def speaker_labels(self) -> dict:
        return {e.speaker_id: e.label for e in self.entries}

    def summary(self) -> dict:
        pos = [e for e in self.entries if e.label > 0]
        neg = [e for e in self.entries if e.label < 0]
        return {
            "utterances": len(self.entries),
            "positive_utterances": len(pos),
            "negative_utterances": len(neg),
            "speakers": len({e.speaker_id for e in self.entries}),
            "positive_speakers": len({e.speaker_id for e in pos}),
            "negative_speakers": len({e.speaker_id for e in neg}),
        }


def load_manifest(path, check_files: bool = True) -> Manifest:
    """Parse and validate a manifest CSV; raises with every problem found."""
    path = Path(path)
    if not path.is_file():
        raise ValidationError(f"manifest not found: {path}")
    base = path.parent

    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise ValidationError(f"{path}: empty manifest")
        missing = [c for c in REQUIRED_COLUMNS if c not in reader.fieldnames]
        if missing:
            raise ValidationError(f"{path}: missing columns {missing}")
        raw_rows = list(reader)

    if not raw_rows:
        raise ValidationError(f"{path}: manifest has no data rows")

    problems = []
    entries = []
    seen_ids = {}
    speaker_label = {}
    for lineno, row in enumerate(raw_rows, start=2):
        values = {c: (row.get(c) or "").strip() for c in REQUIRED_COLUMNS}
        empty = [c for c in REQUIRED_COLUMNS if not values[c]]
        if empty:
            problems.append(f"line {lineno}: empty field(s) {empty}")
            continue
        utt = values["utterance_id"]
        if utt in seen_ids:
            problems.append(
                f"line {lineno}: duplicate utterance_id {utt!r} (first on line {seen_ids[utt]})"
            )
            continue
        seen_ids[utt] = lineno
        if values["label"] not in LABEL_MAP:
            problems.append(
                f"line {lineno}: label must be 'positive' or 'negative', got {values['label']!r}"
            )
            continue
        label = LABEL_MAP[values["label"]]
        spk = values["speaker_id"]
        if spk in speaker_label and speaker_label[spk] != label:
            problems.append(f"line {lineno}: speaker {spk!r} has conflicting labels")
            continue
        speaker_label[spk] = label

        audio = base / values["audio_path"]
        pg = base / values["posteriorgram_path"]
        if check_files:
            if not audio.is_file():
                problems.append(f"line {lineno}: audio file not found: {audio}")
            if not pg.is_file():
                problems.append(f"line {lineno}: posteriorgram file not found: {pg}")
        entries.append(ManifestEntry(utterance_id=utt, speaker_id=spk, label=label,
                                     audio_path=audio, posteriorgram_path=pg))

    if problems:
        raise ValidationError(f"{path}: " + "; ".join(problems))
    return Manifest(path=path, entries=entries)
