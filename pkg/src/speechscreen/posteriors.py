"""Phoneme posteriorgram I/O and inventory handling.

Posteriorgrams arrive from an external acoustic model in a small binary
format (see read/write below), get collapsed to context-independent
phonemes, lose their silence column, and are indexed through a 39-phone
inventory partitioned into eight articulatory classes.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ValidationError

MAGIC = b"PGV1"
SILENCE_LABEL = "sil"

ROW_SUM_LO = 0.99
ROW_SUM_HI = 1.01
MAX_FRAME_MISMATCH = 5

PHONEME_CLASSES = (
    "nasals",
    "back-vowels",
    "front-vowels",
    "mid-vowels",
    "semi-vowels",
    "stops",
    "fricatives",
    "diphthongs",
)

# Default 39-phone partition. Loadable from a text file (one
# "<phone> <class>" per line) so it can be corrected without code change.
DEFAULT_CLASS_MAP = {
    "iy": "front-vowels", "ih": "front-vowels", "eh": "front-vowels", "ae": "front-vowels",
    "er": "mid-vowels", "ah": "mid-vowels", "ax": "mid-vowels",
    "uw": "back-vowels", "uh": "back-vowels", "ao": "back-vowels", "aa": "back-vowels",
    "ey": "diphthongs", "ay": "diphthongs", "oy": "diphthongs", "aw": "diphthongs", "ow": "diphthongs",
    "l": "semi-vowels", "r": "semi-vowels", "w": "semi-vowels", "y": "semi-vowels",
    "m": "nasals", "n": "nasals", "ng": "nasals",
    "b": "stops", "d": "stops", "g": "stops", "p": "stops", "t": "stops", "k": "stops",
    "jh": "fricatives", "ch": "fricatives", "s": "fricatives", "sh": "fricatives",
    "z": "fricatives", "f": "fricatives", "th": "fricatives", "v": "fricatives",
    "dh": "fricatives", "hh": "fricatives",
}


@dataclass
class PosteriorGram:
    """T x M matrix of per-frame phoneme posterior probabilities."""

    probs: np.ndarray
    labels: tuple

    def __post_init__(self):
        self.probs = np.asarray(self.probs, dtype=np.float64)
        self.labels = tuple(self.labels)
        if self.probs.ndim != 2:
            raise ValidationError("posteriorgram must be a 2-D matrix")
        if self.probs.shape[1] != len(self.labels):
            raise ValidationError(
                f"{self.probs.shape[1]} columns but {len(self.labels)} labels"
            )

    @property
    def n_frames(self) -> int:
        return self.probs.shape[0]

    @property
    def n_phones(self) -> int:
        return self.probs.shape[1]


@dataclass
class PhonemeInventory:
    """Ordered 39-phone inventory with a disjoint eight-class partition."""

    phones: tuple
    class_map: dict = field(repr=False)

    def __post_init__(self):
        self.phones = tuple(self.phones)
        if len(self.phones) != 39:
            raise ValidationError(f"inventory must have 39 phones, got {len(self.phones)}")
        if len(set(self.phones)) != len(self.phones):
            raise ValidationError("duplicate phones in inventory")
        if SILENCE_LABEL in self.phones:
            raise ValidationError("silence must not be part of the inventory")
        missing = [p for p in self.phones if p not in self.class_map]
        if missing:
            raise ValidationError(f"phones without a class: {missing}")
        extra = [p for p in self.class_map if p not in self.phones]
        if extra:
            raise ValidationError(f"class map covers unknown phones: {extra}")
        bad = [c for c in self.class_map.values() if c not in PHONEME_CLASSES]
        if bad:
            raise ValidationError(f"unknown phoneme classes: {sorted(set(bad))}")
        nasals = {p for p, c in self.class_map.items() if c == "nasals"}
        if nasals != {"m", "n", "ng"}:
            raise ValidationError(f"nasals must be m, n, ng; got {sorted(nasals)}")

    def index(self, phone: str) -> int:
        return self.phones.index(phone)


def default_inventory() -> PhonemeInventory:
    return PhonemeInventory(phones=tuple(sorted(DEFAULT_CLASS_MAP)), class_map=dict(DEFAULT_CLASS_MAP))


def load_inventory(path) -> PhonemeInventory:
    """Read an inventory file: one '<phone> <class>' pair per line."""
    class_map = {}
    for lineno, raw in enumerate(Path(path).read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise ValidationError(f"{path}:{lineno}: expected '<phone> <class>', got {raw!r}")
        phone, cls = parts
        if phone in class_map:
            raise ValidationError(f"{path}:{lineno}: duplicate phone {phone!r}")
        class_map[phone] = cls
    return PhonemeInventory(phones=tuple(sorted(class_map)), class_map=class_map)


def save_inventory(path, inventory: PhonemeInventory) -> None:
    lines = [f"{p} {inventory.class_map[p]}" for p in inventory.phones]
    Path(path).write_text("\n".join(lines) + "\n")


def class_indices(inventory: PhonemeInventory, class_name: str) -> list:
    """Indices of a phoneme class's phones within the inventory ordering."""
    if class_name not in PHONEME_CLASSES:
        raise ValidationError(
            f"unknown phoneme class {class_name!r}; expected one of {PHONEME_CLASSES}"
        )
    return [i for i, p in enumerate(inventory.phones) if inventory.class_map[p] == class_name]


def write_posteriorgram(path, probs: np.ndarray, labels) -> None:
    """Write a posteriorgram in the little-endian PGV1 binary format."""
    probs = np.asarray(probs)
    labels = list(labels)
    if probs.ndim != 2 or probs.shape[1] != len(labels):
        raise ValidationError("probs shape does not match label count")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(struct.pack("<II", probs.shape[0], probs.shape[1]))
        for label in labels:
            data = label.encode("ascii")
            fh.write(struct.pack("<H", len(data)))
            fh.write(data)
        fh.write(probs.astype("<f4").tobytes(order="C"))


def _read_exact(fh, count, what):
    data = fh.read(count)
    if len(data) != count:
        raise ValidationError(f"truncated posteriorgram file while reading {what}")
    return data


def load_posteriorgram(path, expected_frames: int | None = None) -> PosteriorGram:
    """Load and validate a PGV1 posteriorgram file.

    Row sums must lie in [0.99, 1.01]. When expected_frames (from the
    paired feature matrix) is given, a frame-count mismatch of up to 5
    is reconciled by trimming to the shorter length; larger mismatches
    signal a pairing bug and raise.
    """
    with open(path, "rb") as fh:
        magic = fh.read(4)
        if magic != MAGIC:
            raise ValidationError(f"{path}: bad magic {magic!r}, expected {MAGIC!r}")
        n_frames, n_phones = struct.unpack("<II", _read_exact(fh, 8, "header"))
        if n_frames == 0 or n_phones == 0:
            raise ValidationError(f"{path}: empty posteriorgram ({n_frames}x{n_phones})")
        labels = []
        for _ in range(n_phones):
            (length,) = struct.unpack("<H", _read_exact(fh, 2, "label length"))
            labels.append(_read_exact(fh, length, "label").decode("ascii"))
        raw = _read_exact(fh, n_frames * n_phones * 4, "probability matrix")

    probs = np.frombuffer(raw, dtype="<f4").reshape(n_frames, n_phones).astype(np.float64)
    if not np.all(np.isfinite(probs)):
        raise ValidationError(f"{path}: non-finite posterior entries")
    if probs.min() < -1e-6 or probs.max() > 1.0 + 1e-6:
        raise ValidationError(f"{path}: posterior entries outside [0, 1]")
    row_sums = probs.sum(axis=1)
    bad = np.where((row_sums < ROW_SUM_LO) | (row_sums > ROW_SUM_HI))[0]
    if bad.size:
        raise ValidationError(
            f"{path}: row {bad[0]} sums to {row_sums[bad[0]]:.4f}, "
            f"outside [{ROW_SUM_LO}, {ROW_SUM_HI}]"
        )

    if expected_frames is not None:
        if abs(n_frames - expected_frames) > MAX_FRAME_MISMATCH:
            raise ValidationError(
                f"{path}: {n_frames} posterior frames vs {expected_frames} feature frames; "
                f"mismatch exceeds {MAX_FRAME_MISMATCH}"
            )
        keep = min(n_frames, expected_frames)
        probs = probs[:keep]

    return PosteriorGram(probs=probs, labels=tuple(labels))


def collapse_to_ci(cd_probs: np.ndarray, cd_to_ci) -> PosteriorGram:
    """Sum context-dependent columns into context-independent phonemes.

    cd_to_ci maps each CD column index to a CI phoneme name (or the
    silence label); output columns appear in first-occurrence order.
    Row sums are preserved exactly since this only re-buckets mass.
    """
    cd_probs = np.asarray(cd_probs, dtype=np.float64)
    if cd_probs.ndim != 2:
        raise ValidationError("cd_probs must be a 2-D matrix")
    if isinstance(cd_to_ci, dict):
        mapping = [cd_to_ci.get(k) for k in range(cd_probs.shape[1])]
    else:
        mapping = list(cd_to_ci)
        if len(mapping) != cd_probs.shape[1]:
            raise ValidationError(
                f"map covers {len(mapping)} columns, matrix has {cd_probs.shape[1]}"
            )
    unmapped = [k for k, t in enumerate(mapping) if t is None]
    if unmapped:
        raise ValidationError(f"unmapped context-dependent indices: {unmapped[:8]}")

    targets = list(dict.fromkeys(mapping))
    out = np.zeros((cd_probs.shape[0], len(targets)))
    col_of = {t: i for i, t in enumerate(targets)}
    for k, target in enumerate(mapping):
        out[:, col_of[target]] += cd_probs[:, k]
    return PosteriorGram(probs=out, labels=tuple(targets))


def strip_silence(pg: PosteriorGram, silence_label: str = SILENCE_LABEL) -> PosteriorGram:
    """Drop the silence column without renormalizing the remaining mass."""
    if silence_label not in pg.labels:
        raise ValidationError(f"no {silence_label!r} column to strip")
    keep = [i for i, lab in enumerate(pg.labels) if lab != silence_label]
    return PosteriorGram(
        probs=pg.probs[:, keep],
        labels=tuple(pg.labels[i] for i in keep),
    )


def conform_to_inventory(pg: PosteriorGram, inventory: PhonemeInventory) -> PosteriorGram:
    """Normalize a loaded posteriorgram against an inventory.

    Duplicate labels (context-dependent copies of one phone) are summed,
    a silence column is stripped if present, and columns are reordered to
    the inventory's phone order. Raises if any inventory phone is missing.
    """
    if len(set(pg.labels)) != len(pg.labels):
        pg = collapse_to_ci(pg.probs, list(pg.labels))
    if SILENCE_LABEL in pg.labels:
        pg = strip_silence(pg)
    missing = [p for p in inventory.phones if p not in pg.labels]
    if missing:
        raise ValidationError(f"posteriorgram lacks inventory phones: {missing[:8]}")
    extra = [lab for lab in pg.labels if lab not in inventory.phones]
    if extra:
        raise ValidationError(f"posteriorgram has unexpected phones: {extra[:8]}")
    order = [pg.labels.index(p) for p in inventory.phones]
    return PosteriorGram(probs=pg.probs[:, order], labels=inventory.phones)
