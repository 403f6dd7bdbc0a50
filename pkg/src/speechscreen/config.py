"""Run configuration: a small key = value text format plus overrides.

Unknown keys are rejected. The resolved configuration (defaults merged
with file and override values) can be rendered back to text; reports
embed that text so a run's settings always travel with its numbers.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from pathlib import Path

from .errors import ValidationError
from .posteriors import PHONEME_CLASSES

PHONE_CLASS_CHOICES = ("full",) + PHONEME_CLASSES


def _parse_bool(raw: str) -> bool:
    low = raw.strip().lower()
    if low in ("true", "yes", "on", "1"):
        return True
    if low in ("false", "no", "off", "0"):
        return False
    raise ValidationError(f"expected a boolean, got {raw!r}")


def _parse_float(raw: str) -> float:
    try:
        return float(raw)
    except ValueError:
        raise ValidationError(f"expected a number, got {raw!r}") from None


def _parse_int(raw: str) -> int:
    try:
        return int(raw)
    except ValueError:
        raise ValidationError(f"expected an integer, got {raw!r}") from None


def _parse_float_list(raw: str) -> tuple:
    items = [p.strip() for p in raw.split(",") if p.strip()]
    if not items:
        raise ValidationError(f"empty list value {raw!r}")
    return tuple(_parse_float(p) for p in items)


def _parse_gamma_list(raw: str) -> tuple:
    items = [p.strip() for p in raw.split(",") if p.strip()]
    if not items:
        raise ValidationError(f"empty list value {raw!r}")
    return tuple("scale" if p == "scale" else _parse_float(p) for p in items)


def _parse_gamma(raw: str):
    return "scale" if raw.strip() == "scale" else _parse_float(raw)


def _fmt(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, tuple):
        return ",".join(_fmt(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


@dataclass
class RunConfig:
    phone_class: str = "full"
    threshold: float = 30.0
    window_seconds: float = 3.0
    shift_seconds: float = 0.1
    folds: int = 6
    seed: int = 42
    c: float | None = None
    gamma: object = None
    c_grid: tuple = (0.1, 1.0, 10.0, 100.0)
    gamma_grid: tuple = ("scale", 1e-4, 1e-3, 1e-2, 1e-1)
    class_weighting: bool = True
    gate_scope: str = "both"
    smo_tol: float = 1e-3
    max_kernel_evals: int = 10_000_000
    workers: int = 1
    inventory_path: str | None = None
    out_dir: str | None = None

    def validate(self) -> "RunConfig":
        if self.phone_class not in PHONE_CLASS_CHOICES:
            raise ValidationError(
                f"phone_class must be one of {PHONE_CLASS_CHOICES}, got {self.phone_class!r}"
            )
        if self.threshold < 0:
            raise ValidationError(f"threshold must be >= 0, got {self.threshold}")
        if not self.window_seconds > self.shift_seconds > 0:
            raise ValidationError(
                f"need window_seconds > shift_seconds > 0, got "
                f"{self.window_seconds} / {self.shift_seconds}"
            )
        if self.folds < 2:
            raise ValidationError(f"folds must be >= 2, got {self.folds}")
        if self.c is not None and self.c <= 0:
            raise ValidationError(f"c must be positive, got {self.c}")
        if self.gamma is not None and self.gamma != "scale" and self.gamma <= 0:
            raise ValidationError(f"gamma must be positive or 'scale', got {self.gamma}")
        if not self.c_grid or any(v <= 0 for v in self.c_grid):
            raise ValidationError("c_grid must list positive values")
        if not self.gamma_grid or any(v != "scale" and v <= 0 for v in self.gamma_grid):
            raise ValidationError("gamma_grid entries must be positive or 'scale'")
        if self.gate_scope not in ("both", "test"):
            raise ValidationError(f"gate_scope must be 'both' or 'test', got {self.gate_scope!r}")
        if self.smo_tol <= 0:
            raise ValidationError(f"smo_tol must be positive, got {self.smo_tol}")
        if self.max_kernel_evals <= 0:
            raise ValidationError(f"max_kernel_evals must be positive, got {self.max_kernel_evals}")
        if self.workers < 1:
            raise ValidationError(f"workers must be >= 1, got {self.workers}")
        return self

    @property
    def fixed_hyperparams(self) -> bool:
        return self.c is not None and self.gamma is not None

    def resolved_text(self) -> str:
        lines = []
        for f in fields(self):
            lines.append(f"{f.name} = {_fmt(getattr(self, f.name))}")
        return "\n".join(lines) + "\n"


_PARSERS = {
    "phone_class": str,
    "threshold": _parse_float,
    "window_seconds": _parse_float,
    "shift_seconds": _parse_float,
    "folds": _parse_int,
    "seed": _parse_int,
    "c": _parse_float,
    "gamma": _parse_gamma,
    "c_grid": _parse_float_list,
    "gamma_grid": _parse_gamma_list,
    "class_weighting": _parse_bool,
    "gate_scope": str,
    "smo_tol": _parse_float,
    "max_kernel_evals": _parse_int,
    "workers": _parse_int,
    "inventory_path": str,
    "out_dir": str,
}


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """Parse key = value lines into raw strings; # starts a comment.

    An empty value leaves the key unset, so rendered resolved_text()
    output loads back into the same configuration.
    """
    raw = {}
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise ValidationError(f"{source}:{lineno}: expected 'key = value', got {line!r}")
        key, _, value = stripped.partition("=")
        key = key.strip()
        value = value.strip()
        if key not in _PARSERS:
            raise ValidationError(f"{source}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise ValidationError(f"{source}:{lineno}: duplicate key {key!r}")
        seen.add(key)
        if value:
            raw[key] = value
    return raw


def load_config(path=None, overrides: dict | None = None) -> RunConfig:
    """Build a validated RunConfig from an optional file plus overrides.

    Overrides map key names to raw string values (as given on a command
    line) and win over file values, which win over defaults.
    """
    merged = {}
    if path is not None:
        path = Path(path)
        if not path.is_file():
            raise ValidationError(f"config file not found: {path}")
        merged.update(parse_config_text(path.read_text(encoding="utf-8"), str(path)))
    for key, value in (overrides or {}).items():
        if key not in _PARSERS:
            raise ValidationError(f"unknown config key {key!r}")
        merged[key] = value

    kwargs = {}
    for key, raw_value in merged.items():
        kwargs[key] = _PARSERS[key](raw_value) if isinstance(raw_value, str) else raw_value
    return RunConfig(**kwargs).validate()
