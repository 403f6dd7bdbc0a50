"""Shared fixtures and the acceptance-criteria reporter."""

from contextlib import contextmanager

import numpy as np
import pytest
from scipy.io import wavfile

from speechscreen.synthetic import make_demo_corpus

# criterion number -> (name, passed, detail); filled by tests/test_acceptance.py
_CRITERIA = {}


@contextmanager
def criterion(num: int, name: str, notes: list):
    """Record one acceptance criterion; FAIL is recorded before the raise."""
    try:
        yield
    except BaseException as exc:
        _CRITERIA[num] = (name, False, f"{type(exc).__name__}: {exc}")
        raise
    _CRITERIA[num] = (name, True, ", ".join(str(n) for n in notes))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(_CRITERIA):
        name, passed, detail = _CRITERIA[num]
        line = f"criterion {num} ({name}): {'PASS' if passed else 'FAIL'}"
        if detail:
            line += f"  [{detail}]"
        terminalreporter.write_line(line)


def write_wav(path, samples, rate: int = 8000) -> None:
    pcm = np.clip(np.asarray(samples, dtype=np.float64), -1.0, 1.0)
    wavfile.write(path, rate, (pcm * 32767.0).astype(np.int16))


@pytest.fixture(scope="session")
def demo_corpus(tmp_path_factory):
    """Small on-disk corpus (8 speakers x 2 utterances) for CLI tests."""
    root = tmp_path_factory.mktemp("demo_corpus")
    return make_demo_corpus(root, n_speakers=8, utterances_per_speaker=2, seed=3)
