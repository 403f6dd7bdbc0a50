"""Telephone-band audio frontend: WAV loading, 300-3400 Hz band-pass,
8 kHz resampling, and 40-dim log-mel filterbank features.

All functions are pure and safe to run on many utterances in parallel.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.io import wavfile
from scipy.signal import butter, sosfilt, upfirdn

from .errors import ValidationError

TARGET_RATE = 8000
BAND_LOW_HZ = 300.0
BAND_HIGH_HZ = 3400.0

FRAME_LEN = 200       # 25 ms at 8 kHz
FRAME_SHIFT = 80      # 10 ms at 8 kHz
N_FFT = 256
N_MELS = 40
MEL_FMAX = 4000.0
LOG_FLOOR = 1e-10

# Anti-alias cutoff for the polyphase resampler, 0.45 * target rate.
RESAMPLE_CUTOFF_HZ = 0.45 * TARGET_RATE
RESAMPLE_KAISER_BETA = 8.0


@dataclass(eq=False)
class AudioClip:
    """Mono audio with samples in [-1, 1]."""

    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        self.samples = np.asarray(self.samples, dtype=np.float64)
        if self.samples.ndim != 1:
            raise ValidationError("AudioClip samples must be one-dimensional")
        if self.samples.size == 0:
            raise ValidationError("AudioClip has zero length")
        if not np.all(np.isfinite(self.samples)):
            raise ValidationError("AudioClip contains non-finite samples")
        if self.sample_rate <= 0:
            raise ValidationError(f"sample rate must be positive, got {self.sample_rate}")

    @property
    def duration(self) -> float:
        return self.samples.size / self.sample_rate


def load_audio(path) -> AudioClip:
    """Load a PCM WAV file as a normalized mono clip.

    Accepts 8/16-bit integer or 32-bit float encodings with 1 or 2
    channels. Integer samples are divided by full scale; stereo channels
    are averaged.
    """
    try:
        rate, data = wavfile.read(path)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise ValidationError(f"unreadable WAV file {path}: {exc}") from exc

    if data.size == 0:
        raise ValidationError(f"zero-length audio in {path}")

    if data.dtype == np.int16:
        samples = data.astype(np.float64) / 32768.0
    elif data.dtype == np.uint8:
        samples = (data.astype(np.float64) - 128.0) / 128.0
    elif data.dtype == np.float32 or data.dtype == np.float64:
        samples = data.astype(np.float64)
    else:
        raise ValidationError(
            f"unsupported WAV encoding {data.dtype} in {path}; "
            "expected 8/16-bit PCM or 32-bit float"
        )

    if samples.ndim == 2:
        if samples.shape[1] > 2:
            raise ValidationError(f"{path}: expected 1 or 2 channels, got {samples.shape[1]}")
        samples = samples.mean(axis=1)
    elif samples.ndim != 1:
        raise ValidationError(f"{path}: unsupported sample layout {samples.shape}")

    if not np.all(np.isfinite(samples)):
        raise ValidationError(f"{path}: non-finite samples")
    # Float files are expected to already sit in [-1, 1]; clamp tiny overshoot.
    samples = np.clip(samples, -1.0, 1.0)
    return AudioClip(samples=samples, sample_rate=int(rate))


def _bandpass_sos(sample_rate: int) -> np.ndarray:
    # Two 4th-order Butterworth sections (HP at 300 Hz, LP at 3400 Hz),
    # each realized as a cascade of biquads.
    hp = butter(4, BAND_LOW_HZ, btype="highpass", fs=sample_rate, output="sos")
    lp = butter(4, BAND_HIGH_HZ, btype="lowpass", fs=sample_rate, output="sos")
    return np.vstack([hp, lp])


def bandpass_telephone(clip: AudioClip) -> AudioClip:
    """Band-limit a clip to the 300-3400 Hz telephone band.

    Causal filtering; output has the same length and rate as the input.
    """
    if clip.sample_rate < TARGET_RATE:
        raise ValidationError(
            f"band-pass needs sample rate >= {TARGET_RATE} Hz, got {clip.sample_rate}"
        )
    sos = _bandpass_sos(clip.sample_rate)
    filtered = sosfilt(sos, clip.samples)
    return AudioClip(samples=filtered, sample_rate=clip.sample_rate)


def _resample_kernel(up: int, down: int, fs_up: float) -> np.ndarray:
    # Windowed-sinc low-pass at RESAMPLE_CUTOFF_HZ, operating at the
    # up-sampled rate; DC gain `up` compensates the zero stuffing.
    half = 16 * max(up, down)
    m = np.arange(-half, half + 1, dtype=np.float64)
    ideal = (2.0 * RESAMPLE_CUTOFF_HZ / fs_up) * np.sinc(2.0 * RESAMPLE_CUTOFF_HZ * m / fs_up)
    h = ideal * np.kaiser(2 * half + 1, RESAMPLE_KAISER_BETA)
    h *= up / h.sum()
    return h


def resample_8k(clip: AudioClip) -> AudioClip:
    """Resample a clip to 8 kHz with a polyphase windowed-sinc filter."""
    if clip.sample_rate < TARGET_RATE:
        raise ValidationError(
            f"cannot resample up to {TARGET_RATE} Hz from {clip.sample_rate} Hz"
        )
    if clip.sample_rate == TARGET_RATE:
        return clip

    g = math.gcd(TARGET_RATE, clip.sample_rate)
    up = TARGET_RATE // g
    down = clip.sample_rate // g
    fs_up = float(clip.sample_rate) * up

    h = _resample_kernel(up, down, fs_up)
    half = (len(h) - 1) // 2
    full = upfirdn(h, clip.samples, up=up, down=down)

    # Align to the filter's group delay and cut to the rounded length.
    start = -(-half // down)  # ceil(half / down)
    n_out = int(round(clip.samples.size * TARGET_RATE / clip.sample_rate))
    out = full[start:start + n_out]
    if out.size < n_out:
        out = np.pad(out, (0, n_out - out.size))
    return AudioClip(samples=out, sample_rate=TARGET_RATE)


def hz_to_mel(f):
    return 2595.0 * np.log10(1.0 + np.asarray(f, dtype=np.float64) / 700.0)


def mel_to_hz(m):
    return 700.0 * (10.0 ** (np.asarray(m, dtype=np.float64) / 2595.0) - 1.0)


def mel_filterbank(n_mels: int = N_MELS, n_fft: int = N_FFT,
                   sample_rate: int = TARGET_RATE, fmax: float = MEL_FMAX) -> np.ndarray:
    """Triangular mel filter matrix of shape (n_mels, n_fft//2 + 1).

    Filters are equally spaced on the mel scale from 0 Hz to fmax, with
    weights evaluated at the FFT bin center frequencies.
    """
    edges_hz = mel_to_hz(np.linspace(hz_to_mel(0.0), hz_to_mel(fmax), n_mels + 2))
    bin_hz = np.arange(n_fft // 2 + 1, dtype=np.float64) * sample_rate / n_fft

    fb = np.zeros((n_mels, bin_hz.size))
    for k in range(n_mels):
        lo, mid, hi = edges_hz[k], edges_hz[k + 1], edges_hz[k + 2]
        rising = (bin_hz - lo) / (mid - lo)
        falling = (hi - bin_hz) / (hi - mid)
        fb[k] = np.clip(np.minimum(rising, falling), 0.0, None)
    return fb


def frame_count(n_samples: int) -> int:
    """Number of 25 ms / 10 ms frames in an 8 kHz signal of n_samples."""
    if n_samples < FRAME_LEN:
        return 0
    return 1 + (n_samples - FRAME_LEN) // FRAME_SHIFT


def melfbank_features(clip: AudioClip) -> np.ndarray:
    """Compute T x 40 log-mel filterbank features from an 8 kHz clip.

    Each 25 ms frame (10 ms shift) is Hamming-windowed, its 256-point
    magnitude spectrum is pooled through 40 triangular mel filters, and
    the filter energies are floored at 1e-10 before the log.
    """
    if clip.sample_rate != TARGET_RATE:
        raise ValidationError(
            f"features expect {TARGET_RATE} Hz audio, got {clip.sample_rate} Hz"
        )
    n = clip.samples.size
    t = frame_count(n)
    if t < 1:
        raise ValidationError(f"clip too short for one frame: {n} < {FRAME_LEN} samples")

    idx = np.arange(t)[:, None] * FRAME_SHIFT + np.arange(FRAME_LEN)[None, :]
    frames = clip.samples[idx] * np.hamming(FRAME_LEN)
    mag = np.abs(np.fft.rfft(frames, n=N_FFT, axis=1))
    energies = mag @ mel_filterbank().T
    return np.log(np.maximum(energies, LOG_FLOOR))
