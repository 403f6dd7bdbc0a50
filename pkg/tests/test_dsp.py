"""Front-end audio pipeline tests: loading, filtering, resampling, features."""

import numpy as np
import pytest
from scipy.io import wavfile

from speechscreen.dsp import (
    FRAME_LEN,
    FRAME_SHIFT,
    LOG_FLOOR,
    AudioClip,
    bandpass_telephone,
    frame_count,
    load_audio,
    melfbank_features,
    mel_filterbank,
    resample_8k,
)
from speechscreen.errors import ValidationError


def tone(freq, rate, seconds=1.0):
    t = np.arange(int(rate * seconds)) / rate
    return np.sin(2.0 * np.pi * freq * t)


def fft_gain_db(x_in, x_out, rate, freq):
    # steady-state slice sized so freq lands exactly on a bin
    n = rate // 2
    sl = slice(len(x_in) - n, len(x_in))
    k = round(freq * n / rate)
    assert abs(k * rate / n - freq) < 1e-9
    a_in = abs(np.fft.rfft(x_in[sl])[k])
    a_out = abs(np.fft.rfft(x_out[sl])[k])
    return 20.0 * np.log10(a_out / a_in)


# ---------------------------------------------------------------- load_audio

def test_load_stereo_identical_channels(tmp_path):
    path = tmp_path / "s.wav"
    data = np.full((1000, 2), 16384, dtype=np.int16)
    wavfile.write(path, 44100, data)
    clip = load_audio(path)
    assert clip.sample_rate == 44100
    assert np.allclose(clip.samples, 0.5)


def test_load_sample_count(tmp_path):
    path = tmp_path / "c.wav"
    wavfile.write(path, 44100, np.zeros(44100, dtype=np.int16))
    clip = load_audio(path)
    assert clip.samples.size == 44100


def test_load_int16_scaling(tmp_path):
    path = tmp_path / "v.wav"
    wavfile.write(path, 8000, np.array([16384, -16384, 0], dtype=np.int16))
    clip = load_audio(path)
    assert abs(clip.samples[0] - 0.5) <= 1.0 / 32768
    assert abs(clip.samples[1] + 0.5) <= 1.0 / 32768


def test_load_uint8_and_float32(tmp_path):
    p8 = tmp_path / "u8.wav"
    wavfile.write(p8, 8000, np.array([128 + 64, 128], dtype=np.uint8))
    assert np.allclose(load_audio(p8).samples, [0.5, 0.0])
    pf = tmp_path / "f.wav"
    wavfile.write(pf, 8000, np.array([0.25, -0.75], dtype=np.float32))
    assert np.allclose(load_audio(pf).samples, [0.25, -0.75])


def test_load_zero_length_rejected(tmp_path):
    path = tmp_path / "z.wav"
    wavfile.write(path, 8000, np.zeros(0, dtype=np.int16))
    with pytest.raises(ValidationError, match="zero-length"):
        load_audio(path)


def test_load_unsupported_encoding(tmp_path):
    path = tmp_path / "i32.wav"
    wavfile.write(path, 8000, np.zeros(10, dtype=np.int32))
    with pytest.raises(ValidationError, match="unsupported"):
        load_audio(path)


def test_load_missing_file(tmp_path):
    with pytest.raises(FileNotFoundError):
        load_audio(tmp_path / "nope.wav")


# --------------------------------------------------------- bandpass_telephone

def test_bandpass_kills_dc():
    clip = AudioClip(np.ones(44100), 44100)
    out = bandpass_telephone(clip).samples
    assert out.size == 44100
    steady = out[22050:]
    assert np.sqrt(np.mean(steady**2)) < 1e-3


def test_bandpass_passes_1khz_within_1db():
    x = tone(1000, 44100)
    y = bandpass_telephone(AudioClip(x, 44100)).samples
    assert abs(fft_gain_db(x, y, 44100, 1000)) <= 1.0


def test_bandpass_attenuates_50hz_by_30db():
    x = tone(50, 44100)
    y = bandpass_telephone(AudioClip(x, 44100)).samples
    assert fft_gain_db(x, y, 44100, 50) <= -30.0


def test_bandpass_is_linear():
    rng = np.random.default_rng(0)
    x = rng.standard_normal(4000)
    y = rng.standard_normal(4000)
    a, b = 0.7, -1.3
    lhs = bandpass_telephone(AudioClip(a * x + b * y, 8000)).samples
    rhs = (a * bandpass_telephone(AudioClip(x, 8000)).samples
           + b * bandpass_telephone(AudioClip(y, 8000)).samples)
    assert np.max(np.abs(lhs - rhs)) < 1e-9


def test_bandpass_rejects_low_rate():
    with pytest.raises(ValidationError):
        bandpass_telephone(AudioClip(np.zeros(100), 4000))


# ------------------------------------------------------------------ resample

def test_resample_identity_at_8k():
    x = np.sin(np.arange(800) * 0.1)
    clip = AudioClip(x, 8000)
    out = resample_8k(clip)
    assert out.sample_rate == 8000
    assert np.array_equal(out.samples, clip.samples)


def test_resample_length_ratio():
    out = resample_8k(AudioClip(np.zeros(44100), 44100))
    assert abs(out.samples.size - 8000) <= 1


def test_resample_preserves_1khz_tone():
    x = tone(1000, 44100, seconds=1.0)
    out = resample_8k(AudioClip(x, 44100))
    assert out.sample_rate == 8000
    # zero-crossing count measures frequency; skip the filter edges
    steady = out.samples[400:-400]
    crossings = np.sum(np.diff(np.signbit(steady)))
    freq = crossings / 2.0 * 8000 / steady.size
    assert abs(freq - 1000.0) / 1000.0 < 0.01


@pytest.mark.parametrize("freq,rate", [(500, 16000), (2000, 44100), (3300, 22050)])
def test_resample_inband_tone_bin(freq, rate):
    x = tone(freq, rate, seconds=1.0)
    out = resample_8k(AudioClip(x, rate)).samples[500:]
    spec = np.abs(np.fft.rfft(out))
    peak_hz = np.argmax(spec) * 8000 / out.size
    bin_hz = 8000 / out.size
    assert abs(peak_hz - freq) <= bin_hz + 1e-9


def test_resample_rejects_low_rate():
    with pytest.raises(ValidationError):
        resample_8k(AudioClip(np.zeros(100), 6000))


# ------------------------------------------------------------------ features

def test_melfbank_silent_clip_hits_log_floor():
    feats = melfbank_features(AudioClip(np.zeros(8000), 8000))
    assert feats.shape == (98, 40)
    assert np.all(feats == np.log(LOG_FLOOR))


def test_melfbank_shape_one_second():
    rng = np.random.default_rng(1)
    feats = melfbank_features(AudioClip(rng.standard_normal(8000) * 0.1, 8000))
    assert feats.shape == (98, 40)
    assert np.all(np.isfinite(feats))


def test_melfbank_matches_independent_reference():
    # second implementation straight from the textbook definition
    def mel(f):
        return 2595.0 * np.log10(1.0 + f / 700.0)

    def imel(m):
        return 700.0 * (10.0 ** (m / 2595.0) - 1.0)

    def reference(samples):
        t = 1 + (samples.size - 200) // 80
        edges = imel(np.linspace(mel(0.0), mel(4000.0), 42))
        freqs = np.arange(129) * 8000.0 / 256.0
        out = np.zeros((t, 40))
        for fi in range(t):
            frame = samples[fi * 80:fi * 80 + 200] * np.hamming(200)
            mag = np.abs(np.fft.rfft(frame, n=256))
            for m in range(40):
                lo, cen, hi = edges[m], edges[m + 1], edges[m + 2]
                w = np.zeros(129)
                rising = (freqs >= lo) & (freqs <= cen)
                falling = (freqs > cen) & (freqs <= hi)
                w[rising] = (freqs[rising] - lo) / (cen - lo)
                w[falling] = (hi - freqs[falling]) / (hi - cen)
                out[fi, m] = np.log(max(np.sum(w * mag), 1e-10))
        return out

    rng = np.random.default_rng(7)
    # impulse train at frame centers plus a noise floor
    samples = rng.standard_normal(2000) * 1e-3
    samples[100::80] = 1.0
    got = melfbank_features(AudioClip(samples, 8000))
    want = reference(samples)
    assert got.shape == want.shape
    rel = np.abs(got - want) / np.maximum(np.abs(want), 1e-12)
    assert np.max(rel) < 1e-6


def test_melfbank_monotone_in_amplitude():
    rng = np.random.default_rng(2)
    x = rng.standard_normal(4000) * 0.05
    lo = melfbank_features(AudioClip(x, 8000))
    hi = melfbank_features(AudioClip(2.0 * x, 8000))
    above = lo > np.log(LOG_FLOOR)
    assert np.all(hi[above] > lo[above])


def test_melfbank_rejects_wrong_rate_and_short_clip():
    with pytest.raises(ValidationError):
        melfbank_features(AudioClip(np.zeros(16000), 16000))
    with pytest.raises(ValidationError, match="too short"):
        melfbank_features(AudioClip(np.zeros(199), 8000))


def test_frame_count_formula_random_lengths():
    rng = np.random.default_rng(3)
    for n in rng.integers(FRAME_LEN, 50000, size=100):
        n = int(n)
        assert frame_count(n) == 1 + (n - FRAME_LEN) // FRAME_SHIFT


def test_filterbank_rows_cover_band():
    fb = mel_filterbank()
    assert fb.shape == (40, 129)
    assert np.all(fb >= 0.0)
    assert np.all(fb.sum(axis=1) > 0.0)
