import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sosgate.audio import (Waveform, resample, pad_or_trim, log_mel,
                           featurize, mel_filter_bank, hertz_to_mel,
                           mel_to_hertz, read_wav, write_wav)
from sosgate.common import InvalidInput
from sosgate.config import FrontendConfig

TOY = FrontendConfig(clip_seconds=1.5)


def _sine(freq, rate, seconds, amplitude=0.5):
    t = np.arange(int(rate * seconds)) / rate
    return Waveform(amplitude * np.sin(2 * np.pi * freq * t), rate)


def test_zero_waveform_is_constant():
    mel = featurize(Waveform(np.zeros(24000), 16000), TOY)
    assert mel.shape == (150, 80)
    # floor 1e-10 -> log10 -10 -> (-10 + 4) / 4
    assert np.all(mel.frames == np.float32(-1.5))


def test_frame_count_follows_clip_length():
    assert TOY.n_frames == 150
    assert FrontendConfig().n_frames == 3000
    mel = log_mel(Waveform(np.ones(1601) * 0.1, 16000), TOY)
    assert mel.shape == (11, 80)


def test_resample_440_peak():
    w = resample(_sine(440.0, 44100, 1.0), 16000)
    assert w.sample_rate == 16000
    assert len(w) == 16000
    spectrum = np.abs(np.fft.rfft(w.samples))
    peak = np.argmax(spectrum) * 16000 / len(w)
    assert abs(peak - 440.0) <= 1.0


def test_resample_keeps_dc():
    w = resample(Waveform(np.full(44100, 0.5), 44100), 16000)
    assert np.allclose(w.samples, 0.5, atol=1e-2)


def test_resample_same_rate_is_identity():
    w = _sine(1000.0, 16000, 0.1)
    assert resample(w, 16000) is w


def test_resample_empty():
    with pytest.raises(InvalidInput):
        resample(Waveform(np.zeros(0), 44100), 16000)


def test_pad_or_trim():
    short = pad_or_trim(Waveform(np.ones(100), 16000), TOY)
    assert len(short) == 24000
    assert np.all(short.samples[:100] == 1.0)
    assert np.all(short.samples[100:] == 0.0)
    long = pad_or_trim(Waveform(np.arange(30000.0), 16000), TOY)
    assert len(long) == 24000
    assert long.samples[-1] == 23999.0


def test_pad_or_trim_rate_mismatch():
    with pytest.raises(InvalidInput):
        pad_or_trim(Waveform(np.ones(100), 8000), TOY)


def test_log_mel_rate_mismatch():
    with pytest.raises(InvalidInput):
        log_mel(Waveform(np.ones(24000), 8000), TOY)


def test_mel_scale_round_trip():
    freqs = np.array([0.0, 100.0, 1000.0, 8000.0])
    assert np.allclose(mel_to_hertz(hertz_to_mel(freqs)), freqs)
    assert hertz_to_mel(0.0) == 0.0
    assert np.all(np.diff(hertz_to_mel(np.linspace(0, 8000, 50))) > 0)


def test_filter_bank_shape_and_peaks():
    bank = mel_filter_bank(16000, 400, 80)
    assert bank.shape == (80, 201)
    assert np.all(bank >= 0.0)
    assert np.all(bank <= 1.0)
    # Filters widen with frequency.
    widths = (bank > 0).sum(axis=1)
    assert widths[-1] > widths[len(widths) // 2]
    assert (bank.max(axis=1) > 0).all()
    peaks = [np.argmax(row) for row in bank]
    assert peaks == sorted(peaks)


def test_filter_row_on_a_flat_spectrum():
    rate, size, bins = 16000, 400, 80
    bank = mel_filter_bank(rate, size, bins)
    edges = [700.0 * (10.0 ** (m / 2595.0) - 1.0) for m in
             np.linspace(0.0, 2595.0 * np.log10(1.0 + rate / 2.0 / 700.0),
                         bins + 2)]
    for m in (0, 17, 79):
        lower, center, upper = edges[m], edges[m + 1], edges[m + 2]
        total = 0.0
        for k in range(size // 2 + 1):
            f = k * rate / size
            if lower < f <= center:
                total += (f - lower) / (center - lower)
            elif center < f < upper:
                total += (upper - f) / (upper - center)
        flat = np.ones(size // 2 + 1)
        assert bank[m] @ flat == pytest.approx(total, rel=1e-12)
        assert total > 0


def test_tone_lands_in_the_right_filter():
    mel = featurize(_sine(1000.0, 16000, 1.5), TOY)
    centers = mel_to_hertz(np.linspace(0.0, hertz_to_mel(8000.0), 82))[1:-1]
    assert abs(centers[np.argmax(mel.frames[75])] - 1000.0) < 100.0


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2 ** 32 - 1),
       length=st.integers(1000, 30000),
       scale=st.floats(1e-4, 1.0))
def test_log_mel_dynamic_range(seed, length, scale):
    rng = np.random.default_rng(seed)
    w = Waveform(scale * rng.standard_normal(length), 16000)
    frames = featurize(w, TOY).frames
    assert np.all(np.isfinite(frames))
    assert frames.max() - frames.min() <= 2.0 + 1e-6


def test_featurize_is_deterministic():
    w = _sine(700.0, 22050, 1.0)
    assert np.array_equal(featurize(w, TOY).frames, featurize(w, TOY).frames)


def test_wav_round_trip_pcm16(tmp_path):
    path = str(tmp_path / 'tone.wav')
    w = _sine(300.0, 44100, 0.2)
    write_wav(path, w)
    back = read_wav(path)
    assert back.sample_rate == 44100
    assert np.allclose(back.samples, w.samples, atol=1.0 / 16000)


def test_wav_round_trip_float(tmp_path):
    path = str(tmp_path / 'tone.wav')
    w = _sine(300.0, 16000, 0.2)
    write_wav(path, w, pcm16=False)
    back = read_wav(path)
    assert np.allclose(back.samples, w.samples, atol=1e-7)


def test_read_stereo_is_averaged():
    from scipy.io import wavfile
    buffer = io.BytesIO()
    data = np.stack([np.full(100, 1000), np.full(100, 3000)],
                    axis=1).astype(np.int16)
    wavfile.write(buffer, 8000, data)
    buffer.seek(0)
    w = read_wav(buffer)
    assert np.allclose(w.samples, 2000 / 32768.0)


def test_read_malformed_wav(tmp_path):
    path = tmp_path / 'bad.wav'
    path.write_bytes(b'this is not a wav file at all')
    with pytest.raises(InvalidInput):
        read_wav(str(path))


def test_read_missing_wav(tmp_path):
    with pytest.raises(InvalidInput):
        read_wav(str(tmp_path / 'missing.wav'))
