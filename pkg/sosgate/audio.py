"""
The audio module turns raw waveforms into fixed-shape log-mel
spectrograms.

Every function here is a pure function of its inputs.
"""
import io
import math
import sys
from dataclasses import dataclass

import numpy as np
from scipy import signal
from scipy.io import wavfile

from .common import InvalidInput, require
from .config import FrontendConfig

# Log-mel normalization: floor before the log, dynamic range kept below
# the loudest entry, and the affine map applied last.
LOG_FLOOR = 1e-10
DYNAMIC_RANGE = 8.0
LOG_OFFSET = 4.0
LOG_SCALE = 4.0


@dataclass(frozen=True)
class Waveform:
    """
    Mono audio samples at a sample rate.

    Arguments:
        samples: a 1-D float array, nominally within [-1, 1]
        sample_rate: samples per second
    """
    samples: np.ndarray
    sample_rate: int

    def __post_init__(self):
        samples = np.asarray(self.samples, dtype=np.float64)
        require(samples.ndim == 1, 'waveform samples must be 1-D')
        require(self.sample_rate > 0, 'sample_rate must be positive')
        object.__setattr__(self, 'samples', samples)

    def __len__(self):
        return len(self.samples)

    @property
    def duration(self):
        return len(self.samples) / self.sample_rate


@dataclass(frozen=True)
class MelSpectrogram:
    """
    A T-by-B matrix of normalized log-mel energies.

    Arguments:
        frames: a float32 array of shape (T, B)
        frame_hop_seconds: seconds between consecutive frames
    """
    frames: np.ndarray
    frame_hop_seconds: float

    @property
    def shape(self):
        return self.frames.shape


def _require_samples(w):
    require(len(w) > 0, 'waveform is empty')


def resample(w, target_rate):
    """
    Resample a waveform with band-limited polyphase interpolation.

    The rate ratio is reduced to lowest terms and the signal is
    filtered with scipy's Kaiser-windowed sinc.  The ends are padded
    along a fitted line so a constant signal stays constant.

    Arguments:
        w: a non-empty Waveform
        target_rate: the new sample rate in Hz

    Returns: a Waveform at target_rate
    """
    _require_samples(w)
    require(target_rate > 0, 'target_rate must be positive')

    if target_rate == w.sample_rate:
        return w

    g = math.gcd(int(target_rate), int(w.sample_rate))
    up = int(target_rate) // g
    down = int(w.sample_rate) // g
    out = signal.resample_poly(w.samples, up, down, padtype='line')
    return Waveform(out, int(target_rate))


def pad_or_trim(w, cfg):
    """
    Zero-pad or truncate a waveform at its end to the clip length.

    Arguments:
        w: a Waveform at cfg.target_rate
        cfg: a FrontendConfig

    Returns: a Waveform of exactly cfg.clip_samples samples
    """
    require(w.sample_rate == cfg.target_rate,
            'sample rate %d does not match the frontend rate %d'
            % (w.sample_rate, cfg.target_rate))
    n = cfg.clip_samples
    samples = w.samples[:n]
    if len(samples) < n:
        samples = np.pad(samples, (0, n - len(samples)))
    return Waveform(samples, w.sample_rate)


def hertz_to_mel(freq):
    """
    Convert frequencies in Hz to the HTK mel scale.
    """
    return 2595.0 * np.log10(1.0 + np.asarray(freq, dtype=np.float64) / 700.0)


def mel_to_hertz(mels):
    """
    Convert HTK mels back to Hz.
    """
    return 700.0 * (10.0 ** (np.asarray(mels, dtype=np.float64) / 2595.0)
                    - 1.0)


def mel_filter_bank(sample_rate, fft_size, mel_bins,
                    min_frequency=0.0, max_frequency=None):
    """
    Build a bank of triangular filters spaced evenly on the HTK mel scale.

    Filter m rises linearly from center m-1 to center m and falls to
    center m+1, with mel_bins + 2 centers spread evenly in mels between
    min_frequency and max_frequency.

    Arguments:
        sample_rate: the sample rate in Hz
        fft_size: the FFT length; the bank covers fft_size // 2 + 1 bins
        mel_bins: the number of filters
        min_frequency: the lowest edge in Hz
        max_frequency: the highest edge in Hz, Nyquist by default

    Returns: an array of shape (mel_bins, fft_size // 2 + 1)
    """
    if max_frequency is None:
        max_frequency = sample_rate / 2.0

    fft_freqs = np.fft.rfftfreq(fft_size, d=1.0 / sample_rate)
    mels = np.linspace(hertz_to_mel(min_frequency),
                       hertz_to_mel(max_frequency), mel_bins + 2)
    edges = mel_to_hertz(mels)

    lower = edges[:-2, None]
    center = edges[1:-1, None]
    upper = edges[2:, None]
    rising = (fft_freqs[None, :] - lower) / (center - lower)
    falling = (upper - fft_freqs[None, :]) / (upper - center)
    return np.maximum(0.0, np.minimum(rising, falling))


def _power_spectrogram(samples, cfg):
    window = signal.get_window(cfg.window, cfg.fft_size, fftbins=True)
    half = cfg.fft_size // 2
    padded = np.pad(samples, (half, half), mode='reflect')
    if len(padded) < cfg.fft_size:
        padded = np.pad(padded, (0, cfg.fft_size - len(padded)))
    frames = np.lib.stride_tricks.sliding_window_view(
        padded, cfg.fft_size)[::cfg.hop]
    n_frames = int(math.ceil(len(samples) / cfg.hop))
    frames = frames[:n_frames]
    spectrum = np.fft.rfft(frames * window, axis=-1)
    return np.abs(spectrum) ** 2


def log_mel(w, cfg):
    """
    Compute the normalized log-mel spectrogram of a waveform.

    The chain is: windowed STFT power, mel filterbank, floor at 1e-10,
    log10, clamp to (max - 8), then (x + 4) / 4.

    Arguments:
        w: a non-empty Waveform at cfg.target_rate
        cfg: a FrontendConfig

    Returns: a MelSpectrogram of shape (ceil(len(w) / hop), mel_bins)
    """
    _require_samples(w)
    require(w.sample_rate == cfg.target_rate,
            'sample rate %d does not match the frontend rate %d; '
            'resample first' % (w.sample_rate, cfg.target_rate))

    power = _power_spectrogram(w.samples, cfg)
    filters = mel_filter_bank(cfg.target_rate, cfg.fft_size, cfg.mel_bins)
    mel = power @ filters.T

    log_spec = np.log10(np.maximum(mel, LOG_FLOOR))
    log_spec = np.maximum(log_spec, log_spec.max() - DYNAMIC_RANGE)
    log_spec = (log_spec + LOG_OFFSET) / LOG_SCALE
    return MelSpectrogram(log_spec.astype(np.float32),
                          cfg.frame_hop_seconds)


def featurize(w, cfg):
    """
    Run the whole frontend: resample, pad or trim, then log-mel.

    Arguments:
        w: a Waveform at any rate
        cfg: a FrontendConfig

    Returns: a MelSpectrogram of shape (cfg.n_frames, cfg.mel_bins)
    """
    return log_mel(pad_or_trim(resample(w, cfg.target_rate), cfg), cfg)


def _to_float(data):
    if data.dtype == np.int16:
        return data.astype(np.float64) / 32768.0
    if data.dtype == np.int32:
        return data.astype(np.float64) / 2147483648.0
    if data.dtype == np.uint8:
        return (data.astype(np.float64) - 128.0) / 128.0
    if data.dtype in (np.float32, np.float64):
        return data.astype(np.float64)
    raise InvalidInput('unsupported WAV sample type: %s' % (data.dtype,))


def read_wav(path):
    """
    Read a WAV file as a mono Waveform.

    PCM 16-bit and 32-bit float files are supported (8-bit and 32-bit
    integer PCM too).  Multi-channel audio is averaged to mono.

    Arguments:
        path: a file path, a binary file object, or '-' for stdin

    Returns: a Waveform
    """
    source = path
    if path == '-':
        source = io.BytesIO(sys.stdin.buffer.read())
    try:
        rate, data = wavfile.read(source)
    except (OSError, ValueError, EOFError) as e:
        raise InvalidInput('cannot read WAV %s: %s' % (path, e))

    samples = _to_float(data)
    if samples.ndim == 2:
        samples = samples.mean(axis=1)
    if len(samples) == 0:
        raise InvalidInput('WAV %s has no samples' % (path,))
    return Waveform(samples, int(rate))


def write_wav(path, w, pcm16=True):
    """
    Write a Waveform to a WAV file.

    Arguments:
        path: the destination path or binary file object
        w: the Waveform
        pcm16: write 16-bit PCM when True, 32-bit float otherwise
    """
    clipped = np.clip(w.samples, -1.0, 1.0)
    if pcm16:
        data = np.round(clipped * 32767.0).astype('<i2')
    else:
        data = clipped.astype('<f4')
    wavfile.write(path, int(w.sample_rate), data)
