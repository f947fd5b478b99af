"""
The fixtures module synthesizes a small labeled corpus that the whole
train, evaluate and detect loop can run on.

"Speech" is a tone sequence: every character of a transcript is played
as a short sine at a frequency of its own, over a bed of scene noise.
Noise clips are white noise shaped by a Butterworth filter per scene.
Everything is drawn from seeded generators, so a seed reproduces the
corpus byte for byte.
"""
import logging
import os
from dataclasses import dataclass

import numpy as np
from scipy import signal

from .audio import Waveform, write_wav
from .common import require
from .config import ALPHABET, NOISE_SCENES
from .manifest import ManifestEntry, write_manifest
from .resources import load_json_resource

logger = logging.getLogger(__name__)

# Speech clips are written as 16-bit PCM at CD rate, noise clips as
# float32 at the model rate, so both reader paths and the resampler
# get exercised.
SPEECH_RATE = 44100
NOISE_RATE = 16000

CLIP_SECONDS = 1.5
CHAR_SECONDS = 0.08
RAMP_SECONDS = 0.005
LOWEST_TONE = 300.0
HIGHEST_TONE = 4000.0
SPEECH_SNR_DB = 20.0

# (order, critical frequencies in Hz, filter type, amplitude modulation
# rate in Hz or None) per scene.
IN_DOMAIN_SCENES = {
    'hum': (4, 250.0, 'lowpass', None),
    'rumble': (4, (250.0, 1000.0), 'bandpass', None),
    'chatter': (4, (1000.0, 3000.0), 'bandpass', 4.0),
    'hiss': (4, 4000.0, 'highpass', None),
}

OUT_OF_DOMAIN_SCENES = {
    'hum': (2, 350.0, 'lowpass', None),
    'rumble': (2, (350.0, 1400.0), 'bandpass', None),
    'chatter': (2, (1300.0, 3600.0), 'bandpass', 6.0),
    'hiss': (2, 5000.0, 'highpass', None),
}

NOISE_GAIN = (0.05, 0.2)
OUT_OF_DOMAIN_GAIN = (0.2, 0.4)
SPEECH_AMPLITUDE = (0.3, 0.6)

PHRASES = 'data/phrases.json'


@dataclass(frozen=True)
class FixtureSizes:
    """
    How many clips of each kind to generate.
    """
    train_speech: int = 200
    train_noise: int = 200
    test_speech: int = 40
    test_noise: int = 40
    ood_noise: int = 40


@dataclass(frozen=True)
class Segment:
    """
    Where one character's tone sits in a synthesized clip.
    """
    char: str
    start: int
    end: int
    frequency: float


def tone_frequencies(alphabet=ALPHABET):
    """
    Map each character of an alphabet to a tone frequency.

    Frequencies are spaced geometrically from 300 Hz to 4 kHz in
    alphabet order.

    Returns: a dictionary from character to frequency in Hz
    """
    freqs = np.geomspace(LOWEST_TONE, HIGHEST_TONE, len(alphabet))
    return {c: float(f) for c, f in zip(alphabet, freqs)}


def scene_noise(scene, n_samples, sample_rate, rng, specs=None, gain=None):
    """
    Synthesize shaped noise for a scene.

    Arguments:
        scene: the scene name
        n_samples: the clip length in samples
        sample_rate: the sample rate in Hz
        rng: a numpy Generator
        specs: the scene table, IN_DOMAIN_SCENES by default
        gain: the RMS of the result, drawn from NOISE_GAIN by default

    Returns: a float64 array of n_samples samples
    """
    specs = IN_DOMAIN_SCENES if specs is None else specs
    require(scene in specs, 'unknown noise scene: %s' % (scene,))
    order, critical, btype, modulation = specs[scene]
    wn = np.array(critical) / (sample_rate / 2)
    sos = signal.butter(order, wn, btype=btype, output='sos')

    noise = signal.sosfilt(sos, rng.standard_normal(n_samples))
    if modulation is not None:
        t = np.arange(n_samples) / sample_rate
        phase = rng.uniform(0, 2 * np.pi)
        noise = noise * (1.0 + 0.8 * np.sin(2 * np.pi * modulation * t
                                            + phase))
    if gain is None:
        gain = rng.uniform(*NOISE_GAIN)
    rms = np.sqrt(np.mean(noise ** 2))
    return noise * (gain / rms) if rms > 0 else noise


def _ramp(n, sample_rate):
    k = min(int(RAMP_SECONDS * sample_rate), n // 2)
    envelope = np.ones(n)
    if k > 0:
        rise = 0.5 - 0.5 * np.cos(np.pi * np.arange(k) / k)
        envelope[:k] = rise
        envelope[n - k:] = rise[::-1]
    return envelope


def synthesize_speech(text, rng, sample_rate=SPEECH_RATE,
                      clip_seconds=CLIP_SECONDS, background=None,
                      snr_db=SPEECH_SNR_DB, alphabet=ALPHABET):
    """
    Synthesize a tone-encoded utterance.

    The utterance starts at a random offset; each character lasts
    CHAR_SECONDS.  When a background scene is given its noise is mixed
    in at snr_db below the tones.

    Arguments:
        text: the transcript, every character in the alphabet
        rng: a numpy Generator
        sample_rate: the sample rate in Hz
        clip_seconds: the clip length
        background: a noise scene name, or None for a clean clip
        snr_db: the tone-to-noise power ratio in dB
        alphabet: the characters with tones

    Returns: (Waveform, list of Segment)
    """
    tones = tone_frequencies(alphabet)
    unknown = set(text) - set(tones)
    require(not unknown, 'no tone for characters %r' % (sorted(unknown),))
    n_total = int(round(clip_seconds * sample_rate))
    n_char = int(round(CHAR_SECONDS * sample_rate))
    require(n_char * len(text) <= n_total,
            'text %r does not fit in %.2f s' % (text, clip_seconds))

    start = int(rng.integers(0, n_total - n_char * len(text) + 1))
    amplitude = rng.uniform(*SPEECH_AMPLITUDE)
    samples = np.zeros(n_total)
    segments = []
    t = np.arange(n_char) / sample_rate
    envelope = _ramp(n_char, sample_rate)
    for i, c in enumerate(text):
        lo = start + i * n_char
        phase = rng.uniform(0, 2 * np.pi)
        samples[lo:lo + n_char] = (amplitude * envelope
                                   * np.sin(2 * np.pi * tones[c] * t + phase))
        segments.append(Segment(c, lo, lo + n_char, tones[c]))

    if background is not None:
        voiced = samples[start:start + n_char * len(text)]
        tone_rms = np.sqrt(np.mean(voiced ** 2)) if len(voiced) else 0.0
        gain = tone_rms / (10 ** (snr_db / 20.0))
        samples = samples + scene_noise(background, n_total, sample_rate,
                                        rng, gain=gain)
    return Waveform(samples, sample_rate), segments


def synthesize_noise(scene, rng, sample_rate=NOISE_RATE,
                     clip_seconds=CLIP_SECONDS, specs=None, gain_range=None):
    n = int(round(clip_seconds * sample_rate))
    gain = rng.uniform(*(gain_range or NOISE_GAIN))
    return Waveform(scene_noise(scene, n, sample_rate, rng, specs, gain),
                    sample_rate)


def load_phrases():
    """
    Return the packaged phrase templates by call-for-help class.
    """
    return load_json_resource(PHRASES)


def _speech_entries(out_dir, split, count, rng, phrases, scenes,
                    clip_seconds):
    classes = sorted(phrases)
    entries = []
    for i in range(count):
        klass = classes[int(rng.integers(len(classes)))]
        text = phrases[klass][int(rng.integers(len(phrases[klass])))]
        background = scenes[int(rng.integers(len(scenes)))]
        w, _ = synthesize_speech(text, rng, clip_seconds=clip_seconds,
                                 background=background)
        audio = 'clips/%s/speech_%04d.wav' % (split, i)
        write_wav(os.path.join(out_dir, audio), w, pcm16=True)
        entries.append(ManifestEntry(audio, transcript=text, cfh_class=klass,
                                     split=split, base_dir=out_dir))
    return entries


def _noise_entries(out_dir, split, count, rng, scenes, clip_seconds,
                   specs=IN_DOMAIN_SCENES, gain_range=NOISE_GAIN,
                   domain='in-domain'):
    entries = []
    for i in range(count):
        scene = scenes[i % len(scenes)]
        w = synthesize_noise(scene, rng, clip_seconds=clip_seconds,
                             specs=specs, gain_range=gain_range)
        audio = 'clips/%s/noise_%04d.wav' % (split, i)
        write_wav(os.path.join(out_dir, audio), w, pcm16=False)
        entries.append(ManifestEntry(audio, noise_scene=scene, domain=domain,
                                     split=split, base_dir=out_dir))
    return entries


def make_fixtures(out_dir, seed, sizes=None, scenes=NOISE_SCENES,
                  clip_seconds=CLIP_SECONDS):
    """
    Generate the synthetic corpus and its manifests.

    Files written under out_dir:

        train.jsonl        speech and noise clips for training
        test.jsonl         held-out speech and noise clips, mixed
        noise_test.jsonl   the held-out noise clips alone
        noise_ood.jsonl    noise from shifted filters, domain
                           "out-of-domain"
        probe_saveme.wav   a held-out "save me" utterance
        probe_noise.wav    a held-out noise clip
        clips/...          the audio

    Arguments:
        out_dir: the output directory, created if needed
        seed: the integer seed
        sizes: a FixtureSizes, the defaults when None
        scenes: the noise scene names
        clip_seconds: the length of every clip

    Returns: a dictionary from manifest or probe name to its path
    """
    sizes = sizes or FixtureSizes()
    scenes = tuple(scenes)
    for scene in scenes:
        require(scene in IN_DOMAIN_SCENES, 'no synthesizer for scene %s'
                % (scene,))
    for split in ('train', 'test', 'ood'):
        os.makedirs(os.path.join(out_dir, 'clips', split), exist_ok=True)

    phrases = load_phrases()
    streams = [np.random.default_rng(s)
               for s in np.random.SeedSequence(seed).spawn(6)]

    train = (_speech_entries(out_dir, 'train', sizes.train_speech,
                             streams[0], phrases, scenes, clip_seconds)
             + _noise_entries(out_dir, 'train', sizes.train_noise,
                              streams[1], scenes, clip_seconds))
    test_speech = _speech_entries(out_dir, 'test', sizes.test_speech,
                                  streams[2], phrases, scenes, clip_seconds)
    test_noise = _noise_entries(out_dir, 'test', sizes.test_noise,
                                streams[3], scenes, clip_seconds)
    ood = _noise_entries(out_dir, 'ood', sizes.ood_noise, streams[4],
                         scenes, clip_seconds, OUT_OF_DOMAIN_SCENES,
                         OUT_OF_DOMAIN_GAIN, 'out-of-domain')

    # Interleave the test split so speech and noise alternate.
    mixed = []
    for i in range(max(len(test_speech), len(test_noise))):
        mixed += test_speech[i:i + 1] + test_noise[i:i + 1]

    paths = {name: os.path.join(out_dir, name + '.jsonl')
             for name in ('train', 'test', 'noise_test', 'noise_ood')}
    write_manifest(paths['train'], train)
    write_manifest(paths['test'], mixed)
    write_manifest(paths['noise_test'], test_noise)
    write_manifest(paths['noise_ood'], ood)

    probe_rng = streams[5]
    w, _ = synthesize_speech('save me', probe_rng, clip_seconds=clip_seconds,
                             background=scenes[0])
    paths['probe_saveme'] = os.path.join(out_dir, 'probe_saveme.wav')
    write_wav(paths['probe_saveme'], w, pcm16=True)
    paths['probe_noise'] = os.path.join(out_dir, 'probe_noise.wav')
    write_wav(paths['probe_noise'],
              synthesize_noise(scenes[-1], probe_rng,
                               clip_seconds=clip_seconds), pcm16=False)

    logger.info('wrote %d train, %d test and %d out-of-domain clips to %s',
                len(train), len(mixed), len(ood), out_dir)
    return paths
