"""
The config module provides tweakable constants and the configuration
classes built from them.
"""
import json
import math
from dataclasses import dataclass, field, asdict, fields, replace

from .common import InvalidInput, require

# Configurable constants
#
# You can tune the following to alter the default behaviour.  They are
# the defaults of the "paper" preset; the "toy" preset overrides a few
# of them so that a desk-scale run finishes in minutes.


# The sample rate (in Hz) every waveform is resampled to.
TARGET_RATE = 16000


# The STFT window length and hop (in samples).
#
# 400/160 at 16 kHz gives 25 ms windows every 10 ms, which matches
# the Whisper preprocessing so real encoder weights could be dropped in.
FFT_SIZE = 400
HOP = 160


# The number of mel filters.
MEL_BINS = 80


# The tapering window applied to every STFT frame.
WINDOW = 'hann'


# Every utterance is padded or trimmed to this many seconds.
CLIP_SECONDS = 30.0


# The width of the encoder and decoder.
#
# 384 mirrors Whisper-tiny, where the noise head costs one 384-wide
# projection.
D_MODEL = 384


# Transformer shape.
N_HEADS = 6
N_ENC_LAYERS = 4
N_DEC_LAYERS = 4


# The longest token sequence the decoder produces, specials included.
MAX_TARGET_LEN = 32


# Characters the tokenizer knows besides its four specials.
ALPHABET = "abcdefghijklmnopqrstuvwxyz '"


# Noise scene labels.  The noise head predicts one more class than
# there are scenes: index 0 is speech.
NOISE_SCENES = ('hum', 'rumble', 'chatter', 'hiss')


# Training recipe.
BASE_LR = 1e-4
BATCH_SIZE = 32
EPOCHS = 10
ADAM_BETAS = (0.9, 0.999)
ADAM_EPS = 1e-8
WEIGHT_DECAY = 0.01


# Coefficient of the exponential moving average over all learnable
# parameters.  0.5 keeps half of the shadow and half of the live value.
EMA_COEFFICIENT = 0.5


# The speech posterior at or above which the gate lets an utterance
# through to the decoder.
GATE_THRESHOLD = 0.5


# Non-configurable constants
#
# These follow from the format of the model's inputs and outputs.

# Reserved token ids.
SOT, EOT, PAD, UNK = 0, 1, 2, 3
N_SPECIALS = 4

# The noise head index that means "speech".
SPEECH_CLASS = 0

# Call-for-help classes in matching order, and the class spaces the
# evaluation reports on.
EMERGENCY_CLASSES = ('saveme', 'helpme')
CFH_CLASSES_3 = ('saveme', 'helpme', 'others')
CFH_CLASSES_4 = ('saveme', 'helpme', 'others', 'noise')


@dataclass(frozen=True)
class FrontendConfig:
    """
    Settings of the log-mel frontend.

    Arguments:
        target_rate: the sample rate (Hz) the model expects
        fft_size: the STFT window length in samples
        hop: the STFT hop in samples
        mel_bins: the number of mel filters
        window: the window name understood by scipy.signal.get_window
        clip_seconds: the fixed utterance length in seconds
    """
    target_rate: int = TARGET_RATE
    fft_size: int = FFT_SIZE
    hop: int = HOP
    mel_bins: int = MEL_BINS
    window: str = WINDOW
    clip_seconds: float = CLIP_SECONDS

    def __post_init__(self):
        require(self.target_rate > 0, 'target_rate must be positive')
        require(self.fft_size > 0, 'fft_size must be positive')
        require(0 < self.hop <= self.fft_size, 'hop must be in (0, fft_size]')
        require(self.mel_bins >= 1, 'mel_bins must be >= 1')
        require(self.clip_seconds > 0, 'clip_seconds must be positive')

    @property
    def clip_samples(self):
        return int(round(self.clip_seconds * self.target_rate))

    @property
    def n_frames(self):
        return int(math.ceil(self.clip_samples / self.hop))

    @property
    def frame_hop_seconds(self):
        return self.hop / self.target_rate


@dataclass(frozen=True)
class ModelConfig:
    """
    Shape of the encoder-decoder and its noise head.

    The vocabulary and the number of noise classes follow from the
    alphabet and the scene list, so a checkpoint carries everything
    needed to rebuild its tokenizer and scene names.
    """
    d_model: int = D_MODEL
    n_heads: int = N_HEADS
    n_enc_layers: int = N_ENC_LAYERS
    n_dec_layers: int = N_DEC_LAYERS
    max_target_len: int = MAX_TARGET_LEN
    n_mels: int = MEL_BINS
    n_frames: int = 3000
    alphabet: str = ALPHABET
    noise_scenes: tuple = NOISE_SCENES
    mlp_ratio: int = 4

    def __post_init__(self):
        object.__setattr__(self, 'noise_scenes', tuple(self.noise_scenes))
        require(self.d_model > 0 and self.n_heads > 0,
                'd_model and n_heads must be positive')
        require(self.d_model % self.n_heads == 0,
                'd_model must be divisible by n_heads')
        require(self.d_model % 2 == 0, 'd_model must be even')
        require(self.n_enc_layers >= 1 and self.n_dec_layers >= 1,
                'layer counts must be >= 1')
        require(self.max_target_len >= 2, 'max_target_len must be >= 2')
        require(self.n_frames >= 1 and self.n_mels >= 1,
                'input shape must be positive')
        require(len(set(self.alphabet)) == len(self.alphabet),
                'alphabet has repeated characters')
        require(self.n_noise_classes >= 1, 'at least one noise scene needed')
        require(len(set(self.noise_scenes)) == len(self.noise_scenes),
                'noise scenes must be unique')

    @property
    def vocab_size(self):
        return N_SPECIALS + len(self.alphabet)

    @property
    def n_noise_classes(self):
        return len(self.noise_scenes)

    @property
    def n_encoder_frames(self):
        # The stride-2 convolution halves the frame count, rounding up.
        return (self.n_frames + 1) // 2


@dataclass(frozen=True)
class TrainConfig:
    """
    The training recipe: AdamW with a cosine schedule plus an EMA shadow.

    noise_weight scales l_noise in the optimized loss; 1.0 is the
    multitask objective and 0.0 is the single-task ablation.
    noise_fraction, when set, resamples noise items each epoch so they
    make up that fraction of the merged manifest.
    """
    base_lr: float = BASE_LR
    batch_size: int = BATCH_SIZE
    epochs: int = EPOCHS
    betas: tuple = ADAM_BETAS
    adam_eps: float = ADAM_EPS
    weight_decay: float = WEIGHT_DECAY
    ema_coefficient: float = EMA_COEFFICIENT
    noise_weight: float = 1.0
    noise_fraction: float = None
    max_steps: int = None
    eval_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, 'betas', tuple(self.betas))
        require(self.base_lr >= 0, 'base_lr must be >= 0')
        require(self.batch_size >= 1, 'batch_size must be >= 1')
        require(self.epochs >= 1, 'epochs must be >= 1')
        require(len(self.betas) == 2
                and all(0 <= b < 1 for b in self.betas),
                'betas must be two numbers in [0, 1)')
        require(self.adam_eps > 0, 'adam_eps must be positive')
        require(self.weight_decay >= 0, 'weight_decay must be >= 0')
        require(0 <= self.ema_coefficient <= 1,
                'ema_coefficient must be in [0, 1]')
        require(self.noise_weight >= 0, 'noise_weight must be >= 0')
        require(self.noise_fraction is None
                or 0 < self.noise_fraction < 1,
                'noise_fraction must be in (0, 1)')
        require(self.max_steps is None or self.max_steps >= 1,
                'max_steps must be >= 1')
        require(self.eval_every >= 1, 'eval_every must be >= 1')


@dataclass(frozen=True)
class RunConfig:
    """
    Everything a command needs: the three configs plus run plumbing.

    Arguments:
        preset: the preset the config was resolved from
        frontend: a FrontendConfig
        model: a ModelConfig
        train: a TrainConfig
        tau: the gate threshold
        lexicon: a lexicon JSON path, or None for the packaged lexicon
        train_manifest: the training manifest path
        test_manifest: the call-for-help test manifest path
        noise_manifests: noise-scene manifest paths to report on
        seed: the random seed
        out_dir: the directory results are written to
    """
    preset: str = 'paper'
    frontend: FrontendConfig = field(default_factory=FrontendConfig)
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    tau: float = GATE_THRESHOLD
    lexicon: str = None
    train_manifest: str = None
    test_manifest: str = None
    noise_manifests: tuple = ()
    seed: int = None
    out_dir: str = 'runs'

    def __post_init__(self):
        object.__setattr__(self, 'noise_manifests',
                           tuple(self.noise_manifests))
        require(0 <= self.tau <= 1, 'tau must be in [0, 1]')
        require(self.model.n_mels == self.frontend.mel_bins,
                'model n_mels must equal frontend mel_bins')
        require(self.model.n_frames == self.frontend.n_frames,
                'model n_frames must equal the frontend frame count')

    def to_dict(self):
        return asdict(self)


def _paper():
    frontend = FrontendConfig()
    return RunConfig(preset='paper', frontend=frontend,
                     model=ModelConfig(n_frames=frontend.n_frames))


def _toy():
    frontend = FrontendConfig(clip_seconds=1.5)
    model = ModelConfig(d_model=64, n_heads=4,
                        n_enc_layers=2, n_dec_layers=2,
                        max_target_len=24, n_frames=frontend.n_frames)
    train = TrainConfig(base_lr=1e-3, epochs=120, max_steps=2000)
    return RunConfig(preset='toy', frontend=frontend, model=model,
                     train=train)


PRESETS = {
    'paper': _paper,
    'toy': _toy,
}


def preset(name):
    """
    Return the complete RunConfig of a named preset.

    Arguments:
        name: 'toy' or 'paper'

    Returns: a RunConfig
    """
    if name not in PRESETS:
        raise InvalidInput('unknown preset: %s' % (name,))
    return PRESETS[name]()


def _merge(obj, overrides, what):
    known = {f.name for f in fields(obj)}
    unknown = set(overrides) - known
    if unknown:
        raise InvalidInput('unknown %s keys: %s'
                           % (what, ', '.join(sorted(unknown))))
    return replace(obj, **overrides)


def apply_overrides(cfg, overrides):
    """
    Return a RunConfig with a nested dictionary of overrides applied.

    Nested sections 'frontend', 'model' and 'train' override keys of
    the matching config; every other key overrides a RunConfig field.
    The model's input shape is kept in step with the frontend.

    Arguments:
        cfg: the RunConfig to start from
        overrides: a dictionary, e.g., {'train': {'epochs': 3}, 'tau': 0.7}

    Returns: a new RunConfig
    """
    overrides = dict(overrides)
    try:
        frontend = _merge(cfg.frontend, overrides.pop('frontend', {}),
                          'frontend')
        model_overrides = dict(overrides.pop('model', {}))
        model_overrides.setdefault('n_mels', frontend.mel_bins)
        model_overrides.setdefault('n_frames', frontend.n_frames)
        model = _merge(cfg.model, model_overrides, 'model')
        train = _merge(cfg.train, overrides.pop('train', {}), 'train')
        return _merge(cfg, dict(overrides, frontend=frontend, model=model,
                                train=train), 'config')
    except TypeError as e:
        raise InvalidInput('bad config value: %s' % (e,))


def load_run_config(preset_name='toy', path=None, overrides=None):
    """
    Resolve a RunConfig from a preset, a JSON document and flag values.

    Later sources win: the JSON document overrides the preset and the
    flag overrides override the JSON document.  A 'preset' key in the
    JSON document selects the starting preset when none was given.

    Arguments:
        preset_name: the preset to start from, or None
        path: a JSON config file path, or None
        overrides: a nested dictionary of flag values, or None

    Returns: a RunConfig
    """
    document = {}
    if path is not None:
        try:
            with open(path) as f:
                document = json.load(f)
        except (OSError, ValueError) as e:
            raise InvalidInput('cannot read config %s: %s' % (path, e))
        if not isinstance(document, dict):
            raise InvalidInput('config %s is not a JSON object' % (path,))

    name = preset_name or document.pop('preset', None) or 'toy'
    document.pop('preset', None)
    cfg = apply_overrides(preset(name), document)
    if overrides:
        cfg = apply_overrides(cfg, overrides)
    return cfg
