"""
The manifest module reads and writes JSON Lines dataset manifests.

Each line is one object:

    {"audio": "clips/0001.wav", "transcript": "save me",
     "cfh_class": "saveme", "noise_scene": null}

Exactly one of transcript and noise_scene is non-null.  cfh_class is
one of saveme, helpme, others, or null.  Two optional keys are
understood as well: "domain" tags noise-scene reports (default
"in-domain") and "split" names the split an entry was generated for.
Relative audio paths are relative to the manifest's directory.
"""
import json
import os
from dataclasses import dataclass

from .common import InvalidInput
from .config import CFH_CLASSES_3

DEFAULT_DOMAIN = 'in-domain'


@dataclass(frozen=True)
class ManifestEntry:
    """
    One manifest line.

    Arguments:
        audio: the audio path, absolute or relative to base_dir
        transcript: the transcript of a speech item, else None
        cfh_class: saveme, helpme, others or None
        noise_scene: the scene name of a noise item, else None
        domain: the domain tag of the entry
        split: the split name, if any
        base_dir: the directory relative audio paths start from
    """
    audio: str
    transcript: str = None
    cfh_class: str = None
    noise_scene: str = None
    domain: str = DEFAULT_DOMAIN
    split: str = None
    base_dir: str = ''

    @property
    def path(self):
        return os.path.join(self.base_dir, self.audio)

    @property
    def is_noise(self):
        return self.noise_scene is not None

    def to_json(self):
        record = {'audio': self.audio, 'transcript': self.transcript,
                  'cfh_class': self.cfh_class,
                  'noise_scene': self.noise_scene}
        if self.domain != DEFAULT_DOMAIN:
            record['domain'] = self.domain
        if self.split is not None:
            record['split'] = self.split
        return json.dumps(record, sort_keys=True)


def validate_record(record):
    """
    Check one decoded manifest object against the schema.

    Arguments:
        record: a dictionary

    Returns: a list of problems, empty when the record is valid
    """
    problems = []
    if not isinstance(record, dict):
        return ['entry is not a JSON object']
    audio = record.get('audio')
    if not isinstance(audio, str) or not audio:
        problems.append('"audio" must be a non-empty string')
    transcript = record.get('transcript')
    scene = record.get('noise_scene')
    if (transcript is None) == (scene is None):
        problems.append('exactly one of "transcript" and "noise_scene" '
                        'must be non-null')
    if transcript is not None and not isinstance(transcript, str):
        problems.append('"transcript" must be a string or null')
    if scene is not None and not isinstance(scene, str):
        problems.append('"noise_scene" must be a string or null')
    cfh = record.get('cfh_class')
    if cfh is not None and cfh not in CFH_CLASSES_3:
        problems.append('"cfh_class" must be one of %s or null'
                        % ', '.join(CFH_CLASSES_3))
    if cfh is not None and scene is not None:
        problems.append('noise entries cannot carry a "cfh_class"')
    for key in ('domain', 'split'):
        if record.get(key) is not None and not isinstance(record[key], str):
            problems.append('"%s" must be a string' % (key,))
    return problems


def parse_record(record, base_dir=''):
    problems = validate_record(record)
    if problems:
        raise InvalidInput('; '.join(problems))
    return ManifestEntry(audio=record['audio'],
                         transcript=record.get('transcript'),
                         cfh_class=record.get('cfh_class'),
                         noise_scene=record.get('noise_scene'),
                         domain=record.get('domain') or DEFAULT_DOMAIN,
                         split=record.get('split'),
                         base_dir=base_dir)


def read_manifest(path):
    """
    Read and validate a JSON Lines manifest.

    Blank lines are ignored.

    Arguments:
        path: the manifest path

    Returns: a list of ManifestEntry
    """
    base_dir = os.path.dirname(os.path.abspath(path))
    entries = []
    try:
        with open(path) as f:
            for lineno, line in enumerate(f, 1):
                if not line.strip():
                    continue
                try:
                    record = json.loads(line)
                    entries.append(parse_record(record, base_dir))
                except ValueError as e:
                    raise InvalidInput('%s:%d: %s' % (path, lineno, e))
    except OSError as e:
        raise InvalidInput('cannot read manifest %s: %s' % (path, e))
    return entries


def write_manifest(path, entries):
    """
    Write entries to a JSON Lines manifest, one per line.
    """
    with open(path, 'w') as f:
        for entry in entries:
            f.write(entry.to_json())
            f.write('\n')
