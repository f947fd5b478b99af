"""
The lexicon module maps transcripts to call-for-help classes.

A transcript is normalized (lowercased, punctuation stripped,
whitespace collapsed) and matched by substring against the phrases of
each emergency class in a fixed order: saveme first, then helpme.  The
first class with a matching phrase wins; otherwise the transcript is
'others'.  Phrases live in a JSON file so new keywords need no
retraining.
"""
import json
import re
import string

from .common import InvalidInput
from .config import EMERGENCY_CLASSES
from .resources import load_json_resource

_PUNCTUATION = re.compile('[%s]' % re.escape(string.punctuation))
_WHITESPACE = re.compile(r'\s+')

DEFAULT_LEXICON = 'data/lexicon.json'


def normalize(text):
    """
    Lowercase a text, drop punctuation and collapse whitespace.

    Apostrophes are dropped too, so "Don't" becomes "dont".
    """
    text = _PUNCTUATION.sub('', text.lower())
    return _WHITESPACE.sub(' ', text).strip()


class KeywordLexicon(object):
    """
    A KeywordLexicon holds the normalized phrases of each emergency class.

    Arguments:
        patterns: a mapping from 'saveme' and 'helpme' to phrase lists
    """
    def __init__(self, patterns):
        self.patterns = {}
        for klass in EMERGENCY_CLASSES:
            phrases = patterns.get(klass)
            if not phrases or not isinstance(phrases, list):
                raise InvalidInput('lexicon needs a non-empty phrase list '
                                   'for %s' % (klass,))
            normalized = [normalize(p) for p in phrases
                          if isinstance(p, str)]
            normalized = [p for p in normalized if p]
            if not normalized:
                raise InvalidInput('lexicon phrases for %s are all empty'
                                   % (klass,))
            self.patterns[klass] = normalized
        unknown = set(patterns) - set(EMERGENCY_CLASSES)
        if unknown:
            raise InvalidInput('unknown lexicon classes: %s'
                               % ', '.join(sorted(unknown)))

    def to_dict(self):
        return dict(self.patterns)


def load_lexicon(path=None):
    """
    Load a lexicon JSON file, or the packaged default when path is None.
    """
    if path is None:
        return KeywordLexicon(load_json_resource(DEFAULT_LEXICON))
    try:
        with open(path) as f:
            document = json.load(f)
    except (OSError, ValueError) as e:
        raise InvalidInput('cannot read lexicon %s: %s' % (path, e))
    if not isinstance(document, dict):
        raise InvalidInput('lexicon %s is not a JSON object' % (path,))
    return KeywordLexicon(document)


def classify_transcript(transcript, lexicon):
    """
    Return the call-for-help class of a transcript.

    Arguments:
        transcript: the decoded text
        lexicon: a KeywordLexicon

    Returns: 'saveme', 'helpme' or 'others'
    """
    text = normalize(transcript)
    for klass in EMERGENCY_CLASSES:
        for phrase in lexicon.patterns[klass]:
            if phrase in text:
                return klass
    return 'others'
