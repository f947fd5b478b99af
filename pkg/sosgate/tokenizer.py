"""
The tokenizer module maps transcripts to character token ids and back.
"""
from .common import require
from .config import ALPHABET, SOT, EOT, PAD, UNK, N_SPECIALS


class Tokenizer(object):
    """
    A Tokenizer encodes text one character per token.

    Ids 0-3 are the specials sot, eot, pad and unk; alphabet character
    i has id 4 + i.  Text is lowercased before encoding and characters
    outside the alphabet become unk.

    Arguments:
        alphabet: the characters the tokenizer knows
    """
    def __init__(self, alphabet=ALPHABET):
        self.alphabet = alphabet
        self._ids = {c: N_SPECIALS + i for i, c in enumerate(alphabet)}

    @property
    def vocab_size(self):
        return N_SPECIALS + len(self.alphabet)

    def encode(self, text):
        """
        Return the token ids of a text without specials.
        """
        return [self._ids.get(c, UNK) for c in text.lower()]

    def encode_target(self, text):
        """
        Return [sot] + encode(text) + [eot].
        """
        return [SOT] + self.encode(text) + [EOT]

    def decode(self, tokens):
        """
        Return the text of a token sequence.

        Decoding stops at the first eot; other specials are dropped.
        """
        chars = []
        for t in tokens:
            require(0 <= t < self.vocab_size,
                    'token id out of range: %d' % (t,))
            if t == EOT:
                break
            if t >= N_SPECIALS:
                chars.append(self.alphabet[t - N_SPECIALS])
        return ''.join(chars)


def teacher_forcing_pair(tokens):
    """
    Split a [sot, ..., eot] sequence into decoder input and target.

    Arguments:
        tokens: the full token sequence

    Returns: (targets_in, targets_out), each one shorter than tokens
    """
    return tokens[:-1], tokens[1:]


def pad_batch(sequences, length=None):
    """
    Right-pad token sequences with pad to a common length.

    Arguments:
        sequences: a list of token id lists
        length: the padded length, the longest sequence by default

    Returns: (rows, mask) where mask[i][t] is True at real tokens
    """
    if length is None:
        length = max(len(s) for s in sequences)
    rows = [list(s) + [PAD] * (length - len(s)) for s in sequences]
    mask = [[t < len(s) for t in range(length)] for s in sequences]
    return rows, mask
