"""
The common module provides exceptions and helpers used by most other
modules.
"""
import numpy as np


class InvalidInput(ValueError):
    """
    An InvalidInput is raised when an input breaks an operation's contract,
    e.g., an empty waveform or a label outside the known label set.
    """


class TrainingDiverged(RuntimeError):
    """
    A TrainingDiverged is raised when a loss or gradient stops being finite.
    """


def make_2d_constant_array(width, height, value):
    """
    Create a width-by-height array with each cell as a given value.

    For example, the call make_2d_constant_array(3, 2, 0) would return:

        [[0, 0, 0],
         [0, 0, 0]]

    Arguments:
        width: the width of the array
        height: the height of the array
        value: the value to fill the array with

    Returns: the new array
    """
    return [[value for x in range(width)] for y in range(height)]


def softmax(logits):
    """
    Return the softmax of a vector of logits in double precision.

    Arguments:
        logits: a sequence of finite numbers

    Returns: a numpy array of probabilities summing to one
    """
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    e = np.exp(z)
    return e / e.sum()


def log_softmax(logits):
    """
    Return the log-softmax of a vector of logits in double precision.

    Arguments:
        logits: a sequence of finite numbers

    Returns: a numpy array of log-probabilities
    """
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max()
    return z - np.log(np.exp(z).sum())


def require(condition, message):
    """
    Raise InvalidInput with a message unless a condition holds.

    Arguments:
        condition: the condition that must hold
        message: the diagnostic to raise with
    """
    if not condition:
        raise InvalidInput(message)
