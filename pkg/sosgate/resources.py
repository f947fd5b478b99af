"""
The resources module provides access to data files packaged with sosgate.
"""
import json
from importlib.resources import files


def get_resource_stream(path):
    """
    Return a stream to the contents of a named resource.

    :param path: the path to the resource, relative to the package
    :returns: a binary file-like stream to the resource
    """
    return files('sosgate').joinpath(path).open('rb')


def load_json_resource(path):
    """
    Load a JSON resource.

    :param path: the path to the resource, e.g., 'data/lexicon.json'
    :returns: the decoded JSON document
    """
    with get_resource_stream(path) as f:
        return json.loads(f.read().decode('utf-8'))
