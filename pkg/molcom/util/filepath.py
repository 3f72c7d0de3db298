"""File and path utilities."""

import os


def makedirs(path, *paths):
    # type: (str, *str) -> str
    """Join one or more path components, make that directory path (using the
    default mode 0o0777), and return the joined path.

    Raise OSError if it can't achieve the result (e.g. the containing directory
    is readonly or the path contains a file); not if the directory already
    exists.
    """
    full_path = os.path.join(path, *paths)

    if full_path:
        os.makedirs(full_path, exist_ok=True)
    return full_path


def prepare_output(filename):
    # type: (str) -> str
    """Make the directory that will contain `filename` and return filename."""
    makedirs(os.path.dirname(filename))
    return filename


def suffixed(filename, label, ext=None):
    # type: (str, str, str) -> str
    """Return `filename` with `_label` inserted before its extension, and the
    extension optionally replaced, e.g. ('out/acc.csv', 'system1', '.svg') ->
    'out/acc_system1.svg'.
    """
    stem, old_ext = os.path.splitext(filename)
    if label:
        stem = '{}_{}'.format(stem, label)
    return stem + (old_ext if ext is None else ext)
