"""Data utilities."""

import datetime
import hashlib
from typing import Any, Mapping


def canonical_listing(mapping):
    # type: (Mapping[str, Any]) -> str
    """Return the mapping as sorted `key=value` lines, floats in repr()
    form, so equal configs give identical text.
    """
    return ''.join(
        '{}={!r}\n'.format(key, mapping[key]) for key in sorted(mapping))


def config_hash(mapping):
    # type: (Mapping[str, Any]) -> str
    """Return a short, stable SHA-256 fingerprint of a flat config mapping."""
    digest = hashlib.sha256(canonical_listing(mapping).encode('utf-8'))
    return digest.hexdigest()[:16]


def format_duration(seconds):
    # type: (float) -> str
    """Format a time duration from seconds to [days] HH:MM:SS. No microseconds."""
    delta = datetime.timedelta(seconds=round(seconds))
    return str(delta)
