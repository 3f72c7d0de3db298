"""Python logging filtering for the console handler."""

import logging
from typing import Dict


class LogPrefixFilter(logging.Filter):
    """Filter log records by a minimum log level for each dotted logger-name
    prefix, e.g. {'molcom': INFO, 'molcom.simulator': DEBUG}. The longest
    matching prefix wins, so 'molcom.simulator.step' uses the
    'molcom.simulator' level; unmatched names use else_level.
    """
    # Subclass logging.Filter just to satisfy addFilter()'s zealous type decl.

    def __init__(self, levels, else_level):
        # type: (Dict[str, int], int) -> None
        """
        levels: a dictionary of dotted log name prefix -> log level.
        else_level: the log level for names that match no prefix.
        """
        super(LogPrefixFilter, self).__init__()
        self.levels = dict(levels)
        self.else_level = else_level

    def level_for(self, name):
        # type: (str) -> int
        """Return the minimum level for the logger `name`."""
        while name:
            if name in self.levels:
                return self.levels[name]
            name = name.rpartition('.')[0]
        return self.else_level

    def filter(self, record):
        # type: (logging.LogRecord) -> bool
        """Return False to reject this log record; True to pass it to other
        filters.
        """
        return record.levelno >= self.level_for(record.name)


def setup_console_logging(molcom_level=logging.INFO, else_level=logging.WARNING):
    # type: (int, int) -> logging.Handler
    """Attach one stderr StreamHandler to the root logger, filtered so the
    `molcom` loggers print at molcom_level and everything else (numpy,
    matplotlib, ...) only at else_level. Idempotent: a second call replaces
    the filter on the handler installed by the first.
    """
    root = logging.getLogger()
    root.setLevel(logging.DEBUG)

    handler = next(
        (h for h in root.handlers if getattr(h, '_molcom_console', False)),
        None)
    if handler is None:
        handler = logging.StreamHandler()
        handler.setFormatter(logging.Formatter('%(levelname)s %(name)s: %(message)s'))
        handler._molcom_console = True  # type: ignore[attr-defined]
        root.addHandler(handler)

    for old_filter in list(handler.filters):
        handler.removeFilter(old_filter)
    handler.addFilter(LogPrefixFilter({'molcom': molcom_level}, else_level))
    return handler
