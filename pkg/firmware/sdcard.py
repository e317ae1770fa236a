"""
In-memory stand-in for the device's SD card.

Files are text keyed by name, kept as the list of pieces written to them. Log
files hold one JSON reading per line and are only ever appended to, deleted,
or recreated empty.
"""

from __future__ import annotations

import logging

logger = logging.getLogger(__name__)

PARAMS_FILE = "params.json"
CACHE_LOG = "cache_log.txt"
PERM_LOG = "perm_log.txt"


class SdCardError(OSError):
    """A file the firmware expects is missing from the card."""


class VirtualSd:
    """
    A flat directory of text files.

    Args:
        params (str | None): Initial params.json content, if any.
    """

    def __init__(self, params: str | None = None) -> None:
        self._files: dict[str, list[str]] = {}
        if params is not None:
            self._files[PARAMS_FILE] = [params]

    def __repr__(self) -> str:
        return f"VirtualSd({sorted(self._files)})"

    def exists(self, name: str) -> bool:
        return name in self._files

    def read_text(self, name: str) -> str:
        try:
            return "".join(self._files[name])
        except KeyError:
            raise SdCardError(f"no such file: {name}") from None

    def write_text(self, name: str, text: str) -> None:
        self._files[name] = [text]

    def append_line(self, name: str, line: str) -> None:
        if "\n" in line:
            raise ValueError("a log line cannot contain a newline")
        self._files.setdefault(name, []).append(line + "\n")

    def read_lines(self, name: str) -> list[str]:
        """Lines of a log file; a missing file reads as empty."""
        text = "".join(self._files.get(name, ()))
        return [line for line in text.split("\n") if line]

    def delete(self, name: str) -> None:
        self._files.pop(name, None)

    def ensure(self, name: str) -> None:
        """Create `name` empty unless it already exists."""
        self._files.setdefault(name, [])

    def recreate(self, name: str) -> None:
        """Delete `name` and create it again empty."""
        self.delete(name)
        self.ensure(name)
        logger.debug("recreated %s", name)

    def names(self) -> list[str]:
        return sorted(self._files)
