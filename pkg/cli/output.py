"""
Atomic output files: write to a temporary file in the target directory, then rename.
"""

from __future__ import annotations

import os
import sys
import tempfile
from pathlib import Path


def write_output(destination: str, text: str) -> None:
    """
    Write `text` to `destination`, or to stdout when it is "-".

    The file either keeps its previous content or holds all of `text`; a
    failure never leaves a partial file behind.
    """
    if destination == "-":
        sys.stdout.write(text)
        return
    path = Path(destination)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=path.parent)
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
            fh.flush()
            os.fsync(fh.fileno())
        os.replace(tmp_name, path)
    except BaseException:
        Path(tmp_name).unlink(missing_ok=True)
        raise
