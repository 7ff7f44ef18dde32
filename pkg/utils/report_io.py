"""Atomic report writers.

Every report is written to a temporary file in the destination directory and
moved into place with ``os.replace``, so readers never see a partial file.
"""

import csv
import json
import os
import tempfile
from typing import Any, Iterable, List


def _atomic_write(path: str, write, newline=None) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    handle = tempfile.NamedTemporaryFile(
        "w", encoding="utf-8", dir=directory, prefix=".tmp-", delete=False, newline=newline
    )
    try:
        with handle:
            write(handle)
        os.replace(handle.name, path)
    except BaseException:
        # leave no temporary file behind
        if os.path.exists(handle.name):
            os.unlink(handle.name)
        raise
    return path


def dumps(payload: Any) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline."""
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def write_json(path: str, payload: Any) -> str:
    """Write payload as canonical JSON."""
    return _atomic_write(path, lambda handle: handle.write(dumps(payload)))


def write_csv(path: str, rows: Iterable[List[Any]]) -> str:
    """Write rows (header first) as CSV."""
    return _atomic_write(path, lambda handle: csv.writer(handle).writerows(rows), newline="")


def write_text(path: str, text: str) -> str:
    return _atomic_write(path, lambda handle: handle.write(text))
