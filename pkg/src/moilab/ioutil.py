"""Deterministic, atomic file output helpers."""

from __future__ import annotations

import json
import os
import tempfile
from typing import Any


def dump_json_text(obj: Any) -> str:
    """Serialize with a stable key order; floats round-trip bit-exactly via repr."""
    return json.dumps(obj, sort_keys=True, indent=1, allow_nan=False)


def atomic_write_text(path: str, text: str) -> None:
    """Write via a temp file in the target directory, then rename into place."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as handle:
            handle.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_json(path: str, obj: Any) -> None:
    atomic_write_text(path, dump_json_text(obj) + "\n")


def read_json(path: str) -> Any:
    with open(path, "r") as handle:
        return json.load(handle)
