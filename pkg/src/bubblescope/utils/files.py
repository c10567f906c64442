"""File output helpers: every artifact is written once, atomically."""
import json
import os
import tempfile
from pathlib import Path
from typing import Any, Union

from .errors import OutputError

PathLike = Union[str, Path]


def write_text_atomic(path: PathLike, text: str) -> Path:
    """Write text to a temp file next to ``path`` and rename it into place"""
    path = Path(path)
    directory = path.parent if str(path.parent) else Path(".")
    try:
        directory.mkdir(parents=True, exist_ok=True)
        fd, tmp_name = tempfile.mkstemp(prefix=f".{path.name}.", suffix=".tmp", dir=directory)
    except OSError as e:
        raise OutputError(f"Cannot write {path}: {e.strerror or e}")

    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp_name, path)
    except BaseException as e:
        if os.path.exists(tmp_name):
            os.remove(tmp_name)
        if isinstance(e, OSError):
            raise OutputError(f"Cannot write {path}: {e.strerror or e}")
        raise
    return path


def write_json_atomic(path: PathLike, payload: Any) -> Path:
    # sort_keys keeps repeated runs byte-identical
    return write_text_atomic(path, dumps(payload))


def dumps(payload: Any) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"
