"""Small file helpers shared by the persistence code."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path

FORMAT_VERSION = 1


def atomic_write_text(path, text: str) -> None:
    """Write ``text`` to a temp file next to ``path`` and rename it into place."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def dump_json(path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=1, allow_nan=False) + "\n")


def load_versioned(path, kind: str) -> dict:
    """Load a JSON artifact and check its ``kind`` and ``format_version`` tags."""
    d = json.loads(Path(path).read_text(encoding="utf-8"))
    if d.get("kind") != kind:
        raise ValueError(f"{path}: expected a {kind!r} artifact, found {d.get('kind')!r}")
    if d.get("format_version") != FORMAT_VERSION:
        raise ValueError(
            f"{path}: unsupported format_version {d.get('format_version')!r} (expected {FORMAT_VERSION})"
        )
    return d
