"""Small file/format helpers: atomic writes and stable float formatting."""
from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path


def sig6(x: float) -> float:
    """Round to 6 significant digits (all emitted JSON uses this)."""
    return float(f"{x:.6g}")


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write via a temp file + rename so readers never see a partial file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        try:
            os.unlink(tmp)
        except OSError:
            pass
        raise


def dump_json(path: str | Path, obj) -> None:
    atomic_write_text(path, json.dumps(obj, indent=2) + "\n")


def load_json(path: str | Path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)
