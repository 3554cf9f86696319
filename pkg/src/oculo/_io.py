"""Small I/O helpers shared by the parsers and the CLI."""
from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import IO, Union

Source = Union[bytes, str, Path, IO[bytes], IO[str]]


def read_text(source: Source) -> str:
    """Decode a path, raw bytes, text, or open file as UTF-8 text."""
    if isinstance(source, Path):
        return source.read_text(encoding="utf-8")
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    return data.decode("utf-8") if isinstance(data, bytes) else data


def atomic_write(path: Path, data: Union[bytes, str]) -> None:
    """Write via a temp file in the target directory, then rename over ``path``."""
    path = Path(path)
    if isinstance(data, str):
        data = data.encode("utf-8")
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
