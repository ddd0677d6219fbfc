from __future__ import annotations

import hashlib
import os
import tempfile
from pathlib import Path
from typing import Any

import orjson

JSON_OPTS = orjson.OPT_INDENT_2 | orjson.OPT_SORT_KEYS | orjson.OPT_SERIALIZE_NUMPY


def ensure_dir(p: Path) -> None:
    p.mkdir(parents=True, exist_ok=True)


def file_exists(p: Path) -> bool:
    return p.exists() and p.is_file()


def atomic_write_bytes(path: Path | str, data: bytes) -> Path:
    """Zapis przez plik tymczasowy w tym samym katalogu + os.replace."""
    p = Path(path)
    ensure_dir(p.parent)
    fd, tmp = tempfile.mkstemp(prefix=f".{p.name}.", dir=p.parent)
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, p)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return p


def dumps_json(obj: Any) -> bytes:
    return orjson.dumps(obj, option=JSON_OPTS) + b"\n"


def write_json(path: Path | str, obj: Any) -> Path:
    return atomic_write_bytes(path, dumps_json(obj))


def read_json(path: Path | str) -> Any:
    return orjson.loads(Path(path).read_bytes())


def git_blob_sha1(path: Path | str) -> str:
    """Hash treści w stylu `git hash-object` (sha1 nad "blob <len>\\0" + bajty)."""
    data = Path(path).read_bytes()
    h = hashlib.sha1(f"blob {len(data)}\0".encode("ascii"))
    h.update(data)
    return h.hexdigest()
