# numerics/serial.py: KONTENER „DPAT” (płaski rekord binarny tensora)
# =====================================================================
# Układ rekordu (little-endian):
#   magic   4 B   b"DPAT"
#   version u32   (=1)
#   rank    u32
#   extents u32 × rank
#   payload f64 × prod(extents)
#
# Rekordy można sklejać jeden za drugim (checkpointy, pliki embeddingów).
# Parser raportuje offset bajtu, na którym się zatrzymał.
# =====================================================================

from __future__ import annotations

import struct
from typing import BinaryIO, Iterable, List, Tuple

import numpy as np

from ..errors import FormatError

MAGIC = b"DPAT"
VERSION = 1
_U32 = struct.Struct("<I")


def encode_record(arr: np.ndarray) -> bytes:
    a = np.ascontiguousarray(np.asarray(arr, dtype="<f8"))
    shape = a.shape if a.ndim else (1,)
    head = MAGIC + _U32.pack(VERSION) + _U32.pack(len(shape))
    head += b"".join(_U32.pack(int(n)) for n in shape)
    return head + a.tobytes(order="C")


def write_records(fh: BinaryIO, arrays: Iterable[np.ndarray]) -> int:
    n = 0
    for arr in arrays:
        n += fh.write(encode_record(arr))
    return n


def _need(buf: bytes, offset: int, size: int, what: str) -> None:
    if offset + size > len(buf):
        raise FormatError(
            f"DPAT: ucięty plik, brak {what} ({size} B, dostępne {len(buf) - offset} B)",
            offset=offset,
        )


def decode_record(buf: bytes, offset: int = 0) -> Tuple[np.ndarray, int]:
    """Zwraca (tablica, offset_po_rekordzie)."""
    _need(buf, offset, 4, "magic")
    if buf[offset:offset + 4] != MAGIC:
        raise FormatError(f"DPAT: zły magic {buf[offset:offset + 4]!r}", offset=offset)
    pos = offset + 4
    _need(buf, pos, 8, "nagłówka")
    (version,) = _U32.unpack_from(buf, pos)
    (rank,) = _U32.unpack_from(buf, pos + 4)
    if version != VERSION:
        raise FormatError(f"DPAT: nieobsługiwana wersja {version}", offset=pos)
    pos += 8
    _need(buf, pos, 4 * rank, "rozmiarów")
    shape = tuple(_U32.unpack_from(buf, pos + 4 * i)[0] for i in range(rank))
    if any(n == 0 for n in shape):
        raise FormatError(f"DPAT: zerowy rozmiar w {shape}", offset=pos)
    pos += 4 * rank
    count = int(np.prod(shape)) if shape else 1
    _need(buf, pos, 8 * count, "danych")
    arr = np.frombuffer(buf, dtype="<f8", count=count, offset=pos).astype(np.float64).reshape(shape)
    return arr, pos + 8 * count


def read_records(buf: bytes, offset: int = 0, count: int | None = None) -> Tuple[List[np.ndarray], int]:
    out: List[np.ndarray] = []
    pos = offset
    while pos < len(buf) and (count is None or len(out) < count):
        arr, pos = decode_record(buf, pos)
        out.append(arr)
    if count is not None and len(out) != count:
        raise FormatError(f"DPAT: oczekiwano {count} rekordów, znaleziono {len(out)}", offset=pos)
    return out, pos
