"""
numerics.rng: nazwany, seedowalny generator licznikowy (Philox, 64-bit)

Każda operacja losowa dostaje jawny uchwyt `Rng`; klucz Philox = (hash64(nazwa) << 64) | seed,
więc strumienie o różnych nazwach są niezależne, a bieg jest bit-w-bit powtarzalny.
"""

from __future__ import annotations

import hashlib
from typing import Any, Dict, Sequence

import numpy as np

MASK64 = (1 << 64) - 1


def stable_hash64(text: str) -> int:
    """Stabilny (międzyprocesowy) 64-bitowy hash tekstu: blake2b, little-endian."""
    return int.from_bytes(hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest(), "little")


class Rng:
    def __init__(self, seed: int, name: str = "main"):
        self.seed = int(seed) & MASK64
        self.name = name
        key = (stable_hash64(name) << 64) | self.seed
        self._gen = np.random.Generator(np.random.Philox(key=key))

    def spawn(self, name: str) -> "Rng":
        return Rng(self.seed, f"{self.name}/{name}")

    # ── losowania ────────────────────────────────────────────────────────────
    def normal(self, shape: Sequence[int] | int) -> np.ndarray:
        return self._gen.standard_normal(shape)

    def uniform(self, low: float = 0.0, high: float = 1.0, shape=None):
        return self._gen.uniform(low, high, shape)

    def integers(self, low: int, high: int, shape=None):
        """Liczby całkowite z [low, high] (obustronnie domknięte)."""
        return self._gen.integers(low, high, size=shape, endpoint=True)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    def random(self) -> float:
        return float(self._gen.random())

    def seeds(self, n: int) -> list[int]:
        """n niezależnych 64-bitowych seedów potomnych."""
        return [int(s) for s in self._gen.integers(0, MASK64, size=n, dtype=np.uint64, endpoint=True)]

    # ── stan (checkpoint) ────────────────────────────────────────────────────
    @property
    def state(self) -> Dict[str, Any]:
        st = self._gen.bit_generator.state
        inner = st["state"]
        return {
            "name": self.name,
            "seed": format(self.seed, "x"),
            "counter": [format(int(v), "x") for v in inner["counter"]],
            "key": [format(int(v), "x") for v in inner["key"]],
            "buffer": [format(int(v), "x") for v in st["buffer"]],
            "buffer_pos": int(st["buffer_pos"]),
            "has_uint32": int(st["has_uint32"]),
            "uinteger": int(st["uinteger"]),
        }

    @classmethod
    def from_state(cls, state: Dict[str, Any]) -> "Rng":
        rng = cls(int(state["seed"], 16), state["name"])
        u64 = lambda xs: np.array([int(v, 16) for v in xs], dtype=np.uint64)  # noqa: E731
        rng._gen.bit_generator.state = {
            "bit_generator": "Philox",
            "state": {"counter": u64(state["counter"]), "key": u64(state["key"])},
            "buffer": u64(state["buffer"]),
            "buffer_pos": int(state["buffer_pos"]),
            "has_uint32": int(state["has_uint32"]),
            "uinteger": int(state["uinteger"]),
        }
        return rng
