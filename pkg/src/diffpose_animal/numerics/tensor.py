# numerics/tensor.py: TENSOR + TAŚMA (reverse-mode, define-by-run)
# =====================================================================
# Tensor trzyma gęstą tablicę float64 (row-major, tylko-do-odczytu) oraz opcjonalny
# bufor gradientu. Taśma (Tape) zapisuje operacje w kolejności wykonania: kolejność
# zapisu jest automatycznie topologiczna (wejście zawsze powstaje przed wyjściem).
#
# Zasady:
#   • operacje zapisują się WYŁĄCZNIE gdy aktywna jest taśma (`with Tape() as tape:`)
#     i co najmniej jedno wejście ma requires_grad,
#   • taśma jest per-wątek (threading.local): tensor+taśma nie przechodzą między wątkami,
#   • backward akumuluje gradienty addytywnie (wiele użyć liścia = suma wkładów),
#   • taśmę budujemy od nowa w każdym forwardzie.
# =====================================================================

from __future__ import annotations

import logging
import threading
from dataclasses import dataclass
from typing import Callable, List, Optional, Sequence, Tuple

import numpy as np

from ..errors import ContractError, ShapeError

log = logging.getLogger("diffpose-animal.numerics")

BackwardFn = Callable[[np.ndarray], Sequence[Optional[np.ndarray]]]


class Tensor:
    """Gęsta tablica float64 z opcjonalnym udziałem w taśmie gradientów."""

    __slots__ = ("_data", "requires_grad", "grad", "name", "__weakref__")

    def __init__(self, data, requires_grad: bool = False, name: Optional[str] = None):
        arr = np.array(data, dtype=np.float64)  # zawsze kopia
        if any(n <= 0 for n in arr.shape):
            raise ShapeError(f"Tensor: rozmiary muszą być dodatnie, otrzymano {arr.shape}")
        arr.flags.writeable = False
        self._data = arr
        self.requires_grad = bool(requires_grad)
        self.grad: Optional[np.ndarray] = None
        self.name = name

    # ── dostęp ───────────────────────────────────────────────────────────────
    @property
    def data(self) -> np.ndarray:
        return self._data

    @property
    def shape(self) -> Tuple[int, ...]:
        return self._data.shape

    @property
    def size(self) -> int:
        return int(self._data.size)

    @property
    def ndim(self) -> int:
        return self._data.ndim

    def item(self) -> float:
        if self._data.size != 1:
            raise ContractError(f"item(): tensor nie jest skalarem, shape={self.shape}")
        return float(self._data.reshape(-1)[0])

    def numpy(self) -> np.ndarray:
        return self._data

    def detach(self) -> "Tensor":
        return Tensor(self._data, requires_grad=False, name=self.name)

    def zero_grad(self) -> None:
        self.grad = None

    def assign_(self, new_data: np.ndarray) -> None:
        """Podmiana wartości parametru (jedyny pisarz: optymalizator)."""
        arr = np.array(new_data, dtype=np.float64)
        if arr.shape != self.shape:
            raise ShapeError(f"assign_: {arr.shape} != {self.shape} ({self.name})")
        arr.flags.writeable = False
        self._data = arr

    def __repr__(self) -> str:
        tag = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad}{tag})"

    # ── skróty operatorów (delegują do ops) ─────────────────────────────────
    def __add__(self, other: "Tensor") -> "Tensor":
        from . import ops
        return ops.add(self, other)

    def __sub__(self, other: "Tensor") -> "Tensor":
        from . import ops
        return ops.sub(self, other)

    def __mul__(self, other: "Tensor") -> "Tensor":
        from . import ops
        return ops.mul(self, other)

    def __matmul__(self, other: "Tensor") -> "Tensor":
        from . import ops
        return ops.matmul(self, other)


# ─────────────────────────────────────────────────────────────────────────────
# Taśma
# ─────────────────────────────────────────────────────────────────────────────
@dataclass
class TapeRecord:
    op: str
    inputs: Tuple[Tensor, ...]
    output: Tensor
    backward: BackwardFn


class Tape:
    """Uporządkowana lista zapisanych operacji (kolejność = kolejność wykonania)."""

    _local = threading.local()

    def __init__(self) -> None:
        self.records: List[TapeRecord] = []
        self._produced: set[int] = set()

    def __enter__(self) -> "Tape":
        stack = self._stack()
        stack.append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = self._stack()
        if stack and stack[-1] is self:
            stack.pop()

    def __len__(self) -> int:
        return len(self.records)

    @classmethod
    def _stack(cls) -> List["Tape"]:
        st = getattr(cls._local, "stack", None)
        if st is None:
            st = []
            cls._local.stack = st
        return st

    @classmethod
    def current(cls) -> Optional["Tape"]:
        st = cls._stack()
        return st[-1] if st else None

    def record(self, op: str, inputs: Tuple[Tensor, ...], output: Tensor, backward: BackwardFn) -> None:
        self.records.append(TapeRecord(op, inputs, output, backward))
        self._produced.add(id(output))

    def produced(self, t: Tensor) -> bool:
        return id(t) in self._produced


def make_output(op: str, value: np.ndarray, inputs: Tuple[Tensor, ...], backward: BackwardFn) -> Tensor:
    """Tworzy wynik operacji i, jeśli trzeba, zapisuje go na aktywnej taśmie."""
    tape = Tape.current()
    needs = tape is not None and any(t.requires_grad for t in inputs)
    out = Tensor(value, requires_grad=needs)
    if needs:
        tape.record(op, inputs, out, backward)
    return out


def backward(loss: Tensor, tape: Tape) -> None:
    """
    Propagacja wsteczna po taśmie: każdy liść z requires_grad dostaje ∂loss/∂liść
    (dodawane do istniejącego .grad: akumulacja addytywna).
    """
    if loss.size != 1:
        raise ContractError(f"backward: strata musi być skalarem, shape={loss.shape}")
    if not loss.requires_grad:
        raise ContractError("backward: strata nie powstała na taśmie (brak requires_grad)")

    grads: dict[int, np.ndarray] = {id(loss): np.ones(loss.shape, dtype=np.float64)}

    for rec in reversed(tape.records):
        g = grads.pop(id(rec.output), None)
        if g is None:
            continue
        in_grads = rec.backward(g)
        for inp, ig in zip(rec.inputs, in_grads):
            if ig is None or not inp.requires_grad:
                continue
            if ig.shape != inp.shape:
                raise ShapeError(f"backward[{rec.op}]: grad {ig.shape} != input {inp.shape}")
            if tape.produced(inp):
                key = id(inp)
                prev = grads.get(key)
                grads[key] = ig if prev is None else prev + ig
            else:
                inp.grad = ig.copy() if inp.grad is None else inp.grad + ig
