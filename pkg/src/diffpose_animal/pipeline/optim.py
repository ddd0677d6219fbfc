# pipeline/optim.py: AdamW (rozłączny weight decay) + schodkowy harmonogram lr
# =====================================================================
#   θ ← θ · (1 − lr·λ)                                   (decay rozłączony od gradientu)
#   m ← β1·m + (1−β1)·g        v ← β2·v + (1−β2)·g²
#   θ ← θ − lr/(1−β1^k) · m / (√v/√(1−β2^k) + ε)
# Harmonogram: lr(e) = lr0 · factor^{#granic ≤ e}  (e = indeks epoki od 0)
# =====================================================================

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Sequence, Tuple

import numpy as np

from ..errors import CheckpointMismatchError
from ..model import PARAM_ORDER, DenoiserParams


@dataclass(frozen=True)
class LrSchedule:
    base_lr: float
    decay_epochs: Tuple[int, ...] = ()
    factor: float = 0.1

    def lr_at(self, epoch: int) -> float:
        k = sum(1 for b in self.decay_epochs if epoch >= b)
        return self.base_lr * (self.factor ** k)


class AdamW:
    def __init__(self, params: DenoiserParams, lr: float = 5e-4, betas: Tuple[float, float] = (0.9, 0.999),
                 eps: float = 1e-8, weight_decay: float = 1e-4):
        self.params = params
        self.lr = float(lr)
        self.beta1, self.beta2 = float(betas[0]), float(betas[1])
        self.eps = float(eps)
        self.weight_decay = float(weight_decay)
        self.step_count = 0
        self.m: Dict[str, np.ndarray] = {n: np.zeros(p.shape) for n, p in params}
        self.v: Dict[str, np.ndarray] = {n: np.zeros(p.shape) for n, p in params}

    @property
    def current_lr(self) -> float:
        return self.lr

    def set_lr(self, lr: float) -> None:
        self.lr = float(lr)

    def zero_grad(self) -> None:
        self.params.zero_grad()

    def step(self) -> None:
        self.step_count += 1
        k = self.step_count
        bc1 = 1.0 - self.beta1 ** k
        bc2 = 1.0 - self.beta2 ** k
        for name, p in self.params:
            if p.grad is None:
                continue
            g = p.grad
            m = self.m[name] = self.beta1 * self.m[name] + (1.0 - self.beta1) * g
            v = self.v[name] = self.beta2 * self.v[name] + (1.0 - self.beta2) * g * g
            theta = p.data * (1.0 - self.lr * self.weight_decay) if self.weight_decay else p.data
            p.assign_(theta - (self.lr / bc1) * m / (np.sqrt(v) / np.sqrt(bc2) + self.eps))

    # ── checkpoint ───────────────────────────────────────────────────────────
    def moment_arrays(self) -> List[np.ndarray]:
        return [self.m[n] for n in PARAM_ORDER] + [self.v[n] for n in PARAM_ORDER]

    def load_moments(self, arrays: Sequence[np.ndarray], step_count: int) -> None:
        n = len(PARAM_ORDER)
        if len(arrays) != 2 * n:
            raise CheckpointMismatchError(f"AdamW: oczekiwano {2 * n} tablic momentów, otrzymano {len(arrays)}")
        for i, name in enumerate(PARAM_ORDER):
            shape = self.params[name].shape
            if arrays[i].shape != shape or arrays[n + i].shape != shape:
                raise CheckpointMismatchError(f"AdamW: moment {name} ma kształt {arrays[i].shape}, oczekiwano {shape}")
            self.m[name] = np.array(arrays[i], dtype=np.float64)
            self.v[name] = np.array(arrays[n + i], dtype=np.float64)
        self.step_count = int(step_count)
