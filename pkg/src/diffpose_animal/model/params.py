# model/params.py: PARAMETRY DENOISERA θ
# =====================================================================
# Stała, udokumentowana kolejność (PARAM_ORDER) = kolejność rekordów DPAT w checkpoincie.
#
#   enc_w1 [C,3,3,3]   enc_b1 [C]     conv s2  (obraz RGB → C)
#   enc_w2 [C,C,3,3]   enc_b2 [C]     conv s2
#   enc_w3 [C,C,3,3]   enc_b3 [C]     conv s2
#   enc_w4 [C,C,3,3]   enc_b4 [C]     conv s1 (po upsamplingu do H'×W')
#   attn_wq [N,C]      attn_bq [C]    zapytania z kanałów y_t
#   attn_wt [t_dim,C]                 projekcja embeddingu kroku t (dodawana do zapytań)
#   attn_wk [C+d,C]    attn_wv [C+d,C]  klucze / wartości z F_fuse
#   attn_wo [C,C]      attn_bo [C]    projekcja wyjściowa
#   head_wh [C,d]      head_bh [d]    1×1: F_D → przestrzeń priorów
#   head_scale [N]     head_bias [N]  skala / bias per keypoint
# =====================================================================

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Tuple

import numpy as np

from ..cfg import ModelConfig
from ..errors import CheckpointMismatchError
from ..numerics import Rng, Tensor

PARAM_ORDER: Tuple[str, ...] = (
    "enc_w1", "enc_b1", "enc_w2", "enc_b2", "enc_w3", "enc_b3", "enc_w4", "enc_b4",
    "attn_wq", "attn_bq", "attn_wt", "attn_wk", "attn_wv", "attn_wo", "attn_bo",
    "head_wh", "head_bh", "head_scale", "head_bias",
)

KERNEL = 3


def param_shapes(cfg: ModelConfig) -> Dict[str, Tuple[int, ...]]:
    C, d, N, k = cfg.C, cfg.d, cfg.N, KERNEL
    return {
        "enc_w1": (C, 3, k, k), "enc_b1": (C,),
        "enc_w2": (C, C, k, k), "enc_b2": (C,),
        "enc_w3": (C, C, k, k), "enc_b3": (C,),
        "enc_w4": (C, C, k, k), "enc_b4": (C,),
        "attn_wq": (N, C), "attn_bq": (C,),
        "attn_wt": (cfg.t_dim, C),
        "attn_wk": (C + d, C), "attn_wv": (C + d, C),
        "attn_wo": (C, C), "attn_bo": (C,),
        "head_wh": (C, d), "head_bh": (d,),
        "head_scale": (N,), "head_bias": (N,),
    }


def glorot_bound(shape: Tuple[int, ...]) -> float:
    if len(shape) == 4:
        rf = shape[2] * shape[3]
        fan_in, fan_out = shape[1] * rf, shape[0] * rf
    else:
        fan_in, fan_out = shape[0], shape[1]
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


@dataclass
class DenoiserParams:
    config: ModelConfig
    tensors: Dict[str, Tensor] = field(default_factory=dict)

    def __post_init__(self) -> None:
        shapes = param_shapes(self.config)
        missing = [n for n in PARAM_ORDER if n not in self.tensors]
        if missing:
            raise CheckpointMismatchError(f"DenoiserParams: brak parametrów {missing}")
        bad = [f"{n}: {self.tensors[n].shape} != {shapes[n]}" for n in PARAM_ORDER
               if self.tensors[n].shape != shapes[n]]
        if bad:
            raise CheckpointMismatchError("DenoiserParams: kształty niezgodne z configiem: " + "; ".join(bad))

    def __getitem__(self, name: str) -> Tensor:
        return self.tensors[name]

    def __iter__(self) -> Iterator[Tuple[str, Tensor]]:
        for n in PARAM_ORDER:
            yield n, self.tensors[n]

    def arrays(self) -> List[np.ndarray]:
        return [self.tensors[n].data for n in PARAM_ORDER]

    def zero_grad(self) -> None:
        for _, p in self:
            p.zero_grad()

    def snapshot(self) -> "DenoiserParams":
        """Zamrożona kopia (bez gradientów): do ewaluacji współbieżnej z treningiem."""
        return DenoiserParams(self.config, {n: p.detach() for n, p in self})

    @classmethod
    def from_arrays(cls, config: ModelConfig, arrays: List[np.ndarray], requires_grad: bool = True) -> "DenoiserParams":
        if len(arrays) != len(PARAM_ORDER):
            raise CheckpointMismatchError(f"oczekiwano {len(PARAM_ORDER)} tensorów parametrów, otrzymano {len(arrays)}")
        return cls(config, {n: Tensor(a, requires_grad=requires_grad, name=n) for n, a in zip(PARAM_ORDER, arrays)})


def init_params(config: ModelConfig, seed: int = 0) -> DenoiserParams:
    """Glorot-uniform ±√(6/(fan_in+fan_out)), biasy zerowe, skale głowicy = 1."""
    out: Dict[str, Tensor] = {}
    for name, shape in param_shapes(config).items():
        if name == "head_scale":
            arr = np.ones(shape)
        elif len(shape) == 1:
            arr = np.zeros(shape)
        else:
            b = glorot_bound(shape)
            arr = Rng(seed, f"init/{name}").uniform(-b, b, shape)
        out[name] = Tensor(arr, requires_grad=True, name=name)
    return DenoiserParams(config, out)
