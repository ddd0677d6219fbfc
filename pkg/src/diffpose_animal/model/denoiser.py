# model/denoiser.py: f_θ: ENKODER → FUZJA → CROSS-ATTENTION → GŁOWICA
# =====================================================================
#   F      = E(x)                         [C,H',W']
#   F_fuse = [F; F_g]                     [C+d,H',W']
#   F_CA   = CA(y_t, F_fuse, t)           [C,H',W']
#   F_D    = F_CA + F                     (rezydualnie)
#   ŷ      = H_kpts(F_D, F_l)             [N,H',W']
#
# Wszystko na Tensorach: jeśli aktywna jest taśma, forward zapisuje się do backwardu.
# =====================================================================

from __future__ import annotations

import logging
import math
from typing import Optional, Tuple, Union

import numpy as np

from ..errors import ConfigError, ShapeError
from ..numerics import Tensor, ops
from .params import DenoiserParams

log = logging.getLogger("diffpose-animal.model")

ENCODER_DOWNSAMPLE = 8
SAME_PAD = (0, 1)

ArrayOrTensor = Union[Tensor, np.ndarray]


def _t(x: ArrayOrTensor) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


# ─────────────────────────────────────────────────────────────────────────────
# E(x)
# ─────────────────────────────────────────────────────────────────────────────
def encode_image(x: ArrayOrTensor, params: DenoiserParams) -> Tensor:
    cfg = params.config
    x = _t(x)
    if x.shape != (3, cfg.image_h, cfg.image_w):
        raise ShapeError(f"encode_image: obraz {x.shape} vs config (3, {cfg.image_h}, {cfg.image_w})")
    h = x
    for i in (1, 2, 3):
        h = ops.conv2d(h, params[f"enc_w{i}"], stride=2, pad=SAME_PAD)
        h = ops.tanh(ops.add_bias(h, params[f"enc_b{i}"], axis=0))
    h = ops.upsample_nearest(h, ENCODER_DOWNSAMPLE // cfg.stride)
    h = ops.conv2d(h, params["enc_w4"], stride=1, pad=1)
    F = ops.add_bias(h, params["enc_b4"], axis=0)
    if F.shape[1:] != cfg.resolution:
        raise ShapeError(f"encode_image: cechy {F.shape[1:]} vs rozdzielczość heatmap {cfg.resolution}")
    return F


# ─────────────────────────────────────────────────────────────────────────────
# [F; F_g]
# ─────────────────────────────────────────────────────────────────────────────
def fuse_condition(F: Tensor, F_g: ArrayOrTensor, d: Optional[int] = None) -> Tensor:
    """F ⊕ F_g rozciągnięte na H'×W'; `d` (z ModelConfig) sprawdza szerokość priora przed fuzją."""
    g = _t(F_g)
    if F.ndim != 3 or g.ndim != 1:
        raise ShapeError(f"fuse_condition: F {F.shape} (C,H',W'), F_g {g.shape} (d,)")
    if d is not None and g.shape[0] != d:
        raise ShapeError(f"fuse_condition: F_g ma d={g.shape[0]}, model oczekuje d={d} (C={F.shape[0]})")
    _, h, w = F.shape
    return ops.concat([F, ops.broadcast_channels(g, h, w)], axis=0)


# ─────────────────────────────────────────────────────────────────────────────
# CA(y_t, F_fuse, t)
# ─────────────────────────────────────────────────────────────────────────────
def timestep_embedding(t: int, dim: int) -> np.ndarray:
    """Sinusoidalny embedding kroku: [sin(t·ω_i), cos(t·ω_i)], ω_i = 10000^(−i/(dim/2))."""
    half = dim // 2
    freqs = np.exp(-math.log(10000.0) * np.arange(half, dtype=np.float64) / half)
    ang = float(t) * freqs
    return np.concatenate([np.sin(ang), np.cos(ang)])


def cross_attend(
    y_t: ArrayOrTensor,
    F_fuse: Tensor,
    t: int,
    params: DenoiserParams,
    *,
    return_weights: bool = False,
) -> Union[Tensor, Tuple[Tensor, list]]:
    cfg = params.config
    if not (1 <= int(t) <= cfg.T):
        raise ConfigError(f"cross_attend: t={t} poza zakresem [1, {cfg.T}]")
    y = _t(y_t)
    if y.ndim != 3 or y.shape[0] != cfg.N:
        raise ShapeError(f"cross_attend: y_t {y.shape}, oczekiwano ({cfg.N}, H', W')")
    if F_fuse.shape[1:] != y.shape[1:] or F_fuse.shape[0] != cfg.C + cfg.d:
        raise ShapeError(f"cross_attend: y_t {y.shape} vs F_fuse {F_fuse.shape} (C+d={cfg.C + cfg.d})")

    C, heads = cfg.C, cfg.heads
    dh = C // heads
    _, h, w = y.shape
    P = h * w

    Y = ops.transpose(ops.reshape(y, (cfg.N, P)))                  # [P,N]
    Z = ops.transpose(ops.reshape(F_fuse, (C + cfg.d, P)))         # [P,C+d]

    temb = Tensor(timestep_embedding(t, cfg.t_dim)[None, :])
    t_proj = ops.reshape(ops.matmul(temb, params["attn_wt"]), (C,))
    Q = ops.add_bias(ops.matmul(Y, params["attn_wq"]), params["attn_bq"], axis=1)
    Q = ops.add_bias(Q, t_proj, axis=1)
    K = ops.matmul(Z, params["attn_wk"])
    V = ops.matmul(Z, params["attn_wv"])

    inv = 1.0 / math.sqrt(dh)
    outs, weights = [], []
    for k in range(heads):
        lo, hi = k * dh, (k + 1) * dh
        Qh, Kh, Vh = (ops.slice_axis(M, 1, lo, hi) for M in (Q, K, V))
        A = ops.softmax(ops.scale(ops.matmul(Qh, ops.transpose(Kh)), inv), axis=1)   # [P,P]
        weights.append(A)
        outs.append(ops.matmul(A, Vh))
    O = outs[0] if heads == 1 else ops.concat(outs, axis=1)
    O = ops.add_bias(ops.matmul(O, params["attn_wo"]), params["attn_bo"], axis=1)   # [P,C]
    F_CA = ops.reshape(ops.transpose(O), (C, h, w))
    return (F_CA, weights) if return_weights else F_CA


# ─────────────────────────────────────────────────────────────────────────────
# H_kpts(F_D, F_l)
# ─────────────────────────────────────────────────────────────────────────────
def decode_keypoints(F_CA: Tensor, F: Tensor, F_l: ArrayOrTensor, params: DenoiserParams) -> Tensor:
    cfg = params.config
    Fl = _t(F_l)
    if F_CA.shape != F.shape:
        raise ShapeError(f"decode_keypoints: F_CA {F_CA.shape} vs F {F.shape}")
    if Fl.shape != (cfg.N, cfg.d):
        raise ShapeError(f"decode_keypoints: F_l {Fl.shape}, oczekiwano ({cfg.N}, {cfg.d})")
    C, h, w = F.shape
    P = h * w

    F_D = ops.add(F_CA, F)
    Fd = ops.transpose(ops.reshape(F_D, (C, P)))                                   # [P,C]
    G = ops.add_bias(ops.matmul(Fd, params["head_wh"]), params["head_bh"], axis=1)  # [P,d]
    Hm = ops.transpose(ops.matmul(G, ops.transpose(Fl)))                            # [N,P]
    Hm = ops.add_bias(ops.mul_bias(Hm, params["head_scale"], axis=0), params["head_bias"], axis=0)
    return ops.reshape(Hm, (cfg.N, h, w))


def denoise(y_t: ArrayOrTensor, F: Tensor, F_fuse: Tensor, F_l: ArrayOrTensor, t: int,
            params: DenoiserParams) -> Tensor:
    """Jeden krok f_θ przy gotowych cechach obrazu (F, F_fuse liczone raz na obraz)."""
    return decode_keypoints(cross_attend(y_t, F_fuse, t, params), F, F_l, params)


def forward(x: ArrayOrTensor, y_t: ArrayOrTensor, t: int, F_g: ArrayOrTensor, F_l: ArrayOrTensor,
            params: DenoiserParams) -> Tensor:
    F = encode_image(x, params)
    return denoise(y_t, F, fuse_condition(F, F_g, params.config.d), F_l, t, params)
