# pipeline/train.py: JEDEN KROK TRENINGU (batch → strata → backward → AdamW)
# =====================================================================
# Dla każdej próbki batcha:
#   t ~ U{1..T},  ε ~ N(0, I),  y_t = √ᾱ_t·y_0 + √(1−ᾱ_t)·ε
#   F = E(x),  F_fuse = [F; F_g],  ŷ = H_kpts(CA(y_t, F_fuse, t) + F, F_l)
#   L_i = MSE(ŷ, cel) po kanałach z v > 0      (cel = y_0 lub ε: loss_target)
# L = średnia po batchu; jedna taśma na krok.
# =====================================================================

from __future__ import annotations

from dataclasses import dataclass
from typing import List, Sequence

import numpy as np

from ..cfg import TrainConfig
from ..diffusion import DiffusionSchedule, forward_sample
from ..errors import NonFiniteLossError, NumericInputError, ShapeError, ValidationError
from ..heatmap_codec import encode_batch
from ..log import area_logger
from ..model import DenoiserParams, denoise, encode_image, fuse_condition
from ..numerics import Rng, Tape, Tensor, backward, ops
from ..priors import SemanticPrior
from ..synthdata import Sample
from .optim import AdamW

log = area_logger("pipeline")


@dataclass(frozen=True)
class Batch:
    images: np.ndarray      # [B,3,H,W]
    heatmaps: np.ndarray    # [B,N,H',W']  (y_0)
    mask: np.ndarray        # [B,N]        (1 = oznaczony)

    def __len__(self) -> int:
        return int(self.images.shape[0])


def make_batch(samples: Sequence[Sample], cfg: TrainConfig, resolution) -> Batch:
    if not samples:
        raise ValidationError("make_batch: pusty batch")
    maps, mask = encode_batch([s.kps for s in samples], resolution, cfg.stride, cfg.sigma)
    if not cfg.mask_unlabeled:
        mask = np.ones_like(mask)
    return Batch(np.stack([s.image for s in samples]), maps, mask)


def masked_mse(pred: Tensor, target: np.ndarray, mask: np.ndarray) -> Tensor:
    """Średni błąd kwadratowy po komórkach kanałów z maską 1 (brak takich kanałów → 0)."""
    target = np.asarray(target, dtype=np.float64)
    if pred.shape != target.shape:
        raise ShapeError(f"masked_mse: predykcja {pred.shape} vs cel {target.shape}")
    n, h, w = pred.shape
    m = np.broadcast_to(np.asarray(mask, dtype=np.float64)[:, None, None], (n, h, w))
    denom = float(np.asarray(mask).sum()) * h * w
    sq = ops.mul_const(ops.square(ops.sub_const(pred, target)), m)
    return ops.scale(ops.sum_all(sq), 1.0 / denom if denom else 0.0)


def _max_abs_grad(params: DenoiserParams) -> float:
    vals = [float(np.max(np.abs(p.grad))) for _, p in params if p.grad is not None and p.grad.size]
    return max(vals) if vals else 0.0


def train_step(
    batch: Batch,
    params: DenoiserParams,
    opt: AdamW,
    sched: DiffusionSchedule,
    prior: SemanticPrior,
    cfg: TrainConfig,
    rng: Rng,
    *,
    step: int = 0,
) -> float:
    B = len(batch)
    if B == 0:
        raise ValidationError("train_step: pusty batch")
    N = batch.heatmaps.shape[1]
    if prior.n != N or params.config.N != N:
        raise ValidationError(f"train_step: prior N={prior.n}, model N={params.config.N}, dane N={N}")

    ts: List[int] = [int(rng.integers(1, sched.T)) for _ in range(B)]
    eps = [rng.normal(batch.heatmaps.shape[1:]) for _ in range(B)]
    F_g, F_l = Tensor(prior.F_g), Tensor(prior.F_l)

    opt.zero_grad()
    try:
        with Tape() as tape:
            losses = []
            for i in range(B):
                y_t = forward_sample(batch.heatmaps[i], ts[i], eps[i], sched)
                F = encode_image(batch.images[i], params)
                pred = denoise(y_t, F, fuse_condition(F, F_g, params.config.d), F_l, ts[i], params)
                target = batch.heatmaps[i] if cfg.loss_target == "x0" else eps[i]
                losses.append(masked_mse(pred, target, batch.mask[i]))
            total = losses[0] if B == 1 else ops.concat([ops.reshape(l, (1,)) for l in losses], axis=0)
            loss = ops.mean_all(total)
        backward(loss, tape)
    except NumericInputError as e:
        # NaN/Inf w aktywacjach (np. wejście softmax) traktujemy jak NaN w stracie
        raise NonFiniteLossError(
            f"NaN/Inf w przebiegu w przód w kroku {step}: {e}",
            {"step": step, "t": ts, "loss": float("nan"), "max_abs_grad": None, "lr": opt.current_lr},
        ) from e

    value = loss.item()
    gmax = _max_abs_grad(params)
    if not (np.isfinite(value) and np.isfinite(gmax)):
        raise NonFiniteLossError(
            f"strata NaN/Inf w kroku {step}: loss={value!r}",
            {"step": step, "t": ts, "loss": value, "max_abs_grad": gmax, "lr": opt.current_lr},
        )
    opt.step()
    return value
