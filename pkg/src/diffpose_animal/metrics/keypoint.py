# metrics/keypoint.py: OKS, PCK@α, AUC
# =====================================================================
#   OKS = Σ_i exp(−d_i² / (2 s² k_i²)) · [v_i>0] / Σ_i [v_i>0],   s² = pole bbox GT
#   PCK = #{labeled i : ‖x̂_i − x_i‖ / norm < α} / #labeled,     norm = max(w, h) bbox GT
#   AUC = ∫_0^0.5 PCK(α) dα / 0.5  (trapez po siatce co 0.01)
# =====================================================================

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from ..cfg import EvalConfig
from ..errors import ShapeError, UndefinedMetricError, ValidationError
from ..heatmap_codec import KeypointSet

log = logging.getLogger("diffpose-animal.metrics")

Pair = Tuple[KeypointSet, KeypointSet]  # (pred, gt)


def _same_n(pred: KeypointSet, gt: KeypointSet) -> None:
    if pred.n != gt.n:
        raise ShapeError(f"predykcja ma N={pred.n}, GT ma N={gt.n}")


def oks(pred: KeypointSet, gt: KeypointSet, cfg: EvalConfig | None = None) -> float:
    cfg = cfg or EvalConfig()
    _same_n(pred, gt)
    lab = gt.labeled
    if not lab.any():
        raise UndefinedMetricError("OKS niezdefiniowane: GT bez oznaczonych keypointów (v_i == 0 dla wszystkich)")
    k = np.asarray(cfg.kappas(gt.n), dtype=np.float64)
    d2 = np.sum((pred.coords - gt.coords) ** 2, axis=1)
    s2 = gt.area
    e = np.exp(-d2 / (2.0 * s2 * k * k))
    return float(e[lab].sum() / lab.sum())


@dataclass(frozen=True)
class PckResult:
    value: float
    correct: int
    total: int
    skipped: int


def pck_counts(pairs: Sequence[Pair], alpha: float) -> PckResult:
    """Jak `pck`, ale dopuszcza α = 0 (punkt startowy krzywej AUC)."""
    correct = total = skipped = 0
    for pred, gt in pairs:
        _same_n(pred, gt)
        norm = max(gt.bbox[2], gt.bbox[3])
        if not norm > 0:
            skipped += 1
            continue
        lab = gt.labeled
        dist = np.linalg.norm(pred.coords - gt.coords, axis=1) / norm
        correct += int(np.count_nonzero(dist[lab] < alpha))
        total += int(lab.sum())
    value = correct / total if total else float("nan")
    return PckResult(value, correct, total, skipped)


def pck(pairs: Sequence[Pair], alpha: float | None = None, cfg: EvalConfig | None = None) -> PckResult:
    cfg = cfg or EvalConfig()
    alpha = cfg.pck_alpha if alpha is None else float(alpha)
    if not alpha > 0:
        raise ValidationError(f"pck: alpha={alpha} musi być > 0")
    res = pck_counts(pairs, alpha)
    if res.skipped:
        log.warning("PCK: pominięto %d instancji z zerowym bbox", res.skipped)
    return res


def pck_curve(pairs: Sequence[Pair], cfg: EvalConfig | None = None) -> Tuple[List[float], List[float]]:
    cfg = cfg or EvalConfig()
    alphas = cfg.auc_alphas()
    return alphas, [pck_counts(pairs, a).value for a in alphas]


def auc(pairs: Sequence[Pair], cfg: EvalConfig | None = None) -> float:
    cfg = cfg or EvalConfig()
    alphas, values = pck_curve(pairs, cfg)
    if any(np.isnan(values)):
        return float("nan")
    return float(np.trapz(values, alphas) / cfg.auc_max)
