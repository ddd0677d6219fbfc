# metrics/coco.py: AP/AR W STYLU COCO (OKS zamiast IoU)
# =====================================================================
# Przebieg (zgodny z cocoeval):
#   1) per obraz i zakres pola: GT z ignore (brak oznaczeń / iscrowd / pole poza pasmem)
#      sortowane „ignore na koniec”, predykcje po score malejąco (remis → id rosnąco),
#      obcięte do max_dets,
#   2) per próg OKS: zachłanne dopasowanie do nieużytego GT o najwyższym OKS ≥ próg,
#      niedopasowane predykcje spoza pasma pola → ignorowane,
#   3) kumulacja po wszystkich obrazach: krzywa P/R, obwiednia „max precyzji w prawo”,
#      precyzja w 101 punktach recall {0, 0.01, …, 1}.
# Zbiór bez nie-ignorowanych GT → NaN (w raportach null), nie −1.
# =====================================================================

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..cfg import EvalConfig
from ..errors import UndefinedMetricError
from ..heatmap_codec import KeypointSet
from .keypoint import oks

log = logging.getLogger("diffpose-animal.metrics")

RECALL_POINTS = np.linspace(0.0, 1.0, 101)
UNMATCHED = -1  # id w dt_matches / gt_matches, gdy brak dopasowania
AREA_ALL = (0.0, float("inf"))


@dataclass(frozen=True)
class GroundTruth:
    id: int
    image_id: int
    kps: KeypointSet
    iscrowd: bool = False

    @property
    def area(self) -> float:
        return self.kps.area

    @property
    def ignore(self) -> bool:
        return self.iscrowd or not bool(self.kps.labeled.any())


@dataclass(frozen=True)
class Prediction:
    id: int
    image_id: int
    kps: KeypointSet
    score: float

    @property
    def area(self) -> float:
        """Pole z rozpiętości keypointów (jak w cocoeval.loadRes)."""
        lo = self.kps.coords.min(axis=0)
        hi = self.kps.coords.max(axis=0)
        return float((hi[0] - lo[0]) * (hi[1] - lo[1]))


@dataclass
class ImageEval:
    """Wynik dopasowania jednego obrazu (MatchResult): macierze [T, D] / [T, G]."""

    image_id: int
    dt_ids: List[int]
    dt_scores: List[float]
    dt_matches: np.ndarray
    dt_ignore: np.ndarray
    gt_ids: List[int]
    gt_matches: np.ndarray
    gt_ignore: np.ndarray
    oks: np.ndarray = field(repr=False, default_factory=lambda: np.zeros((0, 0)))


def _in_band(area: float, band: Tuple[float, float]) -> bool:
    lo, hi = band
    if lo <= 0.0:
        return area <= hi
    return lo < area <= hi


def oks_matrix(dts: Sequence[Prediction], gts: Sequence[GroundTruth], cfg: EvalConfig) -> np.ndarray:
    out = np.zeros((len(dts), len(gts)), dtype=np.float64)
    for j, g in enumerate(gts):
        try:
            for i, d in enumerate(dts):
                out[i, j] = oks(d.kps, g.kps, cfg)
        except UndefinedMetricError:
            out[:, j] = 0.0
    return out


def evaluate_image(image_id: int, dts: Sequence[Prediction], gts: Sequence[GroundTruth],
                   band: Tuple[float, float], cfg: EvalConfig) -> Optional[ImageEval]:
    if not dts and not gts:
        return None
    thr = cfg.oks_thresholds
    g_ign = np.array([1 if (g.ignore or not _in_band(g.area, band)) else 0 for g in gts], dtype=np.int64)
    g_order = np.argsort(g_ign, kind="mergesort")
    gts = [gts[i] for i in g_order]
    g_ign = g_ign[g_order]
    d_sorted = sorted(dts, key=lambda d: d.id)
    d_order = np.argsort([-d.score for d in d_sorted], kind="mergesort")
    dts = [d_sorted[i] for i in d_order[: cfg.max_dets]]
    crowd = [g.iscrowd for g in gts]
    ious = oks_matrix(dts, gts, cfg)

    T, G, D = len(thr), len(gts), len(dts)
    gtm = np.full((T, G), UNMATCHED, dtype=np.int64)
    dtm = np.full((T, D), UNMATCHED, dtype=np.int64)
    dt_ig = np.zeros((T, D), dtype=bool)
    if G and D:
        for ti, t in enumerate(thr):
            for di, d in enumerate(dts):
                best = min(t, 1.0 - 1e-10)
                m = -1
                for gi, g in enumerate(gts):
                    if gtm[ti, gi] != UNMATCHED and not crowd[gi]:
                        continue
                    if m > -1 and g_ign[m] == 0 and g_ign[gi] == 1:
                        break
                    if ious[di, gi] < best:
                        continue
                    best = ious[di, gi]
                    m = gi
                if m == -1:
                    continue
                dt_ig[ti, di] = bool(g_ign[m])
                dtm[ti, di] = gts[m].id
                gtm[ti, m] = d.id
    out_band = np.array([not _in_band(d.area, band) for d in dts], dtype=bool)[None, :]
    dt_ig = dt_ig | ((dtm == UNMATCHED) & np.repeat(out_band, T, axis=0))
    return ImageEval(image_id, [d.id for d in dts], [d.score for d in dts], dtm, dt_ig,
                     [g.id for g in gts], gtm, g_ign, ious)


def accumulate(evals: Sequence[Optional[ImageEval]], cfg: EvalConfig) -> Tuple[np.ndarray, np.ndarray]:
    """Zwraca (precyzja [T, 101], recall [T]); NaN gdy brak nie-ignorowanych GT."""
    T = len(cfg.oks_thresholds)
    E = [e for e in evals if e is not None]
    precision = np.full((T, RECALL_POINTS.size), np.nan)
    recall = np.full(T, np.nan)
    if not E:
        return precision, recall
    scores = np.concatenate([np.asarray(e.dt_scores, dtype=np.float64) for e in E])
    order = np.argsort(-scores, kind="mergesort")
    dtm = np.concatenate([e.dt_matches for e in E], axis=1)[:, order]
    dtig = np.concatenate([e.dt_ignore for e in E], axis=1)[:, order]
    gtig = np.concatenate([e.gt_ignore for e in E])
    npig = int(np.count_nonzero(gtig == 0))
    if npig == 0:
        return precision, recall

    tps = np.cumsum((dtm != UNMATCHED) & ~dtig, axis=1).astype(np.float64)
    fps = np.cumsum((dtm == UNMATCHED) & ~dtig, axis=1).astype(np.float64)
    for t in range(T):
        tp, fp = tps[t], fps[t]
        nd = tp.size
        rc = tp / npig
        pr = tp / (tp + fp + np.spacing(1))
        recall[t] = rc[-1] if nd else 0.0
        q = np.zeros(RECALL_POINTS.size)
        if nd:
            env = np.maximum.accumulate(pr[::-1])[::-1]
            idx = np.searchsorted(rc, RECALL_POINTS, side="left")
            ok = idx < nd
            q[ok] = env[idx[ok]]
        precision[t] = q
    return precision, recall


def _thr_index(cfg: EvalConfig, value: float) -> Optional[int]:
    hits = [i for i, t in enumerate(cfg.oks_thresholds) if abs(t - value) < 1e-9]
    return hits[0] if hits else None


def _mean(a: np.ndarray) -> float:
    a = np.asarray(a, dtype=np.float64)
    return float(np.mean(a)) if a.size and not np.all(np.isnan(a)) else float("nan")


def coco_ap_ar(preds: Mapping[int, Sequence[Prediction]], gts: Mapping[int, Sequence[GroundTruth]],
               cfg: EvalConfig | None = None) -> Dict[str, float]:
    cfg = cfg or EvalConfig()
    image_ids = sorted(set(gts) | set(preds))
    bands = {"all": AREA_ALL, "medium": tuple(cfg.area_medium), "large": tuple(cfg.area_large)}
    res: Dict[str, Tuple[np.ndarray, np.ndarray]] = {}
    for name, band in bands.items():
        evals = [evaluate_image(i, list(preds.get(i, ())), list(gts.get(i, ())), band, cfg) for i in image_ids]
        res[name] = accumulate(evals, cfg)

    prec, rec = res["all"]
    i50, i75 = _thr_index(cfg, 0.50), _thr_index(cfg, 0.75)
    return {
        "AP": _mean(prec),
        "AP50": _mean(prec[i50]) if i50 is not None else float("nan"),
        "AP75": _mean(prec[i75]) if i75 is not None else float("nan"),
        "AP_M": _mean(res["medium"][0]),
        "AP_L": _mean(res["large"][0]),
        "AR": _mean(rec),
    }
