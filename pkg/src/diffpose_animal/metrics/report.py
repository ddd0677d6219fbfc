# metrics/report.py: PEŁNY RAPORT EWALUACJI (ogółem + per gatunek)
from __future__ import annotations

import logging
import math
from pathlib import Path
from typing import Any, Dict, List, Mapping, Sequence

import pandas as pd

from ..cfg import EvalConfig
from ..utils.fs import ensure_dir, write_json
from .coco import Prediction, coco_ap_ar
from .io import GroundTruthSet
from .keypoint import Pair, auc, pck

log = logging.getLogger("diffpose-animal.metrics")

REPORT_VERSION = 1
METRIC_COLUMNS = ["AP", "AP50", "AP75", "AP_M", "AP_L", "AR", "PCK", "AUC"]


def pair_instances(preds: Mapping[int, Sequence[Prediction]], gts: GroundTruthSet,
                   image_ids: Sequence[int] | None = None) -> List[Pair]:
    """Para (najlepiej oceniona predykcja obrazu, pierwsza adnotacja obrazu); obrazy bez predykcji pomijane."""
    out: List[Pair] = []
    ids = sorted(gts.by_image) if image_ids is None else image_ids
    for iid in ids:
        g = gts.by_image.get(iid) or []
        p = preds.get(iid) or []
        if not g or not p:
            continue
        best = sorted(p, key=lambda d: (-d.score, d.id))[0]
        out.append((best.kps, g[0].kps))
    return out


def _group(preds, gts: GroundTruthSet, image_ids: Sequence[int], cfg: EvalConfig) -> Dict[str, Any]:
    sub_gts = {i: gts.by_image.get(i, []) for i in image_ids}
    sub_preds = {i: list(preds.get(i, ())) for i in image_ids}
    rec: Dict[str, Any] = dict(coco_ap_ar(sub_preds, sub_gts, cfg))
    pairs = pair_instances(preds, gts, image_ids)
    p = pck(pairs, cfg.pck_alpha, cfg)
    rec["PCK"] = p.value
    rec["AUC"] = auc(pairs, cfg)
    rec["n_images"] = len(image_ids)
    rec["n_instances"] = sum(len(v) for v in sub_gts.values())
    rec["n_pairs"] = len(pairs)
    rec["n_labeled_keypoints"] = p.total
    rec["pck_skipped"] = p.skipped
    rec["n_unlabeled_instances"] = sum(1 for v in sub_gts.values() for g in v if not g.kps.labeled.any())
    return rec


def evaluate(preds: Mapping[int, Sequence[Prediction]], gts: GroundTruthSet,
             cfg: EvalConfig | None = None) -> Dict[str, Any]:
    cfg = cfg or EvalConfig()
    all_ids = sorted(set(gts.by_image) | set(preds))
    species: Dict[str, List[int]] = {}
    for iid in all_ids:
        species.setdefault(gts.species_of_image.get(iid, ""), []).append(iid)

    report = {
        "version": REPORT_VERSION,
        "overall": _group(preds, gts, all_ids, cfg),
        "per_species": {s: _group(preds, gts, ids, cfg) for s, ids in sorted(species.items()) if s},
        "config": {
            "kappa": cfg.kappas(gts.n_keypoints),
            "oks_thresholds": list(cfg.oks_thresholds),
            "pck_alpha": cfg.pck_alpha,
            "pck_norm_rule": cfg.pck_norm_rule,
            "auc_range": [0.0, cfg.auc_max],
            "auc_step": cfg.auc_step,
            "area_medium": list(cfg.area_medium),
            "area_large": list(cfg.area_large),
            "max_dets": cfg.max_dets,
        },
        "skipped_degenerate_bbox": gts.skipped_degenerate,
        "keypoint_names": list(gts.keypoint_names),
    }
    o = report["overall"]
    log.info("eval: AP=%.4f AP50=%.4f AR=%.4f PCK@%.2f=%.4f AUC=%.4f (obrazy=%d)",
             o["AP"], o["AP50"], o["AR"], cfg.pck_alpha, o["PCK"], o["AUC"], o["n_images"])
    return report


def _nan_to_none(obj: Any) -> Any:
    if isinstance(obj, float) and math.isnan(obj):
        return None
    if isinstance(obj, dict):
        return {k: _nan_to_none(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_nan_to_none(v) for v in obj]
    return obj


def report_frame(report: Dict[str, Any]) -> pd.DataFrame:
    rows = [{"group": "overall", **report["overall"]}]
    rows += [{"group": f"species:{s}", **r} for s, r in report["per_species"].items()]
    df = pd.DataFrame(rows)
    df["pck_alpha"] = report["config"]["pck_alpha"]
    df["pck_norm_rule"] = report["config"]["pck_norm_rule"]
    lead = ["group"] + METRIC_COLUMNS
    return df[lead + [c for c in df.columns if c not in lead]]


def write_report(report: Dict[str, Any], out_dir: Path | str) -> Dict[str, Path]:
    out = Path(out_dir)
    ensure_dir(out)
    jpath = write_json(out / "metrics.json", _nan_to_none(report))
    cpath = out / "metrics.csv"
    report_frame(report).to_csv(cpath, index=False, float_format="%.6f", na_rep="nan", lineterminator="\n")
    log.info("raport metryk → %s, %s", jpath, cpath)
    return {"json": jpath, "csv": cpath}
