# src/diffpose_animal/tasks/evaluate.py
from __future__ import annotations

import argparse
from pathlib import Path
from typing import Any, List

import pandas as pd

from ..cfg import EvalConfig, load_flat_config
from ..log import log
from ..metrics import evaluate, load_ground_truth, pair_instances, parse_predictions, pck_curve, write_report
from ..utils.fs import read_json
from ..utils.manifest import RUN_MANIFEST, RunManifest
from . import require_input

PCK_CURVE_FILE = "pck_curve.csv"


def _as_records(data: Any) -> Any:
    """Plik predykcji albo plik adnotacji COCO (predykcje-wyrocznia ze score = 1)."""
    if isinstance(data, dict) and "annotations" in data:
        recs: List[dict] = []
        for a in data["annotations"]:
            recs.append({"image_id": a.get("image_id"), "keypoints": a.get("keypoints"), "score": 1.0})
        return recs
    return data


def run(args: argparse.Namespace) -> int:
    out = Path(args.out)
    gt_path = require_input(args.gt, "--gt")
    pred_path = require_input(args.pred, "--pred")
    cfg = load_flat_config(require_input(args.config, "--config"), EvalConfig) if args.config else EvalConfig()
    manifest = RunManifest.start(
        out / RUN_MANIFEST, seed=None, config=cfg.model_dump(),
        inputs=[gt_path, pred_path, args.config] if args.config else [gt_path, pred_path],
        outputs={"json": out / "metrics.json", "csv": out / "metrics.csv", "pck_curve": out / PCK_CURVE_FILE},
    )
    gts = load_ground_truth(gt_path)
    preds = parse_predictions(_as_records(read_json(pred_path)), gts.n_keypoints, source=str(pred_path))
    report = evaluate(preds, gts, cfg)
    write_report(report, out)

    alphas, values = pck_curve(pair_instances(preds, gts), cfg)
    pd.DataFrame({"alpha": alphas, "pck": values}).to_csv(
        out / PCK_CURVE_FILE, index=False, float_format="%.6f", lineterminator="\n")
    log.info("eval: raport → %s", out)
    manifest.finish()
    return 0
