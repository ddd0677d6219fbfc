from .coco import GroundTruth, ImageEval, Prediction, accumulate, coco_ap_ar, evaluate_image
from .io import GroundTruthSet, load_ground_truth, load_predictions, parse_ground_truth, parse_predictions, prediction_records
from .keypoint import PckResult, auc, oks, pck, pck_counts, pck_curve
from .report import evaluate, pair_instances, write_report

__all__ = [
    "oks", "pck", "pck_counts", "pck_curve", "auc", "PckResult",
    "GroundTruth", "Prediction", "ImageEval", "evaluate_image", "accumulate", "coco_ap_ar",
    "GroundTruthSet", "load_ground_truth", "parse_ground_truth", "load_predictions",
    "parse_predictions", "prediction_records", "evaluate", "pair_instances", "write_report",
]
