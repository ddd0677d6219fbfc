# metrics/io.py: WCZYTYWANIE GT (COCO) I PREDYKCJI (JSON)
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Sequence, Tuple

from ..errors import ValidationError
from ..heatmap_codec import KeypointSet
from ..utils.fs import read_json
from .coco import GroundTruth, Prediction

log = logging.getLogger("diffpose-animal.metrics")

PREDICTIONS_VERSION = 1


@dataclass
class GroundTruthSet:
    keypoint_names: Tuple[str, ...]
    by_image: Dict[int, List[GroundTruth]]
    species_of_image: Dict[int, str]
    skipped_degenerate: int = 0
    categories: List[Dict[str, Any]] = field(default_factory=list)

    @property
    def n_keypoints(self) -> int:
        return len(self.keypoint_names)

    @property
    def n_instances(self) -> int:
        return sum(len(v) for v in self.by_image.values())


def _field(obj: Dict[str, Any], key: str, where: str) -> Any:
    if key not in obj:
        raise ValidationError(f"{where}: brak pola '{key}'")
    return obj[key]


def parse_ground_truth(data: Dict[str, Any], *, source: str = "<annotations>") -> GroundTruthSet:
    cats = _field(data, "categories", source)
    if not cats:
        raise ValidationError(f"{source}: pusta lista 'categories'")
    cat_by_id = {int(c.get("id", 1)): c for c in cats}
    names = tuple(_field(cats[0], "keypoints", f"{source}.categories[0]"))
    for c in cats[1:]:
        if len(c.get("keypoints", ())) != len(names):
            raise ValidationError(f"{source}: kategorie mają różną liczbę keypointów")

    by_image: Dict[int, List[GroundTruth]] = {}
    species: Dict[int, str] = {}
    for im in _field(data, "images", source):
        by_image.setdefault(int(_field(im, "id", f"{source}.images[]")), [])
    skipped = 0
    next_id = 1
    for k, a in enumerate(_field(data, "annotations", source)):
        where = f"{source}.annotations[{k}]"
        iid = int(_field(a, "image_id", where))
        flat = _field(a, "keypoints", where)
        if len(flat) != 3 * len(names):
            raise ValidationError(f"{where}.keypoints: długość {len(flat)}, oczekiwano {3 * len(names)}")
        bbox = [float(v) for v in _field(a, "bbox", where)]
        if len(bbox) != 4:
            raise ValidationError(f"{where}.bbox: oczekiwano [x, y, w, h]")
        cat = cat_by_id.get(int(a.get("category_id", 1)), cats[0])
        if not (bbox[2] > 0 and bbox[3] > 0):
            skipped += 1
            continue
        kps = KeypointSet.from_triplets(flat, bbox, str(cat.get("name", "")))
        by_image.setdefault(iid, []).append(GroundTruth(next_id, iid, kps, bool(a.get("iscrowd", 0))))
        species.setdefault(iid, kps.species)
        next_id += 1
    if skipped:
        log.warning("%s: pominięto %d adnotacji z zerowym bbox", source, skipped)
    return GroundTruthSet(names, by_image, species, skipped, list(cats))


def load_ground_truth(path: Path | str) -> GroundTruthSet:
    p = Path(path)
    return parse_ground_truth(read_json(p), source=str(p))


def prediction_records(preds: Sequence[Tuple[int, KeypointSet, float]]) -> List[Dict[str, Any]]:
    """[(image_id, kps, score)] → lista JSON {image_id, keypoints[3N], score} (kolejność zachowana)."""
    return [
        {"image_id": int(iid), "category_id": 1, "keypoints": k.triplets(), "score": float(s)}
        for iid, k, s in preds
    ]


def parse_predictions(records: Any, n_keypoints: int, *, source: str = "<predictions>") -> Dict[int, List[Prediction]]:
    if not isinstance(records, list):
        raise ValidationError(f"{source}: oczekiwano listy predykcji")
    out: Dict[int, List[Prediction]] = {}
    for k, r in enumerate(records):
        where = f"{source}[{k}]"
        iid = int(_field(r, "image_id", where))
        flat = _field(r, "keypoints", where)
        if len(flat) != 3 * n_keypoints:
            raise ValidationError(f"{where}.keypoints: długość {len(flat)}, oczekiwano {3 * n_keypoints}")
        score = float(_field(r, "score", where))
        vis = [max(int(round(v)), 0) for v in flat[2::3]]
        coords = list(zip(flat[0::3], flat[1::3]))
        xs = [c[0] for c in coords]
        ys = [c[1] for c in coords]
        bbox = (min(xs), min(ys), max(max(xs) - min(xs), 1.0), max(max(ys) - min(ys), 1.0))
        kps = KeypointSet(coords, [min(v, 2) for v in vis], bbox)
        out.setdefault(iid, []).append(Prediction(k + 1, iid, kps, score))
    return out


def load_predictions(path: Path | str, n_keypoints: int) -> Dict[int, List[Prediction]]:
    p = Path(path)
    return parse_predictions(read_json(p), n_keypoints, source=str(p))
