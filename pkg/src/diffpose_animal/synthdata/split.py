# synthdata/split.py: ZAPIS / ODCZYT SPLITU (obrazy P3 + adnotacje COCO + manifest)
# =====================================================================
# Układ katalogu:
#   <out>/images/000001.ppm      (P3, 8 bit)
#   <out>/annotations.json       (images / annotations / categories: zgodne z COCO)
#   <out>/manifest.json          (seed splitu + seed/skala/okludery każdej próbki)
#
# Id obrazu = id adnotacji = indeks + 1; `skeleton` w kategorii 1-bazowo (jak COCO).
# Cały split jest czystą funkcją (spec, n, seed, SynthConfig).
# =====================================================================

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from time import perf_counter
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from ..cfg import SynthConfig, settings
from ..errors import FormatError, ValidationError
from ..heatmap_codec import KeypointSet
from ..numerics import Rng
from ..utils.fs import atomic_write_bytes, ensure_dir, read_json, write_json
from .generate import Sample, make_sample
from .skeleton import SkeletonSpec

log = logging.getLogger("diffpose-animal.synthdata")

ANNOTATION_VERSION = 1
IMAGES_DIR = "images"
ANNOTATIONS_FILE = "annotations.json"
MANIFEST_FILE = "manifest.json"


# ─────────────────────────────────────────────────────────────────────────────
# P3 (portable pixmap, tekst)
# ─────────────────────────────────────────────────────────────────────────────
def ppm_bytes(image: np.ndarray) -> bytes:
    _, h, w = image.shape
    px = np.rint(np.clip(image, 0.0, 1.0) * 255.0).astype(int).transpose(1, 2, 0).reshape(h, w * 3)
    rows = "\n".join(" ".join(map(str, r)) for r in px.tolist())
    return f"P3\n{w} {h}\n255\n{rows}\n".encode("ascii")


def read_ppm(path: Path | str) -> np.ndarray:
    p = Path(path)
    tokens: List[str] = []
    for line in p.read_text(encoding="ascii").splitlines():
        tokens.extend(line.split("#", 1)[0].split())
    if len(tokens) < 4 or tokens[0] != "P3":
        raise FormatError(f"{p}: to nie jest plik P3")
    w, h, maxval = (int(t) for t in tokens[1:4])
    vals = tokens[4:]
    if len(vals) != 3 * w * h or maxval <= 0:
        raise FormatError(f"{p}: oczekiwano {3 * w * h} wartości, jest {len(vals)}")
    arr = np.asarray(vals, dtype=np.float64).reshape(h, w, 3).transpose(2, 0, 1) / maxval
    return arr


# ─────────────────────────────────────────────────────────────────────────────
# Generacja
# ─────────────────────────────────────────────────────────────────────────────
def sample_seeds(seed: int, n: int) -> List[int]:
    return Rng(seed, "synth/split").seeds(n) if n > 0 else []


def categories_block(spec: SkeletonSpec) -> List[Dict[str, Any]]:
    return [{
        "id": 1,
        "name": spec.name,
        "keypoints": list(spec.keypoint_names),
        "skeleton": spec.skeleton_1based(),
    }]


def annotation_entry(idx: int, s: Sample) -> Dict[str, Any]:
    return {
        "id": idx,
        "image_id": idx,
        "category_id": 1,
        "bbox": list(s.kps.bbox),
        "keypoints": s.kps.triplets(),
        "num_keypoints": int(s.kps.labeled.sum()),
        "area": s.kps.area,
        "iscrowd": 0,
    }


def generate_split(spec: SkeletonSpec, n: int, seed: int, out_dir: Path | str,
                   cfg: SynthConfig | None = None, workers: Optional[int] = None) -> Dict[str, Any]:
    cfg = cfg or SynthConfig()
    if n < 0:
        raise ValidationError(f"generate_split: n={n} < 0")
    out = Path(out_dir)
    img_dir = out / IMAGES_DIR
    ensure_dir(img_dir)
    seeds = sample_seeds(seed, n)
    t0 = perf_counter()

    def _one(i: int) -> Tuple[Dict[str, Any], Dict[str, Any], Dict[str, Any]]:
        idx = i + 1
        s = make_sample(spec, seeds[i], cfg)
        fname = f"{IMAGES_DIR}/{idx:06d}.ppm"
        atomic_write_bytes(out / fname, ppm_bytes(s.image))
        image = {"id": idx, "file": fname, "width": cfg.canvas, "height": cfg.canvas}
        meta = {"id": idx, "seed": seeds[i], "scale": s.meta["scale"], "occluders": s.meta["occluders"]}
        return image, annotation_entry(idx, s), meta

    with ThreadPoolExecutor(max_workers=workers or settings.WORKERS) as pool:
        rows = list(pool.map(_one, range(n)))

    annotations = {
        "info": {"version": ANNOTATION_VERSION, "generator": "diffpose-animal synthdata"},
        "images": [r[0] for r in rows],
        "annotations": [r[1] for r in rows],
        "categories": categories_block(spec),
    }
    manifest = {
        "version": ANNOTATION_VERSION,
        "skeleton": spec.name,
        "n": n,
        "seed": int(seed),
        "synth_config": cfg.model_dump(),
        "samples": [r[2] for r in rows],
    }
    write_json(out / ANNOTATIONS_FILE, annotations)
    write_json(out / MANIFEST_FILE, manifest)
    log.info("split %s: n=%d seed=%d → %s (%.0f ms)", spec.name, n, seed, out, (perf_counter() - t0) * 1000.0)
    return manifest


# ─────────────────────────────────────────────────────────────────────────────
# Odczyt
# ─────────────────────────────────────────────────────────────────────────────
@dataclass(frozen=True)
class Split:
    root: Path
    species: str
    keypoint_names: Tuple[str, ...]
    skeleton: Tuple[Tuple[int, int], ...]
    image_ids: Tuple[int, ...]
    samples: Tuple[Sample, ...]

    @property
    def n_keypoints(self) -> int:
        return len(self.keypoint_names)

    def __len__(self) -> int:
        return len(self.samples)


def _require(obj: Dict[str, Any], keys: Tuple[str, ...], where: str) -> None:
    miss = [k for k in keys if k not in obj]
    if miss:
        raise ValidationError(f"{where}: brak pola {', '.join(miss)}")


def load_split(root: Path | str, with_images: bool = True) -> Split:
    root = Path(root)
    data = read_json(root / ANNOTATIONS_FILE)
    for k in ("images", "annotations", "categories"):
        if k not in data:
            raise ValidationError(f"{root / ANNOTATIONS_FILE}: brak pola '{k}'")
    if not data["categories"]:
        raise ValidationError(f"{root / ANNOTATIONS_FILE}: pusta lista 'categories'")
    cat = data["categories"][0]
    _require(cat, ("name", "keypoints"), "categories[0]")
    names = tuple(cat["keypoints"])
    skel = tuple((int(i) - 1, int(j) - 1) for i, j in cat.get("skeleton", []))

    by_image: Dict[int, Dict[str, Any]] = {}
    for a in data["annotations"]:
        _require(a, ("image_id", "bbox", "keypoints"), "annotations[]")
        if len(a["keypoints"]) != 3 * len(names):
            raise ValidationError(f"annotations[image_id={a['image_id']}].keypoints: długość "
                                  f"{len(a['keypoints'])}, oczekiwano {3 * len(names)}")
        by_image.setdefault(int(a["image_id"]), a)

    for k, im in enumerate(data["images"]):
        _require(im, ("id",), f"images[{k}]")
        if not (im.get("file") or im.get("file_name")):
            raise ValidationError(f"images[{k}] (id={im['id']}): brak pola file")

    samples, ids = [], []
    for im in sorted(data["images"], key=lambda r: int(r["id"])):
        iid = int(im["id"])
        if iid not in by_image:
            continue
        a = by_image[iid]
        kps = KeypointSet.from_triplets(a["keypoints"], a["bbox"], cat["name"])
        fname = im.get("file") or im.get("file_name")
        image = read_ppm(root / fname) if with_images else np.zeros((3, 1, 1))
        samples.append(Sample(image, kps, {"image_id": iid}))
        ids.append(iid)
    log.info("split ← %s: %d próbek, N=%d", root, len(samples), len(names))
    return Split(root, str(cat["name"]), names, skel, tuple(ids), tuple(samples))
