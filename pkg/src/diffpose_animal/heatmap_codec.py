# heatmap_codec.py: KEYPOINTY ⇄ HEATMAPY
# =====================================================================
# encode: współrzędne (piksele obrazu) → stos Gaussów N×H'×W' (cel y_0)
# decode: stos heatmap → współrzędne + score + widoczność (odczyt ŷ_0)
#
# Konwencja siatki: komórka (wiersz j, kolumna i) ma środek w (u, v) = (i, j),
# piksel obrazu = komórka · stride. Brak renormalizacji obciętych Gaussów.
# =====================================================================

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np

from .errors import ShapeError, ValidationError

log = logging.getLogger("diffpose-animal.heatmap")

DEFAULT_SIGMA = 2.0
DEFAULT_STRIDE = 4
DEFAULT_VIS_THRESHOLD = 0.3
REFINE_SHIFT = 0.25


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class KeypointSet:
    """Jedna instancja: N×(x, y) w pikselach, widoczność {0,1,2}, bbox (x, y, w, h)."""

    coords: np.ndarray
    visibility: np.ndarray
    bbox: Tuple[float, float, float, float]
    species: str = ""
    score: Optional[np.ndarray] = None

    def __post_init__(self) -> None:
        coords = np.array(self.coords, dtype=np.float64).reshape(-1, 2)
        vis = np.array(self.visibility, dtype=np.int64).reshape(-1)
        if coords.shape[0] != vis.shape[0]:
            raise ShapeError(f"KeypointSet: {coords.shape[0]} współrzędnych vs {vis.shape[0]} flag")
        if not np.all(np.isfinite(coords)):
            raise ValidationError("KeypointSet: współrzędne muszą być skończone")
        if np.any((vis < 0) | (vis > 2)):
            raise ValidationError(f"KeypointSet: widoczność spoza {{0,1,2}}: {vis.tolist()}")
        bbox = tuple(float(b) for b in self.bbox)
        if len(bbox) != 4 or not (bbox[2] > 0 and bbox[3] > 0):
            raise ValidationError(f"KeypointSet: bbox musi mieć w>0 i h>0, otrzymano {self.bbox}")
        object.__setattr__(self, "coords", _frozen(coords))
        object.__setattr__(self, "visibility", _frozen(vis))
        object.__setattr__(self, "bbox", bbox)
        if self.score is not None:
            sc = np.clip(np.array(self.score, dtype=np.float64).reshape(-1), 0.0, 1.0)
            if sc.shape[0] != coords.shape[0]:
                raise ShapeError(f"KeypointSet: score {sc.shape} vs N={coords.shape[0]}")
            object.__setattr__(self, "score", _frozen(sc))

    @property
    def n(self) -> int:
        return int(self.coords.shape[0])

    @property
    def labeled(self) -> np.ndarray:
        return self.visibility > 0

    @property
    def area(self) -> float:
        return float(self.bbox[2] * self.bbox[3])

    def triplets(self) -> List[float]:
        """Płaska lista COCO [x1, y1, v1, x2, ...]."""
        out: List[float] = []
        for (x, y), v in zip(self.coords.tolist(), self.visibility.tolist()):
            out.extend([x, y, int(v)])
        return out

    @classmethod
    def from_triplets(cls, flat: Sequence[float], bbox, species: str = "", score=None) -> "KeypointSet":
        if len(flat) % 3:
            raise ValidationError(f"keypoints: długość {len(flat)} niepodzielna przez 3")
        arr = np.asarray(flat, dtype=np.float64).reshape(-1, 3)
        return cls(arr[:, :2], arr[:, 2].astype(np.int64), tuple(bbox), species, score)

    def with_visibility(self, visibility: np.ndarray) -> "KeypointSet":
        return KeypointSet(self.coords, visibility, self.bbox, self.species, self.score)


@dataclass(frozen=True)
class HeatmapStack:
    values: np.ndarray
    stride: float
    out_of_bounds: Tuple[int, ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        vals = np.array(self.values, dtype=np.float64)
        if vals.ndim != 3 or any(n <= 0 for n in vals.shape):
            raise ShapeError(f"HeatmapStack: wymagane N×H'×W' o dodatnich rozmiarach, otrzymano {vals.shape}")
        if not self.stride > 0:
            raise ValidationError(f"HeatmapStack: stride={self.stride} musi być > 0")
        object.__setattr__(self, "values", _frozen(vals))
        object.__setattr__(self, "out_of_bounds", tuple(int(i) for i in self.out_of_bounds))

    @property
    def n(self) -> int:
        return int(self.values.shape[0])

    @property
    def resolution(self) -> Tuple[int, int]:
        return int(self.values.shape[1]), int(self.values.shape[2])

    def replace(self, values: np.ndarray) -> "HeatmapStack":
        return HeatmapStack(values, self.stride)


# ─────────────────────────────────────────────────────────────────────────────
# encode
# ─────────────────────────────────────────────────────────────────────────────
def encode(kps: KeypointSet, resolution: Tuple[int, int], stride: float = DEFAULT_STRIDE,
           sigma: float = DEFAULT_SIGMA) -> HeatmapStack:
    if not sigma > 0:
        raise ValidationError(f"encode: sigma={sigma} musi być > 0")
    h, w = int(resolution[0]), int(resolution[1])
    uv = kps.coords / float(stride)
    vv = np.arange(h, dtype=np.float64)[:, None]
    uu = np.arange(w, dtype=np.float64)[None, :]

    out = np.zeros((kps.n, h, w), dtype=np.float64)
    oob: List[int] = []
    for i in range(kps.n):
        if kps.visibility[i] == 0:
            continue
        u, v = uv[i]
        if not (0.0 <= u <= w - 1 and 0.0 <= v <= h - 1):
            oob.append(i)
        out[i] = np.exp(-((uu - u) ** 2 + (vv - v) ** 2) / (2.0 * sigma * sigma))
    if oob:
        log.debug("encode: keypointy poza mapą %s (kanały obcięte)", oob)
    return HeatmapStack(out, stride, tuple(oob))


def encode_batch(items: Sequence[KeypointSet], resolution: Tuple[int, int],
                 stride: float = DEFAULT_STRIDE, sigma: float = DEFAULT_SIGMA) -> Tuple[np.ndarray, np.ndarray]:
    """Zwraca (heatmapy [B,N,H',W'], maska widoczności [B,N] w {0,1})."""
    maps = np.stack([encode(k, resolution, stride, sigma).values for k in items])
    mask = np.stack([k.labeled.astype(np.float64) for k in items])
    return maps, mask


# ─────────────────────────────────────────────────────────────────────────────
# decode
# ─────────────────────────────────────────────────────────────────────────────
def _shift(lo: float, hi: float) -> float:
    if hi > lo:
        return REFINE_SHIFT
    if lo > hi:
        return -REFINE_SHIFT
    return 0.0


def decode(hm: HeatmapStack, vis_threshold: float = DEFAULT_VIS_THRESHOLD,
           bbox: Optional[Tuple[float, float, float, float]] = None, species: str = "") -> KeypointSet:
    """
    Argmax per kanał (remis → najmniejszy indeks row-major), przesunięcie o ćwierć komórki
    w stronę większego sąsiada w każdej osi (brak przesunięcia na brzegu lub przy remisie).
    """
    n, h, w = hm.values.shape
    coords = np.zeros((n, 2), dtype=np.float64)
    scores = np.zeros(n, dtype=np.float64)
    for c in range(n):
        ch = hm.values[c]
        flat = int(np.argmax(ch))
        j, i = divmod(flat, w)
        u, v = float(i), float(j)
        if 0 < i < w - 1:
            u += _shift(ch[j, i - 1], ch[j, i + 1])
        if 0 < j < h - 1:
            v += _shift(ch[j - 1, i], ch[j + 1, i])
        coords[c] = (u * hm.stride, v * hm.stride)
        scores[c] = min(max(float(ch[j, i]), 0.0), 1.0)
    vis = np.where(scores >= vis_threshold, 2, 1)
    box = bbox if bbox is not None else (0.0, 0.0, float(w * hm.stride), float(h * hm.stride))
    return KeypointSet(coords, vis, box, species, scores)


# ─────────────────────────────────────────────────────────────────────────────
# debug dump (P2)
# ─────────────────────────────────────────────────────────────────────────────
def dump_pgm(hm: HeatmapStack, out_dir: Path | str, prefix: str = "hm") -> List[Path]:
    """Jeden plik P2 na kanał, wartości przycięte do [0,1] i skalowane do 0–255."""
    d = Path(out_dir)
    d.mkdir(parents=True, exist_ok=True)
    _, h, w = hm.values.shape
    paths: List[Path] = []
    for c, ch in enumerate(hm.values):
        pix = np.rint(np.clip(ch, 0.0, 1.0) * 255.0).astype(int)
        rows = "\n".join(" ".join(str(p) for p in row) for row in pix)
        p = d / f"{prefix}_{c:02d}.pgm"
        p.write_text(f"P2\n{w} {h}\n255\n{rows}\n", encoding="ascii")
        paths.append(p)
    return paths
