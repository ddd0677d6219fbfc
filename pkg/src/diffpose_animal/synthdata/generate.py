# synthdata/generate.py: POZA + RENDER JEDNEJ PRÓBKI
# =====================================================================
# sample_pose: kąty stawów ~ U(angle_ranges), kinematyka prosta od korzenia, obrót
#              globalny ~ U[0, 2π), translacja tak, by keypointy mieściły się w płótnie
#              z marginesem; bbox = ciasne pudełko wokół keypointów + 10%.
# render:      tło = szum wartości o niskiej amplitudzie, kości = odcinki z antyaliasingiem,
#              z prawdopodobieństwem p_occ prostokąt-okluder (widoczność pokrytych → 1).
#
# Piksel (wiersz j, kolumna i) ma środek w (x, y) = (i, j): ta sama konwencja co heatmapy.
# =====================================================================

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Any, Dict, List, Tuple

import numpy as np

from ..cfg import SynthConfig
from ..errors import GenerationError
from ..heatmap_codec import KeypointSet
from ..numerics import Rng
from .skeleton import SkeletonSpec

log = logging.getLogger("diffpose-animal.synthdata")

NOISE_GRID = 4
OCCLUDER_SIDE = (0.2, 0.45)
COLOR_JITTER = 0.1


@dataclass(frozen=True)
class Sample:
    """image: [3,H,W] w [0,1] (kwantyzacja 1/255, zgodna z zapisem P3)."""

    image: np.ndarray
    kps: KeypointSet
    meta: Dict[str, Any] = field(default_factory=dict)


def unit_for(spec: SkeletonSpec, scale: float, cfg: SynthConfig) -> float:
    """Piksele na jednostkę offsetu: dysk zasięgu o średnicy scale·(canvas − 2·margin)."""
    return scale * (cfg.canvas - 2.0 * cfg.margin) / (2.0 * spec.reach())


def padded_bbox(coords: np.ndarray, pad: float, canvas: int) -> Tuple[float, float, float, float]:
    lo = coords.min(axis=0)
    hi = coords.max(axis=0)
    ext = np.maximum(hi - lo, 1.0)
    lo = lo - 0.5 * pad * ext
    hi = lo + (1.0 + pad) * ext
    lo = np.clip(lo, 0.0, canvas)
    hi = np.clip(hi, 0.0, canvas)
    return float(lo[0]), float(lo[1]), float(hi[0] - lo[0]), float(hi[1] - lo[1])


def sample_pose(spec: SkeletonSpec, scale: float, seed: int, cfg: SynthConfig | None = None) -> KeypointSet:
    cfg = cfg or SynthConfig()
    if not scale > 0:
        raise GenerationError(f"sample_pose: scale={scale} musi być > 0")
    rng = Rng(seed, "synth/pose")
    ranges = np.asarray(spec.angle_ranges, dtype=np.float64)
    angles = rng.uniform(ranges[:, 0], ranges[:, 1])
    rotation = rng.uniform(0.0, 2.0 * np.pi)
    pts = spec.forward_kinematics(angles, rotation, unit_for(spec, scale, cfg))

    lo = cfg.margin - pts.min(axis=0)
    hi = (cfg.canvas - 1) - cfg.margin - pts.max(axis=0)
    if np.any(hi < lo):
        raise GenerationError(
            f"sample_pose: płótno {cfg.canvas}px za małe dla skali {scale:.3f} "
            f"(rozpiętość {np.ptp(pts, axis=0).round(2).tolist()}, margines {cfg.margin})"
        )
    coords = pts + rng.uniform(lo, hi)
    vis = np.full(spec.n, 2, dtype=np.int64)
    return KeypointSet(coords, vis, padded_bbox(coords, cfg.bbox_pad, cfg.canvas), spec.name)


# ─────────────────────────────────────────────────────────────────────────────
# Render
# ─────────────────────────────────────────────────────────────────────────────
def value_noise(rng: Rng, size: int, grid: int = NOISE_GRID) -> np.ndarray:
    """Szum wartości [3,size,size] w [0,1]: losowa siatka (grid+1)² interpolowana dwuliniowo."""
    lattice = rng.uniform(0.0, 1.0, (3, grid + 1, grid + 1))
    g = np.arange(size, dtype=np.float64) * grid / max(size - 1, 1)
    i0 = np.minimum(np.floor(g).astype(int), grid - 1)
    f = g - i0
    rows = lattice[:, i0, :] * (1 - f)[None, :, None] + lattice[:, i0 + 1, :] * f[None, :, None]
    return rows[:, :, i0] * (1 - f)[None, None, :] + rows[:, :, i0 + 1] * f[None, None, :]


def segment_coverage(p: np.ndarray, q: np.ndarray, size: int, width: float) -> np.ndarray:
    """Pokrycie [size,size] w [0,1] odcinka p→q o szerokości `width` (antyaliasing 1 px)."""
    yy, xx = np.mgrid[0:size, 0:size].astype(np.float64)
    d = q - p
    L2 = float(d @ d)
    if L2 == 0.0:
        dist = np.hypot(xx - p[0], yy - p[1])
    else:
        s = np.clip(((xx - p[0]) * d[0] + (yy - p[1]) * d[1]) / L2, 0.0, 1.0)
        dist = np.hypot(xx - (p[0] + s * d[0]), yy - (p[1] + s * d[1]))
    return np.clip(0.5 * width + 0.5 - dist, 0.0, 1.0)


def bone_palette(n_bones: int) -> np.ndarray:
    """Stały kolor bazowy per kość (jasne barwy na ciemnym/średnim tle)."""
    hues = np.arange(n_bones, dtype=np.float64) / max(n_bones, 1)
    ang = 2.0 * np.pi * hues
    return np.stack([0.6 + 0.35 * np.cos(ang), 0.6 + 0.35 * np.cos(ang - 2.094), 0.6 + 0.35 * np.cos(ang + 2.094)], 1)


def render(kps: KeypointSet, spec: SkeletonSpec, seed: int, cfg: SynthConfig | None = None) -> Sample:
    cfg = cfg or SynthConfig()
    rng = Rng(seed, "synth/render")
    size = cfg.canvas

    base = rng.uniform(0.25, 0.55, 3)
    img = base[:, None, None] + cfg.background_amplitude * (value_noise(rng, size) - 0.5)

    palette = bone_palette(len(spec.limb_pairs))
    for b, (i, j) in enumerate(spec.limb_pairs):
        color = np.clip(palette[b] + rng.uniform(-COLOR_JITTER, COLOR_JITTER, 3), 0.0, 1.0)
        cov = segment_coverage(kps.coords[i], kps.coords[j], size, cfg.bone_width)
        img = img * (1.0 - cov[None]) + color[:, None, None] * cov[None]

    vis = kps.visibility.copy()
    occluders: List[List[float]] = []
    if rng.random() < cfg.p_occ:
        w, h = rng.uniform(OCCLUDER_SIDE[0] * size, OCCLUDER_SIDE[1] * size, 2)
        x0 = rng.uniform(0.0, size - w)
        y0 = rng.uniform(0.0, size - h)
        occluders.append([float(x0), float(y0), float(w), float(h)])
        img[:, int(np.ceil(y0)):int(np.floor(y0 + h)) + 1, int(np.ceil(x0)):int(np.floor(x0 + w)) + 1] = \
            rng.uniform(0.0, 1.0, 3)[:, None, None]
        x, y = kps.coords[:, 0], kps.coords[:, 1]
        covered = (x >= x0) & (x <= x0 + w) & (y >= y0) & (y <= y0 + h) & (vis == 2)
        vis[covered] = 1

    img = np.rint(np.clip(img, 0.0, 1.0) * 255.0) / 255.0
    return Sample(img, kps.with_visibility(vis), {"seed": int(seed), "occluders": occluders})


def make_sample(spec: SkeletonSpec, seed: int, cfg: SynthConfig | None = None) -> Sample:
    """Skala ~ U[scale_min, scale_max], poza, render: wszystko z jednego seeda próbki."""
    cfg = cfg or SynthConfig()
    scale = float(Rng(seed, "synth/scale").uniform(cfg.scale_min, cfg.scale_max))
    s = render(sample_pose(spec, scale, seed, cfg), spec, seed, cfg)
    return Sample(s.image, s.kps, {**s.meta, "scale": scale})
