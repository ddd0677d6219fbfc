# pipeline/infer.py: INFERENCJA (T kroków od szumu do ŷ_0)
# =====================================================================
#   ŷ_T ~ N(0, I)
#   dla t = T..1:   ŷ = H_kpts(CA(ŷ_t, F_fuse, t) + F, F_l)
#     literal:  ŷ_{t−1} := ŷ                      (bez ponownego zaszumiania)
#     ddim:     ŷ_{t−1} := ddim_step(ŷ_t, ŷ, t)   (ŷ traktowane jako ŷ_0)
#   wynik: decode(ŷ_0)
# Parametry tylko do odczytu: brak taśmy, brak mutacji.
# =====================================================================

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from time import perf_counter
from typing import List, Literal, Optional, Tuple

import numpy as np

from ..cfg import TrainConfig, settings
from ..diffusion import DiffusionSchedule, ddim_step, x0_from_eps
from ..errors import ConfigError, ValidationError
from ..heatmap_codec import HeatmapStack, KeypointSet, decode, dump_pgm
from ..log import area_logger
from ..model import DenoiserParams, denoise, encode_image, fuse_condition
from ..numerics import Rng, Tensor
from ..priors import SemanticPrior
from ..synthdata import Split

log = area_logger("pipeline")

Mode = Literal["literal", "ddim"]


def infer_heatmaps(x: np.ndarray, params: DenoiserParams, sched: DiffusionSchedule, prior: SemanticPrior,
                   cfg: TrainConfig, rng: Rng, mode: Optional[Mode] = None) -> HeatmapStack:
    mode = mode or cfg.infer_mode
    if mode not in ("literal", "ddim"):
        raise ConfigError(f"nieznany tryb inferencji: {mode!r}")
    mc = params.config
    if prior.n != mc.N or prior.d != mc.d:
        raise ValidationError(f"infer: prior (N={prior.n}, d={prior.d}) vs model (N={mc.N}, d={mc.d})")
    if sched.T != mc.T:
        raise ConfigError(f"infer: harmonogram T={sched.T} vs model T={mc.T}")

    h, w = mc.resolution
    y = rng.normal((mc.N, h, w))
    F = encode_image(x, params)
    F_fuse = fuse_condition(F, Tensor(prior.F_g), mc.d)
    F_l = Tensor(prior.F_l)
    for t in range(sched.T, 0, -1):
        out = denoise(y, F, F_fuse, F_l, t, params).data
        y0_hat = x0_from_eps(y, out, t, sched) if cfg.loss_target == "eps" else out
        y = y0_hat if mode == "literal" else ddim_step(y, y0_hat, t, sched)
    return HeatmapStack(y, mc.stride)


def infer(x: np.ndarray, params: DenoiserParams, sched: DiffusionSchedule, prior: SemanticPrior,
          cfg: TrainConfig, rng: Rng, mode: Optional[Mode] = None) -> KeypointSet:
    hm = infer_heatmaps(x, params, sched, prior, cfg, rng, mode)
    _, H, W = np.shape(x)
    return decode(hm, cfg.vis_threshold, (0.0, 0.0, float(W), float(H)), prior.species)


def instance_score(kps: KeypointSet) -> float:
    return float(np.mean(kps.score)) if kps.score is not None else 0.0


def infer_split(split: Split, params: DenoiserParams, sched: DiffusionSchedule, prior: SemanticPrior,
                cfg: TrainConfig, seed: int, *, mode: Optional[Mode] = None, workers: Optional[int] = None,
                dump_dir: Optional[Path] = None) -> List[Tuple[int, KeypointSet, float]]:
    """Jedna predykcja na obraz; strumień RNG per obraz: Rng(seed, "infer/<image_id>")."""
    frozen = params.snapshot()
    dump_dir = dump_dir or (Path(settings.HEATMAP_DUMP_DIR) if settings.HEATMAP_DUMP_DIR else None)
    t0 = perf_counter()

    def _one(k: int) -> Tuple[int, KeypointSet, float]:
        iid = split.image_ids[k]
        sample = split.samples[k]
        hm = infer_heatmaps(sample.image, frozen, sched, prior, cfg, Rng(seed, f"infer/{iid}"), mode)
        if dump_dir is not None:
            dump_pgm(hm, dump_dir, prefix=f"{iid:06d}")
        _, H, W = sample.image.shape
        kps = decode(hm, cfg.vis_threshold, (0.0, 0.0, float(W), float(H)), split.species)
        return iid, kps, instance_score(kps)

    with ThreadPoolExecutor(max_workers=workers or settings.WORKERS) as pool:
        out = list(pool.map(_one, range(len(split))))
    log.info("inferencja: %d obrazów, tryb=%s, T=%d (%.0f ms)", len(out), mode or cfg.infer_mode, sched.T,
             (perf_counter() - t0) * 1000.0)
    return out
