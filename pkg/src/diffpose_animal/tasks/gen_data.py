# src/diffpose_animal/tasks/gen_data.py
from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np

from ..cfg import SynthConfig, load_flat_config
from ..errors import ValidationError
from ..log import log
from ..synthdata import SkeletonSpec, builtin_quadruped, generate_split
from ..utils.fs import read_json
from ..utils.manifest import RUN_MANIFEST, RunManifest
from . import require_input

BUILTIN_SKELETONS = {"quadruped": builtin_quadruped}


def load_skeleton(spec: str) -> SkeletonSpec:
    """Nazwa wbudowanego szkieletu albo plik JSON (kąty w stopniach, `parent` 0-based, −1 = korzeń)."""
    if spec in BUILTIN_SKELETONS:
        return BUILTIN_SKELETONS[spec]()
    p = require_input(spec, "--spec")
    data = read_json(p)
    try:
        return SkeletonSpec(
            name=str(data.get("name", p.stem)),
            keypoint_names=tuple(data["keypoint_names"]),
            parent=tuple(int(v) for v in data["parent"]),
            rest_offsets=tuple((float(x), float(y)) for x, y in data["rest_offsets"]),
            angle_ranges=tuple((float(np.deg2rad(lo)), float(np.deg2rad(hi))) for lo, hi in data["angle_ranges_deg"]),
            limb_pairs=tuple((int(i), int(j)) for i, j in data.get("limb_pairs", [])),
        )
    except KeyError as e:
        raise ValidationError(f"{p}: brak pola {e.args[0]!r} w opisie szkieletu") from e


def run(args: argparse.Namespace) -> int:
    out = Path(args.out)
    spec = load_skeleton(args.spec)
    cfg = load_flat_config(args.config, SynthConfig) if args.config else SynthConfig()
    manifest = RunManifest.start(
        out / RUN_MANIFEST, seed=args.seed, config=cfg.model_dump(),
        inputs=[p for p in (args.spec, args.config) if p and Path(p).is_file()],
        outputs={"annotations": out / "annotations.json", "images": out / "images"},
    )
    log.info("gen-data: szkielet=%s N=%d n=%d seed=%d", spec.name, spec.n, args.n, args.seed)
    generate_split(spec, args.n, args.seed, out, cfg, workers=args.workers)
    manifest.finish()
    return 0
