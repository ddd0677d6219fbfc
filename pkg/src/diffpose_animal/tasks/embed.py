# src/diffpose_animal/tasks/embed.py
from __future__ import annotations

import argparse
from pathlib import Path
from typing import Optional, Tuple

from ..errors import ConfigError, ValidationError
from ..log import log
from ..metrics import load_ground_truth
from ..priors import MIN_D, build_prompts, load_embeddings, pseudo_embed, save_embeddings, write_prompts
from ..utils.manifest import RunManifest
from . import require_input


def _annotation_vocab(path: Path) -> Tuple[str, Tuple[str, ...]]:
    gt = load_ground_truth(path)
    return str(gt.categories[0].get("name", "")), gt.keypoint_names


def prompts_path(out: Path) -> Path:
    return out.with_suffix(".prompts.txt")


def run(args: argparse.Namespace) -> int:
    out = Path(args.out)
    anno: Optional[Path] = require_input(args.keypoints_from, "--keypoints-from") if args.keypoints_from else None
    if not args.import_path:
        if args.d < MIN_D:
            raise ConfigError(f"--d {args.d}: minimum to {MIN_D}")
        if anno is None:
            raise ConfigError("embed: wymagane --keypoints-from <adnotacje> albo --import <plik>")
    manifest = RunManifest.start(
        out.with_name(out.name + ".run.json"), seed=args.seed,
        config={"d": args.d, "species": args.species, "import": args.import_path},
        inputs=[p for p in (anno, args.import_path) if p],
        outputs={"embeddings": out, "prompts": prompts_path(out)},
    )

    if args.import_path:
        prior = load_embeddings(require_input(args.import_path, "--import"))
        if anno is not None:
            _, names = _annotation_vocab(anno)
            if prior.n != len(names):
                raise ValidationError(f"--import: embeddingi mają N={prior.n}, adnotacje N={len(names)}")
        save_embeddings(prior, out)
        manifest.finish()
        return 0

    species, names = _annotation_vocab(anno)
    species = args.species or species
    bundle = build_prompts(species, names)
    write_prompts(bundle, prompts_path(out))
    prior = pseudo_embed(bundle, args.d, args.seed)
    save_embeddings(prior, out)
    log.info("embed: %s → %s (N=%d, d=%d)", species, out, prior.n, prior.d)
    manifest.finish()
    return 0
