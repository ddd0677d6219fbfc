# src/diffpose_animal/tasks/train.py
from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Any, Dict, Optional, Sequence

from ..cfg import TrainConfig, build_config, parse_flat_text
from ..errors import NonFiniteLossError
from ..log import log
from ..pipeline import train
from ..priors import load_embeddings
from ..synthdata import load_split
from ..utils.manifest import RUN_MANIFEST, RunManifest
from . import require_input


def resolve_train_config(path: Optional[Path | str], overrides: Sequence[str] = ()) -> TrainConfig:
    """Plik key=value + nadpisania `--set k=v` (nadpisania wygrywają)."""
    values: Dict[str, Any] = {}
    source = "<defaults>"
    if path:
        p = require_input(path, "--config")
        source = str(p)
        values.update(parse_flat_text(p.read_text(encoding="utf-8"), source=source))
    if overrides:
        values.update(parse_flat_text("\n".join(overrides), source="--set"))
    return build_config(TrainConfig, values, source=source)


def run(args: argparse.Namespace) -> int:
    out = Path(args.out)
    data = require_input(args.data, "--data")
    emb = require_input(args.embeddings, "--embeddings")
    cfg = resolve_train_config(args.config, args.set or ())
    resume = require_input(args.resume, "--resume") if args.resume else None

    manifest = RunManifest.start(
        out / RUN_MANIFEST, seed=cfg.seed, config=cfg.model_dump(),
        inputs=[p for p in (data / "annotations.json", emb, args.config, resume) if p],
        outputs={"checkpoints": out / "checkpoints", "train_log": out / "train_log.csv",
                 "loss": out / "loss.csv"},
    )
    split = load_split(data)
    prior = load_embeddings(emb, expected_n=split.n_keypoints)
    try:
        res = train(split, prior, cfg, out, resume=resume)
    except NonFiniteLossError as e:
        manifest.finish("non-finite-loss")
        print(f"diagnostyka: {e.diagnostics.get('path', out / 'diagnostics.json')}", file=sys.stderr)
        raise
    log.info("train: %d kroków, checkpoint → %s", res.step, res.final_checkpoint)
    manifest.finish()
    return 0
