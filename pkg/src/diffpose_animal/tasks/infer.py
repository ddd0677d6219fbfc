# src/diffpose_animal/tasks/infer.py
from __future__ import annotations

import argparse
from pathlib import Path

from ..diffusion import make_schedule
from ..log import log
from ..metrics import prediction_records
from ..pipeline import infer_split, load_checkpoint
from ..priors import collapse_prior, load_embeddings
from ..synthdata import load_split
from ..utils.fs import write_json
from ..utils.manifest import RunManifest
from . import require_input


def run(args: argparse.Namespace) -> int:
    out = Path(args.out)
    data = require_input(args.data, "--data")
    emb = require_input(args.embeddings, "--embeddings")
    ckpt = require_input(args.checkpoint, "--checkpoint")

    state = load_checkpoint(ckpt)
    cfg = state.train_config
    seed = cfg.seed if args.seed is None else args.seed
    manifest = RunManifest.start(
        out.with_name(out.name + ".run.json"), seed=seed,
        config={**cfg.model_dump(), "infer_mode": args.mode or cfg.infer_mode},
        inputs=[data / "annotations.json", emb, ckpt], outputs={"predictions": out},
    )
    split = load_split(data)
    prior = load_embeddings(emb, expected_n=split.n_keypoints)
    if cfg.prior_mode == "collapsed":
        prior = collapse_prior(prior, cfg.seed)
    sched = make_schedule(cfg.T, cfg.beta_start, cfg.beta_end)
    preds = infer_split(split, state.params, sched, prior, cfg, seed, mode=args.mode,
                        workers=args.workers, dump_dir=Path(args.dump_dir) if args.dump_dir else None)
    write_json(out, prediction_records(preds))
    log.info("infer: %d predykcji → %s", len(preds), out)
    manifest.finish()
    return 0
