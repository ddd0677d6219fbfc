# runner.py: ORKIESTRACJA TRENINGU (etapy 01→05)
# =====================================
#   01 data     : wczytanie splitu treningowego
#   02 prior    : embeddingi (+ ablacja „collapsed”), zgodność N z danymi
#   03 init     : parametry + AdamW (świeże albo z checkpointu)
#   04 train    : pętla epok; batche składa wątek-podajnik do ograniczonej kolejki
#   05 finalize : checkpoint końcowy, train_log.csv / loss.csv
#
# RNG kroku = Rng(seed, "step/<k>"): wznowienie od checkpointu odtwarza przebieg bit-w-bit.
# =====================================

from __future__ import annotations

import queue
import threading
from dataclasses import dataclass
from pathlib import Path
from time import perf_counter
from typing import Any, Dict, Iterator, List, Optional, Sequence

import pandas as pd

from ..cfg import TrainConfig, dump_flat_config
from ..diffusion import make_schedule
from ..errors import ContractError, NonFiniteLossError
from ..log import area_logger
from ..model import DenoiserParams, init_params
from ..numerics import Rng
from ..priors import SemanticPrior, collapse_prior
from ..synthdata import Split
from ..utils.fs import atomic_write_bytes, ensure_dir, write_json
from .checkpoint import load_checkpoint, save_checkpoint
from .optim import AdamW, LrSchedule
from .train import Batch, make_batch, train_step

log = area_logger("pipeline.runner")

QUEUE_DEPTH = 4
CHECKPOINT_DIR = "checkpoints"
TRAIN_LOG = "train_log.csv"
LOSS_LOG = "loss.csv"
DIAGNOSTICS = "diagnostics.json"
LOSS_COLUMNS = ["step", "epoch", "loss", "lr"]


@dataclass
class TrainResult:
    params: DenoiserParams
    opt: AdamW
    step: int
    final_checkpoint: Path
    log: pd.DataFrame


# ─────────────────────────────────────────────────────────────────────────────
# Preflight: kontrakty między etapami
# ─────────────────────────────────────────────────────────────────────────────
def _preflight_after_data(split: Split, cfg: TrainConfig) -> None:
    if len(split) == 0:
        raise ContractError("[PREFLIGHT][01.after_data] pusty split treningowy")
    shapes = {s.image.shape for s in split.samples}
    if len(shapes) != 1:
        raise ContractError(f"[PREFLIGHT][01.after_data] różne rozmiary obrazów: {sorted(shapes)}")
    _, h, w = next(iter(shapes))
    if h % 8 or w % 8 or h % cfg.stride or w % cfg.stride:
        raise ContractError(f"[PREFLIGHT][01.after_data] obraz {h}x{w} niepodzielny przez 8 / stride={cfg.stride}")
    log.info("[PREFLIGHT] 01.after_data OK (n=%d, obraz=%dx%d, N=%d)", len(split), h, w, split.n_keypoints)


def _preflight_prior(split: Split, prior: SemanticPrior) -> None:
    if prior.n != split.n_keypoints:
        raise ContractError(
            f"[PREFLIGHT][02.prior] embeddingi mają N={prior.n}, dane N={split.n_keypoints}")
    if prior.keypoint_names and tuple(prior.keypoint_names) != tuple(split.keypoint_names):
        log.warning("[PREFLIGHT] 02.prior: nazwy keypointów w embeddingach różnią się od adnotacji")
    log.info("[PREFLIGHT] 02.prior OK (N=%d, d=%d, źródło=%s)", prior.n, prior.d, prior.source)


# ─────────────────────────────────────────────────────────────────────────────
# Podajnik batchy (wątek roboczy → ograniczona kolejka → wątek treningu)
# ─────────────────────────────────────────────────────────────────────────────
_DONE = object()


def epoch_batches(split: Split, cfg: TrainConfig, epoch: int) -> List[List[int]]:
    order = Rng(cfg.seed, f"epoch/{epoch}").permutation(len(split)).tolist()
    return [order[i:i + cfg.batch_size] for i in range(0, len(order), cfg.batch_size)]


def feed_batches(split: Split, cfg: TrainConfig, index_batches: Sequence[Sequence[int]],
                 resolution) -> Iterator[Batch]:
    q: "queue.Queue[Any]" = queue.Queue(maxsize=QUEUE_DEPTH)
    stop = threading.Event()

    def _producer() -> None:
        try:
            for idx in index_batches:
                if stop.is_set():
                    return
                q.put(make_batch([split.samples[i] for i in idx], cfg, resolution))
        except BaseException as e:  # przekazujemy do wątku treningu
            q.put(e)
        finally:
            q.put(_DONE)

    th = threading.Thread(target=_producer, name="batch-feeder", daemon=True)
    th.start()
    try:
        while True:
            item = q.get()
            if item is _DONE:
                break
            if isinstance(item, BaseException):
                raise item
            yield item
    finally:
        stop.set()
        while th.is_alive():
            try:
                q.get_nowait()
            except queue.Empty:
                th.join(timeout=0.05)


# ─────────────────────────────────────────────────────────────────────────────
# Logi
# ─────────────────────────────────────────────────────────────────────────────
def _write_logs(out: Path, rows: List[Dict[str, Any]]) -> pd.DataFrame:
    df = pd.DataFrame(rows, columns=LOSS_COLUMNS + ["wall_ms"])
    df.to_csv(out / TRAIN_LOG, index=False, float_format="%.17g", lineterminator="\n")
    atomic_write_bytes(out / LOSS_LOG, df[LOSS_COLUMNS].to_csv(index=False, float_format="%.17g",
                                                               lineterminator="\n").encode("utf-8"))
    return df


def _previous_rows(out: Path, upto_step: int) -> List[Dict[str, Any]]:
    p = out / TRAIN_LOG
    if not p.is_file():
        return []
    df = pd.read_csv(p, float_precision="round_trip")
    df = df[df["step"] <= upto_step]
    return df.to_dict("records")


# ─────────────────────────────────────────────────────────────────────────────
# RUNNER
# ─────────────────────────────────────────────────────────────────────────────
def train(split: Split, prior: SemanticPrior, cfg: TrainConfig, out_dir: Path | str, *,
          resume: Optional[Path | str] = None) -> TrainResult:
    out = Path(out_dir)
    ensure_dir(out / CHECKPOINT_DIR)
    atomic_write_bytes(out / "resolved_config.txt", dump_flat_config(cfg).encode("utf-8"))
    log.info("[RUN] start trening: epoki=%d batch=%d lr=%.2e T=%d cel=%s → %s",
             cfg.epochs, cfg.batch_size, cfg.lr, cfg.T, cfg.loss_target, out)
    t_all0 = perf_counter()
    perf: Dict[str, float] = {}

    # [01] dane
    t0 = perf_counter()
    log.info("[STAGE 01] running…")
    _preflight_after_data(split, cfg)
    _, H, W = split.samples[0].image.shape
    perf["01_data"] = (perf_counter() - t0) * 1000.0
    log.info("[STAGE 01] ok (%.0f ms)", perf["01_data"])

    # [02] prior
    t0 = perf_counter()
    log.info("[STAGE 02] running…")
    if cfg.prior_mode == "collapsed":
        prior = collapse_prior(prior, cfg.seed)
    _preflight_prior(split, prior)
    perf["02_prior"] = (perf_counter() - t0) * 1000.0
    log.info("[STAGE 02] ok (%.0f ms)", perf["02_prior"])

    # [03] init / resume
    t0 = perf_counter()
    log.info("[STAGE 03] running…")
    model_cfg = cfg.model_config_for(N=split.n_keypoints, d=prior.d, image_h=H, image_w=W)
    sched = make_schedule(cfg.T, cfg.beta_start, cfg.beta_end)
    lr_sched = LrSchedule(cfg.lr, tuple(cfg.lr_decay_epochs), cfg.lr_decay_factor)
    rows: List[Dict[str, Any]] = []
    if resume is not None:
        st = load_checkpoint(resume, expected_model=model_cfg, expected_train=cfg)
        params, opt, step, start_epoch = st.params, st.opt, st.step, st.epoch + 1
        rows = _previous_rows(out, step)
        log.info("[STAGE 03] wznowienie od epoki %d (step=%d)", start_epoch, step)
    else:
        params = init_params(model_cfg, cfg.seed)
        opt = AdamW(params, lr=cfg.lr, betas=(cfg.adam_beta1, cfg.adam_beta2), eps=cfg.adam_eps,
                    weight_decay=cfg.weight_decay)
        step, start_epoch = 0, 0
    perf["03_init"] = (perf_counter() - t0) * 1000.0
    log.info("[STAGE 03] ok (%.0f ms)", perf["03_init"])

    # [04] pętla treningu
    t0 = perf_counter()
    log.info("[STAGE 04] running…")
    wall0 = perf_counter()
    wall_base = float(rows[-1]["wall_ms"]) if rows else 0.0
    ckpt_path = out / CHECKPOINT_DIR / "final.ckpt"
    try:
        for epoch in range(start_epoch, cfg.epochs):
            opt.set_lr(lr_sched.lr_at(epoch))
            ep_losses: List[float] = []
            for batch in feed_batches(split, cfg, epoch_batches(split, cfg, epoch), model_cfg.resolution):
                step += 1
                loss = train_step(batch, params, opt, sched, prior, cfg, Rng(cfg.seed, f"step/{step}"), step=step)
                ep_losses.append(loss)
                rows.append({"step": step, "epoch": epoch, "loss": loss, "lr": opt.current_lr,
                             "wall_ms": wall_base + (perf_counter() - wall0) * 1000.0})
            log.info("[EPOCH %d/%d] loss=%.6f lr=%.2e kroki=%d", epoch + 1, cfg.epochs,
                     sum(ep_losses) / max(len(ep_losses), 1), opt.current_lr, step)
            if (epoch + 1) % cfg.checkpoint_every == 0 or epoch + 1 == cfg.epochs:
                save_checkpoint(out / CHECKPOINT_DIR / f"epoch_{epoch + 1:03d}.ckpt", params, opt, cfg,
                                step=step, epoch=epoch, rng_state=Rng(cfg.seed, f"step/{step + 1}").state)
                _write_logs(out, rows)
    except NonFiniteLossError as e:
        diag = write_json(out / DIAGNOSTICS, e.diagnostics)
        _write_logs(out, rows)
        log.error("[STAGE 04] strata NaN/Inf: diagnostyka: %s", diag)
        e.diagnostics["path"] = str(diag)
        raise
    perf["04_train"] = (perf_counter() - t0) * 1000.0
    log.info("[STAGE 04] ok (%.0f ms)", perf["04_train"])

    # [05] finalizacja
    t0 = perf_counter()
    log.info("[STAGE 05] running…")
    save_checkpoint(ckpt_path, params, opt, cfg, step=step, epoch=cfg.epochs - 1,
                    rng_state=Rng(cfg.seed, f"step/{step + 1}").state)
    df = _write_logs(out, rows)
    perf["05_finalize"] = (perf_counter() - t0) * 1000.0
    log.info("[STAGE 05] ok (%.0f ms)", perf["05_finalize"])

    log.info(
        "[PERF] 01_data=%.0f ms | 02_prior=%.0f ms | 03_init=%.0f ms | 04_train=%.0f ms | "
        "05_finalize=%.0f ms | total=%.0f ms",
        perf["01_data"], perf["02_prior"], perf["03_init"], perf["04_train"], perf["05_finalize"],
        (perf_counter() - t_all0) * 1000.0,
    )
    return TrainResult(params, opt, step, ckpt_path, df)
