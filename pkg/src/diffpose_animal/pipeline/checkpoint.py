# pipeline/checkpoint.py: CHECKPOINT (nagłówek JSON + rekordy DPAT)
# =====================================================================
# Układ pliku:
#   linia 1:  JSON {version, train_config, model_config, step, epoch, rng_state, param_order}
#   dalej:    |PARAM_ORDER| rekordów parametrów, potem m (|PARAM_ORDER|), potem v (|PARAM_ORDER|)
# =====================================================================

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Optional

import orjson

from ..cfg import ModelConfig, TrainConfig, dump_flat_config
from ..errors import CheckpointMismatchError, ConfigError, FormatError
from ..log import area_logger
from ..model import PARAM_ORDER, DenoiserParams
from ..numerics import read_records, write_records
from ..utils.fs import atomic_write_bytes
from .optim import AdamW

log = area_logger("pipeline")

CHECKPOINT_VERSION = 1


@dataclass
class CheckpointState:
    params: DenoiserParams
    opt: AdamW
    train_config: TrainConfig
    step: int
    epoch: int
    rng_state: Optional[Dict[str, Any]]


def checkpoint_bytes(params: DenoiserParams, opt: AdamW, cfg: TrainConfig, *, step: int, epoch: int,
                     rng_state: Optional[Dict[str, Any]] = None) -> bytes:
    header = {
        "version": CHECKPOINT_VERSION,
        "train_config": cfg.model_dump(),
        "model_config": params.config.model_dump(),
        "step": int(step),
        "epoch": int(epoch),
        "optimizer_step": int(opt.step_count),
        "rng_state": rng_state,
        "param_order": list(PARAM_ORDER),
    }
    buf = io.BytesIO()
    buf.write(orjson.dumps(header, option=orjson.OPT_SORT_KEYS) + b"\n")
    write_records(buf, params.arrays() + opt.moment_arrays())
    return buf.getvalue()


def save_checkpoint(path: Path | str, params: DenoiserParams, opt: AdamW, cfg: TrainConfig, *,
                    step: int, epoch: int, rng_state: Optional[Dict[str, Any]] = None) -> Path:
    p = atomic_write_bytes(path, checkpoint_bytes(params, opt, cfg, step=step, epoch=epoch, rng_state=rng_state))
    log.info("checkpoint → %s (step=%d, epoch=%d)", p, step, epoch)
    return p


def _mismatch(what: str, expected: Any, found: Any) -> CheckpointMismatchError:
    def _txt(c: Any) -> str:
        return dump_flat_config(c) if hasattr(c, "model_dump") else f"{c}\n"
    return CheckpointMismatchError(
        f"checkpoint niezgodny ({what}): odmowa wczytania.\n"
        f"--- oczekiwano ---\n{_txt(expected)}--- w checkpoincie ---\n{_txt(found)}"
    )


def load_checkpoint(path: Path | str, *, expected_model: Optional[ModelConfig] = None,
                    expected_train: Optional[TrainConfig] = None) -> CheckpointState:
    p = Path(path)
    buf = p.read_bytes()
    nl = buf.find(b"\n")
    if nl < 0:
        raise FormatError(f"{p}: brak nagłówka checkpointu", offset=0)
    try:
        header = orjson.loads(buf[:nl])
    except orjson.JSONDecodeError as e:
        raise FormatError(f"{p}: nieczytelny nagłówek JSON: {e}", offset=0) from e

    version = header.get("version")
    if version != CHECKPOINT_VERSION:
        raise _mismatch("wersja", CHECKPOINT_VERSION, version)
    if list(header.get("param_order", [])) != list(PARAM_ORDER):
        raise _mismatch("kolejność parametrów", list(PARAM_ORDER), header.get("param_order"))
    try:
        model_cfg = ModelConfig(**header["model_config"])
        train_cfg = TrainConfig(**header["train_config"])
    except (KeyError, TypeError, ValueError) as e:
        raise ConfigError(f"{p}: niepoprawna konfiguracja w nagłówku: {e}") from e
    if expected_model is not None and expected_model != model_cfg:
        raise _mismatch("konfiguracja modelu", expected_model, model_cfg)
    if expected_train is not None and expected_train != train_cfg:
        raise _mismatch("konfiguracja treningu", expected_train, train_cfg)

    n = len(PARAM_ORDER)
    arrays, end = read_records(buf, nl + 1, count=3 * n)
    if end != len(buf):
        raise FormatError(f"{p}: nadmiarowe bajty po rekordach", offset=end)
    params = DenoiserParams.from_arrays(model_cfg, arrays[:n])
    opt = AdamW(params, lr=train_cfg.lr, betas=(train_cfg.adam_beta1, train_cfg.adam_beta2),
                eps=train_cfg.adam_eps, weight_decay=train_cfg.weight_decay)
    opt.load_moments(arrays[n:], int(header.get("optimizer_step", header["step"])))
    log.info("checkpoint ← %s (step=%d, epoch=%d)", p, header["step"], header["epoch"])
    return CheckpointState(params, opt, train_cfg, int(header["step"]), int(header["epoch"]), header.get("rng_state"))
