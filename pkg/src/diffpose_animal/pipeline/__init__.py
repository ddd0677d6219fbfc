"""
Podpakiet pipeline: trening i inferencja denoisera:
train (krok) → runner (epoki, checkpointy, logi) → infer (T kroków od szumu).
"""
from .checkpoint import CHECKPOINT_VERSION, CheckpointState, load_checkpoint, save_checkpoint
from .infer import infer, infer_heatmaps, infer_split, instance_score
from .optim import AdamW, LrSchedule
from .runner import TrainResult, epoch_batches, feed_batches, train
from .train import Batch, make_batch, masked_mse, train_step

__all__ = [
    "AdamW", "LrSchedule",
    "Batch", "make_batch", "masked_mse", "train_step",
    "TrainResult", "train", "epoch_batches", "feed_batches",
    "CHECKPOINT_VERSION", "CheckpointState", "save_checkpoint", "load_checkpoint",
    "infer", "infer_heatmaps", "infer_split", "instance_score",
]
