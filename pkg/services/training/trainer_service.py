"""
Trainer Service

Mini-batch momentum SGD over extracted patch sets with per-epoch train and
test error curves. Patch sets are expected to be normalized already.
"""

import logging
import time
from pathlib import Path
from typing import List, Optional, Tuple, Union

import numpy as np

from db.model_store import save_model
from db.records import EpochCsvWriter
from models.config_models import TrainConfig
from models.frame_models import PatchLabel, PatchSet
from models.network_models import CnnModel
from models.training_models import EpochRecord
from services.network import backward, forward, predict_proba, sgd_step
from utils.errors import ConfigError, DataError, NumericError, ShapeError
from utils.parallel import Execution, resolve

logger = logging.getLogger(__name__)

EVAL_BATCH_SIZE = 256


def _check_patches(model: CnnModel, patches: PatchSet, cfg: TrainConfig, split: str) -> None:
    if len(patches) == 0:
        raise DataError(f"{split} patch set is empty")
    if patches.channels != cfg.channels:
        raise ConfigError(f"{split} patches have {patches.channels} channels, config expects {cfg.channels}")
    if model.channels != patches.channels:
        raise ConfigError(f"model has {model.channels} input channels, {split} patches have {patches.channels}")


def classify_batch(model: CnnModel, data: np.ndarray, batch_size: int = EVAL_BATCH_SIZE,
                   execution: Optional[Execution] = None) -> np.ndarray:
    """Softmax posteriors (N, 2) for normalized (N, C, 32, 32) data."""
    if data.ndim != 4 or data.shape[1] != model.channels:
        raise ShapeError("channels", model.channels, data.shape[1] if data.ndim == 4 else data.shape,
                         op="classify")
    execution = resolve(execution)
    if len(data) == 0:
        return np.zeros((0, model.num_classes), dtype=np.float64)
    parts = [predict_proba(model, data[start:start + batch_size].astype(model.dtype, copy=False), execution)
             for start in range(0, len(data), batch_size)]
    return np.concatenate(parts).astype(np.float64)


def classify(model: CnnModel, patch: np.ndarray) -> Tuple[PatchLabel, float]:
    """
    Classify one normalized (C, 32, 32) patch.

    Returns:
        (argmax label, softmax probability of the occlusion class)
    """
    patch = np.asarray(patch)
    if patch.ndim != 3:
        raise ShapeError("patch rank", 3, patch.ndim, op="classify")
    probs = classify_batch(model, patch[np.newaxis], execution=Execution(threads=1))[0]
    return PatchLabel(int(np.argmax(probs))), float(probs[PatchLabel.OCCLUSION])


def predict_labels(model: CnnModel, patches: PatchSet, execution: Optional[Execution] = None) -> np.ndarray:
    probs = classify_batch(model, patches.data, execution=execution)
    return np.argmax(probs, axis=1).astype(np.uint8)


def error_rate(model: CnnModel, patches: PatchSet, execution: Optional[Execution] = None) -> float:
    if len(patches) == 0:
        raise DataError("cannot compute the error of an empty patch set")
    predicted = predict_labels(model, patches, execution)
    return float(np.mean(predicted != patches.labels))


def _subsample(patches: PatchSet, size: Optional[int], rng: np.random.Generator) -> PatchSet:
    if size is None or size >= len(patches):
        return patches
    return patches.subset(np.sort(rng.choice(len(patches), size=size, replace=False)))


def train(
    model: CnnModel,
    train_patches: PatchSet,
    test_patches: PatchSet,
    cfg: TrainConfig,
    execution: Optional[Execution] = None,
    epochs_csv: Optional[Union[str, Path]] = None,
    checkpoint_dir: Optional[Union[str, Path]] = None,
) -> Tuple[CnnModel, List[EpochRecord]]:
    """
    Train a model in place.

    Each epoch shuffles the training patches with a generator seeded once from
    cfg.shuffle_seed, runs forward/backward/sgd_step per mini-batch (the last
    partial batch included) and then measures the error of the end-of-epoch
    model on both splits, each optionally on a seeded per-epoch subsample.

    Args:
        model: Initialized model, updated in place
        train_patches: Normalized training patches
        test_patches: Normalized test patches from frames disjoint from training
        cfg: Training configuration
        execution: Worker settings for the batch forward/backward
        epochs_csv: Optional CSV file receiving one row per epoch
        checkpoint_dir: Directory for checkpoint files when cfg.checkpoint_every > 0

    Returns:
        (model, epoch records)
    """
    _check_patches(model, train_patches, cfg, "train")
    _check_patches(model, test_patches, cfg, "test")
    shared = train_patches.frames() & test_patches.frames()
    if shared:
        raise DataError(f"train and test patches share frames {sorted(shared)[:10]}")

    records: List[EpochRecord] = []
    if cfg.epochs == 0:
        return model, records

    execution = resolve(execution)
    shuffle_rng = np.random.default_rng(cfg.shuffle_seed)
    test_rng = np.random.default_rng([cfg.shuffle_seed, 1])
    train_rng = np.random.default_rng([cfg.shuffle_seed, 2])
    writer = EpochCsvWriter(epochs_csv) if epochs_csv is not None else None
    n = len(train_patches)
    data = train_patches.data.astype(model.dtype, copy=False)
    labels = train_patches.labels.astype(np.int64)

    logger.info(f"Training on {n} patches ({train_patches.positives} occlusion), "
                f"testing on {len(test_patches)}, {cfg.epochs} epochs of batch {cfg.batch_size}")
    for epoch in range(1, cfg.epochs + 1):
        started = time.perf_counter()
        order = shuffle_rng.permutation(n)
        loss_sum = 0.0
        mistakes = 0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            logits = forward(model, data[idx], execution=execution)
            loss, grads = backward(model, labels[idx], execution=execution)
            if not np.isfinite(loss):
                raise NumericError(f"non-finite loss {loss} at epoch {epoch}, batch starting {start}")
            sgd_step(model, grads, lr=cfg.lr, momentum=cfg.momentum, l2=cfg.l2, l2_on_output=cfg.l2_on_output)
            loss_sum += loss * len(idx)
            mistakes += int(np.count_nonzero(np.argmax(logits, axis=1) != labels[idx]))
            logger.debug(f"epoch {epoch} batch {start // cfg.batch_size}: loss {loss:.5f}")
        logger.debug(f"epoch {epoch}: running mini-batch error {mistakes / n:.4f}")

        train_error = error_rate(model, _subsample(train_patches, cfg.train_subsample, train_rng), execution)
        test_error = error_rate(model, _subsample(test_patches, cfg.test_subsample, test_rng), execution)

        record = EpochRecord(
            epoch=epoch,
            train_error=train_error,
            test_error=test_error,
            mean_loss=loss_sum / n,
            wall_time=time.perf_counter() - started,
        )
        records.append(record)
        logger.info(f"Epoch {epoch}/{cfg.epochs}: loss {record.mean_loss:.4f}, "
                    f"train error {record.train_error:.4f}, test error {record.test_error:.4f} "
                    f"({record.wall_time:.1f}s)")
        if writer is not None:
            writer.append(record)
        if checkpoint_dir is not None and cfg.checkpoint_every and epoch % cfg.checkpoint_every == 0:
            save_model(model, Path(checkpoint_dir) / f"checkpoint_epoch_{epoch:03d}.ocnn")
    return model, records
