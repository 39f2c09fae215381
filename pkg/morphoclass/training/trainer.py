"""Fine-tuning loop: cross-entropy, SGD with momentum, early stopping on val loss."""

from __future__ import annotations

import csv
import logging
import math
import random
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Iterable

import numpy as np
import torch
from torch import nn

from ..data.dataset import Manifest, Split
from ..data.preprocess import PreprocessConfig, TaxolImageDataset, build_loader
from ..errors import ConfigError, DatasetError, TrainingError
from ..models.backbone import TaxolNet
from ..models.checkpoint import Checkpoint, snapshot
from .early_stopping import EarlyStopping

logger = logging.getLogger(__name__)

LOG_HEADER = ["epoch", "train_loss", "val_loss", "val_acc"]


@dataclass(slots=True)
class TrainConfig:
    learning_rate: float = 0.001
    momentum: float = 0.9
    weight_decay: float = 5e-4
    batch_size: int = 8
    max_epochs: int = 200
    early_stop_patience: int = 20
    min_delta: float = 1e-6
    seed: int = 42
    deterministic: bool = True

    def __post_init__(self) -> None:
        if self.learning_rate < 0 or self.momentum < 0 or self.weight_decay < 0:
            raise ConfigError("learning_rate, momentum and weight_decay must be non-negative")
        if self.batch_size < 1 or self.max_epochs < 1 or self.early_stop_patience < 1:
            raise ConfigError("batch_size, max_epochs and early_stop_patience must be positive")
        if self.early_stop_patience > self.max_epochs:
            raise ConfigError(
                f"early_stop_patience ({self.early_stop_patience}) exceeds "
                f"max_epochs ({self.max_epochs})"
            )

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(slots=True)
class EpochLog:
    epoch: int
    train_loss: float
    val_loss: float
    val_acc: float


@dataclass(slots=True)
class EpochResult:
    mean_loss: float
    steps: int


@dataclass(slots=True)
class FitResult:
    checkpoint: Checkpoint
    log: list[EpochLog] = field(default_factory=list)
    stopped_early: bool = False

    @property
    def best_epoch(self) -> int:
        return self.checkpoint.epoch


def seed_everything(seed: int, deterministic: bool = True) -> None:
    random.seed(seed)
    np.random.seed(seed % (1 << 32))
    torch.manual_seed(seed)
    if deterministic:
        torch.use_deterministic_algorithms(True, warn_only=True)
        torch.backends.cudnn.deterministic = True
        torch.backends.cudnn.benchmark = False


def build_optimizer(params: Iterable[nn.Parameter], config: TrainConfig) -> torch.optim.SGD:
    # Coupled L2: weight decay is added to the gradient inside SGD.
    trainable = [p for p in params if p.requires_grad]
    return torch.optim.SGD(
        trainable,
        lr=config.learning_rate,
        momentum=config.momentum,
        weight_decay=config.weight_decay,
    )


def _device_of(model: nn.Module) -> torch.device:
    return next(model.parameters()).device


def train_epoch(
    model: TaxolNet,
    dataset: TaxolImageDataset,
    config: TrainConfig,
    optimizer: torch.optim.Optimizer,
    epoch: int = 1,
    num_workers: int = 0,
) -> EpochResult:
    if len(dataset) == 0:
        raise DatasetError("Training split is empty")

    model.train()
    device = _device_of(model)
    criterion = nn.CrossEntropyLoss()
    loader = build_loader(
        dataset,
        batch_size=config.batch_size,
        shuffle=True,
        seed=config.seed,
        epoch=epoch,
        num_workers=num_workers,
    )

    total_loss = 0.0
    seen = 0
    steps = 0
    for images, labels, indices in loader:
        images, labels = images.to(device), labels.to(device)
        optimizer.zero_grad(set_to_none=True)
        loss = criterion(model(images), labels)
        if not torch.isfinite(loss):
            raise TrainingError(
                f"Non-finite training loss {loss.item()} at epoch {epoch}",
                epoch=epoch,
                batch_indices=[int(i) for i in indices],
            )
        loss.backward()
        optimizer.step()
        steps += 1
        total_loss += loss.item() * labels.shape[0]
        seen += labels.shape[0]

    return EpochResult(mean_loss=total_loss / seen, steps=steps)


@torch.no_grad()
def validate(
    model: TaxolNet,
    dataset: TaxolImageDataset,
    batch_size: int = 8,
    num_workers: int = 0,
) -> tuple[float, float]:
    """Mean per-sample cross-entropy and accuracy; never mutates the model."""
    if len(dataset) == 0:
        raise DatasetError("Validation split is empty")

    was_training = model.training
    model.eval()
    device = _device_of(model)
    criterion = nn.CrossEntropyLoss(reduction="sum")
    loader = build_loader(dataset, batch_size=batch_size, shuffle=False, num_workers=num_workers)

    total_loss = 0.0
    correct = 0
    for images, labels, _ in loader:
        images, labels = images.to(device), labels.to(device)
        logits = model(images)
        total_loss += criterion(logits, labels).item()
        correct += int((logits.argmax(dim=1) == labels).sum().item())
    model.train(was_training)

    n = len(dataset)
    return total_loss / n, correct / n


def fit(
    model: TaxolNet,
    manifest: Manifest,
    config: TrainConfig,
    preprocess: PreprocessConfig | None = None,
    num_workers: int = 0,
    on_epoch: Callable[[EpochLog], None] | None = None,
) -> FitResult:
    preprocess = preprocess or PreprocessConfig()
    train_records = manifest.by_split(Split.TRAIN)
    val_records = manifest.by_split(Split.VAL)
    if not train_records or not val_records:
        raise DatasetError("fit needs a manifest with non-empty train and val splits")

    seed_everything(config.seed, config.deterministic)
    train_set = TaxolImageDataset(
        manifest, train_records, preprocess, training_mode=True, seed=config.seed
    )
    val_set = TaxolImageDataset(manifest, val_records, preprocess, training_mode=False)

    optimizer = build_optimizer(model.parameters(), config)
    stopper = EarlyStopping(config.early_stop_patience, config.min_delta)
    log: list[EpochLog] = []
    best: Checkpoint | None = None
    stopped_early = False

    for epoch in range(1, config.max_epochs + 1):
        result = train_epoch(model, train_set, config, optimizer, epoch, num_workers)
        val_loss, val_acc = validate(model, val_set, config.batch_size, num_workers)
        if not math.isfinite(val_loss):
            raise TrainingError(f"Non-finite validation loss at epoch {epoch}", epoch=epoch)

        entry = EpochLog(epoch, result.mean_loss, val_loss, val_acc)
        log.append(entry)
        logger.info(
            "epoch %d: train_loss=%.4f val_loss=%.4f val_acc=%.4f",
            epoch,
            result.mean_loss,
            val_loss,
            val_acc,
        )
        if on_epoch is not None:
            on_epoch(entry)

        if stopper.improved(val_loss):
            best = snapshot(model, optimizer, epoch=epoch, best_val_loss=val_loss)
        if stopper.step(epoch, val_loss):
            stopped_early = True
            break

    assert best is not None
    model.load_state_dict(best.model_state)
    return FitResult(checkpoint=best, log=log, stopped_early=stopped_early)


def write_training_log(log: list[EpochLog], path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(LOG_HEADER)
        for entry in log:
            writer.writerow(
                [entry.epoch, repr(entry.train_loss), repr(entry.val_loss), repr(entry.val_acc)]
            )
    return out


def read_training_log(path: str | Path) -> list[EpochLog]:
    src = Path(path)
    with src.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != LOG_HEADER:
            raise DatasetError(f"{src}: unexpected training log header {reader.fieldnames}")
        return [
            EpochLog(
                epoch=int(row["epoch"]),
                train_loss=float(row["train_loss"]),
                val_loss=float(row["val_loss"]),
                val_acc=float(row["val_acc"]),
            )
            for row in reader
        ]
