from __future__ import annotations

import logging
import math
from dataclasses import dataclass

logger = logging.getLogger(__name__)


@dataclass(slots=True)
class EarlyStopState:
    best_val_loss: float = math.inf
    best_epoch: int = 0
    epochs_since_improvement: int = 0


class EarlyStopping:
    """Stop after `patience` consecutive epochs without a strict loss improvement.

    An epoch improves when its loss is below the best so far by at least
    `min_delta`. The first epoch always improves.
    """

    def __init__(self, patience: int, min_delta: float = 1e-6) -> None:
        if patience < 1:
            raise ValueError(f"patience must be >= 1, got {patience}")
        self.patience = patience
        self.min_delta = min_delta
        self.state = EarlyStopState()

    def improved(self, loss: float) -> bool:
        return loss < self.state.best_val_loss - self.min_delta

    def step(self, epoch: int, loss: float) -> bool:
        """Record one epoch; returns True when training should stop."""
        if self.improved(loss):
            self.state.best_val_loss = loss
            self.state.best_epoch = epoch
            self.state.epochs_since_improvement = 0
            return False

        self.state.epochs_since_improvement += 1
        logger.debug(
            "Early stopping counter: %d/%d",
            self.state.epochs_since_improvement,
            self.patience,
        )
        if self.state.epochs_since_improvement >= self.patience:
            logger.info(
                "Early stopping at epoch %d; best epoch %d (val loss %.6f)",
                epoch,
                self.state.best_epoch,
                self.state.best_val_loss,
            )
            return True
        return False
