from __future__ import annotations


class MorphoclassError(Exception):
    """Base class for every error the pipeline raises on purpose."""


class ConfigError(MorphoclassError):
    pass


class DatasetError(MorphoclassError):
    pass


class SplitError(MorphoclassError):
    def __init__(self, message: str, label: str | None = None) -> None:
        super().__init__(message)
        self.label = label


class AttentionShapeError(MorphoclassError, ValueError):
    pass


class ModelError(MorphoclassError):
    pass


class TrainingError(MorphoclassError):
    def __init__(
        self, message: str, epoch: int | None = None, batch_indices: list[int] | None = None
    ) -> None:
        super().__init__(message)
        self.epoch = epoch
        self.batch_indices = batch_indices or []


class EmbeddingError(MorphoclassError, ValueError):
    pass


class EvaluationError(MorphoclassError, ValueError):
    pass
