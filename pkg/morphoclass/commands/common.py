from __future__ import annotations

import logging
from pathlib import Path
from types import TracebackType

import torch

from ..config import RunConfig, write_resolved_config
from ..data.dataset import Manifest
from ..data.manifest import read_manifest
from ..errors import ConfigError, MorphoclassError
from ..models.backbone import TaxolNet
from ..models.checkpoint import Checkpoint, load_checkpoint, restore_model

logger = logging.getLogger(__name__)


class ArtifactTracker:
    """Remembers every file a command writes; removes them all if the command fails."""

    def __init__(self) -> None:
        self._paths: list[Path] = []

    @property
    def paths(self) -> list[Path]:
        return list(self._paths)

    def add(self, path: str | Path) -> Path:
        p = Path(path)
        self._paths.append(p)
        return p

    def verify(self) -> None:
        missing = [str(p) for p in self._paths if not p.is_file()]
        if missing:
            raise MorphoclassError(f"Declared artifacts were not written: {', '.join(missing)}")

    def __enter__(self) -> "ArtifactTracker":
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> bool:
        if exc_type is None:
            return False
        for path in reversed(self._paths):
            try:
                path.unlink(missing_ok=True)
                logger.info("Removed partial output %s", path)
            except OSError as err:
                logger.warning("Could not remove partial output %s: %s", path, err)
        return False


def echo_config(config: RunConfig, tracker: ArtifactTracker) -> None:
    tracker.add(write_resolved_config(config))


def load_run_manifest(config: RunConfig) -> Manifest:
    return read_manifest(config.manifest_path, root=config.data_root, seed=config.seed)


def checkpoint_path(config: RunConfig, explicit: str | None = None) -> Path:
    if explicit:
        return Path(explicit).expanduser()
    return config.out_path / "checkpoints" / f"{config.model.tag}.pt"


def resolve_device(config: RunConfig) -> torch.device:
    if config.device.startswith("cuda") and not torch.cuda.is_available():
        raise ConfigError(f"Device {config.device!r} requested but CUDA is not available")
    return torch.device(config.device)


def load_trained_model(config: RunConfig, explicit: str | None = None) -> tuple[TaxolNet, Checkpoint, Path]:
    path = checkpoint_path(config, explicit)
    checkpoint = load_checkpoint(path, expected=config.model if not explicit else None)
    model = restore_model(checkpoint).to(resolve_device(config))
    return model, checkpoint, path
