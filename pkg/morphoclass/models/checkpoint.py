from __future__ import annotations

import io
import random
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import torch

from ..data.dataset import content_hash
from ..errors import ModelError
from .backbone import ModelConfig, TaxolNet, build_model

CHECKPOINT_VERSION = "morphoclass-checkpoint/1"


@dataclass(slots=True)
class Checkpoint:
    model_config: ModelConfig
    model_state: dict[str, torch.Tensor]
    optimizer_state: dict[str, Any] | None = None
    epoch: int = 0
    best_val_loss: float = float("inf")
    rng_state: dict[str, Any] = field(default_factory=dict)


def capture_rng_state() -> dict[str, Any]:
    return {
        "python": random.getstate(),
        "numpy": np.random.get_state(),
        "torch": torch.get_rng_state(),
    }


def restore_rng_state(state: dict[str, Any]) -> None:
    if "python" in state:
        random.setstate(state["python"])
    if "numpy" in state:
        np.random.set_state(state["numpy"])
    if "torch" in state:
        torch.set_rng_state(state["torch"])


def snapshot(
    model: TaxolNet,
    optimizer: torch.optim.Optimizer | None = None,
    epoch: int = 0,
    best_val_loss: float = float("inf"),
) -> Checkpoint:
    """Detached copy of the current model (and optimizer) state."""
    state = {name: tensor.detach().cpu().clone() for name, tensor in model.state_dict().items()}
    opt_state = None
    if optimizer is not None:
        buffer = io.BytesIO()
        torch.save(optimizer.state_dict(), buffer)
        buffer.seek(0)
        opt_state = torch.load(buffer, weights_only=False)
    return Checkpoint(
        model_config=model.config,
        model_state=state,
        optimizer_state=opt_state,
        epoch=epoch,
        best_val_loss=best_val_loss,
        rng_state=capture_rng_state(),
    )


def parameter_payload(checkpoint: Checkpoint) -> bytes:
    """Serialized named parameter arrays, in state-dict order."""
    buffer = io.BytesIO()
    torch.save(checkpoint.model_state, buffer)
    return buffer.getvalue()


def save_checkpoint(checkpoint: Checkpoint, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "version": CHECKPOINT_VERSION,
        "model_config": checkpoint.model_config.to_json(),
        "model_state": checkpoint.model_state,
        "optimizer_state": checkpoint.optimizer_state,
        "epoch": checkpoint.epoch,
        "best_val_loss": checkpoint.best_val_loss,
        "rng_state": checkpoint.rng_state,
    }
    torch.save(payload, out)
    return out


def load_checkpoint(path: str | Path, expected: ModelConfig | None = None) -> Checkpoint:
    src = Path(path)
    if not src.is_file():
        raise ModelError(f"Checkpoint not found: {src}")
    payload = torch.load(src, map_location="cpu", weights_only=False)
    if not isinstance(payload, dict) or payload.get("version") != CHECKPOINT_VERSION:
        raise ModelError(f"{src} is not a {CHECKPOINT_VERSION} file")

    config = ModelConfig(**payload["model_config"])
    if expected is not None and expected.architecture() != config.architecture():
        raise ModelError(
            f"{src} was trained with {config.architecture()}, "
            f"but {expected.architecture()} was requested"
        )
    return Checkpoint(
        model_config=config,
        model_state=payload["model_state"],
        optimizer_state=payload["optimizer_state"],
        epoch=payload["epoch"],
        best_val_loss=payload["best_val_loss"],
        rng_state=payload["rng_state"],
    )


def restore_model(checkpoint: Checkpoint) -> TaxolNet:
    """Rebuild the architecture without downloading weights and load the saved state."""
    config = replace(checkpoint.model_config, pretrained=False, weights_path=None)
    model = build_model(config)
    try:
        model.load_state_dict(checkpoint.model_state, strict=True)
    except RuntimeError as exc:
        raise ModelError(f"Checkpoint does not fit {config.tag}: {exc}") from exc
    model.config = checkpoint.model_config
    return model


def file_hash(path: str | Path) -> str:
    return content_hash(Path(path))
