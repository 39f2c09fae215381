from __future__ import annotations

import logging
from pathlib import Path

import numpy as np
from PIL import Image

from .dataset import DEFAULT_CLASS_DIRS, ClassLabel

logger = logging.getLogger(__name__)


def _texture(label: ClassLabel, side: int, rng: np.random.Generator) -> np.ndarray:
    yy, xx = np.mgrid[0:side, 0:side].astype(np.float64)
    period = 8.0
    phase = rng.uniform(0, 2 * np.pi)
    if label is ClassLabel.CONTROL:
        base = np.sin(2 * np.pi * yy / period + phase)
    elif label is ClassLabel.TAXOL20:
        base = np.sin(2 * np.pi * xx / period + phase)
    elif label is ClassLabel.TAXOL40:
        shift = int(rng.integers(0, 8))
        base = np.where((((xx + shift) // 4) + ((yy + shift) // 4)) % 2 == 0, 1.0, -1.0)
    else:
        base = np.sin(2 * np.pi * (xx + yy) / (period * 2) + phase)
    noise = rng.normal(0.0, 0.15, size=(side, side))
    return np.clip(127.5 + 90.0 * base + 127.5 * noise, 0, 255).astype(np.uint8)


def generate_synthetic_dataset(
    root: str | Path,
    per_class: int = 14,
    side: int = 64,
    seed: int = 0,
    class_dir_map: dict[ClassLabel, str] | None = None,
) -> Path:
    """Write a linearly separable 4-class texture corpus in the released layout.

    Classes differ by texture: horizontal stripes, vertical stripes, a
    checkerboard and diagonal stripes. Files are lossless grayscale PNGs.
    """
    out = Path(root).expanduser()
    class_dir_map = class_dir_map or DEFAULT_CLASS_DIRS
    rng = np.random.default_rng(seed)
    for label in ClassLabel:
        class_dir = out / class_dir_map[label]
        class_dir.mkdir(parents=True, exist_ok=True)
        for idx in range(per_class):
            pixels = _texture(label, side, rng)
            Image.fromarray(pixels).save(class_dir / f"{label.slug}_{idx:03d}.png")
    logger.info("Wrote %d synthetic images per class under %s", per_class, out)
    return out
