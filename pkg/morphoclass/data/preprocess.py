from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np
import torch
from PIL import Image, UnidentifiedImageError
from torch.utils.data import DataLoader, Dataset

from ..errors import ConfigError, DatasetError
from .dataset import ImageRecord, Manifest

IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)


@dataclass(slots=True)
class AugmentationConfig:
    enabled: bool = True
    hflip: bool = True
    vflip: bool = True


@dataclass(slots=True)
class PreprocessConfig:
    target_side: int = 224
    channel_policy: str = "replicate_gray_to_3"
    mean: tuple[float, float, float] = IMAGENET_MEAN
    std: tuple[float, float, float] = IMAGENET_STD
    augmentation: AugmentationConfig = field(default_factory=AugmentationConfig)

    def __post_init__(self) -> None:
        self.mean = tuple(float(v) for v in self.mean)
        self.std = tuple(float(v) for v in self.std)
        if isinstance(self.augmentation, dict):
            self.augmentation = AugmentationConfig(**self.augmentation)
        if self.target_side <= 0:
            raise ConfigError(f"target_side must be positive, got {self.target_side}")
        if len(self.mean) != 3 or len(self.std) != 3:
            raise ConfigError("mean and std must each have 3 entries")
        if any(s <= 0 for s in self.std):
            raise ConfigError("std entries must be positive")
        if self.channel_policy != "replicate_gray_to_3":
            raise ConfigError(f"Unsupported channel policy: {self.channel_policy}")

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


def augmentation_generator(seed: int, epoch: int, index: int) -> torch.Generator:
    """Independent random stream for one record in one epoch."""
    state = np.random.SeedSequence([seed, epoch, index]).generate_state(1, dtype=np.uint64)
    return torch.Generator().manual_seed(int(state[0]) & ((1 << 63) - 1))


def load_and_preprocess(
    record: ImageRecord | str | Path,
    config: PreprocessConfig,
    training_mode: bool = False,
    *,
    root: Path | None = None,
    generator: torch.Generator | None = None,
) -> torch.Tensor:
    """Decode a grayscale image into a normalized 3 x side x side float tensor."""
    path = Path(record.image_path) if isinstance(record, ImageRecord) else Path(record)
    if root is not None and not path.is_absolute():
        path = root / path
    side = config.target_side
    try:
        with Image.open(path) as img:
            gray = img.convert("L").resize((side, side), Image.Resampling.BILINEAR)
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DatasetError(f"Cannot decode image {path}: {exc}") from exc

    pixels = torch.from_numpy(np.asarray(gray, dtype=np.float32) / np.float32(255.0))
    tensor = pixels.unsqueeze(0).expand(3, side, side)

    mean = torch.tensor(config.mean, dtype=torch.float32).view(3, 1, 1)
    std = torch.tensor(config.std, dtype=torch.float32).view(3, 1, 1)
    tensor = (tensor - mean) / std

    aug = config.augmentation
    if training_mode and aug.enabled:
        # Without a generator the global stream drives the flips.
        flips = torch.rand(2, generator=generator)
        if aug.hflip and flips[0] < 0.5:
            tensor = torch.flip(tensor, dims=[2])
        if aug.vflip and flips[1] < 0.5:
            tensor = torch.flip(tensor, dims=[1])
    return tensor.contiguous()


class TaxolImageDataset(Dataset):
    """Records of one split; yields (image, label ordinal, record index)."""

    def __init__(
        self,
        manifest: Manifest,
        records: Sequence[ImageRecord],
        config: PreprocessConfig,
        training_mode: bool = False,
        seed: int = 0,
    ) -> None:
        self._manifest = manifest
        self._records = list(records)
        self._config = config
        self._training_mode = training_mode
        self._seed = seed
        self._epoch = 0

    @property
    def records(self) -> list[ImageRecord]:
        return list(self._records)

    def set_epoch(self, epoch: int) -> None:
        self._epoch = epoch

    def __len__(self) -> int:
        return len(self._records)

    def __getitem__(self, index: int) -> tuple[torch.Tensor, int, int]:
        record = self._records[index]
        generator = None
        if self._training_mode:
            generator = augmentation_generator(self._seed, self._epoch, index)
        image = load_and_preprocess(
            self._manifest.resolve(record),
            self._config,
            training_mode=self._training_mode,
            generator=generator,
        )
        return image, int(record.label), index


def build_loader(
    dataset: TaxolImageDataset,
    batch_size: int,
    shuffle: bool = False,
    seed: int = 0,
    epoch: int = 0,
    num_workers: int = 0,
) -> DataLoader:
    dataset.set_epoch(epoch)
    generator = torch.Generator().manual_seed(seed * 100_003 + epoch)
    return DataLoader(
        dataset,
        batch_size=batch_size,
        shuffle=shuffle,
        generator=generator,
        num_workers=num_workers,
        drop_last=False,
    )
