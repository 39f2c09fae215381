from __future__ import annotations

import hashlib
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field, replace
from enum import Enum, IntEnum
from pathlib import Path
from typing import Any, Iterable

from PIL import Image, UnidentifiedImageError

from ..errors import DatasetError

logger = logging.getLogger(__name__)

IMAGE_EXTENSIONS = {
    ".jpg",
    ".jpeg",
    ".png",
    ".tif",
    ".tiff",
    ".bmp",
}

RELEASED_IMAGE_SIZE = (1600, 1200)


class ClassLabel(IntEnum):
    """Treatment group. Ordinals are fixed and index every confusion matrix."""

    CONTROL = 0
    TAXOL20 = 1
    TAXOL40 = 2
    TAXOL100 = 3

    @property
    def slug(self) -> str:
        return self.name.lower()

    @property
    def display_name(self) -> str:
        return _DISPLAY_NAMES[self]

    @classmethod
    def from_slug(cls, slug: str) -> "ClassLabel":
        try:
            return cls[slug.strip().upper()]
        except KeyError:
            raise DatasetError(f"Unknown class label: {slug!r}") from None


_DISPLAY_NAMES = {
    ClassLabel.CONTROL: "Control",
    ClassLabel.TAXOL20: "20 µM",
    ClassLabel.TAXOL40: "40 µM",
    ClassLabel.TAXOL100: "100 µM",
}

DEFAULT_CLASS_DIRS: dict[ClassLabel, str] = {
    ClassLabel.CONTROL: "Control",
    ClassLabel.TAXOL20: "20uM",
    ClassLabel.TAXOL40: "40uM",
    ClassLabel.TAXOL100: "100uM",
}


class Split(str, Enum):
    TRAIN = "train"
    VAL = "val"
    TEST = "test"
    UNASSIGNED = "unassigned"


@dataclass(slots=True, frozen=True)
class ImageRecord:
    image_path: str
    label: ClassLabel
    content_hash: str
    split: Split = Split.UNASSIGNED
    width: int | None = None
    height: int | None = None

    def assign(self, split: Split) -> "ImageRecord":
        if self.split is not Split.UNASSIGNED:
            raise DatasetError(
                f"{self.image_path} is already assigned to {self.split.value}"
            )
        return replace(self, split=split)

    def to_json(self) -> dict[str, Any]:
        data = asdict(self)
        data["label"] = self.label.slug
        data["split"] = self.split.value
        return data


@dataclass(slots=True)
class Manifest:
    records: list[ImageRecord]
    seed: int | None = None
    root: Path | None = field(default=None, compare=False)

    def __len__(self) -> int:
        return len(self.records)

    def by_split(self, split: Split) -> list[ImageRecord]:
        return [r for r in self.records if r.split is split]

    def class_counts(self) -> dict[ClassLabel, int]:
        counts = {label: 0 for label in ClassLabel}
        for record in self.records:
            counts[record.label] += 1
        return counts

    def split_counts(self) -> dict[ClassLabel, dict[Split, int]]:
        counts = {
            label: {Split.TRAIN: 0, Split.VAL: 0, Split.TEST: 0} for label in ClassLabel
        }
        for record in self.records:
            if record.split is not Split.UNASSIGNED:
                counts[record.label][record.split] += 1
        return counts

    def is_assigned(self) -> bool:
        return all(r.split is not Split.UNASSIGNED for r in self.records)

    def resolve(self, record: ImageRecord) -> Path:
        path = Path(record.image_path)
        if self.root is None or path.is_absolute():
            return path
        return self.root / path


def content_hash(path: Path) -> str:
    digest = hashlib.sha256()
    with path.open("rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


def probe_image(path: Path) -> tuple[int, int]:
    """Fully decode an image and return (width, height)."""
    try:
        with Image.open(path) as img:
            img.load()
            return img.size
    except (UnidentifiedImageError, OSError, ValueError) as exc:
        raise DatasetError(f"Cannot decode image {path}: {exc}") from exc


def _iter_image_files(folder: Path) -> Iterable[Path]:
    for path in sorted(folder.rglob("*")):
        if not path.is_file() or path.name.startswith("."):
            continue
        if path.suffix.lower() not in IMAGE_EXTENSIONS:
            logger.warning("Skipping non-image file %s", path)
            continue
        yield path


def scan_dataset(
    root: str | Path,
    class_dir_map: dict[ClassLabel, str] | None = None,
    expected_size: tuple[int, int] | None = RELEASED_IMAGE_SIZE,
) -> Manifest:
    root_path = Path(root).expanduser().resolve()
    if not root_path.is_dir():
        raise DatasetError(f"Dataset root does not exist: {root_path}")

    class_dir_map = class_dir_map or DEFAULT_CLASS_DIRS
    missing = [label for label in ClassLabel if label not in class_dir_map]
    if missing:
        names = ", ".join(label.slug for label in missing)
        raise DatasetError(f"No class directory configured for: {names}")

    records: list[ImageRecord] = []
    for label in ClassLabel:
        class_dir = root_path / class_dir_map[label]
        if not class_dir.is_dir():
            raise DatasetError(
                f"Missing directory for class {label.slug}: {class_dir}"
            )
        found = 0
        for file_path in _iter_image_files(class_dir):
            width, height = probe_image(file_path)
            if expected_size is not None and (width, height) != tuple(expected_size):
                raise DatasetError(
                    f"{file_path} is {width}x{height}, expected "
                    f"{expected_size[0]}x{expected_size[1]}"
                )
            records.append(
                ImageRecord(
                    image_path=file_path.relative_to(root_path).as_posix(),
                    label=label,
                    content_hash=content_hash(file_path),
                    width=width,
                    height=height,
                )
            )
            found += 1
        if found == 0:
            raise DatasetError(f"No images found for class {label.slug} in {class_dir}")

    _warn_duplicates(records)
    records.sort(key=lambda r: (r.label, r.image_path))
    manifest = Manifest(records=records, root=root_path)
    counts = manifest.class_counts()
    logger.info(
        "Scanned %d images: %s",
        len(records),
        ", ".join(f"{label.slug}={counts[label]}" for label in ClassLabel),
    )
    return manifest


def _warn_duplicates(records: list[ImageRecord]) -> None:
    paths_by_hash: dict[str, list[str]] = defaultdict(list)
    for record in records:
        paths_by_hash[record.content_hash].append(record.image_path)
    for digest, paths in paths_by_hash.items():
        if len(paths) > 1:
            logger.warning("Identical content %s in %s", digest[:12], ", ".join(paths))
