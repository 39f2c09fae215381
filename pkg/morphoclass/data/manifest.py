from __future__ import annotations

import csv
import logging
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from ..errors import DatasetError, SplitError
from .dataset import ClassLabel, ImageRecord, Manifest, Split

logger = logging.getLogger(__name__)

MANIFEST_HEADER = ["path", "label", "split", "sha256"]


@dataclass(slots=True)
class SplitSpec:
    val_per_class: int = 16
    test_per_class: int = 16
    seed: int = 42

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(slots=True)
class LeakageReport:
    offenders: dict[str, list[tuple[str, str]]] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return not self.offenders

    def describe(self) -> str:
        if self.passed:
            return "No leakage: every image content appears in exactly one split."
        lines = [f"Leakage: {len(self.offenders)} image(s) appear in more than one split"]
        for digest, places in sorted(self.offenders.items()):
            where = ", ".join(f"{split}:{path}" for split, path in places)
            lines.append(f"  {digest}  {where}")
        return "\n".join(lines)


def stratified_split(manifest: Manifest, spec: SplitSpec) -> Manifest:
    """Assign every record to train/val/test with exact per-class val and test counts.

    Records are grouped by content hash so byte-identical files always land in
    the same split. Groups are sorted by hash and shuffled with a per-class
    stream derived from (seed, class ordinal); val is filled first, then test,
    and the remainder goes to train.
    """
    if spec.val_per_class < 0 or spec.test_per_class < 0:
        raise SplitError("Split counts must be non-negative")

    by_class: dict[ClassLabel, list[ImageRecord]] = defaultdict(list)
    for record in manifest.records:
        by_class[record.label].append(record)

    for label in ClassLabel:
        size = len(by_class[label])
        if spec.val_per_class + spec.test_per_class >= size:
            raise SplitError(
                f"Unsatisfiable split for class {label.slug}: "
                f"{spec.val_per_class} val + {spec.test_per_class} test "
                f"needs more than {size} images",
                label=label.slug,
            )

    assigned: list[ImageRecord] = []
    for label in ClassLabel:
        assigned.extend(_split_class(label, by_class[label], spec))

    assigned.sort(key=lambda r: (r.label, r.image_path))
    return Manifest(records=assigned, seed=spec.seed, root=manifest.root)


def _split_class(
    label: ClassLabel, records: list[ImageRecord], spec: SplitSpec
) -> list[ImageRecord]:
    groups: dict[str, list[ImageRecord]] = defaultdict(list)
    for record in records:
        groups[record.content_hash].append(record)
    hashes = sorted(groups)

    rng = np.random.default_rng([spec.seed, int(label)])
    order = rng.permutation(len(hashes))

    targets = {Split.VAL: spec.val_per_class, Split.TEST: spec.test_per_class}
    filled = {Split.VAL: 0, Split.TEST: 0}
    out: list[ImageRecord] = []
    for idx in order:
        group = groups[hashes[idx]]
        split = Split.TRAIN
        for candidate in (Split.VAL, Split.TEST):
            if filled[candidate] + len(group) <= targets[candidate]:
                split = candidate
                filled[candidate] += len(group)
                break
        out.extend(record.assign(split) for record in group)

    for candidate, target in targets.items():
        if filled[candidate] != target:
            raise SplitError(
                f"Unsatisfiable split for class {label.slug}: duplicate images "
                f"leave {candidate.value} with {filled[candidate]} of {target}",
                label=label.slug,
            )
    return out


def verify_no_leakage(manifest: Manifest) -> LeakageReport:
    places: dict[str, list[tuple[str, str]]] = defaultdict(list)
    for record in manifest.records:
        places[record.content_hash].append((record.split.value, record.image_path))

    report = LeakageReport()
    for digest, where in places.items():
        if len({split for split, _ in where}) > 1:
            report.offenders[digest] = sorted(where)
    return report


def split_summary(manifest: Manifest) -> str:
    counts = manifest.split_counts()
    rows = [("Class", "Train", "Validation", "Test")]
    totals = {Split.TRAIN: 0, Split.VAL: 0, Split.TEST: 0}
    for label in ClassLabel:
        per = counts[label]
        rows.append(
            (
                label.display_name,
                str(per[Split.TRAIN]),
                str(per[Split.VAL]),
                str(per[Split.TEST]),
            )
        )
        for split in totals:
            totals[split] += per[split]
    rows.append(
        ("Total", str(totals[Split.TRAIN]), str(totals[Split.VAL]), str(totals[Split.TEST]))
    )
    widths = [max(len(row[i]) for row in rows) for i in range(4)]
    lines = [
        "  ".join(
            cell.ljust(widths[i]) if i == 0 else cell.rjust(widths[i])
            for i, cell in enumerate(row)
        )
        for row in rows
    ]
    lines.insert(1, "-" * len(lines[0]))
    lines.insert(len(lines) - 1, "-" * len(lines[0]))
    return "\n".join(lines)


def write_manifest(manifest: Manifest, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(MANIFEST_HEADER)
        for record in manifest.records:
            writer.writerow(
                [record.image_path, record.label.slug, record.split.value, record.content_hash]
            )
    return out


def read_manifest(
    path: str | Path, root: str | Path | None = None, seed: int | None = None
) -> Manifest:
    src = Path(path)
    if not src.is_file():
        raise DatasetError(f"Manifest not found: {src}")

    with src.open("r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != MANIFEST_HEADER:
            raise DatasetError(
                f"{src}: expected header {','.join(MANIFEST_HEADER)}, got {header}"
            )
        records: list[ImageRecord] = []
        for line_no, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(MANIFEST_HEADER):
                raise DatasetError(f"{src}:{line_no}: expected 4 fields, got {len(row)}")
            image_path, label, split, digest = row
            try:
                split_value = Split(split)
            except ValueError:
                raise DatasetError(f"{src}:{line_no}: unknown split {split!r}") from None
            records.append(
                ImageRecord(
                    image_path=image_path,
                    label=ClassLabel.from_slug(label),
                    content_hash=digest,
                    split=split_value,
                )
            )

    root_path = Path(root).expanduser().resolve() if root is not None else None
    return Manifest(records=records, seed=seed, root=root_path)
