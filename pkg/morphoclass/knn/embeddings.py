from __future__ import annotations

import csv
from pathlib import Path
from typing import Sequence

import numpy as np

from ..data.dataset import ClassLabel
from ..errors import EmbeddingError


class EmbeddingSet:
    """N x D float32 embeddings with aligned class ordinals and record ids."""

    __slots__ = ("vectors", "labels", "source_ids")

    def __init__(
        self,
        vectors: np.ndarray,
        labels: Sequence[ClassLabel | int],
        source_ids: Sequence[str] | None = None,
    ) -> None:
        self.vectors = np.ascontiguousarray(np.asarray(vectors, dtype=np.float32))
        self.labels = np.asarray([int(label) for label in labels], dtype=np.int64)
        if source_ids is None:
            source_ids = [str(i) for i in range(len(self.labels))]
        self.source_ids = [str(s) for s in source_ids]

        if self.vectors.ndim != 2:
            raise EmbeddingError(f"Embeddings must be N x D, got shape {self.vectors.shape}")
        n = self.vectors.shape[0]
        if len(self.labels) != n or len(self.source_ids) != n:
            raise EmbeddingError(
                f"{n} vectors but {len(self.labels)} labels and {len(self.source_ids)} ids"
            )
        if not np.isfinite(self.vectors).all():
            raise EmbeddingError("Embeddings contain NaN or Inf")
        if n and (self.labels.min() < 0 or self.labels.max() >= len(ClassLabel)):
            raise EmbeddingError("Embedding labels must be class ordinals 0..3")

    def __len__(self) -> int:
        return int(self.vectors.shape[0])

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def class_labels(self) -> list[ClassLabel]:
        return [ClassLabel(int(v)) for v in self.labels]


def save_embeddings(embeddings: EmbeddingSet, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("wb") as fh:
        np.savez(
            fh,
            dims=np.array([len(embeddings), embeddings.dim], dtype=np.int64),
            vectors=embeddings.vectors,
            labels=embeddings.labels,
            source_ids=np.array(embeddings.source_ids, dtype=str),
        )
    return out


def load_embeddings(path: str | Path) -> EmbeddingSet:
    src = Path(path)
    if not src.is_file():
        raise EmbeddingError(f"Embedding file not found: {src}")
    with np.load(src, allow_pickle=False) as data:
        n, d = (int(v) for v in data["dims"])
        vectors = data["vectors"]
        if vectors.shape != (n, d):
            raise EmbeddingError(f"{src}: header says {n}x{d}, payload is {vectors.shape}")
        return EmbeddingSet(vectors, data["labels"], data["source_ids"].tolist())


def export_embeddings_csv(embeddings: EmbeddingSet, path: str | Path) -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "label"] + [f"e{i}" for i in range(embeddings.dim)])
        for source_id, label, row in zip(
            embeddings.source_ids, embeddings.labels, embeddings.vectors
        ):
            writer.writerow(
                [source_id, ClassLabel(int(label)).slug] + [f"{float(v):.9g}" for v in row]
            )
    return out
