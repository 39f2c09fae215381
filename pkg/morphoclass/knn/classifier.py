"""Exact Euclidean k-NN over embedding vectors.

Votes are majority counts among the k nearest index rows. Tied classes are
resolved by the smallest summed neighbor distance, then by the lowest class
ordinal. Neighbors at equal distance are ordered by (label, source id) so the
result never depends on the storage order of the index.
"""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np
from scipy.spatial.distance import cdist

from ..data.dataset import ClassLabel
from ..errors import EmbeddingError
from .embeddings import EmbeddingSet

logger = logging.getLogger(__name__)

METRICS = ("euclidean",)


@dataclass(slots=True)
class KnnConfig:
    k: int = 5
    metric: str = "euclidean"
    include_val: bool = False

    def __post_init__(self) -> None:
        if self.k < 1:
            raise EmbeddingError(f"k must be >= 1, got {self.k}")
        if self.metric not in METRICS:
            raise EmbeddingError(f"Unsupported metric {self.metric!r}")

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


@dataclass(slots=True)
class NeighborReport:
    source_ids: list[str]
    distances: list[float]
    labels: list[ClassLabel]

    def to_json(self) -> dict[str, Any]:
        return {
            "source_ids": self.source_ids,
            "distances": self.distances,
            "labels": [label.slug for label in self.labels],
        }


@dataclass(slots=True)
class KnnPrediction:
    labels: list[ClassLabel]
    neighbors: list[NeighborReport]


def pairwise_distances(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """M x N Euclidean distances, computed in double precision."""
    left = np.asarray(a, dtype=np.float64)
    right = np.asarray(b, dtype=np.float64)
    if left.ndim != 2 or right.ndim != 2:
        raise EmbeddingError(f"Expected 2-d inputs, got shapes {left.shape} and {right.shape}")
    if left.shape[1] != right.shape[1]:
        raise EmbeddingError(
            f"Dimension mismatch: {left.shape[1]}-d queries vs {right.shape[1]}-d index"
        )
    return cdist(left, right, metric="euclidean")


def vote(labels: np.ndarray, distances: np.ndarray, num_classes: int = len(ClassLabel)) -> int:
    counts = np.bincount(labels, minlength=num_classes)
    sums = np.bincount(labels, weights=distances, minlength=num_classes)
    tied = np.flatnonzero(counts == counts.max())
    closest = tied[sums[tied] == sums[tied].min()]
    return int(closest.min())


class KnnIndex:
    """Immutable store of every training vector; search is a linear scan."""

    def __init__(self, embeddings: EmbeddingSet) -> None:
        if len(embeddings) == 0:
            raise EmbeddingError("Cannot fit a k-NN index on an empty embedding set")
        self._vectors = embeddings.vectors.astype(np.float64)
        self._vectors.setflags(write=False)
        self._labels = embeddings.labels.copy()
        self._labels.setflags(write=False)
        self._ids = list(embeddings.source_ids)
        _, self._id_rank = np.unique(np.array(self._ids, dtype=str), return_inverse=True)

    def __len__(self) -> int:
        return len(self._ids)

    @property
    def dim(self) -> int:
        return int(self._vectors.shape[1])

    @property
    def vectors(self) -> np.ndarray:
        return self._vectors

    @property
    def labels(self) -> np.ndarray:
        return self._labels

    def predict(self, queries: np.ndarray, config: KnnConfig | None = None) -> KnnPrediction:
        config = config or KnnConfig()
        queries = np.asarray(queries, dtype=np.float64)
        if queries.ndim == 1:
            queries = queries[None, :]
        distances = pairwise_distances(queries, self._vectors)

        k = min(config.k, len(self))
        if k < config.k:
            logger.warning("k=%d exceeds index size %d; using k=%d", config.k, len(self), k)

        labels: list[ClassLabel] = []
        reports: list[NeighborReport] = []
        for row in distances:
            order = np.lexsort((self._id_rank, self._labels, row))[:k]
            neighbor_labels = self._labels[order]
            neighbor_dists = row[order]
            labels.append(ClassLabel(vote(neighbor_labels, neighbor_dists)))
            reports.append(
                NeighborReport(
                    source_ids=[self._ids[i] for i in order],
                    distances=[float(d) for d in neighbor_dists],
                    labels=[ClassLabel(int(v)) for v in neighbor_labels],
                )
            )
        return KnnPrediction(labels=labels, neighbors=reports)


def fit(train_embeddings: EmbeddingSet) -> KnnIndex:
    return KnnIndex(train_embeddings)


def predict(index: KnnIndex, queries: np.ndarray, config: KnnConfig | None = None) -> KnnPrediction:
    return index.predict(queries, config)
