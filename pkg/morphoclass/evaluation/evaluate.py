from __future__ import annotations

from typing import Sequence

import torch

from ..data.dataset import ImageRecord, Manifest
from ..data.preprocess import PreprocessConfig, TaxolImageDataset, build_loader
from ..errors import EvaluationError
from ..knn.classifier import KnnConfig, KnnPrediction, fit, predict
from ..models.backbone import TaxolNet, extract_embeddings, forward_logits
from .metrics import ConfusionMatrix, confusion_matrix


@torch.no_grad()
def evaluate_fc(
    model: TaxolNet,
    manifest: Manifest,
    records: Sequence[ImageRecord],
    preprocess: PreprocessConfig,
    batch_size: int = 8,
    num_workers: int = 0,
) -> ConfusionMatrix:
    """Argmax of the 128 -> 4 head on every record."""
    if not records:
        raise EvaluationError("Cannot evaluate an empty split")
    model.eval()
    device = next(model.parameters()).device
    dataset = TaxolImageDataset(manifest, records, preprocess, training_mode=False)
    loader = build_loader(dataset, batch_size=batch_size, num_workers=num_workers)

    predicted: list[int] = []
    for images, _, _ in loader:
        predicted.extend(forward_logits(model, images.to(device)).argmax(dim=1).tolist())
    return confusion_matrix([r.label for r in records], predicted)


def evaluate_knn(
    model: TaxolNet,
    manifest: Manifest,
    index_records: Sequence[ImageRecord],
    query_records: Sequence[ImageRecord],
    preprocess: PreprocessConfig,
    knn_config: KnnConfig,
    batch_size: int = 8,
    num_workers: int = 0,
) -> tuple[ConfusionMatrix, KnnPrediction]:
    """Index embeddings of `index_records`, classify `query_records` by k-NN."""
    if not query_records:
        raise EvaluationError("Cannot evaluate an empty split")
    index = fit(
        extract_embeddings(model, manifest, index_records, preprocess, batch_size, num_workers)
    )
    queries = extract_embeddings(model, manifest, query_records, preprocess, batch_size, num_workers)
    prediction = predict(index, queries.vectors, knn_config)
    cm = confusion_matrix([r.label for r in query_records], prediction.labels)
    return cm, prediction
