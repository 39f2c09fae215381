from __future__ import annotations

from pathlib import Path

import pytest
from torchvision.models import ResNet
from torchvision.models.resnet import Bottleneck

from morphoclass.data.dataset import Manifest
from morphoclass.evaluation.ablation import (
    TABLE_VARIANTS,
    AblationEntry,
    Variant,
    format_ablation_table,
    run_ablation,
)
from morphoclass.evaluation.metrics import ConfusionMatrix, compute_metrics
from morphoclass.knn.classifier import KnnConfig
from morphoclass.models.backbone import ModelConfig, TaxolNet
from morphoclass.training.trainer import TrainConfig


def _tiny(config: ModelConfig) -> TaxolNet:
    return TaxolNet(config, ResNet(Bottleneck, [1, 1, 1, 1]))


def _entry(variant: Variant, diagonal: int) -> AblationEntry:
    off = 4 - diagonal
    cm = ConfusionMatrix([[diagonal if r == c else (off if c == (r + 1) % 4 else 0) for c in range(4)] for r in range(4)])
    return AblationEntry(variant, compute_metrics(cm, variant.name, variant.strategy), cm)


def test_variant_slugs():
    assert [v.slug for v in TABLE_VARIANTS] == [
        "resattention_knn",
        "resnet_cbam",
        "resnet",
        "resnet_knn",
    ]


def test_table_marks_best_and_second():
    entries = [_entry(v, d) for v, d in zip(TABLE_VARIANTS, [4, 3, 3, 2])]
    lines = format_ablation_table(entries).splitlines()

    assert len(lines) == 6
    assert lines[0].split(" | ")[0].strip() == "Model"
    assert "**1.0000**" in lines[2]
    assert "_0.7500_" in lines[3] and "_0.7500_" in lines[4]
    assert "**" not in lines[5] and "_0.5000_" not in lines[5]
    assert "k-NN" in lines[2] and "FC Layer" in lines[3]


def test_ablation_trains_two_backbones_and_reports_four_variants(
    tmp_path: Path, split_manifest: Manifest, small_preprocess
):
    written: list[Path] = []
    result = run_ablation(
        split_manifest,
        TrainConfig(max_epochs=1, early_stop_patience=1, seed=1),
        small_preprocess,
        ModelConfig(pretrained=False),
        KnnConfig(k=3),
        checkpoint_dir=tmp_path,
        model_factory=_tiny,
        on_artifact=written.append,
    )

    assert [e.variant.name for e in result.entries] == [v.name for v in TABLE_VARIANTS]
    assert set(result.fits) == {True, False}
    for entry in result.entries:
        assert entry.confusion.row_sums().tolist() == [3, 3, 3, 3]
        assert entry.report.eval_strategy == entry.variant.strategy
        assert entry.report.seed == 1
        assert len(entry.report.checkpoint_hash) == 64
    assert (tmp_path / "resnet50.pt").is_file()
    assert (tmp_path / "resnet50_cbam.pt").is_file()
    assert (tmp_path / "resnet50_cbam_train_log.csv").is_file()
    assert sorted(p.name for p in written) == [
        "resnet50.pt",
        "resnet50_cbam.pt",
        "resnet50_cbam_train_log.csv",
        "resnet50_train_log.csv",
    ]

    cbam_fc = next(e for e in result.entries if e.variant.name == "ResNet+CBAM")
    cbam_knn = next(e for e in result.entries if e.variant.name == "ResAttention-KNN")
    assert cbam_fc.report.checkpoint_hash == cbam_knn.report.checkpoint_hash


@pytest.mark.slow
def test_every_variant_learns_separable_corpus(split_manifest: Manifest, small_preprocess):
    result = run_ablation(
        split_manifest,
        TrainConfig(
            learning_rate=0.01, max_epochs=200, early_stop_patience=10, min_delta=0.01, seed=0
        ),
        small_preprocess,
        ModelConfig(pretrained=False),
        model_factory=_tiny,
    )
    assert all(e.report.accuracy >= 0.95 for e in result.entries)
    assert all(fit.stopped_early for fit in result.fits.values())
