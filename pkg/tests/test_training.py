from __future__ import annotations

import math
from pathlib import Path
from typing import Iterator

import pytest
import torch
from conftest import make_tiny_model
from torch import nn
from torch.utils.data import Dataset

from morphoclass.data.dataset import Manifest, Split
from morphoclass.data.preprocess import TaxolImageDataset
from morphoclass.errors import ConfigError, TrainingError
from morphoclass.evaluation.evaluate import evaluate_fc, evaluate_knn
from morphoclass.evaluation.metrics import compute_metrics
from morphoclass.knn.classifier import KnnConfig
from morphoclass.models.backbone import ModelConfig, freeze_backbone
from morphoclass.training import trainer
from morphoclass.training.early_stopping import EarlyStopping
from morphoclass.training.trainer import (
    EpochLog,
    EpochResult,
    TrainConfig,
    build_optimizer,
    fit,
    read_training_log,
    train_epoch,
    validate,
    write_training_log,
)


class _Probe(nn.Module):
    def __init__(self, side: int = 8) -> None:
        super().__init__()
        self.config = ModelConfig(pretrained=False)
        self.net = nn.Sequential(nn.Flatten(), nn.Linear(3 * side * side, 4))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.net(x)


class _Images(Dataset):
    def __init__(self, n: int, side: int = 8) -> None:
        gen = torch.Generator().manual_seed(n)
        self.images = torch.randn(n, 3, side, side, generator=gen)
        self.labels = [i % 4 for i in range(n)]

    def set_epoch(self, epoch: int) -> None:
        pass

    def __len__(self) -> int:
        return len(self.labels)

    def __getitem__(self, index: int) -> tuple[torch.Tensor, int, int]:
        return self.images[index], self.labels[index], index


def test_weight_decay_closed_form():
    param = nn.Parameter(torch.ones(1, dtype=torch.float64))
    optimizer = build_optimizer([param], TrainConfig())
    param.grad = torch.zeros_like(param)
    optimizer.step()
    assert param.item() == pytest.approx(0.9999995, abs=1e-12)


def test_optimizer_skips_frozen_parameters():
    frozen = nn.Parameter(torch.ones(2), requires_grad=False)
    live = nn.Parameter(torch.ones(2))
    optimizer = build_optimizer([frozen, live], TrainConfig())
    assert optimizer.param_groups[0]["params"] == [live]
    assert optimizer.param_groups[0]["momentum"] == 0.9


def test_epoch_step_count_for_released_train_size():
    model = _Probe()
    config = TrainConfig()
    result = train_epoch(model, _Images(310), config, build_optimizer(model.parameters(), config))
    assert result.steps == 39
    assert math.isfinite(result.mean_loss)


def test_zero_learning_rate_leaves_parameters_unchanged():
    model = _Probe()
    config = TrainConfig(learning_rate=0.0)
    before = [p.clone() for p in model.parameters()]
    train_epoch(model, _Images(20), config, build_optimizer(model.parameters(), config))
    assert all(torch.equal(a, b) for a, b in zip(before, model.parameters()))


def test_non_finite_loss_aborts_with_batch_indices():
    model = _Probe()
    with torch.no_grad():
        model.net[1].weight.fill_(float("nan"))
    config = TrainConfig()
    with pytest.raises(TrainingError) as info:
        train_epoch(model, _Images(16), config, build_optimizer(model.parameters(), config), epoch=4)
    assert info.value.epoch == 4
    assert len(info.value.batch_indices) == 8


def test_zeroed_head_validates_to_log_four(tiny_model, split_manifest: Manifest, small_preprocess):
    with torch.no_grad():
        tiny_model.classifier.weight.zero_()
        tiny_model.classifier.bias.zero_()
    val = TaxolImageDataset(split_manifest, split_manifest.by_split(Split.VAL), small_preprocess)
    before = {k: v.clone() for k, v in tiny_model.state_dict().items()}

    loss, acc = validate(tiny_model, val)

    assert loss == pytest.approx(math.log(4), abs=1e-6)
    assert (acc * len(val)) == pytest.approx(round(acc * len(val)))
    assert all(torch.equal(v, before[k]) for k, v in tiny_model.state_dict().items())


def test_early_stopping_patience_arithmetic():
    stopper = EarlyStopping(patience=20)
    stopped_at = next(epoch for epoch in range(1, 201) if stopper.step(epoch, 1.0))
    assert stopped_at == 21
    assert stopper.state.best_epoch == 1

    stopper = EarlyStopping(patience=20)
    assert not any(stopper.step(epoch, 1.0 / epoch) for epoch in range(1, 201))
    assert stopper.state.best_epoch == 200


def test_early_stopping_ignores_tiny_improvements():
    stopper = EarlyStopping(patience=2, min_delta=1e-6)
    stopper.step(1, 1.0)
    assert not stopper.improved(1.0 - 1e-7)
    assert stopper.improved(1.0 - 1e-5)


def _patch_losses(monkeypatch, val_losses: Iterator[float]) -> None:
    monkeypatch.setattr(trainer, "train_epoch", lambda *args, **kwargs: EpochResult(0.5, 4))
    monkeypatch.setattr(trainer, "validate", lambda *args, **kwargs: (next(val_losses), 0.5))


def test_fit_stops_after_patience_on_flat_loss(monkeypatch, split_manifest: Manifest):
    _patch_losses(monkeypatch, iter([1.0] * 200))
    result = fit(_Probe(), split_manifest, TrainConfig())
    assert len(result.log) == 21
    assert result.best_epoch == 1
    assert result.stopped_early


def test_fit_runs_to_max_epochs_while_improving(monkeypatch, split_manifest: Manifest):
    _patch_losses(monkeypatch, iter([1.0 / e for e in range(1, 201)]))
    result = fit(_Probe(), split_manifest, TrainConfig())
    assert len(result.log) == 200
    assert result.best_epoch == 200
    assert not result.stopped_early


def test_fit_returns_best_not_last(monkeypatch, split_manifest: Manifest):
    losses = [0.9, 0.7, 0.4, 0.6, 0.8, 0.5]
    _patch_losses(monkeypatch, iter(losses))
    seen: list[int] = []
    result = fit(
        _Probe(),
        split_manifest,
        TrainConfig(max_epochs=6, early_stop_patience=5),
        on_epoch=lambda entry: seen.append(entry.epoch),
    )
    assert result.best_epoch == 3
    assert result.checkpoint.best_val_loss == 0.4
    assert all(result.checkpoint.best_val_loss <= e.val_loss for e in result.log)
    assert seen == [1, 2, 3, 4, 5, 6]


def test_fit_restores_best_weights(monkeypatch, split_manifest: Manifest):
    model = _Probe()
    losses = iter([0.3, 0.9])
    monkeypatch.setattr(trainer, "validate", lambda *a, **k: (next(losses), 0.0))

    def perturb(model, *args, **kwargs):
        with torch.no_grad():
            model.net[1].bias.add_(1.0)
        return EpochResult(0.1, 1)

    monkeypatch.setattr(trainer, "train_epoch", perturb)
    result = fit(model, split_manifest, TrainConfig(max_epochs=2, early_stop_patience=2))
    assert torch.equal(model.net[1].bias, result.checkpoint.model_state["net.1.bias"])


def test_training_log_round_trip(tmp_path: Path):
    log = [EpochLog(1, 1.2345678901234567, 0.1 + 0.2, 0.75), EpochLog(2, 1.0, 0.25, 1.0)]
    path = write_training_log(log, tmp_path / "log.csv")
    assert path.read_text(encoding="utf-8").splitlines()[0] == "epoch,train_loss,val_loss,val_acc"
    assert read_training_log(path) == log


@pytest.mark.parametrize(
    "kwargs",
    [{"learning_rate": -1.0}, {"batch_size": 0}, {"max_epochs": 10, "early_stop_patience": 20}],
)
def test_invalid_train_config(kwargs):
    with pytest.raises(ConfigError):
        TrainConfig(**kwargs)


def test_identical_seeds_give_identical_logs(split_manifest: Manifest, small_preprocess):
    config = TrainConfig(max_epochs=2, early_stop_patience=2, seed=5)
    runs = []
    for _ in range(2):
        model = make_tiny_model()
        runs.append(fit(model, split_manifest, config, small_preprocess).log)
    assert runs[0] == runs[1]


@pytest.mark.slow
def test_separable_synthetic_corpus_is_learned(split_manifest: Manifest, small_preprocess):
    config = TrainConfig(
        learning_rate=0.01, max_epochs=200, early_stop_patience=10, min_delta=0.01, seed=0
    )
    model = make_tiny_model()
    result = fit(model, split_manifest, config, small_preprocess)

    assert result.stopped_early
    assert len(result.log) < config.max_epochs
    assert result.log[result.best_epoch - 1].val_acc == 1.0

    freeze_backbone(model)
    train = split_manifest.by_split(Split.TRAIN)
    test = split_manifest.by_split(Split.TEST)
    fc = evaluate_fc(model, split_manifest, test, small_preprocess)
    knn, _ = evaluate_knn(model, split_manifest, train, test, small_preprocess, KnnConfig(k=5))
    assert compute_metrics(fc).accuracy >= 0.95
    assert compute_metrics(knn).accuracy >= 0.95
