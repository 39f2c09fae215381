from __future__ import annotations

from pathlib import Path

import pytest
import torch
from torchvision.models import ResNet
from torchvision.models.resnet import Bottleneck

from morphoclass.data.dataset import Manifest, scan_dataset
from morphoclass.data.manifest import SplitSpec, stratified_split
from morphoclass.data.preprocess import AugmentationConfig, PreprocessConfig
from morphoclass.data.synthetic import generate_synthetic_dataset
from morphoclass.models.backbone import ModelConfig, TaxolNet


def pytest_addoption(parser: pytest.Parser) -> None:
    parser.addoption("--runslow", action="store_true", default=False, help="run slow tests")


def pytest_configure(config: pytest.Config) -> None:
    config.addinivalue_line("markers", "slow: builds full ResNet-50 models or trains")


def pytest_collection_modifyitems(config: pytest.Config, items: list[pytest.Item]) -> None:
    if config.getoption("--runslow"):
        return
    skip_slow = pytest.mark.skip(reason="needs --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture
def synthetic_root(tmp_path: Path) -> Path:
    return generate_synthetic_dataset(tmp_path / "data", per_class=14, side=64, seed=0)


@pytest.fixture
def scanned(synthetic_root: Path) -> Manifest:
    return scan_dataset(synthetic_root, expected_size=None)


@pytest.fixture
def split_manifest(scanned: Manifest) -> Manifest:
    return stratified_split(scanned, SplitSpec(val_per_class=3, test_per_class=3, seed=0))


@pytest.fixture
def small_preprocess() -> PreprocessConfig:
    return PreprocessConfig(target_side=64, augmentation=AugmentationConfig(enabled=False))


def make_tiny_model(**overrides) -> TaxolNet:
    """TaxolNet over a one-block-per-stage ResNet; same 2048-d tap, far fewer weights."""
    config = ModelConfig(pretrained=False, **overrides)
    torch.manual_seed(0)
    return TaxolNet(config, ResNet(Bottleneck, [1, 1, 1, 1]))


@pytest.fixture
def tiny_model() -> TaxolNet:
    return make_tiny_model()
