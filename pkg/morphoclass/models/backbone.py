"""ResNet-50 variants with optional CBAM and a 2048 -> 128 -> 4 head."""

from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Any, Sequence

import torch
from torch import nn
from torchvision.models import ResNet, ResNet50_Weights, resnet50
from torchvision.models.resnet import Bottleneck

from ..data.dataset import ClassLabel, ImageRecord, Manifest
from ..data.preprocess import PreprocessConfig, TaxolImageDataset, build_loader
from ..errors import EmbeddingError, ModelError
from ..knn.embeddings import EmbeddingSet
from .attention import CBAM, CBAMConfig

logger = logging.getLogger(__name__)

BACKBONE_FEATURES = 2048
PLACEMENTS = ("per_block", "per_stage")
HEADS = ("fc", "embedding_for_knn")
STAGES = ("layer1", "layer2", "layer3", "layer4")


@dataclass(slots=True)
class ModelConfig:
    use_cbam: bool = False
    cbam_placement: str = "per_block"
    embedding_dim: int = 128
    num_classes: int = len(ClassLabel)
    pretrained: bool = True
    head: str = "fc"
    reduction_ratio: int = 16
    spatial_kernel: int = 7
    normalize_embeddings: bool = False
    weights_path: str | None = None

    def __post_init__(self) -> None:
        if self.cbam_placement not in PLACEMENTS:
            raise ModelError(f"cbam_placement must be one of {PLACEMENTS}, got {self.cbam_placement!r}")
        if self.head not in HEADS:
            raise ModelError(f"head must be one of {HEADS}, got {self.head!r}")
        if self.embedding_dim < 1:
            raise ModelError(f"embedding_dim must be >= 1, got {self.embedding_dim}")
        if self.num_classes != len(ClassLabel):
            raise ModelError(f"num_classes must be {len(ClassLabel)}, got {self.num_classes}")

    @property
    def strategy(self) -> str:
        return "knn" if self.head == "embedding_for_knn" else "fc"

    @property
    def tag(self) -> str:
        if not self.use_cbam:
            return "resnet50"
        return "resnet50_cbam" if self.cbam_placement == "per_block" else "resnet50_cbam_stage"

    def architecture(self) -> dict[str, Any]:
        """Fields that determine parameter shapes and names."""
        data = self.to_json()
        for key in ("pretrained", "weights_path", "head", "normalize_embeddings"):
            data.pop(key)
        return data

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


class AttentiveBottleneck(nn.Module):
    """Bottleneck with CBAM between the third batch norm and the residual add."""

    def __init__(self, block: Bottleneck, attention: CBAM) -> None:
        super().__init__()
        self.conv1 = block.conv1
        self.bn1 = block.bn1
        self.conv2 = block.conv2
        self.bn2 = block.bn2
        self.conv3 = block.conv3
        self.bn3 = block.bn3
        self.relu = block.relu
        self.downsample = block.downsample
        self.stride = block.stride
        self.cbam = attention

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        identity = x

        out = self.relu(self.bn1(self.conv1(x)))
        out = self.relu(self.bn2(self.conv2(out)))
        out = self.bn3(self.conv3(out))
        out = self.cbam(out)

        if self.downsample is not None:
            identity = self.downsample(x)

        out = out + identity
        return self.relu(out)


class TaxolNet(nn.Module):
    def __init__(self, config: ModelConfig, backbone: ResNet) -> None:
        super().__init__()
        self.config = config
        self.frozen = False
        backbone.fc = nn.Identity()
        self.backbone = backbone
        if config.use_cbam:
            self._insert_attention()
        self.embedding = nn.Linear(BACKBONE_FEATURES, config.embedding_dim)
        self.classifier = nn.Linear(config.embedding_dim, config.num_classes)

    def _cbam(self, channels: int) -> CBAM:
        return CBAM(
            CBAMConfig(
                channels=channels,
                reduction_ratio=self.config.reduction_ratio,
                spatial_kernel=self.config.spatial_kernel,
            )
        )

    def _insert_attention(self) -> None:
        for name in STAGES:
            stage: nn.Sequential = getattr(self.backbone, name)
            blocks = list(stage.children())
            if self.config.cbam_placement == "per_block":
                wrapped = [AttentiveBottleneck(b, self._cbam(b.bn3.num_features)) for b in blocks]
                setattr(self.backbone, name, nn.Sequential(*wrapped))
            else:
                channels = blocks[-1].bn3.num_features
                setattr(self.backbone, name, nn.Sequential(*blocks, self._cbam(channels)))

    def attention_units(self) -> list[CBAM]:
        return [m for m in self.modules() if isinstance(m, CBAM)]

    def features(self, x: torch.Tensor) -> torch.Tensor:
        """Globally pooled 2048-d backbone output."""
        return self.backbone(x)

    def embed(self, x: torch.Tensor) -> torch.Tensor:
        return self.embedding(self.features(x))

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.classifier(self.embed(x))

    def train(self, mode: bool = True) -> "TaxolNet":
        # Frozen models keep batch-norm statistics locked.
        return super().train(mode and not self.frozen)


def _load_backbone(config: ModelConfig) -> ResNet:
    if config.weights_path:
        path = Path(config.weights_path).expanduser()
        if not path.is_file():
            raise ModelError(f"Pretrained weights file not found: {path}")
        backbone = resnet50(weights=None)
        state = torch.load(path, map_location="cpu", weights_only=True)
        missing, unexpected = backbone.load_state_dict(state, strict=False)
        bad = [k for k in missing if not k.startswith("fc.")] + list(unexpected)
        if bad:
            raise ModelError(f"{path} does not match ResNet-50: {', '.join(bad[:5])}")
        return backbone
    if not config.pretrained:
        return resnet50(weights=None)
    try:
        return resnet50(weights=ResNet50_Weights.IMAGENET1K_V1)
    except Exception as exc:
        raise ModelError(f"ImageNet weights are unavailable: {exc}") from exc


def build_model(config: ModelConfig) -> TaxolNet:
    model = TaxolNet(config, _load_backbone(config))
    logger.info(
        "Built %s (%d CBAM units, %d parameters)",
        config.tag,
        len(model.attention_units()),
        sum(p.numel() for p in model.parameters()),
    )
    return model


def _check_batch(batch: torch.Tensor) -> None:
    if batch.dim() != 4 or batch.shape[1] != 3:
        raise ModelError(f"Expected an N x 3 x H x W batch, got shape {tuple(batch.shape)}")


def forward_logits(model: TaxolNet, batch: torch.Tensor) -> torch.Tensor:
    _check_batch(batch)
    return model(batch)


def freeze_backbone(model: TaxolNet) -> TaxolNet:
    for param in model.parameters():
        param.requires_grad_(False)
    model.frozen = True
    model.eval()
    return model


def _model_device(model: nn.Module) -> torch.device:
    return next(model.parameters()).device


@torch.no_grad()
def extract_embeddings(
    model: TaxolNet,
    manifest: Manifest,
    records: Sequence[ImageRecord],
    preprocess: PreprocessConfig,
    batch_size: int = 8,
    num_workers: int = 0,
) -> EmbeddingSet:
    if not records:
        raise EmbeddingError("Cannot extract embeddings from an empty split")

    model.eval()
    device = _model_device(model)
    dataset = TaxolImageDataset(manifest, records, preprocess, training_mode=False)
    loader = build_loader(dataset, batch_size=batch_size, shuffle=False, num_workers=num_workers)

    chunks: list[torch.Tensor] = []
    for images, _, _ in loader:
        _check_batch(images)
        chunks.append(model.embed(images.to(device)).cpu())
    vectors = torch.cat(chunks).double()
    if model.config.normalize_embeddings:
        vectors = nn.functional.normalize(vectors, dim=1)

    return EmbeddingSet(
        vectors=vectors.float().numpy(),
        labels=[r.label for r in records],
        source_ids=[r.image_path for r in records],
    )
