"""Convolutional block attention: channel gating followed by spatial gating."""

from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Any

import torch
from torch import nn

from ..errors import AttentionShapeError


@dataclass(slots=True)
class CBAMConfig:
    channels: int
    reduction_ratio: int = 16
    spatial_kernel: int = 7
    channel_bias: bool = False

    def __post_init__(self) -> None:
        if self.channels < 1:
            raise AttentionShapeError(f"channels must be >= 1, got {self.channels}")
        if self.reduction_ratio < 1:
            raise AttentionShapeError(f"reduction_ratio must be >= 1, got {self.reduction_ratio}")
        if self.spatial_kernel < 1 or self.spatial_kernel % 2 == 0:
            raise AttentionShapeError(f"spatial_kernel must be odd, got {self.spatial_kernel}")

    @property
    def hidden(self) -> int:
        return max(1, self.channels // self.reduction_ratio)

    def to_json(self) -> dict[str, Any]:
        return asdict(self)


def _as_batch(features: torch.Tensor, channels: int | None = None) -> tuple[torch.Tensor, bool]:
    if features.dim() == 3:
        features, squeezed = features.unsqueeze(0), True
    elif features.dim() == 4:
        squeezed = False
    else:
        raise AttentionShapeError(
            f"Expected a C x H x W or N x C x H x W feature map, got shape {tuple(features.shape)}"
        )
    if min(features.shape[1:]) < 1:
        raise AttentionShapeError(f"Empty feature map of shape {tuple(features.shape)}")
    if channels is not None and features.shape[1] != channels:
        raise AttentionShapeError(
            f"Feature map has {features.shape[1]} channels, attention expects {channels}"
        )
    return features, squeezed


class ChannelAttention(nn.Module):
    """Shared two-layer perceptron over average- and max-pooled descriptors."""

    def __init__(self, config: CBAMConfig) -> None:
        super().__init__()
        self.channels = config.channels
        self.mlp = nn.Sequential(
            nn.Linear(config.channels, config.hidden, bias=config.channel_bias),
            nn.ReLU(),
            nn.Linear(config.hidden, config.channels, bias=config.channel_bias),
        )
        self.reset_parameters()

    def reset_parameters(self) -> None:
        for layer in (self.mlp[0], self.mlp[2]):
            layer.reset_parameters()
        if self.mlp[2].bias is not None:
            nn.init.zeros_(self.mlp[2].bias)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        """Returns N x C weights in (0, 1)."""
        x, _ = _as_batch(features, self.channels)
        avg = x.mean(dim=(2, 3))
        mx = x.amax(dim=(2, 3))
        return torch.sigmoid(self.mlp(avg) + self.mlp(mx))


class SpatialAttention(nn.Module):
    def __init__(self, config: CBAMConfig) -> None:
        super().__init__()
        self.kernel_size = config.spatial_kernel
        self.conv = nn.Conv2d(
            2,
            1,
            kernel_size=config.spatial_kernel,
            padding=(config.spatial_kernel - 1) // 2,
            stride=1,
            bias=True,
        )
        self.reset_parameters()

    def reset_parameters(self) -> None:
        self.conv.reset_parameters()
        nn.init.zeros_(self.conv.bias)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        """Returns N x H x W weights in (0, 1)."""
        x, _ = _as_batch(features)
        stats = torch.cat(
            [x.mean(dim=1, keepdim=True), x.amax(dim=1, keepdim=True)], dim=1
        )
        return torch.sigmoid(self.conv(stats)).squeeze(1)


class CBAM(nn.Module):
    def __init__(self, config: CBAMConfig) -> None:
        super().__init__()
        self.config = config
        self.channel = ChannelAttention(config)
        self.spatial = SpatialAttention(config)

    def forward(self, features: torch.Tensor) -> torch.Tensor:
        x, squeezed = _as_batch(features, self.config.channels)
        refined = x * self.channel(x)[:, :, None, None]
        refined = refined * self.spatial(refined)[:, None, :, :]
        return refined.squeeze(0) if squeezed else refined

    @torch.no_grad()
    def attention_maps(self, features: torch.Tensor) -> tuple[torch.Tensor, torch.Tensor]:
        """Raw channel (N x C) and spatial (N x H x W) weights for one input."""
        x, _ = _as_batch(features, self.config.channels)
        channel_weights = self.channel(x)
        spatial_weights = self.spatial(x * channel_weights[:, :, None, None])
        return channel_weights, spatial_weights


def channel_attention(features: torch.Tensor, params: ChannelAttention) -> torch.Tensor:
    weights = params(features)
    return weights.squeeze(0) if features.dim() == 3 else weights


def spatial_attention(features: torch.Tensor, params: SpatialAttention) -> torch.Tensor:
    weights = params(features)
    return weights.squeeze(0) if features.dim() == 3 else weights


def cbam_forward(features: torch.Tensor, params: CBAM) -> torch.Tensor:
    return params(features)
