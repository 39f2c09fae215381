from __future__ import annotations

import math

import pytest
import torch

from morphoclass.errors import AttentionShapeError
from morphoclass.models.attention import (
    CBAM,
    CBAMConfig,
    ChannelAttention,
    SpatialAttention,
    cbam_forward,
    channel_attention,
    spatial_attention,
)

W1 = [[0.5, -0.25]]
W2 = [[1.0], [-2.0]]
KERNEL = [
    [[0.1, -0.2, 0.3], [0.0, 0.4, -0.1], [0.2, 0.1, -0.3]],
    [[-0.2, 0.1, 0.0], [0.3, -0.4, 0.2], [0.1, 0.0, 0.5]],
]
BIAS = 0.05


def _sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def _hand_set_cbam() -> CBAM:
    cbam = CBAM(CBAMConfig(channels=2, reduction_ratio=2, spatial_kernel=3))
    with torch.no_grad():
        cbam.channel.mlp[0].weight.copy_(torch.tensor(W1))
        cbam.channel.mlp[2].weight.copy_(torch.tensor(W2))
        cbam.spatial.conv.weight.copy_(torch.tensor(KERNEL).unsqueeze(0))
        cbam.spatial.conv.bias.fill_(BIAS)
    return cbam


def _channel_oracle(f: list[list[list[float]]]) -> list[float]:
    avg = [sum(sum(row) for row in ch) / (len(ch) * len(ch[0])) for ch in f]
    mx = [max(max(row) for row in ch) for ch in f]

    def mlp(x: list[float]) -> list[float]:
        hidden = max(0.0, W1[0][0] * x[0] + W1[0][1] * x[1])
        return [W2[0][0] * hidden, W2[1][0] * hidden]

    a, m = mlp(avg), mlp(mx)
    return [_sigmoid(a[c] + m[c]) for c in range(2)]


def _spatial_oracle(f: list[list[list[float]]]) -> list[list[float]]:
    channels, height, width = len(f), len(f[0]), len(f[0][0])
    mean = [[sum(f[c][y][x] for c in range(channels)) / channels for x in range(width)] for y in range(height)]
    mx = [[max(f[c][y][x] for c in range(channels)) for x in range(width)] for y in range(height)]
    out = []
    for y in range(height):
        row = []
        for x in range(width):
            acc = BIAS
            for dy in range(3):
                for dx in range(3):
                    yy, xx = y + dy - 1, x + dx - 1
                    if 0 <= yy < height and 0 <= xx < width:
                        acc += KERNEL[0][dy][dx] * mean[yy][xx] + KERNEL[1][dy][dx] * mx[yy][xx]
            row.append(_sigmoid(acc))
        out.append(row)
    return out


@pytest.fixture
def feature_map() -> torch.Tensor:
    return torch.randn(2, 4, 4, generator=torch.Generator().manual_seed(11))


def test_channel_attention_matches_hand_arithmetic(feature_map):
    cbam = _hand_set_cbam()
    weights = channel_attention(feature_map, cbam.channel)
    expected = torch.tensor(_channel_oracle(feature_map.tolist()))
    assert weights.shape == (2,)
    torch.testing.assert_close(weights, expected, rtol=1e-6, atol=1e-6)


def test_spatial_attention_matches_hand_arithmetic(feature_map):
    cbam = _hand_set_cbam()
    weights = spatial_attention(feature_map, cbam.spatial)
    expected = torch.tensor(_spatial_oracle(feature_map.tolist()))
    assert weights.shape == (4, 4)
    torch.testing.assert_close(weights, expected, rtol=1e-6, atol=1e-6)


def test_cbam_composes_channel_then_spatial(feature_map):
    cbam = _hand_set_cbam()
    f = feature_map.tolist()
    mc = _channel_oracle(f)
    refined = [[[v * mc[c] for v in row] for row in f[c]] for c in range(2)]
    ms = _spatial_oracle(refined)
    expected = torch.tensor(
        [[[refined[c][y][x] * ms[y][x] for x in range(4)] for y in range(4)] for c in range(2)]
    )
    torch.testing.assert_close(cbam_forward(feature_map, cbam), expected, rtol=1e-6, atol=1e-6)


def test_spike_with_ones_kernel():
    config = CBAMConfig(channels=2, reduction_ratio=2, spatial_kernel=3)
    spatial = SpatialAttention(config)
    with torch.no_grad():
        spatial.conv.weight.fill_(1.0)
        spatial.conv.bias.zero_()
    spike = torch.zeros(2, 5, 5)
    spike[0, 2, 2] = 1.0

    weights = spatial_attention(spike, spatial)
    expected = torch.full((5, 5), 0.5)
    expected[1:4, 1:4] = _sigmoid(0.5 + 1.0)
    torch.testing.assert_close(weights, expected)


def test_zero_parameters_scale_by_a_quarter():
    cbam = CBAM(CBAMConfig(channels=8, reduction_ratio=4))
    with torch.no_grad():
        for param in cbam.parameters():
            param.zero_()
    features = torch.randn(3, 8, 6, 5)
    torch.testing.assert_close(cbam(features), 0.25 * features)


def test_constant_input_with_zero_mlp_gives_half():
    channel = ChannelAttention(CBAMConfig(channels=4, reduction_ratio=2))
    with torch.no_grad():
        for param in channel.parameters():
            param.zero_()
    weights = channel_attention(torch.full((4, 3, 3), 7.0), channel)
    torch.testing.assert_close(weights, torch.full((4,), 0.5))


def test_zero_input_gives_zero_output():
    cbam = CBAM(CBAMConfig(channels=16))
    assert torch.equal(cbam(torch.zeros(16, 7, 7)), torch.zeros(16, 7, 7))


def test_resnet_sized_feature_map_shapes():
    cbam = CBAM(CBAMConfig(channels=256))
    features = torch.randn(256, 56, 56)
    assert channel_attention(features, cbam.channel).shape == (256,)
    assert spatial_attention(features, cbam.spatial).shape == (56, 56)
    assert cbam_forward(features, cbam).shape == (256, 56, 56)


def test_shape_preserved_and_attention_only_attenuates():
    gen = torch.Generator().manual_seed(0)
    for _ in range(25):
        c, h, w = (int(v) for v in torch.randint(1, 10, (3,), generator=gen))
        cbam = CBAM(CBAMConfig(channels=c))
        features = torch.randn(2, c, h, w, generator=gen) * 3
        with torch.no_grad():
            out = cbam(features)
            mc, ms = cbam.attention_maps(features)
        assert out.shape == features.shape
        assert (out.abs() <= features.abs()).all()
        assert ((mc >= 0) & (mc <= 1)).all() and ((ms >= 0) & (ms <= 1)).all()
        assert mc.shape == (2, c) and ms.shape == (2, h, w)


def test_channel_mismatch_is_rejected():
    cbam = CBAM(CBAMConfig(channels=4))
    with pytest.raises(AttentionShapeError, match="expects 4"):
        cbam(torch.randn(1, 3, 5, 5))
    with pytest.raises(AttentionShapeError):
        cbam(torch.randn(5, 5))


@pytest.mark.parametrize("kwargs", [{"spatial_kernel": 4}, {"reduction_ratio": 0}, {"channels": 0}])
def test_invalid_config(kwargs):
    params = {"channels": 8, **kwargs}
    with pytest.raises(AttentionShapeError):
        CBAMConfig(**params)


def test_hidden_width_never_collapses_to_zero():
    assert CBAMConfig(channels=8, reduction_ratio=16).hidden == 1
    assert CBAMConfig(channels=2048, reduction_ratio=16).hidden == 128


def test_parameter_gradients_match_finite_differences():
    torch.manual_seed(3)
    cbam = CBAM(CBAMConfig(channels=2, reduction_ratio=1, spatial_kernel=3)).double()
    with torch.no_grad():
        for param in cbam.parameters():
            param.copy_(torch.randn_like(param) * 0.3)
    features = torch.randn(2, 3, 3, dtype=torch.float64)

    cbam.zero_grad()
    cbam(features).sum().backward()

    step = 1e-4
    for name, param in cbam.named_parameters():
        analytic = param.grad.clone()
        numeric = torch.zeros_like(param)
        flat = param.data.view(-1)
        for i in range(flat.numel()):
            original = flat[i].item()
            with torch.no_grad():
                flat[i] = original + step
                plus = cbam(features).sum().item()
                flat[i] = original - step
                minus = cbam(features).sum().item()
                flat[i] = original
            numeric.view(-1)[i] = (plus - minus) / (2 * step)
        torch.testing.assert_close(analytic, numeric, rtol=1e-3, atol=1e-7, msg=name)
