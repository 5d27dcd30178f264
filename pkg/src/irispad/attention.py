"""Spatial attention over backbone levels and multi-scale fusion."""

import torch
import torch.nn as nn
import torch.nn.functional as F

from .errors import ConfigurationError, InputError

LEVELS = ("low", "mid", "high")
# deeper features get smaller kernels
LEVEL_KERNELS = {"low": 7, "mid": 5, "high": 3}


def _check_kernel(kernel):
    if kernel not in (3, 5, 7):
        raise ConfigurationError(f"attention kernel must be one of 3, 5, 7 (got {kernel})")


def pooled_descriptor(feature):
    """Stack channel-wise mean and max into an N x 2 x H x W descriptor."""
    avg = feature.mean(dim=1, keepdim=True)
    mx = feature.amax(dim=1, keepdim=True)
    return torch.cat([avg, mx], dim=1)


class SpatialAttention(nn.Module):
    """CBAM-style spatial attention producing one map in [0, 1] per sample."""

    def __init__(self, kernel=7):
        super().__init__()
        _check_kernel(kernel)
        self.kernel = kernel
        self.conv = nn.Conv2d(2, 1, kernel, padding=kernel // 2, bias=True)

    def forward(self, feature):
        return torch.sigmoid(self.conv(pooled_descriptor(feature)))


def spatial_attention(feature, kernel, weight=None, bias=None):
    """Functional attention map for ``feature`` (N x C x H x W or C x H x W).

    ``weight`` has shape 1 x 2 x kernel x kernel. Returns N x 1 x H x W
    (or 1 x H x W for an unbatched feature).
    """
    _check_kernel(kernel)
    unbatched = feature.dim() == 3
    if unbatched:
        feature = feature.unsqueeze(0)
    if weight is None:
        weight = torch.zeros(1, 2, kernel, kernel, dtype=feature.dtype)
    if tuple(weight.shape) != (1, 2, kernel, kernel):
        raise ConfigurationError(f"weight shape {tuple(weight.shape)} does not match kernel {kernel}")
    out = torch.sigmoid(F.conv2d(pooled_descriptor(feature), weight, bias, padding=kernel // 2))
    return out[0] if unbatched else out


def refine(feature, attn):
    """Scale every channel of ``feature`` by the attention value at each position."""
    if feature.shape[-2:] != attn.shape[-2:]:
        raise InputError(
            f"attention map {tuple(attn.shape[-2:])} does not match feature {tuple(feature.shape[-2:])}"
        )
    if attn.dim() == feature.dim() - 1:
        attn = attn.unsqueeze(-3)
    elif attn.dim() != feature.dim():
        raise InputError(f"cannot broadcast attention of rank {attn.dim()} over feature of rank {feature.dim()}")
    return feature * attn


def resample(feature, size):
    """Average-pool ``feature`` down to ``size`` x ``size``."""
    if feature.shape[-1] == size and feature.shape[-2] == size:
        return feature
    return F.adaptive_avg_pool2d(feature, size)


def fuse_levels(refined, target_size, conv):
    """Resample each level to ``target_size``, concatenate and reduce with ``conv``."""
    missing = [level for level in LEVELS if level not in refined]
    if missing:
        raise InputError(f"missing feature levels: {', '.join(missing)}")
    stacked = torch.cat([resample(refined[level], target_size) for level in LEVELS], dim=1)
    return conv(stacked)


class MultiLevelAttentionFusion(nn.Module):
    """Attention refinement on the low/mid/high levels fused into one single-channel map."""

    def __init__(self, channels, map_size):
        super().__init__()
        self.map_size = map_size
        self.attention = nn.ModuleDict({level: SpatialAttention(LEVEL_KERNELS[level]) for level in LEVELS})
        self.reduce = nn.Conv2d(sum(channels[level] for level in LEVELS), 1, kernel_size=1)

    def attention_maps(self, features):
        return {level: self.attention[level](features[level]) for level in LEVELS}

    def forward(self, features, use_attention=True):
        if use_attention:
            maps = self.attention_maps(features)
            refined = {level: refine(features[level], maps[level]) for level in LEVELS}
        else:
            refined = {level: features[level] for level in LEVELS}
        return fuse_levels(refined, self.map_size, self.reduce)
