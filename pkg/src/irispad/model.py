"""Baseline, PBS and A-PBS networks over a truncated DenseNet121.

The backbone keeps the DenseNet121 stem, dense block 1, transition 1, dense
block 2 and transition 2. Three activations are exposed to the heads:

=====  =====================  ==============
level  source                 spatial size
=====  =====================  ==============
low    stem max-pool          input / 4
mid    transition 1           input / 8
high   transition 2           input / 16
=====  =====================  ==============
"""

import dataclasses
from collections import OrderedDict
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple, Optional

import numpy as np
import torch
import torch.nn as nn
import torchvision

from .attention import LEVEL_KERNELS, LEVELS, MultiLevelAttentionFusion
from .errors import CheckpointError, ConfigurationError, InputError, PretrainedWeightsUnavailable

VARIANTS = ("baseline", "pbs", "apbs")
DENSENET121 = {"growth_rate": 32, "block_layers": (6, 12), "init_features": 64, "bn_size": 4}
# ImageNet statistics of the published DenseNet121 weights
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)
CHECKPOINT_FORMAT = "irispad-checkpoint"
CHECKPOINT_VERSION = 1
# torchvision module names of the three tapped activations
LEVEL_MODULES = {"low": "pool0", "mid": "transition1", "high": "transition2"}


@dataclass
class ModelConfig:
    variant: str = "apbs"
    input_size: int = 224
    map_size: Optional[int] = None
    pretrained_init: bool = True
    weights_path: Optional[str] = None
    growth_rate: int = 32
    block_layers: tuple = (6, 12)
    init_features: int = 64
    bn_size: int = 4
    channel_widths: dict = field(default_factory=dict)

    def __post_init__(self):
        self.block_layers = tuple(self.block_layers)
        if self.variant not in VARIANTS:
            raise ConfigurationError(f"unknown variant {self.variant!r}; expected one of {', '.join(VARIANTS)}")
        if self.input_size <= 0 or self.input_size % 16:
            raise ConfigurationError(f"input_size must be a positive multiple of 16 (got {self.input_size})")
        if self.map_size is None:
            self.map_size = self.input_size // 16
        elif self.map_size * 16 != self.input_size:
            raise ConfigurationError(
                f"map_size must equal input_size / 16 = {self.input_size // 16} (got {self.map_size})"
            )
        if len(self.block_layers) != 2 or min(self.block_layers) < 1:
            raise ConfigurationError(f"block_layers needs two positive counts (got {self.block_layers})")
        if self.pretrained_init and not self.is_densenet121:
            raise ConfigurationError("pretrained_init requires the standard DenseNet121 widths")

    @property
    def is_densenet121(self):
        return all(getattr(self, k) == v for k, v in DENSENET121.items())

    @property
    def attention_kernels(self):
        return dict(LEVEL_KERNELS) if self.variant == "apbs" else {}

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["block_layers"] = list(self.block_layers)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown model config keys: {', '.join(sorted(unknown))}")
        return cls(**d)


class PADOutput(NamedTuple):
    logit: torch.Tensor
    map: Optional[torch.Tensor]


@dataclass
class PredictionBundle:
    binary_logit: float
    binary_probability: float
    intermediate_map: Optional[np.ndarray] = None


def _load_pretrained_features(config):
    if config.weights_path is not None:
        path = Path(config.weights_path)
        if not path.is_file():
            raise PretrainedWeightsUnavailable(f"DenseNet121 weights not found at {path}")
        net = torchvision.models.densenet121(weights=None)
        state = torch.load(path, map_location="cpu", weights_only=True)
        try:
            net.load_state_dict(state)
        except RuntimeError as exc:
            raise PretrainedWeightsUnavailable(f"{path} is not a DenseNet121 state dict: {exc}") from exc
        return net.features
    try:
        net = torchvision.models.densenet121(weights=torchvision.models.DenseNet121_Weights.IMAGENET1K_V1)
    except Exception as exc:  # network failures surface as many exception types
        raise PretrainedWeightsUnavailable(
            "pretrained DenseNet121 weights are not cached and could not be fetched; "
            "set weights_path to a local copy or disable pretrained_init"
        ) from exc
    return net.features


class Backbone(nn.Module):
    """DenseNet stem through transition 2, returning the three level activations."""

    def __init__(self, config):
        super().__init__()
        if config.pretrained_init:
            features = _load_pretrained_features(config)
        else:
            # two trailing blocks are built and discarded so module names match DenseNet121
            net = torchvision.models.DenseNet(
                growth_rate=config.growth_rate,
                block_config=(*config.block_layers, 1, 1),
                num_init_features=config.init_features,
                bn_size=config.bn_size,
            )
            features = net.features
        kept = list(features.named_children())[:8]
        self.features = nn.Sequential(OrderedDict(kept))

    @property
    def channels(self):
        t1 = self.features.transition1.conv.out_channels
        t2 = self.features.transition2.conv.out_channels
        return {"low": self.features.conv0.out_channels, "mid": t1, "high": t2}

    def forward(self, x):
        out = {}
        for name, module in self.features.named_children():
            x = module(x)
            for level, target in LEVEL_MODULES.items():
                if name == target:
                    out[level] = x
        return out


class PADNet(nn.Module):
    def __init__(self, config):
        super().__init__()
        self.config = config
        self.backbone = Backbone(config)
        channels = self.backbone.channels
        self.config.channel_widths = dict(channels)
        m = config.map_size
        if config.variant == "baseline":
            self.pool = nn.AdaptiveAvgPool2d(1)
            self.classifier = nn.Linear(channels["high"], 1)
        elif config.variant == "pbs":
            self.reduce = nn.Conv2d(channels["high"], 1, kernel_size=1)
            self.classifier = nn.Linear(m * m, 1)
        else:
            self.fusion = MultiLevelAttentionFusion(channels, m)
            self.classifier = nn.Linear(m * m, 1)

    @property
    def variant(self):
        return self.config.variant

    def _check_input(self, x):
        s = self.config.input_size
        if x.dim() != 4 or x.shape[1] != 3 or x.shape[2] != s or x.shape[3] != s:
            raise InputError(f"expected a N x 3 x {s} x {s} batch, got {tuple(x.shape)}")

    def forward(self, x, use_attention=True):
        self._check_input(x)
        feats = self.backbone(x)
        if self.variant == "baseline":
            logit = self.classifier(self.pool(feats["high"]).flatten(1))
            return PADOutput(logit.squeeze(1), None)
        if self.variant == "pbs":
            pix = self.reduce(feats["high"])
        else:
            pix = self.fusion(feats, use_attention=use_attention)
        logit = self.classifier(pix.flatten(1))
        return PADOutput(logit.squeeze(1), pix)

    def attention_maps(self, x):
        """Per-level attention maps (A-PBS only), each N x 1 x H x W."""
        if self.variant != "apbs":
            raise ConfigurationError(f"variant {self.variant!r} has no attention modules")
        self._check_input(x)
        return self.fusion.attention_maps(self.backbone(x))


def build_model(config, seed=0):
    """Build the network for ``config``; head (and scratch backbone) init is seeded."""
    if isinstance(config, dict):
        config = ModelConfig.from_dict(config)
    config = dataclasses.replace(config)
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(seed)
        model = PADNet(config)
    return model


def predict(model, batch):
    """Evaluation-mode forward returning one PredictionBundle per sample."""
    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            out = model(batch)
    finally:
        model.train(was_training)
    logits = out.logit.double()
    probs = torch.sigmoid(logits)
    bundles = []
    for i in range(batch.shape[0]):
        pix = None if out.map is None else out.map[i, 0].cpu().numpy().copy()
        bundles.append(PredictionBundle(float(logits[i]), float(probs[i]), pix))
    return bundles


def save_checkpoint(model, path, **extra):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "model_config": model.config.to_dict(),
        "attention_kernels": model.config.attention_kernels,
        "state_dict": model.state_dict(),
        "extra": extra,
    }
    torch.save(payload, path)
    return path


def load_checkpoint(path, variant=None):
    """Load a checkpoint; ``variant`` (if given) must match the stored one."""
    try:
        payload = torch.load(Path(path), map_location="cpu", weights_only=True)
    except FileNotFoundError:
        raise
    except Exception as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not an irispad checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {payload.get('version')}")
    cfg = dict(payload["model_config"])
    if variant is not None and cfg["variant"] != variant:
        raise CheckpointError(f"checkpoint holds variant {cfg['variant']!r}, expected {variant!r}")
    if cfg["variant"] == "apbs" and payload.get("attention_kernels") != LEVEL_KERNELS:
        raise CheckpointError(f"unexpected attention kernels {payload.get('attention_kernels')}")
    cfg["pretrained_init"] = False
    cfg["weights_path"] = None
    cfg.pop("channel_widths", None)
    model = build_model(ModelConfig.from_dict(cfg))
    model.load_state_dict(payload["state_dict"])
    model.eval()
    return model, payload.get("extra", {})


__all__ = [
    "IMAGENET_MEAN",
    "IMAGENET_STD",
    "LEVELS",
    "ModelConfig",
    "PADNet",
    "PADOutput",
    "PredictionBundle",
    "VARIANTS",
    "build_model",
    "load_checkpoint",
    "predict",
    "save_checkpoint",
]
