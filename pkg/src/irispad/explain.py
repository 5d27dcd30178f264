"""Score-weighted class activation maps and heat overlays."""

from pathlib import Path

import cv2
import numpy as np
import torch
import torch.nn.functional as F
from PIL import Image

from .errors import ConfigurationError, InputError

LAYER_ALIASES = {
    "low": "low", "pool0": "low", "stem": "low",
    "mid": "mid", "transition1": "mid",
    "high": "high", "transition2": "high",
}
LAYER_NAMES = {"low": "pool0", "mid": "transition1", "high": "transition2"}
DEFAULT_LAYER = "transition2"
MASK_BATCH = 32


def resolve_layer(layer):
    try:
        return LAYER_ALIASES[layer]
    except KeyError:
        raise ConfigurationError(
            f"unknown layer {layer!r}; expected one of pool0, transition1, transition2"
        ) from None


def _minmax(t, dims):
    lo = t.amin(dim=dims, keepdim=True)
    hi = t.amax(dim=dims, keepdim=True)
    span = hi - lo
    safe = torch.where(span > 0, span, torch.ones_like(span))
    return torch.where(span > 0, (t - lo) / safe, torch.zeros_like(t))


def _bona_fide_prob(model, x):
    return torch.sigmoid(model(x).logit.double())


@torch.no_grad()
def score_cam(model, image, layer=DEFAULT_LAYER, batch_size=MASK_BATCH, activations=None):
    """Saliency map (H x W numpy array in [0, 1]) for one normalized 3 x H x W image.

    Each activation channel of ``layer`` is upsampled to the input size,
    min-max normalized and used as a multiplicative input mask. The channel
    weight is the softmax over channels of the bona fide score gain relative
    to an all-zero mask. ``activations`` (C x h x w) overrides the recorded
    activations.
    """
    level = resolve_layer(layer)
    if image.dim() != 3:
        raise InputError(f"expected a single 3 x H x W image, got {tuple(image.shape)}")
    model.eval()
    x = image.unsqueeze(0)
    size = x.shape[-2:]
    if activations is None:
        activations = model.backbone(x)[level][0]
    acts = activations.unsqueeze(0).to(x.dtype)
    up = F.interpolate(acts, size=size, mode="bilinear", align_corners=False)[0]
    masks = _minmax(up, dims=(1, 2))
    baseline = _bona_fide_prob(model, torch.zeros_like(x))
    gains = []
    for lo in range(0, masks.shape[0], batch_size):
        m = masks[lo:lo + batch_size].unsqueeze(1)
        gains.append(_bona_fide_prob(model, x * m) - baseline)
    weights = torch.softmax(torch.cat(gains), dim=0).to(up.dtype)
    cam = F.relu((weights.view(-1, 1, 1) * up).sum(0))
    return _minmax(cam, dims=(0, 1)).cpu().numpy()


def heat_colors(saliency):
    """Map saliency in [0, 1] to an RGB uint8 jet heat map."""
    gray = np.clip(np.rint(np.asarray(saliency) * 255), 0, 255).astype(np.uint8)
    bgr = cv2.applyColorMap(gray, cv2.COLORMAP_JET)
    return cv2.cvtColor(bgr, cv2.COLOR_BGR2RGB)


def blend(image, saliency, opacity=0.5):
    if not 0.0 <= opacity <= 1.0:
        raise ConfigurationError(f"opacity must lie in [0, 1] (got {opacity})")
    image = np.asarray(image)
    if image.ndim == 2:
        image = np.repeat(image[:, :, None], 3, axis=2)
    heat = heat_colors(saliency)
    if heat.shape[:2] != image.shape[:2]:
        heat = np.asarray(Image.fromarray(heat).resize(image.shape[1::-1], Image.BILINEAR))
    mixed = (1.0 - opacity) * image.astype(float) + opacity * heat.astype(float)
    return np.clip(np.rint(mixed), 0, 255).astype(np.uint8)


def overlay(image, saliency, opacity=0.5, path=None):
    """Blend a heat map over ``image``; writes a PNG when ``path`` is given."""
    out = blend(image, saliency, opacity)
    if path is not None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        Image.fromarray(out).save(path, format="PNG")
    return out


def cam_filename(sample_path, variant, layer):
    return f"{Path(sample_path).stem}_{variant}_{LAYER_NAMES[resolve_layer(layer)]}.png"


def region_contrast(saliency, mask):
    """Relative excess of mean saliency inside ``mask`` over outside it."""
    inside = float(saliency[mask].mean())
    outside = float(saliency[~mask].mean())
    if outside == 0:
        return np.inf if inside > 0 else 0.0
    return inside / outside - 1.0
