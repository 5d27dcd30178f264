"""Image decoding and conversion to normalized model input."""

import numpy as np
import torch
from PIL import Image

from ..errors import IngestionError
from ..model import IMAGENET_MEAN, IMAGENET_STD

_MEAN = np.asarray(IMAGENET_MEAN, dtype=np.float32)
_STD = np.asarray(IMAGENET_STD, dtype=np.float32)


def as_rgb(array):
    """Replicate single-channel images to three channels."""
    array = np.asarray(array)
    if array.ndim == 2:
        return np.repeat(array[:, :, None], 3, axis=2)
    if array.ndim == 3 and array.shape[2] == 1:
        return np.repeat(array, 3, axis=2)
    if array.ndim == 3 and array.shape[2] == 4:
        return array[:, :, :3]
    if array.ndim == 3 and array.shape[2] == 3:
        return array
    raise IngestionError(f"unsupported image shape {array.shape}")


def resize(array, size):
    """Bilinear resize of a uint8 H x W (x C) array to size x size."""
    array = np.asarray(array)
    if array.shape[0] == size and array.shape[1] == size:
        return array
    return np.asarray(Image.fromarray(array).resize((size, size), Image.BILINEAR))


def load_image(path, size=None):
    """Decode ``path`` to a uint8 H x W x 3 array, optionally resized."""
    try:
        with Image.open(path) as img:
            img.load()
            if img.mode not in ("L", "RGB"):
                img = img.convert("RGB")
            array = np.asarray(img)
    except (OSError, ValueError) as exc:
        raise IngestionError(f"cannot decode image {path}: {exc}") from None
    array = as_rgb(array)
    return resize(array, size) if size is not None else array


def to_tensor(array):
    """uint8 H x W (x C) array to a normalized 3 x H x W float tensor."""
    rgb = as_rgb(array).astype(np.float32) / 255.0
    rgb = (rgb - _MEAN) / _STD
    return torch.from_numpy(np.ascontiguousarray(rgb.transpose(2, 0, 1)))


def from_tensor(tensor):
    """Inverse of ``to_tensor`` (to uint8 H x W x 3)."""
    rgb = tensor.detach().cpu().numpy().transpose(1, 2, 0) * _STD + _MEAN
    return np.clip(np.rint(rgb * 255.0), 0, 255).astype(np.uint8)
