"""Training-time augmentation: horizontal flips with probability 0.5, nothing else."""

import numpy as np
import torch

FLIP_PROBABILITY = 0.5


def hflip(image):
    """Mirror left-right. Arrays are H x W (x C); tensors are (...) x H x W."""
    if isinstance(image, torch.Tensor):
        return torch.flip(image, dims=(-1,))
    return np.ascontiguousarray(np.asarray(image)[:, ::-1, ...])


def flip_decisions(n, seed, epoch=0):
    """Flip flags for ``n`` sample slots of one epoch.

    Decisions depend only on (seed, epoch, position), so they are the same
    no matter how loading is parallelised.
    """
    rng = np.random.default_rng([seed, epoch, 1])
    return rng.random(n) < FLIP_PROBABILITY


def augment(image, seed, training=True):
    """Flip ``image`` with probability 0.5; ``seed`` is an int or a numpy Generator."""
    if not training:
        return image
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    return hflip(image) if rng.random() < FLIP_PROBABILITY else image
