"""Pixel-wise supervision targets and the combined SmoothL1 + BCE objective."""

from dataclasses import dataclass

import torch

from .errors import ConfigurationError, InputError

BONA_FIDE = "bona_fide"
ATTACK = "attack"
LABEL_VALUE = {BONA_FIDE: 1.0, ATTACK: 0.0}
BCE_EPS = 1e-7
DEFAULT_LAMBDA = 0.2


@dataclass(frozen=True)
class LossBundle:
    smooth_l1: float
    bce: float
    overall: float
    lam: float


def label_value(label):
    """Map a label string (or 0/1) to its supervision value; bona fide is 1."""
    if isinstance(label, str):
        try:
            return LABEL_VALUE[label]
        except KeyError:
            raise InputError(f"unknown label {label!r}") from None
    return float(label)


def make_target_map(label, map_size, dtype=torch.float32):
    return torch.full((map_size, map_size), label_value(label), dtype=dtype)


def make_target_maps(labels, map_size, dtype=torch.float32):
    """Batch of constant targets, N x 1 x map_size x map_size, from a 0/1 label tensor."""
    labels = torch.as_tensor(labels, dtype=dtype)
    return labels.view(-1, 1, 1, 1).expand(-1, 1, map_size, map_size).clone()


def smooth_l1(pred, target):
    """Mean over pixels of the piecewise quadratic/linear residual penalty."""
    pred = torch.as_tensor(pred)
    target = torch.as_tensor(target, dtype=pred.dtype)
    if pred.shape != target.shape:
        raise InputError(f"map shape {tuple(pred.shape)} does not match target {tuple(target.shape)}")
    d = (target - pred).abs()
    z = torch.where(d < 1, 0.5 * d * d, d - 0.5)
    return z.mean()


def bce(prob, label):
    """Mean binary cross-entropy of the probability clamped to [eps, 1 - eps]."""
    prob = torch.as_tensor(prob)
    if not prob.is_floating_point():
        prob = prob.double()
    label = torch.as_tensor(label, dtype=prob.dtype)
    with torch.no_grad():
        if bool(((prob < 0) | (prob > 1) | torch.isnan(prob)).any()):
            raise InputError("probabilities must lie in [0, 1]")
    p = prob.clamp(BCE_EPS, 1 - BCE_EPS)
    return -(label * torch.log(p) + (1 - label) * torch.log(1 - p)).mean()


def _check_lambda(lam):
    if not 0.0 <= lam <= 1.0:
        raise ConfigurationError(f"lambda must lie in [0, 1] (got {lam})")


def combine(smooth, binary, lam=DEFAULT_LAMBDA):
    """Weighted sum kept as a tensor so it can be back-propagated."""
    _check_lambda(lam)
    return lam * smooth + (1 - lam) * binary


def overall_loss(smooth, binary, lam=DEFAULT_LAMBDA):
    _check_lambda(lam)
    smooth, binary = float(smooth), float(binary)
    if smooth < 0 or binary < 0:
        raise InputError("loss components must be nonnegative")
    return LossBundle(smooth, binary, lam * smooth + (1 - lam) * binary, lam)


def compute_loss(output, labels, lam=DEFAULT_LAMBDA):
    """Route a model output to its objective.

    Variants without an intermediate map are trained on BCE alone; the others
    use the lambda-weighted sum. Returns ``(total_tensor, LossBundle)``.
    """
    _check_lambda(lam)
    labels = torch.as_tensor(labels, dtype=output.logit.dtype)
    binary = bce(torch.sigmoid(output.logit), labels)
    if output.map is None:
        value = float(binary.detach())
        return binary, LossBundle(0.0, value, value, 0.0)
    target = make_target_maps(labels, output.map.shape[-1], dtype=output.map.dtype)
    smooth = smooth_l1(output.map, target)
    total = combine(smooth, binary, lam)
    return total, LossBundle(float(smooth.detach()), float(binary.detach()), float(total.detach()), lam)
