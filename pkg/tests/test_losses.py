import math

import numpy as np
import pytest
import torch

from irispad.errors import ConfigurationError, InputError
from irispad.losses import (
    bce,
    combine,
    compute_loss,
    make_target_map,
    make_target_maps,
    overall_loss,
    smooth_l1,
)
from irispad.model import PADOutput


@pytest.mark.parametrize("label,size,value", [("bona_fide", 14, 1.0), ("attack", 14, 0.0), ("bona_fide", 7, 1.0)])
def test_target_map(label, size, value):
    t = make_target_map(label, size)
    assert t.shape == (size, size)
    assert torch.all(t == value)


def test_target_maps_batch():
    t = make_target_maps(torch.tensor([1.0, 0.0]), 3)
    assert t.shape == (2, 1, 3, 3)
    assert t[0].eq(1).all() and t[1].eq(0).all()


def test_unknown_label():
    with pytest.raises(InputError):
        make_target_map("spoof", 3)


@pytest.mark.parametrize(
    "x,y,expected",
    [
        (torch.full((2, 2), 0.3), torch.full((2, 2), 0.3), 0.0),
        (torch.tensor([0.5]), torch.tensor([1.0]), 0.125),
        (torch.tensor([2.5]), torch.tensor([0.0]), 2.0),
    ],
)
def test_smooth_l1_values(x, y, expected):
    assert float(smooth_l1(x.double(), y.double())) == pytest.approx(expected, abs=1e-6)


def test_smooth_l1_is_a_pixel_mean():
    x = torch.tensor([[0.0, 3.0]], dtype=torch.float64)
    y = torch.zeros_like(x)
    assert float(smooth_l1(x, y)) == pytest.approx((0.0 + 2.5) / 2)


def test_smooth_l1_shape_mismatch():
    with pytest.raises(InputError):
        smooth_l1(torch.zeros(3, 3), torch.zeros(4, 4))


@pytest.mark.parametrize("side", [1.0, -1.0])
def test_smooth_l1_derivative_at_kink(side):
    y = torch.tensor([0.0], dtype=torch.float64)
    h = 1e-7
    at = side * 1.0

    def f(v):
        return float(smooth_l1(torch.tensor([v], dtype=torch.float64), y))

    left = (f(at) - f(at - h)) / h
    right = (f(at + h) - f(at)) / h
    assert left == pytest.approx(side, abs=1e-6)
    assert right == pytest.approx(side, abs=1e-6)
    x = torch.tensor([at], dtype=torch.float64, requires_grad=True)
    smooth_l1(x, y).backward()
    assert float(x.grad) == pytest.approx(side, abs=1e-6)


@pytest.mark.parametrize("p,y,expected", [(1.0, 1.0, 0.0), (0.5, 1.0, math.log(2)), (0.9, 0.0, -math.log(0.1))])
def test_bce_values(p, y, expected):
    assert float(bce(torch.tensor([p], dtype=torch.float64), [y])) == pytest.approx(expected, abs=1e-6)


def test_bce_extremes_stay_finite():
    assert math.isfinite(float(bce(torch.tensor([0.0]), [1.0])))
    assert math.isfinite(float(bce(torch.tensor([1.0]), [0.0])))


@pytest.mark.parametrize("p", [-0.1, 1.2, float("nan")])
def test_bce_rejects_out_of_range(p):
    with pytest.raises(InputError):
        bce(torch.tensor([p]), [1.0])


def test_bce_monotone_on_grid():
    p = torch.linspace(0.001, 0.999, 1000, dtype=torch.float64)
    pos = torch.stack([bce(v.view(1), [1.0]) for v in p])
    neg = torch.stack([bce(v.view(1), [0.0]) for v in p])
    assert torch.all(torch.diff(pos) < 0)
    assert torch.all(torch.diff(neg) > 0)


@pytest.mark.parametrize("s,b,lam,expected", [(0.5, 1.0, 0.2, 0.9), (0.0, 0.0, 0.2, 0.0), (1.0, 0.0, 0.2, 0.2)])
def test_overall_loss(s, b, lam, expected):
    bundle = overall_loss(s, b, lam)
    assert bundle.overall == pytest.approx(expected, abs=1e-12)
    assert bundle.overall == lam * bundle.smooth_l1 + (1 - lam) * bundle.bce


def test_overall_default_lambda():
    assert overall_loss(1.0, 0.0).lam == 0.2


@pytest.mark.parametrize("lam", [-0.01, 1.5])
def test_lambda_range(lam):
    with pytest.raises(ConfigurationError):
        overall_loss(0.1, 0.1, lam)
    with pytest.raises(ConfigurationError):
        combine(torch.tensor(0.1), torch.tensor(0.1), lam)


def test_negative_components_rejected():
    with pytest.raises(InputError):
        overall_loss(-1.0, 0.5)


def test_router_skips_map_for_baseline():
    out = PADOutput(torch.tensor([0.3, -0.2]), None)
    total, bundle = compute_loss(out, torch.tensor([1.0, 0.0]))
    assert bundle.smooth_l1 == 0.0
    assert float(total) == pytest.approx(bundle.bce)
    assert bundle.overall == bundle.bce


def test_router_combines_for_map_variants():
    logits = torch.tensor([0.3, -0.2], dtype=torch.float64)
    maps = torch.tensor([0.8, 1.7], dtype=torch.float64).view(2, 1, 1, 1).expand(2, 1, 2, 2)
    labels = torch.tensor([1.0, 0.0], dtype=torch.float64)
    total, bundle = compute_loss(PADOutput(logits, maps), labels)
    s = smooth_l1(maps, make_target_maps(labels, 2, torch.float64))
    b = bce(torch.sigmoid(logits), labels)
    assert float(total) == pytest.approx(0.2 * float(s) + 0.8 * float(b), abs=1e-12)
    assert bundle.smooth_l1 == pytest.approx(float(s))


def test_gradient_wrt_map_and_logit_matches_finite_differences():
    torch.manual_seed(0)
    logits = torch.randn(3, dtype=torch.float64, requires_grad=True)
    maps = (2 * torch.randn(3, 1, 2, 2, dtype=torch.float64)).requires_grad_(True)
    labels = torch.tensor([1.0, 0.0, 1.0], dtype=torch.float64)

    def f():
        return compute_loss(PADOutput(logits, maps), labels)[0]

    def value():
        with torch.no_grad():
            return float(f())

    f().backward()
    eps = 1e-6
    for tensor in (logits, maps):
        flat = tensor.data.view(-1)
        for i in range(flat.numel()):
            old = float(flat[i])
            flat[i] = old + eps
            up = value()
            flat[i] = old - eps
            down = value()
            flat[i] = old
            numeric = (up - down) / (2 * eps)
            analytic = float(tensor.grad.view(-1)[i])
            assert abs(analytic - numeric) <= 1e-6 + 1e-4 * abs(numeric)
