import numpy as np
import pytest
import torch
from PIL import Image

from irispad.errors import ConfigurationError, InputError
from irispad.explain import blend, cam_filename, heat_colors, overlay, region_contrast, score_cam


@pytest.fixture
def model(tiny_model):
    return tiny_model("apbs", 32).eval()


@pytest.mark.parametrize("layer", ["pool0", "transition1", "transition2"])
def test_map_size_and_range(model, layer):
    sal = score_cam(model, torch.randn(3, 32, 32), layer)
    assert sal.shape == (32, 32)
    assert sal.min() >= 0 and sal.max() <= 1
    assert sal.max() == 1.0 and sal.min() == 0.0


def test_unknown_layer(model):
    with pytest.raises(ConfigurationError):
        score_cam(model, torch.randn(3, 32, 32), "denseblock3")


def test_batched_input_rejected(model):
    with pytest.raises(InputError):
        score_cam(model, torch.randn(1, 3, 32, 32))


def test_zero_activations_give_zero_map(model):
    sal = score_cam(model, torch.randn(3, 32, 32), "transition2", activations=torch.zeros(16, 2, 2))
    assert np.all(sal == 0)


def test_deterministic(model):
    x = torch.randn(3, 32, 32, generator=torch.Generator().manual_seed(2))
    np.testing.assert_array_equal(score_cam(model, x), score_cam(model, x))


def test_mask_batch_size_does_not_matter(model):
    x = torch.randn(3, 32, 32)
    np.testing.assert_allclose(score_cam(model, x, "pool0", batch_size=3), score_cam(model, x, "pool0"), atol=1e-6)


def test_gray_replication_invariance(model):
    from irispad.data.images import to_tensor

    gray = np.random.default_rng(0).integers(0, 256, size=(32, 32), dtype=np.uint8)
    a = score_cam(model, to_tensor(gray))
    b = score_cam(model, to_tensor(np.repeat(gray[:, :, None], 3, axis=2)))
    np.testing.assert_array_equal(a, b)


def test_matches_per_channel_loop(model):
    import torch.nn.functional as F

    x = torch.randn(3, 32, 32, dtype=torch.float64)
    model = model.double()
    acts = torch.rand(5, 2, 2, dtype=torch.float64)
    with torch.no_grad():
        base = torch.sigmoid(model(torch.zeros(1, 3, 32, 32, dtype=torch.float64)).logit)[0]
        gains, ups = [], []
        for c in range(5):
            up = F.interpolate(acts[c][None, None], size=(32, 32), mode="bilinear", align_corners=False)[0, 0]
            m = (up - up.min()) / (up.max() - up.min())
            gains.append(float(torch.sigmoid(model((x * m)[None]).logit)[0] - base))
            ups.append(up)
    w = np.exp(gains) / np.exp(gains).sum()
    cam = np.maximum(sum(wi * u.numpy() for wi, u in zip(w, ups)), 0)
    cam = (cam - cam.min()) / (cam.max() - cam.min())
    np.testing.assert_allclose(score_cam(model, x, "transition2", activations=acts), cam, atol=1e-10)


def test_overlay_opacity_extremes(rng):
    img = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
    sal = rng.random((16, 16))
    np.testing.assert_array_equal(blend(img, sal, 0.0), img)
    np.testing.assert_array_equal(blend(img, sal, 1.0), heat_colors(sal))
    with pytest.raises(ConfigurationError):
        blend(img, sal, 1.5)


def test_overlay_png_round_trip(tmp_path, rng):
    img = rng.integers(0, 256, size=(16, 16), dtype=np.uint8)
    sal = rng.random((8, 8))
    arr = overlay(img, sal, 0.4, tmp_path / "x" / "o.png")
    back = np.asarray(Image.open(tmp_path / "x" / "o.png"))
    assert back.shape == (16, 16, 3)
    assert np.abs(back.astype(int) - arr.astype(int)).max() <= 1


def test_heat_extremes_are_blue_and_red():
    heat = heat_colors(np.array([[0.0, 1.0]]))
    assert heat[0, 0, 2] > heat[0, 0, 0]
    assert heat[0, 1, 0] > heat[0, 1, 2]


def test_cam_filename():
    assert cam_filename("images/train_00001_printout_nir.png", "apbs", "high") == "train_00001_printout_nir_apbs_transition2.png"
    assert cam_filename("a/b.png", "pbs", "stem") == "b_pbs_pool0.png"


def test_region_contrast():
    sal = np.zeros((4, 4))
    mask = np.zeros((4, 4), bool)
    mask[:2] = True
    sal[:2] = 0.6
    sal[2:] = 0.4
    assert region_contrast(sal, mask) == pytest.approx(0.5)
