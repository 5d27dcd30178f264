import numpy as np
import pytest
import torch

from irispad.data import SynthSpec, synthesize_dataset
from irispad.model import ModelConfig, build_model

TINY = dict(pretrained_init=False, growth_rate=4, block_layers=(1, 1), init_features=8, bn_size=2)


def tiny_config(variant="apbs", input_size=32):
    return ModelConfig(variant=variant, input_size=input_size, **TINY)


@pytest.fixture
def tiny_model():
    def make(variant="apbs", input_size=32, seed=0, dtype=torch.float32):
        return build_model(tiny_config(variant, input_size), seed=seed).to(dtype)

    return make


@pytest.fixture(scope="session")
def small_synth(tmp_path_factory):
    """A few dozen synthetic images with a train/test split."""
    out = tmp_path_factory.mktemp("synth_small")
    spec = SynthSpec(
        train={"none": 24, "textured_lens": 12, "printout": 12},
        test={"none": 8, "textured_lens": 4, "printout": 4},
        image_size=64,
        images_per_subject=4,
    )
    records = synthesize_dataset(spec, out, seed=3)
    return out, records


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
