import numpy as np
import pytest
import torch

from irispad.errors import ConfigurationError, ProtocolError, ScoringError, TrainingDivergedError
from irispad.model import ModelConfig, build_model, load_checkpoint
from irispad.training import TrainConfig, batch_slices, load_arrays, read_train_log, score, train

from conftest import tiny_config


@pytest.fixture(scope="module")
def split(small_synth):
    _, records = small_synth
    return [r for r in records if r.split == "train"], [r for r in records if r.split == "test"]


def test_lr_schedule():
    cfg = TrainConfig()
    lrs = [cfg.lr_at(e) for e in range(20)]
    assert lrs[:6] == [1e-4] * 6
    assert lrs[6:12] == [5e-5] * 6
    assert lrs[12:18] == [2.5e-5] * 6
    assert lrs[18:] == [1.25e-5] * 2


def test_config_validation():
    with pytest.raises(ConfigurationError):
        TrainConfig(lam=2.0)
    with pytest.raises(ConfigurationError):
        TrainConfig.from_dict({"learning_rate": 1.0})
    assert TrainConfig.from_dict(TrainConfig(seed=3).to_dict()) == TrainConfig(seed=3)


def test_batch_slices_merge_singleton():
    assert batch_slices(65, 32) == [(0, 32), (32, 65)]
    assert batch_slices(64, 32) == [(0, 32), (32, 64)]
    assert batch_slices(1, 32) == [(0, 1)]


def test_log_follows_schedule(tiny_model, split, tmp_path):
    train_records, _ = split
    model = tiny_model("pbs")
    cfg = TrainConfig(variant="pbs", epochs_max=3, lr_halve_every=2, batch_size=16, lr_init=1e-3)
    result = train(model, train_records, cfg, out_dir=tmp_path)
    assert [e.lr for e in result.log] == [1e-3, 1e-3, 5e-4]
    logged = read_train_log(tmp_path / "train_log.jsonl")
    assert [e.epoch for e in logged] == [0, 1, 2]
    assert [e.lr for e in logged] == [cfg.lr_at(e) for e in range(3)]
    for e in logged:
        assert e.overall == pytest.approx(0.2 * e.smooth_l1 + 0.8 * e.bce, rel=1e-6)
    assert result.checkpoint == tmp_path / "checkpoint.pt"


def test_zero_epochs_keeps_initialization(tiny_model, split, tmp_path):
    train_records, _ = split
    model = tiny_model("apbs")
    before = {k: v.clone() for k, v in model.state_dict().items()}
    result = train(model, train_records, TrainConfig(variant="apbs", epochs_max=0), out_dir=tmp_path)
    assert result.log == []
    loaded, _ = load_checkpoint(result.checkpoint)
    after = loaded.state_dict()
    assert all(torch.equal(before[k], after[k]) for k in before)


def test_rerun_is_identical(split, tmp_path):
    train_records, test_records = split
    runs = []
    for i in range(2):
        model = build_model(tiny_config("apbs"), seed=1)
        res = train(model, train_records, TrainConfig(variant="apbs", epochs_max=3, batch_size=16, seed=5),
                    out_dir=tmp_path / str(i))
        runs.append(([e.overall for e in res.log], [s.score for s in score(model, test_records)]))
    assert runs[0] == runs[1]


def test_checkpoint_scores_match(split, tmp_path):
    train_records, test_records = split
    model = build_model(tiny_config("pbs"), seed=0)
    res = train(model, train_records, TrainConfig(variant="pbs", epochs_max=1, batch_size=16), out_dir=tmp_path)
    loaded, extra = load_checkpoint(res.checkpoint)
    assert extra["train_config"]["epochs_max"] == 1
    assert [s.score for s in score(model, test_records)] == [s.score for s in score(loaded, test_records)]


def test_variant_mismatch(tiny_model, split):
    with pytest.raises(ConfigurationError):
        train(tiny_model("pbs"), split[0], TrainConfig(variant="apbs"))


def test_empty_training_set(tiny_model):
    with pytest.raises(ProtocolError):
        train(tiny_model("pbs"), [], TrainConfig(variant="pbs"))


def test_non_finite_loss_aborts(tiny_model, split):
    model = tiny_model("pbs")
    with torch.no_grad():
        model.reduce.bias.fill_(float("inf"))
    with pytest.raises(TrainingDivergedError) as info:
        train(model, split[0], TrainConfig(variant="pbs", epochs_max=1, batch_size=16))
    assert (info.value.epoch, info.value.batch) == (0, 0)
    assert "epoch 0, batch 0" in str(info.value)


def test_nan_logits_abort(tiny_model, split):
    model = tiny_model("baseline")
    with torch.no_grad():
        model.classifier.bias.fill_(float("nan"))
    with pytest.raises(TrainingDivergedError):
        train(model, split[0], TrainConfig(variant="baseline", epochs_max=1, batch_size=16))


def test_score_empty_and_duplicates(tiny_model, split):
    model = tiny_model("apbs").eval()
    assert score(model, []) == []
    r = split[1][0]
    out = score(model, [r, r])
    assert len(out) == 2 and out[0] == out[1]
    assert out[0].path == r.path and out[0].label == r.label and 0 <= out[0].score <= 1


def test_unreadable_image_aborts_scoring(tiny_model, tmp_path, split):
    bad = split[1][0]
    broken = tmp_path / "broken.png"
    broken.write_bytes(b"no")
    from dataclasses import replace

    with pytest.raises(ScoringError):
        score(tiny_model("pbs"), [split[1][1], replace(bad, path=str(broken), root=None)])


@pytest.fixture(scope="module")
def trend_data(split):
    return load_arrays(split[0], 32)


@pytest.mark.parametrize("variant", ["baseline", "pbs", "apbs"])
def test_loss_moving_average_non_increasing(split, trend_data, variant):
    model = build_model(ModelConfig(variant=variant, input_size=32, pretrained_init=False), seed=0)
    res = train(model, split[0], TrainConfig(variant=variant, epochs_max=9, batch_size=16, seed=0), data=trend_data)
    losses = np.array([e.overall for e in res.log])
    moving = np.convolve(losses, np.ones(3) / 3, mode="valid")
    assert np.all(np.diff(moving) <= 0), losses


def test_converged_toy_model_separates_training_set(split, trend_data):
    model = build_model(ModelConfig(variant="apbs", input_size=32, pretrained_init=False), seed=0)
    train(model, split[0], TrainConfig(variant="apbs", epochs_max=6, batch_size=16, lr_init=1e-3), data=trend_data)
    scores = score(model, split[0], data=trend_data)
    bona = np.mean([s.score for s in scores if s.label == "bona_fide"])
    atk = np.mean([s.score for s in scores if s.label == "attack"])
    assert bona > atk
