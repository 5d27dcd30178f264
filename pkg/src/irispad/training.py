"""Training recipe, scoring and checkpoints for the three variants."""

import dataclasses
import json
import logging
import math
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import torch

from .data.augment import flip_decisions
from .data.images import as_rgb, load_image, resize
from .data.protocols import balance_by_undersampling
from .data.video import DEFAULT_STRIDE, extract_video_frames
from .errors import ConfigurationError, IngestionError, InputError, ProtocolError, ScoringError, TrainingDivergedError
from .losses import compute_loss
from .model import IMAGENET_MEAN, IMAGENET_STD, save_checkpoint
from .scores import ScoreRecord

log = logging.getLogger(__name__)


@dataclass
class TrainConfig:
    lr_init: float = 1e-4
    weight_decay: float = 1e-6
    epochs_max: int = 20
    lr_halve_every: int = 6
    batch_size: int = 64
    lam: float = 0.2
    seed: int = 0
    variant: str = "apbs"
    balance: bool = True
    augment: bool = True
    frame_stride: int = DEFAULT_STRIDE
    recalibrate_bn: bool = True
    betas: tuple = (0.9, 0.999)
    eps: float = 1e-8

    def __post_init__(self):
        self.betas = tuple(self.betas)
        if self.epochs_max < 0 or self.batch_size < 1 or self.lr_halve_every < 1:
            raise ConfigurationError("epochs_max >= 0, batch_size >= 1 and lr_halve_every >= 1 required")
        if not 0.0 <= self.lam <= 1.0:
            raise ConfigurationError(f"lambda must lie in [0, 1] (got {self.lam})")

    def lr_at(self, epoch):
        return self.lr_init * 0.5 ** (epoch // self.lr_halve_every)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["betas"] = list(self.betas)
        return d

    @classmethod
    def from_dict(cls, d):
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigurationError(f"unknown train config keys: {', '.join(sorted(unknown))}")
        return cls(**d)


@dataclass
class EpochLog:
    epoch: int
    lr: float
    overall: float
    bce: float
    smooth_l1: float
    batches: int
    wall_time: float


@dataclass
class TrainResult:
    checkpoint: Path
    log: list


def expand_records(records, stride=DEFAULT_STRIDE):
    """Replace video records by their sampled frames; images pass through."""
    out = []
    for rec in records:
        if rec.is_video:
            out.extend(f.record for f in extract_video_frames(rec, stride))
        else:
            out.append(rec)
    return out


def load_arrays(records, size, stride=DEFAULT_STRIDE):
    """Decode records into a uint8 N x 3 x size x size tensor plus the (frame-expanded) records."""
    items, arrays = [], []
    for rec in records:
        if rec.is_video:
            for frame in extract_video_frames(rec, stride):
                items.append(frame.record)
                arrays.append(resize(as_rgb(frame.image), size))
        else:
            items.append(rec)
            arrays.append(load_image(rec.resolve(), size))
    if not arrays:
        return items, torch.zeros((0, 3, size, size), dtype=torch.uint8)
    stack = np.stack(arrays).transpose(0, 3, 1, 2)
    return items, torch.from_numpy(np.ascontiguousarray(stack))


_MEAN = torch.tensor(IMAGENET_MEAN).view(1, 3, 1, 1)
_STD = torch.tensor(IMAGENET_STD).view(1, 3, 1, 1)


def normalize(batch_uint8, dtype=torch.float32):
    return ((batch_uint8.to(dtype) / 255.0) - _MEAN.to(dtype)) / _STD.to(dtype)


def batch_slices(n, batch_size):
    """Contiguous batches; a trailing batch of one is merged into its predecessor (batch norm)."""
    bounds = list(range(0, n, batch_size)) + [n]
    slices = [(a, b) for a, b in zip(bounds[:-1], bounds[1:])]
    if len(slices) > 1 and slices[-1][1] - slices[-1][0] == 1:
        last = slices.pop()
        slices[-1] = (slices[-1][0], last[1])
    return slices


def train(model, records, config, out_dir=None, data=None):
    """Fit ``model`` on ``records``; returns the final checkpoint path and the epoch log.

    ``data`` optionally supplies pre-decoded ``(records, uint8 tensor)`` to skip decoding.
    """
    if config.variant != model.variant:
        raise ConfigurationError(f"train config variant {config.variant!r} != model variant {model.variant!r}")
    if not records:
        raise ProtocolError("empty training set")
    if config.balance:
        records = balance_by_undersampling(records, seed=config.seed)
    if data is None:
        items, images = load_arrays(records, model.config.input_size, config.frame_stride)
    else:
        items, images = data
    labels = torch.tensor([r.target for r in items], dtype=torch.float32)
    n = len(items)
    if n == 0:
        raise ProtocolError("empty training set after frame expansion")

    torch.manual_seed(config.seed)
    optimizer = torch.optim.Adam(
        model.parameters(), lr=config.lr_init, betas=config.betas, eps=config.eps,
        weight_decay=config.weight_decay,
    )
    history = []
    out_dir = Path(out_dir) if out_dir is not None else None
    log_file = None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
        log_file = open(out_dir / "train_log.jsonl", "w", encoding="utf-8")
    try:
        for epoch in range(config.epochs_max):
            start = time.perf_counter()
            lr = config.lr_at(epoch)
            for group in optimizer.param_groups:
                group["lr"] = lr
            order = torch.from_numpy(np.random.default_rng([config.seed, epoch, 0]).permutation(n))
            flips = flip_decisions(n, config.seed, epoch) if config.augment else np.zeros(n, bool)
            flips = torch.from_numpy(flips)
            model.train()
            sums = np.zeros(3)
            slices = batch_slices(n, config.batch_size)
            for b, (lo, hi) in enumerate(slices):
                idx = order[lo:hi]
                x = normalize(images[idx])
                flip = flips[lo:hi]
                if bool(flip.any()):
                    x[flip] = torch.flip(x[flip], dims=(-1,))
                out = model(x)
                try:
                    total, bundle = compute_loss(out, labels[idx], config.lam)
                except InputError:
                    # NaN logits surface as out-of-range probabilities
                    raise TrainingDivergedError(epoch, b, float("nan")) from None
                if not math.isfinite(bundle.overall):
                    raise TrainingDivergedError(epoch, b, bundle.overall)
                optimizer.zero_grad(set_to_none=True)
                total.backward()
                optimizer.step()
                sums += (bundle.overall, bundle.bce, bundle.smooth_l1)
            means = sums / len(slices)
            entry = EpochLog(epoch, lr, float(means[0]), float(means[1]), float(means[2]),
                             len(slices), time.perf_counter() - start)
            history.append(entry)
            log.info("epoch %d lr %.3g loss %.4f", epoch, lr, entry.overall)
            if log_file is not None:
                log_file.write(json.dumps(dataclasses.asdict(entry)) + "\n")
                log_file.flush()
    finally:
        if log_file is not None:
            log_file.close()
    if config.recalibrate_bn and config.epochs_max > 0:
        recalibrate_batchnorm(model, images, config.batch_size)
    model.eval()
    checkpoint = None
    if out_dir is not None:
        checkpoint = save_checkpoint(model, out_dir / "checkpoint.pt", train_config=config.to_dict())
    return TrainResult(checkpoint, history)


def recalibrate_batchnorm(model, images, batch_size=64):
    """Re-estimate batch-norm running statistics with the final weights.

    Running averages accumulated during training mix activations from many
    weight states; one unaugmented pass in a fixed order replaces them with
    the population statistics of the training images.
    """
    norms = [m for m in model.modules() if isinstance(m, torch.nn.modules.batchnorm._BatchNorm)]
    if not norms:
        return
    saved = [m.momentum for m in norms]
    for m in norms:
        m.reset_running_stats()
        m.momentum = None
    model.train()
    with torch.no_grad():
        for lo, hi in batch_slices(images.shape[0], batch_size):
            model(normalize(images[lo:hi]))
    for m, momentum in zip(norms, saved):
        m.momentum = momentum
    model.eval()


def read_train_log(file):
    with open(file, encoding="utf-8") as fh:
        return [EpochLog(**json.loads(line)) for line in fh if line.strip()]


def score(model, records, batch_size=64, stride=DEFAULT_STRIDE, data=None):
    """Bona fide probability for every record (video records expand to frames)."""
    if not records and data is None:
        return []
    try:
        items, images = data if data is not None else load_arrays(records, model.config.input_size, stride)
    except IngestionError as exc:
        raise ScoringError(f"scoring aborted: {exc}") from exc
    model.eval()
    probs = []
    with torch.no_grad():
        for lo in range(0, len(items), batch_size):
            out = model(normalize(images[lo:lo + batch_size]))
            probs.append(torch.sigmoid(out.logit.double()))
    probs = torch.cat(probs).tolist() if probs else []
    return [
        ScoreRecord(score=p, label=r.label, attack_type=r.attack_type, database=r.database,
                    spectrum=r.spectrum, subject_id=r.subject_id, path=r.path, frame=r.frame)
        for r, p in zip(items, probs)
    ]


__all__ = [
    "EpochLog",
    "TrainConfig",
    "TrainResult",
    "batch_slices",
    "expand_records",
    "load_arrays",
    "normalize",
    "read_train_log",
    "score",
    "train",
]
