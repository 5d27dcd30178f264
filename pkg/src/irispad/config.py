"""Experiment configuration files and output provenance.

Experiment files are TOML with flat sections::

    seed = 7

    [model]
    variant = "apbs"
    input_size = 224
    pretrained_init = true

    [train]
    epochs_max = 20
    batch_size = 64
    lr_init = 1e-4

    [data]
    manifest = "data/manifest.csv"     # relative to this file
    protocol = "protocols/clarkson.toml"
    fold = 0

    [output]
    dir = "runs/clarkson-apbs"

Command-line flags override file values. Before any work starts the
resolved configuration, tool version and seed are written to
``experiment.toml`` in the output directory.
"""

from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import __version__
from ._toml import dump_toml, load_toml
from .data.protocols import ProtocolSpec, load_protocol
from .errors import ConfigurationError
from .model import ModelConfig
from .training import TrainConfig

PROVENANCE_FILE = "experiment.toml"


@dataclass
class ExperimentConfig:
    model: ModelConfig = field(default_factory=ModelConfig)
    train: TrainConfig = field(default_factory=TrainConfig)
    manifest: Optional[str] = None
    protocol: Optional[ProtocolSpec] = None
    fold: int = 0
    out_dir: Optional[str] = None
    seed: int = 0

    def to_dict(self):
        return {
            "seed": self.seed,
            "model": self.model.to_dict(),
            "train": self.train.to_dict(),
            "data": {
                "manifest": self.manifest,
                "protocol": None if self.protocol is None else self.protocol.to_dict(),
                "fold": self.fold,
            },
            "output": {"dir": self.out_dir},
        }


def _resolve(base, value):
    if value is None:
        return None
    p = Path(value)
    return str(p if p.is_absolute() else (base / p).resolve())


def load_experiment(file=None, seed=None, variant=None, manifest=None, protocol=None, out=None,
                    epochs=None, fold=None):
    """Read ``file`` (optional) and apply flag overrides."""
    data, base = {}, Path.cwd()
    if file is not None:
        data = load_toml(file)
        base = Path(file).resolve().parent
    unknown = set(data) - {"seed", "model", "train", "data", "output", "synth"}
    if unknown:
        raise ConfigurationError(f"unknown config sections: {', '.join(sorted(unknown))}")
    model_d = dict(data.get("model", {}))
    train_d = dict(data.get("train", {}))
    data_d = dict(data.get("data", {}))
    out_d = dict(data.get("output", {}))

    seed = seed if seed is not None else data.get("seed", train_d.get("seed", 0))
    if variant is not None:
        model_d["variant"] = variant
    model_d.pop("channel_widths", None)
    if "weights_path" in model_d:
        model_d["weights_path"] = _resolve(base, model_d["weights_path"])
    model_cfg = ModelConfig.from_dict(model_d)
    train_d["seed"] = seed
    train_d["variant"] = model_cfg.variant
    if "lambda" in train_d:
        train_d["lam"] = train_d.pop("lambda")
    if epochs is not None:
        train_d["epochs_max"] = epochs
    train_cfg = TrainConfig.from_dict(train_d)

    manifest_path = manifest if manifest is not None else _resolve(base, data_d.get("manifest"))
    spec = None
    if protocol is not None:
        spec = load_protocol(protocol)
    elif isinstance(data_d.get("protocol"), dict):
        spec = ProtocolSpec(**data_d["protocol"])
    elif data_d.get("protocol"):
        spec = load_protocol(_resolve(base, data_d["protocol"]))
    out_dir = out if out is not None else _resolve(base, out_d.get("dir"))
    return ExperimentConfig(
        model=model_cfg, train=train_cfg, manifest=manifest_path, protocol=spec,
        fold=fold if fold is not None else int(data_d.get("fold", 0)), out_dir=out_dir, seed=seed,
    )


def write_provenance(out_dir, command, seed, config=None, **extra):
    """Record tool version, seed and the resolved configuration in ``out_dir``."""
    payload = {"meta": {"tool": "irispad", "version": __version__, "command": command, "seed": seed}}
    if config is not None:
        payload["config"] = config
    payload.update(extra)
    return dump_toml(payload, Path(out_dir) / PROVENANCE_FILE)


def experiment_from_dict(d):
    """Inverse of ``ExperimentConfig.to_dict`` (as stored in a provenance file)."""
    model_d = dict(d["model"])
    model_d.pop("channel_widths", None)
    data_d = d.get("data", {})
    spec = data_d.get("protocol")
    return ExperimentConfig(
        model=ModelConfig.from_dict(model_d),
        train=TrainConfig.from_dict(d["train"]),
        manifest=data_d.get("manifest"),
        protocol=ProtocolSpec(**spec) if spec else None,
        fold=data_d.get("fold", 0),
        out_dir=d.get("output", {}).get("dir"),
        seed=d.get("seed", 0),
    )


__all__ = [
    "ExperimentConfig",
    "PROVENANCE_FILE",
    "experiment_from_dict",
    "load_experiment",
    "write_provenance",
]
