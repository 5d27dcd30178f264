"""Manifest ingestion, evaluation protocols, augmentation and synthetic data."""

from .augment import augment, flip_decisions, hflip
from .manifest import SampleRecord, load_manifest, write_manifest
from .protocols import (
    ProtocolSpec,
    balance_by_undersampling,
    instantiate_protocol,
    load_protocol,
    make_subject_disjoint_folds,
    verify_subject_disjoint,
)
from .synth import SynthSpec, synthesize_dataset
from .video import extract_video_frames

__all__ = [
    "ProtocolSpec",
    "SampleRecord",
    "SynthSpec",
    "augment",
    "balance_by_undersampling",
    "extract_video_frames",
    "flip_decisions",
    "hflip",
    "instantiate_protocol",
    "load_manifest",
    "load_protocol",
    "make_subject_disjoint_folds",
    "synthesize_dataset",
    "verify_subject_disjoint",
    "write_manifest",
]
