"""CSV manifests of image or video samples.

Header (all enum values lowercase)::

    path,subject_id,label,attack_type,spectrum,database,sensor,split

``path`` is relative to the manifest's directory. Spectrum values are written
``nir`` / ``vis``.
"""

import csv
import io
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Optional

from ..errors import ManifestError

COLUMNS = ("path", "subject_id", "label", "attack_type", "spectrum", "database", "sensor", "split")
LABELS = ("bona_fide", "attack")
ATTACK_TYPES = ("none", "textured_lens", "printout", "print_lens", "replay")
SPECTRA = ("nir", "vis")
SPLITS = ("train", "test", "unassigned")
VIDEO_SUFFIXES = (".avi", ".mp4", ".mov", ".mkv", ".m4v")


@dataclass(frozen=True)
class SampleRecord:
    path: str
    subject_id: str
    label: str
    attack_type: str
    spectrum: str
    database: str
    sensor: str = ""
    split: str = "unassigned"
    root: Optional[str] = None
    frame: Optional[int] = None

    def __post_init__(self):
        validate_record(self)

    @property
    def is_bona_fide(self):
        return self.label == "bona_fide"

    @property
    def target(self):
        return 1 if self.is_bona_fide else 0

    @property
    def subject_key(self):
        # subject ids are only unique within one database
        return (self.database, self.subject_id)

    @property
    def is_video(self):
        return self.frame is None and Path(self.path).suffix.lower() in VIDEO_SUFFIXES

    def resolve(self):
        p = Path(self.path)
        if self.root is not None and not p.is_absolute():
            p = Path(self.root) / p
        return p

    def with_split(self, split):
        return replace(self, split=split)

    def row(self):
        return {c: getattr(self, c) for c in COLUMNS}


def validate_record(rec):
    for name, allowed in (("label", LABELS), ("attack_type", ATTACK_TYPES),
                          ("spectrum", SPECTRA), ("split", SPLITS)):
        value = getattr(rec, name)
        if value not in allowed:
            raise ManifestError(f"unknown {name} {value!r}; expected one of {', '.join(allowed)}")
    if (rec.label == "bona_fide") != (rec.attack_type == "none"):
        raise ManifestError(
            f"label {rec.label!r} is inconsistent with attack_type {rec.attack_type!r}"
        )
    if not rec.path:
        raise ManifestError("empty path")
    if not rec.subject_id:
        raise ManifestError("empty subject_id")


def parse_manifest(text, root=None):
    """Parse manifest text; CR/LF and LF line endings are equivalent."""
    text = text.replace("\r\n", "\n").replace("\r", "\n")
    if text.startswith("﻿"):
        text = text[1:]
    reader = csv.reader(io.StringIO(text))
    try:
        header = next(reader)
    except StopIteration:
        raise ManifestError("empty manifest", line=1) from None
    header = [h.strip() for h in header]
    missing = [c for c in COLUMNS if c not in header]
    if missing:
        raise ManifestError(f"missing columns: {', '.join(missing)}", line=1)
    index = {c: header.index(c) for c in COLUMNS}
    records, seen = [], {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not cell.strip() for cell in row):
            continue
        if len(row) != len(header):
            raise ManifestError(f"expected {len(header)} fields, found {len(row)}", line=lineno)
        values = {c: row[i].strip() for c, i in index.items()}
        values["label"] = values["label"].lower()
        values["attack_type"] = values["attack_type"].lower()
        values["spectrum"] = values["spectrum"].lower()
        values["split"] = values["split"].lower() or "unassigned"
        try:
            rec = SampleRecord(root=None if root is None else str(root), **values)
        except ManifestError as exc:
            raise ManifestError(str(exc), line=lineno) from None
        if rec.path in seen:
            raise ManifestError(f"duplicate path {rec.path!r} (first on line {seen[rec.path]})", line=lineno)
        seen[rec.path] = lineno
        records.append(rec)
    return records


def load_manifest(file):
    path = Path(file)
    with open(path, "r", encoding="utf-8", newline="") as fh:
        text = fh.read()
    return parse_manifest(text, root=path.parent.resolve())


def format_manifest(records):
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=COLUMNS, lineterminator="\n")
    writer.writeheader()
    for rec in records:
        writer.writerow(rec.row())
    return buf.getvalue()


def write_manifest(records, file):
    path = Path(file)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_manifest(records))
    return path


__all__ = [
    "ATTACK_TYPES",
    "COLUMNS",
    "LABELS",
    "SPECTRA",
    "SPLITS",
    "SampleRecord",
    "format_manifest",
    "load_manifest",
    "parse_manifest",
    "write_manifest",
]
