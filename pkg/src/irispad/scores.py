"""Per-sample PAD scores and the score CSV format.

Columns: ``path,subject_id,label,attack_type,database,spectrum,frame,score``.
Scores are printed with six decimals; ``frame`` is empty for still images.
Higher scores mean bona fide.
"""

import csv
import io
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import numpy as np

from .errors import InputError

SCORE_COLUMNS = ("path", "subject_id", "label", "attack_type", "database", "spectrum", "frame", "score")


@dataclass(frozen=True)
class ScoreRecord:
    score: float
    label: str
    attack_type: str = "none"
    database: str = ""
    spectrum: str = "nir"
    subject_id: str = ""
    path: str = ""
    frame: Optional[int] = None

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0 or self.score != self.score:
            raise InputError(f"score {self.score} outside [0, 1]")
        if self.label not in ("bona_fide", "attack"):
            raise InputError(f"unknown label {self.label!r}")

    @property
    def is_bona_fide(self):
        return self.label == "bona_fide"


def score_arrays(records):
    """(scores, is_bona_fide) numpy arrays."""
    scores = np.fromiter((r.score for r in records), dtype=float, count=len(records))
    bona = np.fromiter((r.is_bona_fide for r in records), dtype=bool, count=len(records))
    return scores, bona


def format_scores(records):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(SCORE_COLUMNS)
    for r in records:
        frame = "" if r.frame is None else str(r.frame)
        writer.writerow([r.path, r.subject_id, r.label, r.attack_type, r.database, r.spectrum,
                         frame, f"{r.score:.6f}"])
    return buf.getvalue()


def write_scores(records, file):
    path = Path(file)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_scores(records))
    return path


def read_scores(file):
    path = Path(file)
    with open(path, encoding="utf-8", newline="") as fh:
        reader = csv.DictReader(fh)
        missing = [c for c in SCORE_COLUMNS if c not in (reader.fieldnames or [])]
        if missing:
            raise InputError(f"{path}: missing score columns {', '.join(missing)}")
        out = []
        for lineno, row in enumerate(reader, start=2):
            try:
                out.append(ScoreRecord(
                    score=float(row["score"]), label=row["label"], attack_type=row["attack_type"],
                    database=row["database"], spectrum=row["spectrum"], subject_id=row["subject_id"],
                    path=row["path"], frame=int(row["frame"]) if row["frame"] else None,
                ))
            except (ValueError, InputError) as exc:
                raise InputError(f"{path}: line {lineno}: {exc}") from None
    return out


def aggregate_videos(records):
    """Collapse frame scores to one score per video path (mean of frames)."""
    groups = OrderedDict()
    for r in records:
        groups.setdefault(r.path, []).append(r)
    out = []
    for path, frames in groups.items():
        first = frames[0]
        mean = float(np.mean([f.score for f in frames]))
        out.append(ScoreRecord(mean, first.label, first.attack_type, first.database,
                               first.spectrum, first.subject_id, path, None))
    return out
