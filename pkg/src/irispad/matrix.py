"""Evaluation grids over many score files.

A matrix file is TOML::

    [matrix]
    name = "cross-db"
    layout = "cross"            # intra | per_attack | cross
    train = ["notre_dame", "clarkson", "iiitd_wvu"]
    test = ["clarkson", "iiitd_wvu", "notre_dame"]
    variants = ["baseline", "pbs", "apbs"]
    scores = "{variant}/{train}__{test}.csv"   # relative to the matrix file
    exclude_diagonal = true
    threshold = 0.5
    bpcer_target = 0.2

Cells without a score file stay in the result as absent; they never stop the
rest of the grid.
"""

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path

from ._toml import load_toml
from .errors import ConfigurationError, InputError
from .metrics import DEFAULT_BPCER_TARGET, DEFAULT_THRESHOLD, evaluate
from .scores import read_scores

LAYOUTS = ("intra", "per_attack", "cross")
CSV_FIELDS = (
    "variant", "train", "test", "status", "n_bona_fide", "n_attack", "threshold", "apcer", "bpcer",
    "hter", "ccr", "eer", "eer_threshold", "bpcer_target", "tdr", "tdr_threshold", "tdr_bpcer", "fdr",
)


@dataclass
class MatrixSpec:
    name: str
    train: list
    test: list
    variants: list = field(default_factory=lambda: ["baseline", "pbs", "apbs"])
    layout: str = "cross"
    scores: str = "{variant}/{train}__{test}.csv"
    exclude_diagonal: bool = False
    threshold: float = DEFAULT_THRESHOLD
    bpcer_target: float = DEFAULT_BPCER_TARGET
    base_dir: str = "."

    def __post_init__(self):
        if self.layout not in LAYOUTS:
            raise ConfigurationError(f"unknown layout {self.layout!r}; expected one of {', '.join(LAYOUTS)}")
        if not self.train or not self.test or not self.variants:
            raise ConfigurationError("matrix needs non-empty train, test and variants lists")

    def cells(self):
        for variant in self.variants:
            for tr in self.train:
                for te in self.test:
                    if self.exclude_diagonal and tr == te:
                        continue
                    if self.layout in ("intra", "per_attack") and tr != te:
                        continue
                    yield variant, tr, te

    def score_path(self, variant, train, test):
        return Path(self.base_dir) / self.scores.format(variant=variant, train=train, test=test)


def load_matrix_spec(file):
    data = load_toml(file)
    table = dict(data.get("matrix", data))
    table.setdefault("name", Path(file).stem)
    table.setdefault("base_dir", str(Path(file).resolve().parent))
    try:
        return MatrixSpec(**table)
    except TypeError as exc:
        raise ConfigurationError(f"bad matrix spec {file}: {exc}") from None


@dataclass
class MatrixReport:
    spec: MatrixSpec
    cells: dict  # (variant, train, test) -> MetricsReport or None

    @property
    def missing(self):
        return [key for key, rep in self.cells.items() if rep is None]


def run_protocol_matrix(spec, score_files=None):
    """Evaluate every cell of ``spec``.

    ``score_files`` optionally maps (variant, train, test) to a path and
    overrides the template in ``spec``.
    """
    cells = {}
    for key in spec.cells():
        path = Path(score_files[key]) if score_files and key in score_files else spec.score_path(*key)
        if not path.is_file():
            cells[key] = None
            continue
        try:
            records = read_scores(path)
        except InputError:
            cells[key] = None
            continue
        cells[key] = evaluate(records, spec.threshold, spec.bpcer_target) if records else None
    return MatrixReport(spec, cells)


def _f(value):
    return "" if value is None else f"{value:.6f}"


def matrix_csv(report):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_FIELDS)
    for (variant, tr, te), rep in report.cells.items():
        if rep is None:
            writer.writerow([variant, tr, te, "absent"] + [""] * (len(CSV_FIELDS) - 4))
            continue
        d = rep.to_dict()
        row = [variant, tr, te, "ok", d["n_bona_fide"], d["n_attack"]]
        row += [_f(d[k]) for k in CSV_FIELDS[6:]]
        writer.writerow(row)
    return buf.getvalue()


def _cell(value):
    return "-" if value is None else f"{value:.2f}"


def _table(header, rows):
    widths = [max(len(str(r[i])) for r in [header, *rows]) for i in range(len(header))]
    line = lambda r: " | ".join(str(c).rjust(w) for c, w in zip(r, widths))
    rule = "-+-".join("-" * w for w in widths)
    return "\n".join([line(header), rule, *(line(r) for r in rows)])


def _intra_text(report):
    spec = report.spec
    header = ["Database", "Metric", *spec.variants]
    rows = []
    for db in spec.test:
        if db not in spec.train:
            continue
        for metric in ("apcer", "bpcer", "hter"):
            row = [db, metric.upper()]
            for v in spec.variants:
                rep = report.cells.get((v, db, db))
                row.append(_cell(None if rep is None else getattr(rep, metric)))
            rows.append(row)
    return _table(header, rows)


def _per_attack_text(report):
    spec = report.spec
    header = ["Database", "Attack", *spec.variants]
    rows = []
    for db in spec.test:
        kinds = sorted({k for v in spec.variants
                        for k in (report.cells.get((v, db, db)) or _Empty).apcer_per_attack})
        for kind in kinds:
            row = [db, kind]
            for v in spec.variants:
                rep = report.cells.get((v, db, db))
                row.append(_cell(None if rep is None else rep.apcer_per_attack.get(kind)))
            rows.append(row)
    return _table(header, rows)


class _Empty:
    apcer_per_attack = {}


def _cross_text(report):
    spec = report.spec
    blocks = []
    metrics = ("eer", "hter", "apcer", "bpcer")
    for tr in spec.train:
        tests = [te for te in spec.test if (spec.variants[0], tr, te) in report.cells]
        if not tests:
            continue
        header = ["Train: " + tr] + [f"{te}:{m.upper()}" for te in tests for m in metrics]
        rows = []
        for v in spec.variants:
            row = [v]
            for te in tests:
                rep = report.cells.get((v, tr, te))
                row += [_cell(None if rep is None else getattr(rep, m)) for m in metrics]
            rows.append(row)
        blocks.append(_table(header, rows))
    return "\n\n".join(blocks)


def matrix_text(report):
    """Human-readable tables; absent cells print as ``-``."""
    spec = report.spec
    body = {"intra": _intra_text, "per_attack": _per_attack_text, "cross": _cross_text}[spec.layout](report)
    title = f"{spec.name} ({spec.layout}, threshold {spec.threshold:g}, rates in %)"
    out = [title, body]
    if report.missing:
        out.append("absent cells: " + ", ".join("/".join(k) for k in report.missing))
    return "\n\n".join(out) + "\n"


__all__ = [
    "MatrixReport",
    "MatrixSpec",
    "load_matrix_spec",
    "matrix_csv",
    "matrix_text",
    "run_protocol_matrix",
]
