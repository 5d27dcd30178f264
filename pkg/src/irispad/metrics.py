"""ISO/IEC 30107-3 style error rates over bona-fide-oriented scores.

A sample is classified bona fide when ``score >= threshold``. Rates are
percentages. Metrics that are undefined for the given data (e.g. APCER with
no attacks) come back as ``None`` rather than raising.

Every function takes either a sequence of :class:`~irispad.scores.ScoreRecord`
or a pair ``(scores, is_bona_fide)`` of array-likes.
"""

from dataclasses import asdict, dataclass, field
from typing import NamedTuple, Optional

import numpy as np

from .scores import ScoreRecord, score_arrays

DEFAULT_THRESHOLD = 0.5
DEFAULT_BPCER_TARGET = 0.2
FDR_VARIANCE_FLOOR = 1e-12
# slack when comparing a realised BPCER against the target
RATE_TOL = 1e-9


def _arrays(scores, labels=None):
    if labels is None:
        return score_arrays(list(scores))
    s = np.asarray(scores, dtype=float)
    y = np.asarray(labels)
    if y.dtype != bool:
        y = np.array([v == "bona_fide" if isinstance(v, str) else bool(v) for v in y], dtype=bool)
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    return s, y


def apcer(scores, labels=None, threshold=DEFAULT_THRESHOLD):
    """Percentage of attacks accepted as bona fide."""
    s, y = _arrays(scores, labels)
    attacks = s[~y]
    if attacks.size == 0:
        return None
    return 100.0 * np.count_nonzero(attacks >= threshold) / attacks.size


def bpcer(scores, labels=None, threshold=DEFAULT_THRESHOLD):
    """Percentage of bona fides rejected as attacks."""
    s, y = _arrays(scores, labels)
    bona = s[y]
    if bona.size == 0:
        return None
    return 100.0 * np.count_nonzero(bona < threshold) / bona.size


def hter(apcer_value, bpcer_value):
    if apcer_value is None or bpcer_value is None:
        return None
    return (apcer_value + bpcer_value) / 2.0


def ccr(scores, labels=None, threshold=DEFAULT_THRESHOLD):
    """Percentage of all presentations classified correctly."""
    s, y = _arrays(scores, labels)
    if s.size == 0:
        return None
    return 100.0 * np.count_nonzero((s >= threshold) == y) / s.size


def apcer_per_attack(records, threshold=DEFAULT_THRESHOLD):
    """APCER for each attack type present in ``records``."""
    out = {}
    for kind in sorted({r.attack_type for r in records if not r.is_bona_fide}):
        subset = [r for r in records if r.attack_type == kind]
        out[kind] = apcer(subset, threshold=threshold)
    return out


class Sweep(NamedTuple):
    thresholds: np.ndarray
    attack_accepted: np.ndarray
    bona_rejected: np.ndarray
    n_attack: int
    n_bona: int

    @property
    def apcer(self):
        return 100.0 * self.attack_accepted / self.n_attack

    @property
    def bpcer(self):
        return 100.0 * self.bona_rejected / self.n_bona


def sweep(scores, labels=None, include_infinity=True):
    """Error counts at every distinct score used as threshold (plus +inf if asked)."""
    s, y = _arrays(scores, labels)
    atk = np.sort(s[~y])
    bona = np.sort(s[y])
    thresholds = np.unique(s)
    if include_infinity:
        thresholds = np.append(thresholds, np.inf)
    accepted = atk.size - np.searchsorted(atk, thresholds, side="left")
    rejected = np.searchsorted(bona, thresholds, side="left")
    return Sweep(thresholds, accepted, rejected, atk.size, bona.size)


class EER(NamedTuple):
    eer: float
    threshold: float
    apcer: float
    bpcer: float


def eer(scores, labels=None):
    """Discrete equal error rate over the distinct scores.

    Picks the threshold minimising |APCER - BPCER| (lowest threshold on ties)
    and reports the mean of the two rates there.
    """
    s, y = _arrays(scores, labels)
    if y.all() or not y.any():
        return None
    sw = sweep(s, y, include_infinity=False)
    # integer cross-multiplied gap keeps tie-breaking exact
    gap = np.abs(sw.attack_accepted * sw.n_bona - sw.bona_rejected * sw.n_attack)
    i = int(np.argmin(gap))
    a, b = float(sw.apcer[i]), float(sw.bpcer[i])
    return EER((a + b) / 2.0, float(sw.thresholds[i]), a, b)


class TDR(NamedTuple):
    tdr: float
    threshold: float
    bpcer: float
    apcer: float


def tdr_at_bpcer(scores, labels=None, bpcer_target=DEFAULT_BPCER_TARGET):
    """True detection rate (100 - APCER) at the highest threshold with BPCER <= target."""
    s, y = _arrays(scores, labels)
    if y.all() or not y.any():
        return None
    sw = sweep(s, y, include_infinity=True)
    feasible = np.flatnonzero(sw.bpcer <= bpcer_target + RATE_TOL)
    # BPCER is non-decreasing in the threshold and zero at the lowest score
    i = int(feasible[-1])
    a = float(sw.apcer[i])
    return TDR(100.0 - a, float(sw.thresholds[i]), float(sw.bpcer[i]), a)


def fdr(scores, labels=None):
    """Fisher discriminant ratio (mu_bf - mu_atk)^2 / (var_bf + var_atk), sample variances."""
    s, y = _arrays(scores, labels)
    bona, atk = s[y], s[~y]
    if bona.size < 2 or atk.size < 2:
        return None
    spread = max(bona.var(ddof=1) + atk.var(ddof=1), FDR_VARIANCE_FLOOR)
    return float((bona.mean() - atk.mean()) ** 2 / spread)


@dataclass
class MetricsReport:
    n_bona_fide: int
    n_attack: int
    threshold: float
    apcer: Optional[float]
    bpcer: Optional[float]
    hter: Optional[float]
    ccr: Optional[float]
    eer: Optional[float]
    eer_threshold: Optional[float]
    bpcer_target: float
    tdr: Optional[float]
    tdr_threshold: Optional[float]
    tdr_bpcer: Optional[float]
    fdr: Optional[float]
    apcer_per_attack: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def evaluate(records, threshold=DEFAULT_THRESHOLD, bpcer_target=DEFAULT_BPCER_TARGET):
    records = list(records)
    s, y = score_arrays(records)
    a = apcer(s, y, threshold)
    b = bpcer(s, y, threshold)
    e = eer(s, y)
    t = tdr_at_bpcer(s, y, bpcer_target)
    return MetricsReport(
        n_bona_fide=int(y.sum()),
        n_attack=int((~y).sum()),
        threshold=threshold,
        apcer=a,
        bpcer=b,
        hter=hter(a, b),
        ccr=ccr(s, y, threshold),
        eer=None if e is None else e.eer,
        eer_threshold=None if e is None else e.threshold,
        bpcer_target=bpcer_target,
        tdr=None if t is None else t.tdr,
        tdr_threshold=None if t is None else t.threshold,
        tdr_bpcer=None if t is None else t.bpcer,
        fdr=fdr(s, y),
        apcer_per_attack=apcer_per_attack(records, threshold),
    )


def _fmt(value, digits=2):
    return "-" if value is None else f"{value:.{digits}f}"


def format_report(report, title=None):
    """Aligned text block with one metric per line."""
    lines = [] if title is None else [title]
    lines += [
        f"samples       bona_fide={report.n_bona_fide} attack={report.n_attack}",
        f"APCER (%)     {_fmt(report.apcer)}   @ threshold {report.threshold:g}",
        f"BPCER (%)     {_fmt(report.bpcer)}",
        f"HTER (%)      {_fmt(report.hter)}",
        f"EER (%)       {_fmt(report.eer)}   @ threshold {_fmt(report.eer_threshold, 6)}",
        f"TDR (%)       {_fmt(report.tdr)}   @ BPCER <= {report.bpcer_target:g}% "
        f"(realised {_fmt(report.tdr_bpcer)}%, threshold {_fmt(report.tdr_threshold, 6)})",
        f"CCR (%)       {_fmt(report.ccr)}",
        f"FDR           {_fmt(report.fdr, 4)}",
    ]
    for kind, value in report.apcer_per_attack.items():
        lines.append(f"APCER[{kind}] (%) {_fmt(value)}")
    return "\n".join(lines)


def histogram(records, bins=20, value_range=(0.0, 1.0)):
    """Binned score counts per class: (edges, bona_counts, attack_counts)."""
    s, y = score_arrays(list(records))
    edges = np.linspace(value_range[0], value_range[1], bins + 1)
    bona, _ = np.histogram(s[y], bins=edges)
    atk, _ = np.histogram(s[~y], bins=edges)
    return edges, bona, atk


def format_histogram(records, bins=20):
    """CSV text of the score distribution; the FDR value goes in a comment header."""
    records = list(records)
    edges, bona, atk = histogram(records, bins)
    value = fdr(records)
    lines = [f"# fdr={_fmt(value, 6)} (unscaled, sample variances)", "bin_low,bin_high,bona_fide,attack"]
    for lo, hi, b, a in zip(edges[:-1], edges[1:], bona, atk):
        lines.append(f"{lo:.4f},{hi:.4f},{b},{a}")
    return "\n".join(lines) + "\n"


__all__ = [
    "EER",
    "MetricsReport",
    "ScoreRecord",
    "Sweep",
    "TDR",
    "apcer",
    "apcer_per_attack",
    "bpcer",
    "ccr",
    "eer",
    "evaluate",
    "fdr",
    "format_histogram",
    "format_report",
    "hter",
    "histogram",
    "sweep",
    "tdr_at_bpcer",
]
