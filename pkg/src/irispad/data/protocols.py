"""Evaluation protocols: record filters, subject-disjoint folds and class balancing.

A protocol file is TOML with a ``[protocol]`` table::

    [protocol]
    name = "clarkson-intra"
    train_filter = "database == 'clarkson' and split == 'train'"
    test_filter = "database == 'clarkson' and split == 'test'"
    folds = 1
    seed = 0

Filters are boolean expressions over the manifest columns using ``==``,
``!=``, ``in``, ``not in``, ``and``, ``or``, ``not`` and string literals.
With ``folds > 1`` only ``train_filter`` selects the pool; the pool is split
into subject-disjoint folds and ``test_filter`` is ignored.
"""

import ast
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .._toml import load_toml
from ..errors import ConfigurationError, ProtocolError
from .manifest import COLUMNS

_ALLOWED_NAMES = set(COLUMNS)


class RecordFilter:
    """Compiled predicate over SampleRecord fields."""

    def __init__(self, expression):
        self.expression = expression.strip() if expression else "True"
        try:
            tree = ast.parse(self.expression, mode="eval")
        except SyntaxError as exc:
            raise ConfigurationError(f"bad filter expression {expression!r}: {exc.msg}") from None
        self._tree = tree.body
        self._check(self._tree)

    def _check(self, node):
        if isinstance(node, ast.BoolOp):
            for v in node.values:
                self._check(v)
        elif isinstance(node, ast.UnaryOp) and isinstance(node.op, ast.Not):
            self._check(node.operand)
        elif isinstance(node, ast.Compare):
            for op in node.ops:
                if not isinstance(op, (ast.Eq, ast.NotEq, ast.In, ast.NotIn)):
                    raise ConfigurationError(f"unsupported comparison in filter {self.expression!r}")
            for operand in [node.left, *node.comparators]:
                self._check_operand(operand)
        elif isinstance(node, ast.Constant) and isinstance(node.value, bool):
            pass
        else:
            raise ConfigurationError(f"unsupported construct in filter {self.expression!r}")

    def _check_operand(self, node):
        if isinstance(node, ast.Name):
            if node.id not in _ALLOWED_NAMES:
                raise ConfigurationError(f"unknown field {node.id!r} in filter {self.expression!r}")
        elif isinstance(node, (ast.Tuple, ast.List, ast.Set)):
            for elt in node.elts:
                self._check_operand(elt)
        elif not (isinstance(node, ast.Constant) and isinstance(node.value, str)):
            raise ConfigurationError(f"unsupported operand in filter {self.expression!r}")

    def _value(self, node, rec):
        if isinstance(node, ast.Name):
            return getattr(rec, node.id)
        if isinstance(node, (ast.Tuple, ast.List, ast.Set)):
            return tuple(self._value(e, rec) for e in node.elts)
        return node.value

    def _eval(self, node, rec):
        if isinstance(node, ast.BoolOp):
            results = (self._eval(v, rec) for v in node.values)
            return all(results) if isinstance(node.op, ast.And) else any(results)
        if isinstance(node, ast.UnaryOp):
            return not self._eval(node.operand, rec)
        if isinstance(node, ast.Constant):
            return node.value
        left = self._value(node.left, rec)
        for op, comp in zip(node.ops, node.comparators):
            right = self._value(comp, rec)
            if isinstance(op, ast.Eq):
                ok = left == right
            elif isinstance(op, ast.NotEq):
                ok = left != right
            elif isinstance(op, ast.In):
                ok = left in right
            else:
                ok = left not in right
            if not ok:
                return False
            left = right
        return True

    def __call__(self, rec):
        return bool(self._eval(self._tree, rec))

    def select(self, records):
        return [r for r in records if self(r)]


@dataclass(frozen=True)
class ProtocolSpec:
    name: str
    train_filter: str = "split == 'train'"
    test_filter: str = "split == 'test'"
    folds: int = 1
    seed: int = 0

    def __post_init__(self):
        if self.folds < 1:
            raise ConfigurationError(f"folds must be >= 1 (got {self.folds})")
        RecordFilter(self.train_filter)
        RecordFilter(self.test_filter)

    def to_dict(self):
        return {
            "name": self.name,
            "train_filter": self.train_filter,
            "test_filter": self.test_filter,
            "folds": self.folds,
            "seed": self.seed,
        }


def load_protocol(file):
    data = load_toml(file)
    table = data.get("protocol", data)
    known = {"name", "train_filter", "test_filter", "folds", "seed"}
    unknown = set(table) - known
    if unknown:
        raise ConfigurationError(f"unknown protocol keys: {', '.join(sorted(unknown))}")
    if "name" not in table:
        table = {**table, "name": Path(file).stem}
    return ProtocolSpec(**table)


def subjects_of(records):
    return {r.subject_key for r in records}


def verify_subject_disjoint(train, test):
    """Raise ProtocolError if any subject appears on both sides."""
    shared = subjects_of(train) & subjects_of(test)
    if shared:
        sample = ", ".join(f"{db}/{sid}" for db, sid in sorted(shared)[:5])
        raise ProtocolError(f"{len(shared)} subject(s) appear in both train and test: {sample}")


def make_subject_disjoint_folds(records, k=5, seed=0):
    """Split ``records`` into k (train, test) pairs with disjoint subjects.

    Subjects are shuffled with ``seed`` and dealt into k near-equal groups;
    fold i tests on group i and trains on the rest.
    """
    if k < 2:
        raise ProtocolError(f"k must be at least 2 (got {k})")
    subjects = sorted(subjects_of(records))
    if len(subjects) < k:
        raise ProtocolError(f"{len(subjects)} distinct subjects cannot fill {k} folds")
    order = np.random.default_rng(seed).permutation(len(subjects))
    groups = np.array_split(order, k)
    fold_of = {}
    for i, group in enumerate(groups):
        for j in group:
            fold_of[subjects[j]] = i
    folds = []
    for i in range(k):
        train = [r.with_split("train") for r in records if fold_of[r.subject_key] != i]
        test = [r.with_split("test") for r in records if fold_of[r.subject_key] == i]
        verify_subject_disjoint(train, test)
        folds.append((train, test))
    return folds


def instantiate_protocol(spec, records, fold=0):
    """Resolve ``spec`` against ``records`` into one verified (train, test) pair."""
    pool = RecordFilter(spec.train_filter).select(records)
    if spec.folds == 1:
        train = pool
        test = RecordFilter(spec.test_filter).select(records)
    else:
        if not 0 <= fold < spec.folds:
            raise ProtocolError(f"fold {fold} out of range for {spec.folds} folds")
        train, test = make_subject_disjoint_folds(pool, spec.folds, spec.seed)[fold]
    verify_subject_disjoint(train, test)
    return train, test


def balance_by_undersampling(records, seed=0):
    """Randomly drop majority-class records down to the minority count.

    Minority records are kept as-is and the original order is preserved.
    """
    bona = [i for i, r in enumerate(records) if r.is_bona_fide]
    attack = [i for i, r in enumerate(records) if not r.is_bona_fide]
    if not bona or not attack:
        raise ProtocolError("class balancing needs both bona fide and attack records")
    if len(bona) == len(attack):
        return list(records)
    major, minor = (bona, attack) if len(bona) > len(attack) else (attack, bona)
    rng = np.random.default_rng(seed)
    kept = rng.choice(len(major), size=len(minor), replace=False)
    keep = set(minor) | {major[i] for i in kept}
    return [r for i, r in enumerate(records) if i in keep]


__all__ = [
    "ProtocolSpec",
    "RecordFilter",
    "balance_by_undersampling",
    "instantiate_protocol",
    "load_protocol",
    "make_subject_disjoint_folds",
    "subjects_of",
    "verify_subject_disjoint",
]
