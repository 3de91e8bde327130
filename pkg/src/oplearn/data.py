"""Ingestion and validation of the (outcome, action, features) triplet data.

Every downstream step consumes a :class:`Dataset`: one observed outcome per
unit, one action index in ``{0, ..., n_actions - 1}``, and a numeric feature
matrix. Files are read from delimited text with a single header row; the
identical format is used for output, and a write/read round trip reproduces
the arrays bit-exactly.

Features are passed through unscaled; callers who want standardized inputs
must pre-process.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np


class DataFormatError(ValueError):
    """An input file could not be parsed into a valid dataset."""


@dataclass(frozen=True)
class ColumnSchema:
    """Maps file columns onto the outcome, action, and feature roles."""

    outcome: str
    action: str
    features: tuple[str, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "features", tuple(self.features))
        if not self.features:
            raise ValueError("schema needs at least one feature column")
        names = (self.outcome, self.action, *self.features)
        if len(set(names)) != len(names):
            raise ValueError(f"schema column names must be distinct: {names}")

    @classmethod
    def from_mapping(cls, mapping: Mapping[str, object]) -> "ColumnSchema":
        try:
            return cls(
                outcome=str(mapping["outcome"]),
                action=str(mapping["action"]),
                features=tuple(str(c) for c in mapping["features"]),  # type: ignore[union-attr]
            )
        except KeyError as exc:
            raise DataFormatError(f"schema is missing the {exc} entry") from None


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable observational triplet (Y, A, X) for N units and M actions.

    Attributes
    ----------
    outcomes : ndarray, shape (N,)
        Observed reward of each unit.
    actions : ndarray, shape (N,)
        Action received, recoded to contiguous integers ``0..M-1``.
    features : ndarray, shape (N, p)
        Numeric covariates, one row per unit.
    n_actions : int
        Number of distinct actions M (at least 2).
    feature_names, action_labels : tuple of str
        Display names; ``action_labels[a]`` is the original label of the
        recoded action ``a``.
    """

    outcomes: np.ndarray
    actions: np.ndarray
    features: np.ndarray
    n_actions: int
    feature_names: tuple[str, ...] = ()
    action_labels: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        outcomes = np.ascontiguousarray(self.outcomes, dtype=np.float64)
        actions = np.ascontiguousarray(self.actions, dtype=np.int64)
        features = np.ascontiguousarray(self.features, dtype=np.float64)
        if features.ndim != 2:
            raise ValueError("features must be a 2-d matrix")
        n = outcomes.shape[0]
        if actions.shape != (n,) or features.shape[0] != n:
            raise ValueError("outcomes, actions, and features disagree on N")
        if self.n_actions < 2:
            raise ValueError("need at least two actions")
        if not np.isfinite(outcomes).all():
            raise ValueError("outcomes contain non-finite entries")
        if not np.isfinite(features).all():
            raise ValueError("features contain non-finite entries")
        if actions.min(initial=0) < 0 or actions.max(initial=0) >= self.n_actions:
            raise ValueError("actions outside {0..M-1}")
        counts = np.bincount(actions, minlength=self.n_actions)
        for a, c in enumerate(counts):
            if c == 0:
                raise ValueError(f"action {a} unobserved")
        feature_names = tuple(self.feature_names) or tuple(
            f"x{j + 1}" for j in range(features.shape[1])
        )
        action_labels = tuple(self.action_labels) or tuple(
            str(a) for a in range(self.n_actions)
        )
        if len(feature_names) != features.shape[1]:
            raise ValueError("feature_names length mismatch")
        if len(action_labels) != self.n_actions:
            raise ValueError("action_labels length mismatch")
        for arr in (outcomes, actions, features):
            arr.setflags(write=False)
        object.__setattr__(self, "outcomes", outcomes)
        object.__setattr__(self, "actions", actions)
        object.__setattr__(self, "features", features)
        object.__setattr__(self, "feature_names", feature_names)
        object.__setattr__(self, "action_labels", action_labels)

    @property
    def n_units(self) -> int:
        return self.outcomes.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def arm_counts(self) -> np.ndarray:
        return np.bincount(self.actions, minlength=self.n_actions)

    def with_outcomes(self, outcomes: np.ndarray) -> "Dataset":
        """Copy of the dataset with the outcome vector replaced."""
        return Dataset(
            outcomes=np.asarray(outcomes, dtype=np.float64),
            actions=self.actions,
            features=self.features,
            n_actions=self.n_actions,
            feature_names=self.feature_names,
            action_labels=self.action_labels,
        )


@dataclass
class ValidationReport:
    """Overlap and sanity diagnostics for a dataset."""

    arm_counts: np.ndarray
    warnings: list[str] = field(default_factory=list)
    passed: bool = True


def _format_action_label(value: float) -> str:
    if float(value).is_integer():
        return str(int(value))
    return repr(float(value))


def _parse_cell(raw: str, column: str, row: int) -> float:
    text = raw.strip()
    if not text:
        raise DataFormatError(f"blank value in column '{column}' at row {row}")
    try:
        return float(text)
    except ValueError:
        raise DataFormatError(
            f"non-numeric value {raw!r} in column '{column}' at row {row}"
        ) from None


def load_dataset(
    path: str | Path,
    schema: ColumnSchema | Mapping[str, object],
    *,
    delimiter: str = ",",
    expected_actions: Sequence[float] | None = None,
) -> Dataset:
    """Read a delimited text file into a :class:`Dataset`.

    Action values may be arbitrary integers in the file; they are recoded to
    ``0..M-1`` by ascending original value, with the original labels kept in
    ``action_labels``. When ``expected_actions`` is given, the recoding is
    defined over that set instead and any expected action that never occurs
    is an error. Rows are numbered from 1 (the header is row 0) in error
    messages.
    """
    if not isinstance(schema, ColumnSchema):
        schema = ColumnSchema.from_mapping(schema)
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh, delimiter=delimiter))
    rows = [r for r in rows if r]
    if not rows:
        raise DataFormatError(f"empty file: {path}")
    header = [h.strip() for h in rows[0]]
    col_index: dict[str, int] = {}
    for name in (schema.outcome, schema.action, *schema.features):
        if name not in header:
            raise DataFormatError(f"missing column '{name}' in {path}")
        col_index[name] = header.index(name)
    if len(rows) == 1:
        raise DataFormatError(f"no data rows in {path}")

    n = len(rows) - 1
    outcomes = np.empty(n)
    raw_actions = np.empty(n)
    features = np.empty((n, len(schema.features)))
    for i, row in enumerate(rows[1:], start=1):
        if len(row) != len(header):
            raise DataFormatError(
                f"row {i} has {len(row)} fields, expected {len(header)}"
            )
        outcomes[i - 1] = _parse_cell(row[col_index[schema.outcome]], schema.outcome, i)
        action = _parse_cell(row[col_index[schema.action]], schema.action, i)
        if not action.is_integer():
            raise DataFormatError(
                f"non-integer action {action!r} in column '{schema.action}' at row {i}"
            )
        raw_actions[i - 1] = action
        for j, fname in enumerate(schema.features):
            features[i - 1, j] = _parse_cell(row[col_index[fname]], fname, i)

    if expected_actions is not None:
        levels = sorted(float(v) for v in expected_actions)
        extra = sorted(set(raw_actions) - set(levels))
        if extra:
            raise DataFormatError(f"unexpected action value(s) {extra}")
    else:
        levels = sorted(set(raw_actions))
    recode = {v: a for a, v in enumerate(levels)}
    actions = np.array([recode[v] for v in raw_actions], dtype=np.int64)
    for v, a in recode.items():
        if not np.any(actions == a):
            raise DataFormatError(f"action {a} unobserved")
    return Dataset(
        outcomes=outcomes,
        actions=actions,
        features=features,
        n_actions=len(levels),
        feature_names=schema.features,
        action_labels=tuple(_format_action_label(v) for v in levels),
    )


def save_dataset(dataset: Dataset, path: str | Path, *, delimiter: str = ",") -> None:
    """Write a dataset in the canonical delimited format.

    Columns are ``outcome``, ``action`` (original labels), then the feature
    columns. Floats are written in shortest round-trip form so that
    :func:`load_dataset` reproduces the arrays bit-exactly.
    """
    path = Path(path)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, delimiter=delimiter, lineterminator="\n")
        writer.writerow(["outcome", "action", *dataset.feature_names])
        for i in range(dataset.n_units):
            writer.writerow(
                [
                    repr(float(dataset.outcomes[i])),
                    dataset.action_labels[dataset.actions[i]],
                    *(repr(float(v)) for v in dataset.features[i]),
                ]
            )


def canonical_schema(dataset: Dataset) -> ColumnSchema:
    """Schema matching the header written by :func:`save_dataset`."""
    return ColumnSchema("outcome", "action", dataset.feature_names)


def validate_dataset(dataset: Dataset) -> ValidationReport:
    """Check empirical overlap and outcome sanity.

    The report fails (``passed=False``) when any arm has fewer than ``p + 2``
    observations, the minimum for a per-arm regression fit with intercept to
    be meaningful. Negative outcomes and thin arms are warned about but do
    not fail validation: risk-adjusted utilities assume a generally
    non-negative reward, so negative rewards make the ratio ordering fragile
    without invalidating the estimators.
    """
    counts = dataset.arm_counts()
    p = dataset.n_features
    warnings: list[str] = []
    passed = True
    for a, c in enumerate(counts):
        if c < p + 2:
            passed = False
        if c < 2 * (p + 2):
            warnings.append(f"arm {a} has only {int(c)} observations")
    if np.any(dataset.outcomes < 0):
        warnings.append("negative outcomes present")
    return ValidationReport(arm_counts=counts, warnings=warnings, passed=passed)
