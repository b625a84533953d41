"""Dataset loading, column statistics, and the train/test split.

A Dataset is a frozen bundle of named float64 feature columns plus a label
vector.  Classification labels are remapped to contiguous class indices at
load time; the original label values are kept so reports stay readable.
"""

from __future__ import annotations

import csv
import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    EmptyColumn,
    EmptyDataset,
    MissingLabelColumn,
    NonNumericCell,
    RaggedRow,
    TooFewRows,
)


class Task(enum.Enum):
    CLASSIFICATION = "classification"
    REGRESSION = "regression"


@dataclass(frozen=True)
class ColumnStats:
    """Seven order-fixed descriptive statistics of one column.

    Quantiles use linear interpolation between order statistics and the
    standard deviation is the population one (divisor n, not n-1).
    """

    mean: float
    std: float
    min: float
    q1: float
    median: float
    q3: float
    max: float

    def as_vector(self) -> np.ndarray:
        return np.array(
            [self.mean, self.std, self.min, self.q1, self.median, self.q3, self.max],
            dtype=np.float64,
        )


def compute_stats(column: np.ndarray) -> ColumnStats:
    """Summarize one finite numeric column.

    Raises EmptyColumn on zero-length input.
    """
    col = np.asarray(column, dtype=np.float64)
    if col.size == 0:
        raise EmptyColumn("cannot summarize an empty column")
    q1, med, q3 = np.quantile(col, [0.25, 0.5, 0.75])
    return ColumnStats(
        mean=float(col.mean()),
        std=float(col.std()),
        min=float(col.min()),
        q1=float(q1),
        median=float(med),
        q3=float(q3),
        max=float(col.max()),
    )


@dataclass(frozen=True, eq=False)
class Dataset:
    """Immutable table: named numeric features plus one label vector.

    features is (rows, n) float64, labels is (rows,) float64.  For
    classification the labels hold class indices 0..C-1 and label_values
    maps each index back to the original token.
    """

    names: tuple[str, ...]
    features: np.ndarray
    labels: np.ndarray
    task: Task
    label_name: str = "label"
    label_values: tuple[str, ...] = field(default_factory=tuple)

    def __post_init__(self):
        if len(self.names) != self.features.shape[1]:
            raise EmptyDataset("feature names do not match feature matrix width")
        if self.features.shape[0] != self.labels.shape[0]:
            raise EmptyDataset("feature and label row counts differ")
        if self.features.shape[0] == 0 or self.features.shape[1] == 0:
            raise EmptyDataset("dataset has no rows or no feature columns")
        if len(set(self.names)) != len(self.names):
            raise EmptyDataset("duplicate column names")
        # Shared-read safety: freeze the arrays so no caller mutates them.
        self.features.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def row_count(self) -> int:
        return self.features.shape[0]

    @property
    def feature_count(self) -> int:
        return self.features.shape[1]

    @property
    def class_count(self) -> int:
        if self.task is not Task.CLASSIFICATION:
            return 0
        return len(self.label_values) or int(self.labels.max()) + 1

    def column(self, index: int) -> np.ndarray:
        return self.features[:, index]

    def take(self, indices: np.ndarray) -> "Dataset":
        """Row subset in the given order (new arrays, same schema)."""
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            names=self.names,
            features=self.features[idx].copy(),
            labels=self.labels[idx].copy(),
            task=self.task,
            label_name=self.label_name,
            label_values=self.label_values,
        )


def _parse_labels(tokens: list[str], task: Task, col: str) -> tuple[np.ndarray, tuple[str, ...]]:
    if task is Task.REGRESSION:
        out = np.empty(len(tokens), dtype=np.float64)
        for i, tok in enumerate(tokens):
            try:
                val = float(tok)
            except ValueError:
                raise NonNumericCell(i, col, tok) from None
            if not math.isfinite(val):
                raise NonNumericCell(i, col, tok)
            out[i] = val
        return out, ()

    # Classification: accept arbitrary tokens.  Sort numerically when every
    # distinct token parses as a number, lexicographically otherwise, then
    # remap to 0..C-1.
    distinct = sorted(set(tokens))
    try:
        distinct.sort(key=float)
    except ValueError:
        pass
    index = {tok: i for i, tok in enumerate(distinct)}
    out = np.array([index[t] for t in tokens], dtype=np.float64)
    return out, tuple(distinct)


def load_csv(path: str, label_column: str, task: Task) -> Dataset:
    """Read a headered CSV into a Dataset.

    Every feature cell must parse as a finite float; the first offending
    cell is reported by data-row index (0-based, header excluded) and
    column name.  Rows whose cell count differs from the header raise
    RaggedRow.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise EmptyDataset(f"{path} is empty") from None
        rows = list(reader)

    header = [h.strip() for h in header]
    if label_column not in header:
        raise MissingLabelColumn(label_column, tuple(header))
    if not rows:
        raise EmptyDataset(f"{path} has a header but no data rows")

    label_at = header.index(label_column)
    feature_names = tuple(h for i, h in enumerate(header) if i != label_at)
    if not feature_names:
        raise EmptyDataset(f"{path} has no feature columns besides the label")

    n = len(rows)
    features = np.empty((n, len(feature_names)), dtype=np.float64)
    label_tokens: list[str] = []
    for r, row in enumerate(rows):
        if len(row) != len(header):
            raise RaggedRow(r, len(header), len(row))
        fi = 0
        for c, cell in enumerate(row):
            if c == label_at:
                label_tokens.append(cell.strip())
                continue
            try:
                val = float(cell)
            except ValueError:
                raise NonNumericCell(r, header[c], cell) from None
            if not math.isfinite(val):
                raise NonNumericCell(r, header[c], cell)
            features[r, fi] = val
            fi += 1

    labels, label_values = _parse_labels(label_tokens, task, label_column)
    return Dataset(
        names=feature_names,
        features=features,
        labels=labels,
        task=task,
        label_name=label_column,
        label_values=label_values,
    )


@dataclass(frozen=True)
class SplitSpec:
    train_fraction: float = 0.8
    seed: int = 0


def split(dataset: Dataset, spec: SplitSpec = SplitSpec()) -> tuple[Dataset, Dataset]:
    """Shuffled train/test partition of the rows.

    Train size is round(fraction * rows).  For classification, every class
    present in the full dataset is also present in the train part whenever
    that is possible, by swapping single orphaned test rows with train rows
    whose class appears there at least twice.  Deterministic in the seed.
    """
    n = dataset.row_count
    if n < 5:
        raise TooFewRows(n, 5)
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(n)
    n_train = int(round(spec.train_fraction * n))
    n_train = max(1, min(n - 1, n_train))
    train_idx = perm[:n_train].copy()
    test_idx = perm[n_train:].copy()

    if dataset.task is Task.CLASSIFICATION:
        labels = dataset.labels
        train_counts: dict[float, int] = {}
        for i in train_idx:
            train_counts[labels[i]] = train_counts.get(labels[i], 0) + 1
        for cls in np.unique(labels):
            if train_counts.get(cls, 0) > 0:
                continue
            # The class lives only in the test part.  Swap its first test
            # occurrence with the last train row whose class can spare one.
            t_pos = next(p for p, i in enumerate(test_idx) if labels[i] == cls)
            donor = None
            for p in range(len(train_idx) - 1, -1, -1):
                if train_counts[labels[train_idx[p]]] >= 2:
                    donor = p
                    break
            if donor is None:
                continue
            train_counts[labels[train_idx[donor]]] -= 1
            train_counts[cls] = 1
            train_idx[donor], test_idx[t_pos] = test_idx[t_pos], train_idx[donor]

    return dataset.take(train_idx), dataset.take(test_idx)
