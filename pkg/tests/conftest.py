"""Shared fixtures: small deterministic datasets and a CSV writer."""

import numpy as np
import pytest

from featgraph.tabular import Dataset, Task


def make_classification(rows: int = 80, seed: int = 7) -> Dataset:
    """Three columns whose product sign carries the label."""
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=rows)
    x1 = rng.normal(size=rows)
    x2 = rng.uniform(1.0, 3.0, size=rows)
    labels = (x0 * x1 > 0.0).astype(np.float64)
    features = np.column_stack([x0, x1, x2])
    return Dataset(
        names=("a", "b", "c"),
        features=features,
        labels=labels,
        task=Task.CLASSIFICATION,
        label_name="y",
        label_values=("0", "1"),
    )


def make_regression(rows: int = 60, seed: int = 3) -> Dataset:
    rng = np.random.default_rng(seed)
    x0 = rng.normal(size=rows)
    x1 = rng.uniform(0.5, 2.0, size=rows)
    y = 2.0 * x0 * x1 + 0.1 * rng.normal(size=rows)
    return Dataset(
        names=("u", "v"),
        features=np.column_stack([x0, x1]),
        labels=y,
        task=Task.REGRESSION,
        label_name="t",
    )


@pytest.fixture
def clf_data() -> Dataset:
    return make_classification()


@pytest.fixture
def reg_data() -> Dataset:
    return make_regression()


def write_csv(path, header, rows):
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(str(v) for v in row) + "\n")
    return str(path)
