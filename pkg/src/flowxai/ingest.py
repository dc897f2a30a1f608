"""CSV loading, categorical encoding, stratified splitting, standardization.

The two estimators follow the sklearn fit/transform protocol so they plug
into ordinary pipelines; both persist their fitted state as JSON. All
statistics (vocabulary, mean, std) are functions of the data passed to
`fit` only — transforming a different split never leaks its statistics.
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from . import schema
from .errors import MissingValue

UNKNOWN_CODE = 0  # reserved for category values unseen at fit time


@dataclass
class Dataset:
    """A feature matrix with aligned integer labels."""

    x: np.ndarray  # (n, 29) float64
    y: np.ndarray  # (n,) int64
    provenance: str = "unknown"

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if len(self.x) != len(self.y):
            raise ValueError(f"{len(self.x)} rows vs {len(self.y)} labels")
        if self.x.size and not np.isfinite(self.x).all():
            raise ValueError("dataset contains NaN/Inf")

    def __len__(self) -> int:
        return len(self.x)


@dataclass
class RawTable:
    """String-valued rows straight from CSV, ordered by the schema."""

    columns: list[str]
    rows: list[list[str]]
    labels: list[str]


def load_csv(path: str | Path) -> RawTable:
    """Read a flow CSV: the 29 schema columns plus a `label` column."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        missing = [c for c in schema.FEATURE_NAMES if c not in header]
        if missing:
            raise ValueError(f"CSV missing schema columns: {missing}")
        if schema.LABEL_COLUMN not in header:
            raise ValueError(f"CSV missing '{schema.LABEL_COLUMN}' column")
        col_idx = [header.index(c) for c in schema.FEATURE_NAMES]
        label_idx = header.index(schema.LABEL_COLUMN)
        rows, labels = [], []
        for row in reader:
            rows.append([row[i] for i in col_idx])
            labels.append(row[label_idx])
    return RawTable(list(schema.FEATURE_NAMES), rows, labels)


class CategoricalEncoder(BaseEstimator, TransformerMixin):
    """Ordinal encoder for the schema's categorical columns.

    Vocabularies are sorted lexicographically and codes start at 1;
    code 0 is reserved for values unseen at fit time. Unknowns are
    counted (``unknown_counts_``), never raised.
    """

    def __init__(self, categorical_columns: tuple[str, ...] = schema.CATEGORICAL_FEATURES):
        self.categorical_columns = categorical_columns

    def fit(self, table: RawTable, y=None):
        self.vocabulary_ = {}
        for name in self.categorical_columns:
            col = schema.FEATURE_INDEX[name]
            values = sorted({row[col] for row in table.rows if row[col] != ""})
            self.vocabulary_[name] = {v: i + 1 for i, v in enumerate(values)}
        self.unknown_counts_ = {name: 0 for name in self.categorical_columns}
        return self

    def transform(self, table: RawTable) -> Dataset:
        if not hasattr(self, "vocabulary_"):
            raise NotFittedError("CategoricalEncoder is not fitted")
        cat_cols = {schema.FEATURE_INDEX[n]: n for n in self.categorical_columns}
        self.unknown_counts_ = {name: 0 for name in self.categorical_columns}

        n = len(table.rows)
        x = np.empty((n, schema.N_FEATURES), dtype=np.float64)
        for i, row in enumerate(table.rows):
            for j, cell in enumerate(row):
                if cell == "":
                    raise MissingValue(
                        f"empty cell at row {i}, column {schema.FEATURE_NAMES[j]}"
                    )
                if j in cat_cols:
                    name = cat_cols[j]
                    code = self.vocabulary_[name].get(cell)
                    if code is None:
                        code = UNKNOWN_CODE
                        self.unknown_counts_[name] += 1
                    x[i, j] = float(code)
                else:
                    try:
                        x[i, j] = float(cell)
                    except ValueError:
                        raise MissingValue(
                            f"unparseable numeric cell {cell!r} at row {i},"
                            f" column {schema.FEATURE_NAMES[j]}"
                        ) from None
        y = np.array([schema.class_code(lbl) for lbl in table.labels], dtype=np.int64)
        return Dataset(x, y, provenance="encoded")

    def to_json(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.vocabulary_, sort_keys=True, indent=2))

    @classmethod
    def from_json(cls, path: str | Path) -> "CategoricalEncoder":
        enc = cls()
        enc.vocabulary_ = json.loads(Path(path).read_text())
        enc.unknown_counts_ = {name: 0 for name in enc.categorical_columns}
        return enc


def encode(table: RawTable) -> tuple[Dataset, CategoricalEncoder]:
    """Fit a fresh vocabulary on `table` and encode it."""
    encoder = CategoricalEncoder().fit(table)
    return encoder.transform(table), encoder


def stratified_split(data: Dataset, train_fraction: float, seed: int
                     ) -> tuple[Dataset, Dataset]:
    """Per-class split, deterministic under `seed`.

    Each class contributes round(train_fraction * n) rows to the first
    output; singleton classes go entirely to it so rare classes stay
    present at train time. The two outputs partition the input.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    rng = np.random.default_rng(seed)
    train_idx: list[np.ndarray] = []
    for c in np.unique(data.y):
        members = np.nonzero(data.y == c)[0]
        if len(members) == 1:
            train_idx.append(members)
            continue
        shuffled = rng.permutation(members)
        n_train = int(np.floor(train_fraction * len(members) + 0.5))
        train_idx.append(shuffled[:n_train])

    train_mask = np.zeros(len(data), dtype=bool)
    if train_idx:
        train_mask[np.concatenate(train_idx)] = True
    first = Dataset(data.x[train_mask], data.y[train_mask], provenance="train")
    second = Dataset(data.x[~train_mask], data.y[~train_mask], provenance="val")
    return first, second


class FlowScaler(BaseEstimator, TransformerMixin):
    """Column-wise standardization using population statistics.

    Columns with (population) std below 1e-12 keep std 1.0 so the fixed
    feature width survives constant columns.
    """

    _STD_FLOOR = 1e-12

    def fit(self, x: np.ndarray, y=None):
        x = np.asarray(x, dtype=np.float64)
        if len(x) == 0:
            raise ValueError("cannot fit scaler on empty data")
        self.mean_ = x.mean(axis=0)
        std = x.std(axis=0)  # population (ddof=0)
        self.std_ = np.where(std < self._STD_FLOOR, 1.0, std)
        return self

    def _check_fitted(self):
        if not hasattr(self, "mean_"):
            raise NotFittedError("FlowScaler is not fitted")

    def transform(self, x: np.ndarray) -> np.ndarray:
        self._check_fitted()
        return (np.asarray(x, dtype=np.float64) - self.mean_) / self.std_

    def inverse_transform(self, x: np.ndarray) -> np.ndarray:
        self._check_fitted()
        return np.asarray(x, dtype=np.float64) * self.std_ + self.mean_

    def transform_dataset(self, data: Dataset) -> Dataset:
        return Dataset(self.transform(data.x), data.y, data.provenance)

    def to_json(self, path: str | Path) -> None:
        self._check_fitted()
        Path(path).write_text(json.dumps(
            {"mean": self.mean_.tolist(), "std": self.std_.tolist()}, sort_keys=True))

    @classmethod
    def from_json(cls, path: str | Path) -> "FlowScaler":
        payload = json.loads(Path(path).read_text())
        scaler = cls()
        scaler.mean_ = np.asarray(payload["mean"], dtype=np.float64)
        scaler.std_ = np.asarray(payload["std"], dtype=np.float64)
        return scaler
