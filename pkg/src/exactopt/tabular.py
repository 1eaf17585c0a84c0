"""Deterministic tabular ingestion: CSV parsing, imputation, one-hot encoding,
standardization, train/test splitting, and built-in datasets.

All fitting statistics (imputation values, category vocabularies, feature
means/stds) are computed on the train split only and applied to the test
split, so test rows never influence preprocessing.
"""

import csv
import json
from dataclasses import dataclass, field

import numpy as np

from .mvn_orthant import philox_rng

MISSING_TOKENS = ("?", "", "NA")
COLUMN_KINDS = ("numeric", "categorical", "label", "ignore")


@dataclass
class ColumnSchema:
    name: str
    kind: str

    def __post_init__(self):
        if self.kind not in COLUMN_KINDS:
            raise ValueError(f"unknown column kind {self.kind!r}")


@dataclass
class TableSchema:
    columns: list
    has_header: bool = False
    missing_tokens: tuple = MISSING_TOKENS

    def __post_init__(self):
        labels = [c for c in self.columns if c.kind == "label"]
        if len(labels) != 1:
            raise ValueError("schema must contain exactly one label column")

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            spec = json.load(fh)
        cols = [ColumnSchema(c["name"], c["kind"]) for c in spec["columns"]]
        return cls(
            columns=cols,
            has_header=spec.get("has_header", False),
            missing_tokens=tuple(spec.get("missing_tokens", MISSING_TOKENS)),
        )


@dataclass
class RawTable:
    """Column-major table; missing cells are stored as None."""

    schema: TableSchema
    columns: list  # list of lists, parallel to schema.columns

    @property
    def n_rows(self):
        return len(self.columns[0]) if self.columns else 0

    def select_rows(self, indices):
        return RawTable(
            schema=self.schema,
            columns=[[col[i] for i in indices] for col in self.columns],
        )


@dataclass
class TabularDataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: list
    class_names: list

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        self.labels = np.asarray(self.labels, dtype=int)
        if self.features.shape[0] != self.labels.shape[0]:
            raise ValueError("features and labels disagree on row count")
        if np.any(np.isnan(self.features)):
            raise ValueError("features contain missing values")
        if self.labels.size and (self.labels.min() < 1 or self.labels.max() > len(self.class_names)):
            raise ValueError("labels must lie in 1..C")

    @property
    def n_classes(self):
        return len(self.class_names)


class ParseError(ValueError):
    pass


def load_csv(path, schema: TableSchema) -> RawTable:
    """Parse a comma-separated file into a RawTable per the schema."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        rows = list(reader)
    if schema.has_header:
        rows = rows[1:]
    rows = [r for r in rows if r]
    if not rows:
        raise ParseError(f"{path}: no data rows")
    n_cols = len(schema.columns)
    columns = [[] for _ in range(n_cols)]
    for r, row in enumerate(rows):
        if len(row) != n_cols:
            raise ParseError(f"{path}: row {r + 1} has {len(row)} cells, expected {n_cols}")
        for c, (cell, col_schema) in enumerate(zip(row, schema.columns)):
            cell = cell.strip()
            if cell in schema.missing_tokens:
                columns[c].append(None)
                continue
            if col_schema.kind == "numeric":
                try:
                    columns[c].append(float(cell))
                except ValueError as exc:
                    raise ParseError(
                        f"{path}: row {r + 1}, column {col_schema.name!r}: {cell!r} is not numeric"
                    ) from exc
            else:
                columns[c].append(cell)
    return RawTable(schema=schema, columns=columns)


def save_csv(table: RawTable, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        if table.schema.has_header:
            writer.writerow([c.name for c in table.schema.columns])
        for i in range(table.n_rows):
            row = []
            for col, cs in zip(table.columns, table.schema.columns):
                v = col[i]
                if v is None:
                    row.append("?")
                elif cs.kind == "numeric":
                    row.append(repr(v))
                else:
                    row.append(v)
            writer.writerow(row)


def _column_mode(values):
    counts = {}
    for v in values:
        counts[v] = counts.get(v, 0) + 1
    best = max(counts.values())
    return min(v for v, n in counts.items() if n == best)  # lexicographic tie-break


def impute(table: RawTable, stats=None):
    """Fill missing numerics with the column mean, missing categoricals with
    the modal category (lexicographic tie-break).  When ``stats`` is given the
    precomputed fill values are applied instead (test path)."""
    fit = stats is None
    if fit:
        stats = {}
    columns = []
    for c, (col, cs) in enumerate(zip(table.columns, table.schema.columns)):
        if cs.kind in ("label", "ignore"):
            columns.append(list(col))
            continue
        present = [v for v in col if v is not None]
        if fit:
            if not present:
                raise ValueError(f"column {cs.name!r} has no observed values")
            if cs.kind == "numeric":
                stats[c] = float(np.mean(present))
            else:
                stats[c] = _column_mode(present)
        fill = stats[c]
        columns.append([fill if v is None else v for v in col])
    return RawTable(schema=table.schema, columns=columns), stats


def one_hot(table: RawTable, categories=None):
    """Encode feature columns to a numeric matrix.

    Categorical columns become one indicator column per category observed in
    the fitting data (first-appearance order); numeric columns pass through.
    Unseen test categories map to an all-zero block.
    Returns (features, feature_names, categories).
    """
    fit = categories is None
    if fit:
        categories = {}
    blocks = []
    names = []
    for c, (col, cs) in enumerate(zip(table.columns, table.schema.columns)):
        if cs.kind in ("label", "ignore"):
            continue
        if cs.kind == "numeric":
            if any(v is None for v in col):
                raise ValueError(f"column {cs.name!r} still has missing values")
            blocks.append(np.asarray(col, dtype=float)[:, None])
            names.append(cs.name)
        else:
            if fit:
                seen = []
                for v in col:
                    if v not in seen:
                        seen.append(v)
                categories[c] = seen
            cats = categories[c]
            block = np.zeros((len(col), len(cats)))
            index = {v: k for k, v in enumerate(cats)}
            for i, v in enumerate(col):
                k = index.get(v)
                if k is not None:
                    block[i, k] = 1.0
            blocks.append(block)
            names.extend(f"{cs.name}={v}" for v in cats)
    features = np.hstack(blocks) if blocks else np.zeros((table.n_rows, 0))
    return features, names, categories


def encode_labels(table: RawTable, class_names=None):
    """Map the label column to integer classes 1..C (first-appearance order)."""
    col_idx = next(
        i for i, cs in enumerate(table.schema.columns) if cs.kind == "label"
    )
    col = table.columns[col_idx]
    if any(v is None for v in col):
        raise ValueError("label column has missing values")
    fit = class_names is None
    if fit:
        class_names = []
        for v in col:
            if v not in class_names:
                class_names.append(v)
    index = {v: k + 1 for k, v in enumerate(class_names)}
    try:
        labels = np.array([index[v] for v in col], dtype=int)
    except KeyError as exc:
        raise ValueError(f"unseen label value {exc.args[0]!r}") from exc
    return labels, class_names


def standardize(features, stats=None):
    """Center/scale each column; population std, zero-std columns map to 0."""
    features = np.asarray(features, dtype=float)
    if stats is None:
        mean = features.mean(axis=0)
        std = features.std(axis=0)
        std = np.where(std == 0.0, 1.0, std)
        stats = (mean, std)
    mean, std = stats
    return (features - mean) / std, stats


def split(dataset: TabularDataset, test_fraction=0.2, seed=0):
    """Seeded shuffle; the first ceil(test_fraction * N) rows become the test
    split.  Disjoint and exhaustive."""
    n = dataset.labels.shape[0]
    if n < 5:
        raise ValueError("dataset too small to split")
    order = philox_rng(seed, 0).permutation(n)
    n_test = int(np.ceil(test_fraction * n))
    test_idx, train_idx = order[:n_test], order[n_test:]

    def take(idx):
        return TabularDataset(
            features=dataset.features[idx],
            labels=dataset.labels[idx],
            feature_names=dataset.feature_names,
            class_names=dataset.class_names,
        )

    return take(train_idx), take(test_idx)


def split_indices(n_rows, test_fraction, seed):
    order = philox_rng(seed, 0).permutation(n_rows)
    n_test = int(np.ceil(test_fraction * n_rows))
    return list(order[n_test:]), list(order[:n_test])


def prepare(table: RawTable, test_fraction=0.2, seed=0, standardize_features=True):
    """Full pipeline: split raw rows, then impute / one-hot / standardize with
    statistics fitted on the train rows only.  Returns (train, test)."""
    train_idx, test_idx = split_indices(table.n_rows, test_fraction, seed)
    train_raw = table.select_rows(train_idx)
    test_raw = table.select_rows(test_idx)

    train_filled, fill_stats = impute(train_raw)
    test_filled, _ = impute(test_raw, fill_stats)
    x_train, names, cats = one_hot(train_filled)
    x_test, _, _ = one_hot(test_filled, cats)
    y_train, class_names = encode_labels(train_filled)
    y_test, _ = encode_labels(test_filled, class_names)
    if standardize_features:
        x_train, std_stats = standardize(x_train)
        x_test, _ = standardize(x_test, std_stats)
    train = TabularDataset(x_train, y_train, names, class_names)
    test = TabularDataset(x_test, y_test, names, class_names)
    return train, test


def toy1() -> TabularDataset:
    """Three 1-d points at -0.25, 0, 0.25 with labels -1, -1, +1."""
    return TabularDataset(
        features=np.array([[-0.25], [0.0], [0.25]]),
        labels=np.array([1, 1, 2]),
        feature_names=["x"],
        class_names=["-1", "+1"],
    )


def toy2() -> TabularDataset:
    """Five 1-d points at -6, -5, -4, 0, 2 with labels -1, +1, +1, -1, +1."""
    return TabularDataset(
        features=np.array([[-6.0], [-5.0], [-4.0], [0.0], [2.0]]),
        labels=np.array([1, 2, 2, 1, 2]),
        feature_names=["x"],
        class_names=["-1", "+1"],
    )


def balance_scale_table() -> RawTable:
    """The balance-scale dataset, regenerated from its defining rule: all 625
    combinations of four ordinal attributes in 1..5; the class compares
    left-weight * left-distance against right-weight * right-distance.

    The attributes are treated as numeric: a linear model then tops out near
    92% test accuracy, since the weight-distance products are not linearly
    separable."""
    schema = TableSchema(
        columns=[
            ColumnSchema("left_weight", "numeric"),
            ColumnSchema("left_distance", "numeric"),
            ColumnSchema("right_weight", "numeric"),
            ColumnSchema("right_distance", "numeric"),
            ColumnSchema("class", "label"),
        ]
    )
    cols = [[], [], [], [], []]
    for lw in range(1, 6):
        for ld in range(1, 6):
            for rw in range(1, 6):
                for rd in range(1, 6):
                    left, right = lw * ld, rw * rd
                    label = "L" if left > right else ("R" if right > left else "B")
                    values = (float(lw), float(ld), float(rw), float(rd), label)
                    for col, v in zip(cols, values):
                        col.append(v)
    return RawTable(schema=schema, columns=cols)


def _sklearn_table(loader, label_names):
    data = loader()
    schema = TableSchema(
        columns=[ColumnSchema(str(n), "numeric") for n in data.feature_names]
        + [ColumnSchema("class", "label")]
    )
    columns = [list(map(float, data.data[:, j])) for j in range(data.data.shape[1])]
    columns.append([label_names[t] for t in data.target])
    return RawTable(schema=schema, columns=columns)


def breast_cancer_wisconsin_table() -> RawTable:
    from sklearn.datasets import load_breast_cancer

    return _sklearn_table(load_breast_cancer, {0: "malignant", 1: "benign"})


def wine_table() -> RawTable:
    from sklearn.datasets import load_wine

    return _sklearn_table(load_wine, {0: "class_0", 1: "class_1", 2: "class_2"})


BUILTIN_TABLES = {
    "balance-scale": balance_scale_table,
    "breast-cancer-wisconsin": breast_cancer_wisconsin_table,
    "wine": wine_table,
}


def load_builtin_table(name) -> RawTable:
    try:
        return BUILTIN_TABLES[name]()
    except KeyError:
        raise KeyError(
            f"unknown builtin dataset {name!r}; available: {sorted(BUILTIN_TABLES)}"
        ) from None
