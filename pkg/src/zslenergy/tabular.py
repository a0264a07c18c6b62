"""Typed tabular data: schema, column-stored datasets, encoding, splitting, CSV."""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .io import atomic_write_text

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"


class SchemaError(ValueError):
    """Raised when data does not conform to a :class:`FeatureSchema`."""


@dataclass(frozen=True)
class Feature:
    name: str
    kind: str = CONTINUOUS
    levels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in (CONTINUOUS, CATEGORICAL):
            raise SchemaError(f"feature {self.name!r}: unknown kind {self.kind!r}")
        if self.kind == CATEGORICAL:
            if not self.levels:
                raise SchemaError(f"feature {self.name!r}: empty level set")
            if len(set(self.levels)) != len(self.levels):
                raise SchemaError(f"feature {self.name!r}: duplicate levels")
        elif self.levels:
            raise SchemaError(f"feature {self.name!r}: continuous feature with levels")

    @property
    def is_categorical(self) -> bool:
        return self.kind == CATEGORICAL


@dataclass(frozen=True)
class FeatureSchema:
    """Feature inventory, target metric names and the class column.

    ``classes`` is the declared finite set of class labels (building types).
    """

    features: tuple[Feature, ...]
    target_metrics: tuple[str, ...]
    class_column: str = "building_type"
    classes: tuple[str, ...] = ()

    def __post_init__(self):
        names = [f.name for f in self.features]
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names")
        if not self.target_metrics:
            raise SchemaError("at least one target metric is required")
        if len(set(self.target_metrics)) != len(self.target_metrics):
            raise SchemaError("duplicate target metric names")
        if self.class_column in names or self.class_column in self.target_metrics:
            raise SchemaError(f"class column {self.class_column!r} clashes with a feature or target")
        if set(names) & set(self.target_metrics):
            raise SchemaError("feature and target names overlap")
        if len(set(self.classes)) != len(self.classes):
            raise SchemaError("duplicate class labels")

    @property
    def feature_names(self) -> list[str]:
        return [f.name for f in self.features]

    @property
    def columns(self) -> list[str]:
        """CSV column order: features, class column, targets."""
        return [*self.feature_names, self.class_column, *self.target_metrics]

    def to_dict(self) -> dict:
        feats = []
        for f in self.features:
            d = {"name": f.name, "kind": f.kind}
            if f.is_categorical:
                d["levels"] = list(f.levels)
            feats.append(d)
        return {
            "features": feats,
            "target_metrics": list(self.target_metrics),
            "class_column": self.class_column,
            "classes": list(self.classes),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "FeatureSchema":
        try:
            feats = tuple(
                Feature(f["name"], f.get("kind", CONTINUOUS), tuple(f.get("levels", ())))
                for f in d["features"]
            )
            return cls(
                features=feats,
                target_metrics=tuple(d["target_metrics"]),
                class_column=d.get("class_column", "building_type"),
                classes=tuple(d.get("classes", ())),
            )
        except KeyError as exc:
            raise SchemaError(f"schema missing key {exc.args[0]!r}") from None

    def save(self, path) -> None:
        atomic_write_text(path, json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "FeatureSchema":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Dataset:
    """Column-stored records.

    ``features`` maps each feature name to a length-``n`` array (float for
    continuous, str for categorical); ``labels`` holds the class label of
    every record and ``targets`` one float array per target metric.
    """

    schema: FeatureSchema
    features: dict[str, np.ndarray]
    labels: np.ndarray
    targets: dict[str, np.ndarray]

    def __post_init__(self):
        schema = self.schema
        n = len(self.labels)
        feats = {}
        for f in schema.features:
            if f.name not in self.features:
                raise SchemaError(f"missing feature column {f.name!r}")
            col = np.asarray(self.features[f.name])
            if len(col) != n:
                raise SchemaError(f"feature {f.name!r} has {len(col)} values, expected {n}")
            if f.is_categorical:
                col = col.astype(str)
                bad = ~np.isin(col, f.levels)
                if bad.any():
                    i = int(np.flatnonzero(bad)[0])
                    raise SchemaError(
                        f"record {i}: feature {f.name!r} has level {col[i]!r} outside {list(f.levels)}"
                    )
            else:
                col = col.astype(np.float64)
                if not np.all(np.isfinite(col)):
                    i = int(np.flatnonzero(~np.isfinite(col))[0])
                    raise SchemaError(f"record {i}: feature {f.name!r} is not finite")
            feats[f.name] = _frozen(col)
        extra = set(self.features) - set(schema.feature_names)
        if extra:
            raise SchemaError(f"unexpected feature columns {sorted(extra)}")
        labels = np.asarray(self.labels).astype(str)
        if schema.classes:
            bad = ~np.isin(labels, schema.classes)
            if bad.any():
                i = int(np.flatnonzero(bad)[0])
                raise SchemaError(f"record {i}: unknown class label {labels[i]!r}")
        targets = {}
        for m in schema.target_metrics:
            if m not in self.targets:
                raise SchemaError(f"missing target column {m!r}")
            col = np.asarray(self.targets[m], dtype=np.float64)
            if len(col) != n:
                raise SchemaError(f"target {m!r} has {len(col)} values, expected {n}")
            if not np.all(np.isfinite(col)):
                raise SchemaError(f"target {m!r} contains non-finite values")
            targets[m] = _frozen(col)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "labels", _frozen(labels))
        object.__setattr__(self, "targets", targets)

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def classes(self) -> list[str]:
        """Declared classes, or the observed ones in first-seen order."""
        if self.schema.classes:
            return list(self.schema.classes)
        _, first = np.unique(self.labels, return_index=True)
        return [str(self.labels[i]) for i in sorted(first)]

    def take(self, idx) -> "Dataset":
        idx = np.asarray(idx)
        return Dataset(
            self.schema,
            {k: v[idx] for k, v in self.features.items()},
            self.labels[idx],
            {k: v[idx] for k, v in self.targets.items()},
        )

    def where_class(self, classes: str | Iterable[str]) -> "Dataset":
        if isinstance(classes, str):
            classes = [classes]
        return self.take(np.flatnonzero(np.isin(self.labels, list(classes))))

    def without_class(self, classes: str | Iterable[str]) -> "Dataset":
        if isinstance(classes, str):
            classes = [classes]
        return self.take(np.flatnonzero(~np.isin(self.labels, list(classes))))

    def equals(self, other: "Dataset") -> bool:
        return (
            self.schema == other.schema
            and np.array_equal(self.labels, other.labels)
            and all(np.array_equal(self.features[k], other.features[k]) for k in self.features)
            and all(np.array_equal(self.targets[k], other.targets[k]) for k in self.targets)
        )


def concat(parts: Sequence[Dataset]) -> Dataset:
    if not parts:
        raise ValueError("nothing to concatenate")
    schema = parts[0].schema
    if any(p.schema != schema for p in parts):
        raise SchemaError("cannot concatenate datasets with different schemas")
    return Dataset(
        schema,
        {f: np.concatenate([p.features[f] for p in parts]) for f in schema.feature_names},
        np.concatenate([p.labels for p in parts]),
        {m: np.concatenate([p.targets[m] for p in parts]) for m in schema.target_metrics},
    )


# --- encoding -------------------------------------------------------------


@dataclass(frozen=True)
class Encoder:
    """Fitted one-hot + z-score transform.

    ``stats`` holds (mean, scale) per continuous feature. Zero-variance
    columns keep scale 1, so they are only centred. An unstandardised
    encoder has mean 0 and scale 1 everywhere.
    """

    features: tuple[Feature, ...]
    stats: dict[str, tuple[float, float]]

    @property
    def column_map(self) -> list[tuple[str, str | None]]:
        cols: list[tuple[str, str | None]] = []
        for f in self.features:
            if f.is_categorical:
                cols.extend((f.name, lvl) for lvl in f.levels)
            else:
                cols.append((f.name, None))
        return cols

    def transform(self, dataset: Dataset) -> "EncodedMatrix":
        n = len(dataset)
        blocks = []
        for f in self.features:
            col = dataset.features[f.name]
            if f.is_categorical:
                unknown = ~np.isin(col, f.levels)
                if unknown.any():
                    lvl = col[np.flatnonzero(unknown)[0]]
                    raise SchemaError(f"unknown level {lvl!r} for categorical feature {f.name!r}")
                blocks.append((col[:, None] == np.array(f.levels)[None, :]).astype(np.float64))
            else:
                mean, scale = self.stats[f.name]
                blocks.append(((col - mean) / scale)[:, None])
        values = np.hstack(blocks) if blocks else np.zeros((n, 0))
        return EncodedMatrix(values, self.column_map, self)

    def to_dict(self) -> dict:
        return {
            "features": [
                {"name": f.name, "kind": f.kind, **({"levels": list(f.levels)} if f.is_categorical else {})}
                for f in self.features
            ],
            "stats": {k: [float(m), float(s)] for k, (m, s) in self.stats.items()},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "Encoder":
        feats = tuple(Feature(f["name"], f["kind"], tuple(f.get("levels", ()))) for f in d["features"])
        return cls(feats, {k: (float(v[0]), float(v[1])) for k, v in d["stats"].items()})


@dataclass(frozen=True)
class EncodedMatrix:
    values: np.ndarray
    column_map: list[tuple[str, str | None]] = field(repr=False)
    encoder: Encoder = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return self.values.shape


def fit_encoder(dataset: Dataset, fit_stats_on=None, standardize: bool = True) -> Encoder:
    """Fit encoding statistics on the rows ``fit_stats_on`` (default: all)."""
    if fit_stats_on is None:
        idx = np.arange(len(dataset))
    else:
        idx = np.asarray(fit_stats_on)
        if idx.dtype == bool:
            idx = np.flatnonzero(idx)
    if idx.size == 0:
        raise ValueError("fit_stats_on must select at least one record")
    if idx.min() < 0 or idx.max() >= len(dataset):
        raise ValueError("fit_stats_on indexes outside the dataset")
    stats = {}
    for f in dataset.schema.features:
        if f.is_categorical:
            continue
        if not standardize:
            stats[f.name] = (0.0, 1.0)
            continue
        x = dataset.features[f.name][idx]
        mean = float(x.mean())
        std = float(x.std())
        stats[f.name] = (mean, std if std > 0 else 1.0)
    return Encoder(dataset.schema.features, stats)


def encode(dataset: Dataset, fit_stats_on=None, standardize: bool = True) -> EncodedMatrix:
    """One-hot encode categoricals and z-score continuous columns.

    Statistics come only from ``fit_stats_on``; reuse ``result.encoder`` to
    transform held-out data.
    """
    return fit_encoder(dataset, fit_stats_on, standardize).transform(dataset)


# --- splitting ------------------------------------------------------------


def round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def split(dataset: Dataset, ratio: float = 0.9, seed: int = 0) -> tuple[Dataset, Dataset]:
    """Stratified random train/test partition.

    Each class contributes ``round_half_up(ratio * n_class)`` records to the
    training side. Classes are processed in sorted label order with one
    generator, so the partition depends only on (dataset, ratio, seed).
    """
    if len(dataset) == 0:
        raise ValueError("cannot split an empty dataset")
    if not 0.0 < ratio < 1.0:
        raise ValueError(f"ratio must lie in (0, 1), got {ratio}")
    rng = np.random.default_rng(seed)
    train_idx, test_idx = [], []
    for c in sorted(set(dataset.labels.tolist())):
        members = np.flatnonzero(dataset.labels == c)
        if len(members) < 2:
            raise ValueError(f"class {c!r} has {len(members)} record(s); cannot split")
        n_train = round_half_up(ratio * len(members))
        perm = rng.permutation(members)
        train_idx.append(np.sort(perm[:n_train]))
        test_idx.append(np.sort(perm[n_train:]))
    return dataset.take(np.concatenate(train_idx)), dataset.take(np.concatenate(test_idx))


# --- CSV ------------------------------------------------------------------


def _fmt(x: float) -> str:
    return repr(float(x))


def save_csv(dataset: Dataset, path) -> None:
    """Write ``dataset`` as UTF-8 CSV; floats use shortest round-trip repr."""
    import io

    schema = dataset.schema
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(schema.columns)
    cols = []
    for f in schema.features:
        col = dataset.features[f.name]
        cols.append(col.tolist() if f.is_categorical else [_fmt(v) for v in col])
    cols.append(dataset.labels.tolist())
    for m in schema.target_metrics:
        cols.append([_fmt(v) for v in dataset.targets[m]])
    w.writerows(zip(*cols))
    atomic_write_text(path, buf.getvalue())


def load_csv(path, schema: FeatureSchema) -> Dataset:
    """Read a CSV written against ``schema``; columns are matched by header name."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        pos = {name: j for j, name in enumerate(header)}
        for name in schema.columns:
            if name not in pos:
                raise SchemaError(f"{path}: missing column {name!r}")
        rows = list(reader)
    feats: dict[str, list] = {f: [] for f in schema.feature_names}
    labels: list[str] = []
    targets: dict[str, list] = {m: [] for m in schema.target_metrics}
    classes = set(schema.classes)
    for r, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise SchemaError(f"{path}: row {r} has {len(row)} fields, expected {len(header)}")
        for f in schema.features:
            raw = row[pos[f.name]]
            if f.is_categorical:
                if raw not in f.levels:
                    raise SchemaError(
                        f"{path}: row {r}: value {raw!r} of {f.name!r} not in level set {list(f.levels)}"
                    )
                feats[f.name].append(raw)
            else:
                feats[f.name].append(_parse_float(raw, path, r, f.name))
        label = row[pos[schema.class_column]]
        if classes and label not in classes:
            raise SchemaError(f"{path}: row {r}: unknown class label {label!r}")
        labels.append(label)
        for m in schema.target_metrics:
            targets[m].append(_parse_float(row[pos[m]], path, r, m))
    return Dataset(
        schema,
        {f.name: np.array(feats[f.name], dtype=str if f.is_categorical else np.float64) for f in schema.features},
        np.array(labels, dtype=str),
        {m: np.array(v, dtype=np.float64) for m, v in targets.items()},
    )


def _parse_float(raw: str, path, row: int, column: str) -> float:
    try:
        v = float(raw)
    except ValueError:
        raise SchemaError(f"{path}: row {row}: cannot parse {raw!r} in column {column!r} as a number") from None
    if not math.isfinite(v):
        raise SchemaError(f"{path}: row {row}: non-finite value in column {column!r}")
    return v
