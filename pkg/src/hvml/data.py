"""Dataset ingestion, normalization, stratified splitting, and statistics.

Datasets are dense: an N x D float feature matrix paired with an N x K
binary label matrix. Two on-disk formats are supported: multi-label ARFF in
the Mulan/MEKA convention (labels as {0,1} nominals grouped at the front or
back of the attribute list, dense or sparse data rows) and a pair of CSV
files (features, labels).

Splitting follows iterative stratification: 30% of samples to the test set,
then 20% of the remainder to validation, balancing per-fold label counts
label by label, rarest label first. Normalization is min-max to [0, 1] per
numeric column using training-split statistics only; other splits are
clipped into [0, 1], and binary columns pass through untouched.
"""

from __future__ import annotations

import csv
import json
import logging
import os
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError
from . import seeds

logger = logging.getLogger(__name__)

TEST_FRACTION = 0.30
VALIDATION_FRACTION = 0.20  # of the non-test remainder

NUMERIC = "numeric"
BINARY = "binary"


@dataclass(frozen=True)
class SplitIndices:
    """Disjoint, exhaustive train/validation/test row indices."""

    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray

    def __post_init__(self):
        for name in ("train", "validation", "test"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=np.int64))

    def check(self, n: int) -> "SplitIndices":
        parts = [self.train, self.validation, self.test]
        combined = np.concatenate(parts)
        if len(np.unique(combined)) != len(combined):
            raise ConfigError("split indices overlap")
        if not np.array_equal(np.sort(combined), np.arange(n)):
            raise ConfigError(f"split indices do not cover 0..{n - 1} exactly")
        return self


@dataclass(frozen=True)
class Dataset:
    """Feature matrix, binary labels, per-column kinds, and optional split."""

    x: np.ndarray
    y: np.ndarray
    feature_kinds: tuple[str, ...]
    name: str = "dataset"
    split: SplitIndices | None = None
    imputed: int = 0  # count of missing values filled during loading

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y)
        if x.ndim != 2 or y.ndim != 2:
            raise ParseError(f"features and labels must be 2-D, got {x.shape} and {y.shape}")
        if x.shape[0] != y.shape[0]:
            raise ParseError(f"row count mismatch: {x.shape[0]} feature rows vs {y.shape[0]} label rows")
        if not np.isin(y, (0, 1)).all():
            raise ParseError("labels must contain only 0/1 entries")
        if len(self.feature_kinds) != x.shape[1]:
            raise ParseError("one feature kind per column required")
        x.setflags(write=False)
        y = y.astype(np.int8)
        y.setflags(write=False)
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "feature_kinds", tuple(self.feature_kinds))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def k(self) -> int:
        return self.y.shape[1]

    def with_split(self, split: SplitIndices) -> "Dataset":
        return replace(self, split=split.check(self.n))

    def rows(self, which: str) -> tuple[np.ndarray, np.ndarray]:
        """(x, y) restricted to one split part: 'train', 'validation', or 'test'."""
        if self.split is None:
            raise ConfigError("dataset has no split; call stratified_split first")
        idx = getattr(self.split, which)
        if idx.size == 0:
            raise ConfigError(f"{which} split is empty")
        return self.x[idx], self.y[idx]


@dataclass(frozen=True)
class DatasetStats:
    """Size statistics: label cardinality and feature-label interaction figures."""

    n: int
    d: int
    k: int
    dk: int
    cardinality: float   # mean positive labels per instance
    dispersion: float    # dk / cardinality
    interaction: float   # d * cardinality


def compute_stats(dataset: Dataset) -> DatasetStats:
    card = float(dataset.y.sum(axis=1).mean())
    dk = dataset.d * dataset.k
    return DatasetStats(
        n=dataset.n,
        d=dataset.d,
        k=dataset.k,
        dk=dk,
        cardinality=card,
        dispersion=dk / card if card > 0 else float("inf"),
        interaction=dataset.d * card,
    )


# ---------------------------------------------------------------------------
# ARFF loading

def _parse_attribute(line: str, path, lineno: int) -> tuple[str, object]:
    body = line.split(None, 1)[1].strip()
    if body.startswith(("'", '"')):
        quote = body[0]
        end = body.index(quote, 1)
        name = body[1:end]
        rest = body[end + 1:].strip()
    else:
        parts = body.split(None, 1)
        if len(parts) != 2:
            raise ParseError(f"malformed @attribute line: {line!r}", path, lineno)
        name, rest = parts
    rest = rest.strip()
    if rest.startswith("{"):
        if not rest.endswith("}"):
            raise ParseError(f"unterminated nominal value list for attribute {name!r}", path, lineno)
        values = [v.strip().strip("'\"") for v in rest[1:-1].split(",")]
        return name, tuple(values)
    kind = rest.split()[0].lower()
    if kind in ("numeric", "real", "integer"):
        return name, NUMERIC
    raise ParseError(f"unsupported attribute type {rest!r} for attribute {name!r}", path, lineno)


def _split_data_line(line: str) -> list[str]:
    return next(csv.reader([line], skipinitialspace=True))


def load_arff(path, label_count: int, labels_at: str = "back", name: str | None = None) -> Dataset:
    """Load a Mulan/MEKA-style multi-label ARFF file.

    label_count attributes at the chosen end of the attribute list are the
    labels and must be {0,1}-valued. Dense and sparse ({index value, ...})
    data rows are both accepted; missing values ('?') are imputed to the
    column mean (numeric) or mode (binary) and counted in ``imputed``.
    """
    if labels_at not in ("front", "back"):
        raise ConfigError(f"labels_at must be 'front' or 'back', got {labels_at!r}")
    path = Path(path)
    attrs: list[tuple[str, object]] = []
    rows: list[np.ndarray] = []
    relation = None
    in_data = False
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("%"):
                continue
            low = line.lower()
            if not in_data:
                if low.startswith("@relation"):
                    parts = line.split(None, 1)
                    relation = parts[1].strip().strip("'\"") if len(parts) > 1 else "arff"
                elif low.startswith("@attribute"):
                    attrs.append(_parse_attribute(line, path, lineno))
                elif low.startswith("@data"):
                    if not attrs:
                        raise ParseError("@data before any @attribute", path, lineno)
                    in_data = True
                else:
                    raise ParseError(f"unrecognized header line: {line!r}", path, lineno)
                continue
            rows.append(_parse_arff_row(line, len(attrs), path, lineno))
    if not in_data:
        raise ParseError("no @data section found", path)
    if not rows:
        raise ParseError("no data rows found", path)
    if not 1 <= label_count < len(attrs):
        raise ParseError(
            f"label_count {label_count} invalid for {len(attrs)} attributes", path
        )
    raw = np.vstack(rows)  # strings, '?' for missing
    if labels_at == "back":
        label_idx = list(range(len(attrs) - label_count, len(attrs)))
    else:
        label_idx = list(range(label_count))
    feature_idx = [i for i in range(len(attrs)) if i not in set(label_idx)]

    y = np.zeros((raw.shape[0], label_count), dtype=np.int8)
    for out_col, col in enumerate(label_idx):
        attr_name, attr_type = attrs[col]
        values = set(np.unique(raw[:, col])) - {"?"}
        if isinstance(attr_type, tuple) and not set(attr_type) <= {"0", "1"}:
            raise ParseError(f"label attribute {attr_name!r} is not {{0,1}}-valued: {sorted(attr_type)}", path)
        if not values <= {"0", "1", "0.0", "1.0"}:
            bad = sorted(values - {"0", "1", "0.0", "1.0"})
            raise ParseError(f"label attribute {attr_name!r} has non-binary value {bad[0]!r}", path)
        col_vals = raw[:, col]
        missing = col_vals == "?"
        numeric = np.where(missing, "0", col_vals).astype(float)
        if missing.any():
            mode = int(round(numeric[~missing].mean())) if (~missing).any() else 0
            numeric[missing] = mode
        y[:, out_col] = numeric.astype(np.int8)

    x = np.zeros((raw.shape[0], len(feature_idx)))
    kinds: list[str] = []
    imputed = 0
    for out_col, col in enumerate(feature_idx):
        attr_name, attr_type = attrs[col]
        col_vals = raw[:, col]
        missing = col_vals == "?"
        imputed += int(missing.sum())
        if isinstance(attr_type, tuple):
            if not set(attr_type) <= {"0", "1"}:
                raise ParseError(
                    f"nominal feature {attr_name!r} is not binary: {sorted(attr_type)}", path
                )
            vals = np.where(missing, "0", col_vals).astype(float)
            if missing.any():
                mode = float(round(vals[~missing].mean())) if (~missing).any() else 0.0
                vals[missing] = mode
            if not np.isin(vals, (0.0, 1.0)).all():
                raise ParseError(f"binary feature {attr_name!r} has non-binary data", path)
            kinds.append(BINARY)
        else:
            try:
                vals = np.where(missing, "nan", col_vals).astype(float)
            except ValueError:
                raise ParseError(f"non-numeric value in numeric attribute {attr_name!r}", path) from None
            if missing.any():
                observed = vals[~missing]
                vals[missing] = observed.mean() if observed.size else 0.0
            kinds.append(NUMERIC)
        x[:, out_col] = vals
    if imputed:
        logger.warning("%s: imputed %d missing feature values", path, imputed)
    return Dataset(x=x, y=y, feature_kinds=tuple(kinds),
                   name=name or relation or path.stem, imputed=imputed)


def _parse_arff_row(line: str, n_attrs: int, path, lineno: int) -> np.ndarray:
    if line.startswith("{"):
        if not line.endswith("}"):
            raise ParseError("unterminated sparse data row", path, lineno)
        row = np.full(n_attrs, "0", dtype=object)
        body = line[1:-1].strip()
        if body:
            for item in body.split(","):
                parts = item.split()
                if len(parts) != 2:
                    raise ParseError(f"malformed sparse entry {item!r}", path, lineno)
                idx = int(parts[0])
                if not 0 <= idx < n_attrs:
                    raise ParseError(f"sparse index {idx} out of range", path, lineno)
                row[idx] = parts[1]
        return row.astype(str)
    cells = [c.strip() for c in _split_data_line(line)]
    if len(cells) != n_attrs:
        raise ParseError(f"row has {len(cells)} values, expected {n_attrs}", path, lineno)
    return np.array(cells, dtype=str)


# ---------------------------------------------------------------------------
# CSV loading

def _read_csv_matrix(path) -> tuple[np.ndarray, bool]:
    """Float matrix from a CSV file; a leading non-numeric row is treated as a
    header. Returns (matrix, had_header)."""
    path = Path(path)
    rows: list[list[str]] = []
    with open(path, "r", encoding="utf-8", newline="") as fh:
        for lineno, cells in enumerate(csv.reader(fh), start=1):
            if not cells or all(not c.strip() for c in cells):
                continue
            rows.append([c.strip() for c in cells])
    if not rows:
        raise ParseError("empty file", path)

    def parse(cells):
        return [float(c) for c in cells]

    had_header = False
    try:
        parse(rows[0])
    except ValueError:
        had_header = True
        rows = rows[1:]
    if not rows:
        raise ParseError("no data rows (header only)", path)
    width = len(rows[0])
    data = np.empty((len(rows), width))
    for i, cells in enumerate(rows):
        if len(cells) != width:
            raise ParseError(f"ragged row: {len(cells)} values, expected {width}",
                             path, i + 1 + int(had_header))
        try:
            data[i] = parse(cells)
        except ValueError as exc:
            raise ParseError(str(exc), path, i + 1 + int(had_header)) from None
    return data, had_header


def load_csv(features_path, labels_path, name: str | None = None) -> Dataset:
    """Load a dataset from paired CSV files (one row per sample in each)."""
    x, _ = _read_csv_matrix(features_path)
    y, _ = _read_csv_matrix(labels_path)
    if x.shape[0] != y.shape[0]:
        raise ParseError(
            f"row count mismatch: {x.shape[0]} feature rows vs {y.shape[0]} label rows",
            Path(features_path),
        )
    if not np.isin(y, (0.0, 1.0)).all():
        raise ParseError("labels must contain only 0/1 entries", Path(labels_path))
    kinds = tuple(BINARY if np.isin(x[:, j], (0.0, 1.0)).all() else NUMERIC
                  for j in range(x.shape[1]))
    return Dataset(x=x, y=y.astype(np.int8), feature_kinds=kinds,
                   name=name or Path(features_path).stem)


def write_csv(dataset: Dataset, features_path, labels_path) -> None:
    """Write a dataset back to paired CSV files (round-trips with load_csv)."""
    np.savetxt(features_path, dataset.x, delimiter=",", fmt="%.17g")
    np.savetxt(labels_path, dataset.y, delimiter=",", fmt="%d")


# ---------------------------------------------------------------------------
# manifest

def load_manifest(path) -> Dataset:
    """Load a dataset described by a JSON manifest.

    Keys: name, label_count + labels_at + arff_path for ARFF, or
    csv_paths: [features, labels]. Paths may use environment variables and
    are resolved relative to the manifest file.
    """
    path = Path(path)
    try:
        manifest = json.loads(path.read_text())
    except json.JSONDecodeError as exc:
        raise ParseError(f"manifest is not valid JSON: {exc}", path) from None

    def resolve(p):
        p = Path(os.path.expandvars(os.path.expanduser(str(p))))
        return p if p.is_absolute() else path.parent / p

    name = manifest.get("name")
    if "arff_path" in manifest:
        if "label_count" not in manifest:
            raise ParseError("ARFF manifest requires label_count", path)
        return load_arff(resolve(manifest["arff_path"]), int(manifest["label_count"]),
                         labels_at=manifest.get("labels_at", "back"), name=name)
    if "csv_paths" in manifest:
        paths = manifest["csv_paths"]
        if not isinstance(paths, (list, tuple)) or len(paths) != 2:
            raise ParseError("csv_paths must be [features_csv, labels_csv]", path)
        return load_csv(resolve(paths[0]), resolve(paths[1]), name=name)
    raise ParseError("manifest needs either arff_path or csv_paths", path)


# ---------------------------------------------------------------------------
# normalization and splitting

def normalize(dataset: Dataset) -> Dataset:
    """Min-max scale numeric columns to [0, 1].

    Statistics come from the training split when the dataset has one (all
    rows otherwise); validation/test values outside the training range are
    clipped. Columns constant on the statistics rows map to all zeros.
    Binary columns are untouched.
    """
    stat_rows = dataset.split.train if dataset.split is not None else np.arange(dataset.n)
    x = np.array(dataset.x)
    for j, kind in enumerate(dataset.feature_kinds):
        if kind == BINARY:
            continue
        col = x[:, j]
        lo = col[stat_rows].min()
        hi = col[stat_rows].max()
        if hi <= lo:
            x[:, j] = 0.0
        else:
            x[:, j] = np.clip((col - lo) / (hi - lo), 0.0, 1.0)
    return replace(dataset, x=x)


def _iterative_stratify(y: np.ndarray, proportions, rng: np.random.Generator) -> np.ndarray:
    """Assign each sample to one of len(proportions) folds, balancing per-fold
    label counts label by label, rarest label first. Ties on the target fold
    go to the fold with the most remaining capacity, then to a seeded draw."""
    n, k = y.shape
    props = np.asarray(proportions, dtype=float)
    props = props / props.sum()
    fold_capacity = props * n
    label_desired = props[:, None] * y.sum(axis=0)[None, :]
    fold_of = np.full(n, -1, dtype=np.int64)
    priority = rng.permutation(n)  # fixed iteration order for sample processing

    while True:
        unassigned = fold_of < 0
        remaining = y[unassigned].sum(axis=0) if unassigned.any() else np.zeros(k)
        candidates = np.flatnonzero(remaining > 0)
        if candidates.size == 0:
            break
        label = candidates[np.argmin(remaining[candidates])]
        for s in priority:
            if fold_of[s] >= 0 or y[s, label] == 0:
                continue
            want = label_desired[:, label]
            best = np.flatnonzero(want == want.max())
            if best.size > 1:
                cap = fold_capacity[best]
                best = best[np.flatnonzero(cap == cap.max())]
            j = int(best[0]) if best.size == 1 else int(rng.choice(best))
            fold_of[s] = j
            fold_capacity[j] -= 1.0
            label_desired[j, y[s] > 0] -= 1.0
    for s in priority:  # samples with no positive label
        if fold_of[s] >= 0:
            continue
        best = np.flatnonzero(fold_capacity == fold_capacity.max())
        j = int(best[0]) if best.size == 1 else int(rng.choice(best))
        fold_of[s] = j
        fold_capacity[j] -= 1.0
    return fold_of


def stratified_split(dataset: Dataset, seed: int) -> SplitIndices:
    """Iteratively stratified split: 30% test, then 20% of the rest validation."""
    if dataset.n < 10:
        raise ConfigError(f"need at least 10 samples to split, got {dataset.n}")
    rng = seeds.rng_for(seed, seeds.STREAM_SPLIT)
    stage1 = _iterative_stratify(dataset.y, (1.0 - TEST_FRACTION, TEST_FRACTION), rng)
    test = np.flatnonzero(stage1 == 1)
    rest = np.flatnonzero(stage1 == 0)
    stage2 = _iterative_stratify(dataset.y[rest],
                                 (1.0 - VALIDATION_FRACTION, VALIDATION_FRACTION), rng)
    train = rest[stage2 == 0]
    validation = rest[stage2 == 1]
    return SplitIndices(np.sort(train), np.sort(validation), np.sort(test)).check(dataset.n)
