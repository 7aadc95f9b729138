"""Panel tables, CSV ingestion, label joining and stratified splitting.

Missing cells are stored as NaN in ``values`` and flagged False in ``mask``.
Code downstream must consult ``mask``; NaN is only there so that an
accidental read poisons the result instead of silently using a number.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

DEFAULT_MISSING_TOKENS = frozenset({"", "NA", ".."})
KEY_COLUMNS = ("country_code", "year")

RowKey = tuple[str, int]


class PanelError(ValueError):
    """Raised for malformed panel or label input."""


@dataclass(frozen=True, eq=False)
class PanelTable:
    row_keys: tuple[RowKey, ...]
    feature_names: tuple[str, ...]
    values: np.ndarray
    mask: np.ndarray
    # string-valued columns awaiting encode_categoricals; None marks missing
    categoricals: dict[str, tuple[str | None, ...]] = field(default_factory=dict)

    def __post_init__(self):
        values = np.array(self.values, dtype=float, copy=True)
        mask = np.array(self.mask, dtype=bool, copy=True)
        n, d = len(self.row_keys), len(self.feature_names)
        if values.size == 0:
            values = values.reshape(n, d)
            mask = mask.reshape(n, d)
        if values.shape != (n, d) or mask.shape != (n, d):
            raise PanelError(
                f"values {values.shape} / mask {mask.shape} do not match {n} rows x {d} features"
            )
        keys = tuple((str(c), int(y)) for c, y in self.row_keys)
        if len(set(keys)) != len(keys):
            seen = set()
            for key in keys:
                if key in seen:
                    raise PanelError(f"duplicate row key {key}")
                seen.add(key)
        if len(set(self.feature_names)) != d:
            raise PanelError("duplicate feature names")
        if not np.isfinite(values[mask]).all():
            raise PanelError("observed cells must be finite")
        values[~mask] = np.nan
        values.flags.writeable = False
        mask.flags.writeable = False
        cats = {}
        for name, col in self.categoricals.items():
            if len(col) != n:
                raise PanelError(f"categorical column {name!r} has {len(col)} cells, expected {n}")
            cats[name] = tuple(col)
        object.__setattr__(self, "row_keys", keys)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "mask", mask)
        object.__setattr__(self, "categoricals", cats)

    @classmethod
    def from_array(cls, X, feature_names=None, row_keys=None, mask=None) -> "PanelTable":
        """Wrap a dense matrix; NaN cells are treated as missing unless a mask is given."""
        X = np.asarray(X, dtype=float)
        if X.ndim != 2:
            raise PanelError("expected a 2-D matrix")
        n, d = X.shape
        if feature_names is None:
            feature_names = [f"f{j}" for j in range(d)]
        if row_keys is None:
            row_keys = [("R", i) for i in range(n)]
        if mask is None:
            mask = ~np.isnan(X)
        return cls(tuple(row_keys), tuple(feature_names), X, mask)

    @property
    def n_rows(self) -> int:
        return len(self.row_keys)

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def fully_observed(self) -> bool:
        return bool(self.mask.all())

    def dense(self) -> np.ndarray:
        """The value matrix; only legal when nothing is missing."""
        if not self.fully_observed:
            raise PanelError("table has missing cells; impute first")
        return self.values

    def take(self, rows) -> "PanelTable":
        rows = np.asarray(rows, dtype=int)
        cats = {k: tuple(v[i] for i in rows) for k, v in self.categoricals.items()}
        return PanelTable(
            tuple(self.row_keys[i] for i in rows),
            self.feature_names,
            self.values[rows],
            self.mask[rows],
            cats,
        )

    def with_values(self, values, mask=None) -> "PanelTable":
        return PanelTable(
            self.row_keys,
            self.feature_names,
            values,
            self.mask if mask is None else mask,
            self.categoricals,
        )

    def select_features(self, names: Sequence[str]) -> "PanelTable":
        idx = [self.feature_names.index(n) for n in names]
        return PanelTable(self.row_keys, tuple(names), self.values[:, idx], self.mask[:, idx], self.categoricals)


@dataclass(frozen=True, eq=False)
class LabeledDataset:
    table: PanelTable
    labels: np.ndarray

    def __post_init__(self):
        labels = np.array(self.labels, copy=True)
        if labels.ndim != 1 or len(labels) != self.table.n_rows:
            raise PanelError(f"{len(labels)} labels for {self.table.n_rows} rows")
        if labels.size and not np.isin(labels, (0, 1)).all():
            raise PanelError("labels must be 0 or 1")
        labels = labels.astype(np.int64)
        labels.flags.writeable = False
        object.__setattr__(self, "labels", labels)

    @classmethod
    def from_arrays(cls, X, y, feature_names=None) -> "LabeledDataset":
        return cls(PanelTable.from_array(X, feature_names), np.asarray(y))

    @property
    def X(self) -> np.ndarray:
        return self.table.dense()

    @property
    def y(self) -> np.ndarray:
        return self.labels

    @property
    def n_rows(self) -> int:
        return self.table.n_rows

    def take(self, rows) -> "LabeledDataset":
        rows = np.asarray(rows, dtype=int)
        return LabeledDataset(self.table.take(rows), self.labels[rows])

    def with_table(self, table: PanelTable) -> "LabeledDataset":
        return LabeledDataset(table, self.labels)

    def class_counts(self) -> tuple[int, int]:
        ones = int(self.labels.sum())
        return len(self.labels) - ones, ones


@dataclass(frozen=True)
class MissingReport:
    per_feature: dict[str, float]
    per_row: tuple[float, ...]
    overall: float


def _parse_number(text: str, row: int, col: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise PanelError(f"non-numeric cell {text!r} at row {row}, column {col!r}") from None
    if not math.isfinite(value):
        raise PanelError(f"non-finite cell {text!r} at row {row}, column {col!r}")
    return value


def load_panel_csv(
    path,
    missing_tokens: Iterable[str] = DEFAULT_MISSING_TOKENS,
    categorical: Iterable[str] = (),
) -> PanelTable:
    """Read a ``country_code,year,<feature...>`` CSV.

    Columns listed in ``categorical`` are kept as strings for
    :func:`encode_categoricals`; every other feature column must be numeric.
    Row numbers in errors count the header as row 1.
    """
    missing_tokens = frozenset(missing_tokens)
    categorical = set(categorical)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise PanelError(f"{path}: empty file") from None
        if tuple(header[:2]) != KEY_COLUMNS:
            raise PanelError(f"{path}: header must start with country_code,year (got {header[:2]})")
        columns = header[2:]
        if not columns:
            raise PanelError(f"{path}: no feature columns")
        unknown = categorical - set(columns)
        if unknown:
            raise PanelError(f"categorical columns not in header: {sorted(unknown)}")
        numeric = [c for c in columns if c not in categorical]
        keys: list[RowKey] = []
        seen: set[RowKey] = set()
        rows_num: list[list[float]] = []
        rows_mask: list[list[bool]] = []
        cats: dict[str, list[str | None]] = {c: [] for c in columns if c in categorical}
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise PanelError(f"row {lineno}: expected {len(header)} cells, got {len(row)}")
            try:
                year = int(row[1])
            except ValueError:
                raise PanelError(f"row {lineno}: year {row[1]!r} is not an integer") from None
            key = (row[0], year)
            if key in seen:
                raise PanelError(f"duplicate key {key} at row {lineno}")
            seen.add(key)
            keys.append(key)
            vals, obs = [], []
            for name, cell in zip(columns, row[2:]):
                missing = cell in missing_tokens
                if name in categorical:
                    cats[name].append(None if missing else cell)
                    continue
                obs.append(not missing)
                vals.append(np.nan if missing else _parse_number(cell, lineno, name))
            rows_num.append(vals)
            rows_mask.append(obs)
    n, d = len(keys), len(numeric)
    values = np.array(rows_num, dtype=float).reshape(n, d)
    mask = np.array(rows_mask, dtype=bool).reshape(n, d)
    return PanelTable(tuple(keys), tuple(numeric), values, mask, {k: tuple(v) for k, v in cats.items()})


def _format_value(x: float) -> str:
    # repr is the shortest string that round-trips to the same double
    return repr(float(x))


def write_panel_csv(table: PanelTable, path) -> None:
    """Inverse of :func:`load_panel_csv`: missing cells are written empty."""
    cat_names = list(table.categoricals)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([*KEY_COLUMNS, *table.feature_names, *cat_names])
        for i, (country, year) in enumerate(table.row_keys):
            cells = [
                _format_value(v) if m else ""
                for v, m in zip(table.values[i], table.mask[i])
            ]
            cells += ["" if table.categoricals[c][i] is None else table.categoricals[c][i] for c in cat_names]
            w.writerow([country, year, *cells])


def categorical_levels(table: PanelTable, columns: Iterable[str] | None = None) -> dict[str, tuple[str, ...]]:
    """Sorted observed levels of each categorical column (``country_code`` allowed)."""
    if columns is None:
        columns = list(table.categoricals)
    out = {}
    for name in columns:
        cells = _categorical_cells(table, name)
        out[name] = tuple(sorted({c for c in cells if c is not None}))
    return out


def _categorical_cells(table: PanelTable, name: str):
    if name == "country_code":
        return tuple(k[0] for k in table.row_keys)
    if name not in table.categoricals:
        raise PanelError(f"{name!r} is not a categorical column")
    return table.categoricals[name]


def encode_categoricals(
    table: PanelTable,
    policy: str = "one-hot",
    columns: Iterable[str] | None = None,
    levels: dict[str, Sequence[str]] | None = None,
) -> PanelTable:
    """Turn string columns into numeric features.

    ``one-hot`` appends ``<col>=<level>`` indicator columns, ``ordinal`` maps
    levels to 0..L-1 in lexicographic order. ``levels`` pins the level set
    fitted elsewhere (e.g. on a training split); an unseen level is an error
    under ``ordinal`` and encodes as all zeros under ``one-hot``. A missing
    category masks every derived cell. ``country_code`` may be named to
    encode the row identifier.
    """
    if policy not in ("one-hot", "ordinal"):
        raise ValueError(f"unknown encoding policy {policy!r}")
    if columns is None:
        columns = list(table.categoricals)
    columns = list(columns)
    fitted = categorical_levels(table, columns)
    if levels is not None:
        fitted.update({k: tuple(v) for k, v in levels.items() if k in columns})

    new_names = list(table.feature_names)
    new_vals = [table.values]
    new_mask = [table.mask]
    n = table.n_rows
    for name in columns:
        cells = _categorical_cells(table, name)
        lv = fitted[name]
        observed = np.array([c is not None for c in cells], dtype=bool)
        if policy == "ordinal":
            index = {level: i for i, level in enumerate(lv)}
            col = np.full(n, np.nan)
            for i, c in enumerate(cells):
                if c is None:
                    continue
                if c not in index:
                    raise PanelError(f"unseen level {c!r} in column {name!r}")
                col[i] = index[c]
            new_names.append(name)
            new_vals.append(col[:, None])
            new_mask.append(observed[:, None])
        else:
            block = np.zeros((n, len(lv)))
            for j, level in enumerate(lv):
                block[:, j] = [1.0 if c == level else 0.0 for c in cells]
            new_names.extend(f"{name}={level}" for level in lv)
            new_vals.append(block)
            new_mask.append(np.repeat(observed[:, None], len(lv), axis=1))
    cats = {k: v for k, v in table.categoricals.items() if k not in columns}
    return PanelTable(
        table.row_keys,
        tuple(new_names),
        np.hstack(new_vals),
        np.hstack(new_mask),
        cats,
    )


def add_year_feature(table: PanelTable, name: str = "year_value") -> PanelTable:
    """Append the row year as a numeric feature column."""
    years = np.array([y for _, y in table.row_keys], dtype=float)[:, None]
    return PanelTable(
        table.row_keys,
        (*table.feature_names, name),
        np.hstack([table.values, years]),
        np.hstack([table.mask, np.ones_like(years, dtype=bool)]),
        table.categoricals,
    )


@dataclass(frozen=True)
class JoinReport:
    matched: int
    skipped: int


def read_labels_csv(path) -> dict[RowKey, int]:
    labels: dict[RowKey, int] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        missing = {"country_code", "year", "outbreak"} - set(reader.fieldnames or ())
        if missing:
            raise PanelError(f"{path}: labels header lacks {sorted(missing)}")
        for lineno, row in enumerate(reader, start=2):
            raw = row["outbreak"].strip()
            if raw not in ("0", "1"):
                raise PanelError(f"row {lineno}: outbreak must be 0 or 1, got {raw!r}")
            try:
                key = (row["country_code"], int(row["year"]))
            except ValueError:
                raise PanelError(f"row {lineno}: year {row['year']!r} is not an integer") from None
            if key in labels:
                raise PanelError(f"duplicate label key {key} at row {lineno}")
            labels[key] = int(raw)
    return labels


def write_labels_csv(ds: LabeledDataset, path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["country_code", "year", "outbreak"])
        for (country, year), label in zip(ds.table.row_keys, ds.labels):
            w.writerow([country, year, int(label)])


def attach_labels(table: PanelTable, labels_csv) -> tuple[LabeledDataset, JoinReport]:
    """Join outbreak labels on (country_code, year).

    Panel rows without a label row are outbreak-free (label 0). Label rows
    with no panel row are dropped and counted in the report.
    """
    if isinstance(labels_csv, dict):
        labels = labels_csv
    else:
        labels = read_labels_csv(labels_csv)
    y = np.array([labels.get(key, 0) for key in table.row_keys], dtype=np.int64)
    present = set(table.row_keys)
    matched = sum(1 for key in labels if key in present)
    return LabeledDataset(table, y), JoinReport(matched, len(labels) - matched)


def _allocate(total: int, counts: Sequence[int]) -> list[int]:
    """Largest-remainder apportionment of ``total`` over groups sized ``counts``."""
    n = sum(counts)
    quotas = [total * c / n for c in counts]
    alloc = [math.floor(q) for q in quotas]
    order = sorted(range(len(counts)), key=lambda i: (-(quotas[i] - alloc[i]), i))
    for i in order[: total - sum(alloc)]:
        alloc[i] += 1
    return alloc


def stratified_indices(labels: np.ndarray, test_fraction: float, rng: np.random.Generator):
    labels = np.asarray(labels)
    n = len(labels)
    n_test = math.floor(test_fraction * n + 0.5)
    groups = [np.flatnonzero(labels == c) for c in (0, 1)]
    alloc = _allocate(n_test, [len(g) for g in groups])
    test = []
    for g, k in zip(groups, alloc):
        test.append(rng.permutation(g)[:k])
    test_idx = np.sort(np.concatenate(test)).astype(int)
    train_idx = np.setdiff1d(np.arange(n), test_idx)
    return train_idx, test_idx


def stratified_split(ds: LabeledDataset, test_fraction: float = 0.2, seed: int = 0):
    """Partition into (train, test) preserving class proportions.

    The test side holds ``round(test_fraction * n)`` rows (halves round up),
    apportioned over the classes by largest remainder.
    """
    if not 0 < test_fraction < 1:
        raise ValueError("test_fraction must lie in (0, 1)")
    zeros, ones = ds.class_counts()
    if zeros == 0 or ones == 0:
        raise PanelError("stratified split needs both classes present")
    train_idx, test_idx = stratified_indices(ds.labels, test_fraction, np.random.default_rng(seed))
    return ds.take(train_idx), ds.take(test_idx)


def stratified_folds(labels: np.ndarray, folds: int, seed: int) -> list[np.ndarray]:
    """Index arrays for ``folds`` stratified validation folds."""
    labels = np.asarray(labels)
    rng = np.random.default_rng(seed)
    out: list[list[int]] = [[] for _ in range(folds)]
    for c in (0, 1):
        idx = rng.permutation(np.flatnonzero(labels == c))
        if len(idx) < folds:
            raise PanelError(f"class {c} has {len(idx)} rows, fewer than {folds} folds")
        for f, chunk in enumerate(np.array_split(idx, folds)):
            out[f].extend(chunk.tolist())
    return [np.sort(np.array(f, dtype=int)) for f in out]


def missingness_profile(table: PanelTable) -> MissingReport:
    missing = ~table.mask
    n, d = missing.shape
    per_feature = {
        name: float(missing[:, j].mean()) if n else 0.0
        for j, name in enumerate(table.feature_names)
    }
    per_row = tuple(float(r) for r in missing.mean(axis=1)) if d else tuple(0.0 for _ in range(n))
    overall = float(missing.mean()) if missing.size else 0.0
    return MissingReport(per_feature, per_row, overall)
