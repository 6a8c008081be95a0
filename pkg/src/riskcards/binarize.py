"""Raw tabular data -> binary design matrix with per-variable split groups.

Continuous variables become families of threshold indicators (fires when
raw value <= t) with thresholds at empirical quantiles; categorical
variables become cumulative prefix indicators over lexicographic token
order; any variable with at least one missing value gets one
missing-indicator column. Missing values are never imputed. All columns
derived from the same raw variable form one group.
"""

from __future__ import annotations

import csv
import hashlib
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import DataValidationError, SchemaMismatchError

log = logging.getLogger("riskcards.binarize")

CONTINUOUS = "continuous"
CATEGORICAL = "categorical"

THRESHOLD = "threshold"
CATEGORY = "category"
MISSING = "missing"

#: CSV cells read as missing, besides unparseable/non-finite numerics.
MISSING_TOKENS = ("", "NA")


@dataclass(frozen=True)
class SplitSpec:
    """One binary column: threshold test, category prefix test, or missing flag."""

    variable_index: int
    kind: str  # THRESHOLD | CATEGORY | MISSING
    threshold: float | None = None  # fires when raw value <= threshold
    boundary: str | None = None  # fires when token sorts <= boundary


@dataclass(frozen=True)
class RawDataset:
    """Parsed raw table: object columns (None marks missing) plus +-1 labels."""

    variable_names: tuple[str, ...]
    columns: tuple[np.ndarray, ...]
    kinds: tuple[str, ...]
    labels: np.ndarray | None = None
    label_values: tuple[str, str] | None = None  # raw (negative, positive) tokens

    def __post_init__(self):
        if len(self.columns) != len(self.variable_names):
            raise DataValidationError("column count does not match variable names")
        if len(self.kinds) != len(self.variable_names):
            raise DataValidationError("kind count does not match variable names")
        lengths = {len(c) for c in self.columns}
        if len(lengths) > 1:
            raise DataValidationError("ragged columns: unequal lengths")
        if self.labels is not None and len(self.labels) != self.n:
            raise DataValidationError("label count does not match row count")

    @property
    def n(self) -> int:
        return len(self.columns[0]) if self.columns else 0

    @property
    def q(self) -> int:
        return len(self.variable_names)

    def take(self, indices) -> "RawDataset":
        idx = np.asarray(indices, dtype=int)
        return RawDataset(
            variable_names=self.variable_names,
            columns=tuple(c[idx] for c in self.columns),
            kinds=self.kinds,
            labels=None if self.labels is None else self.labels[idx],
            label_values=self.label_values,
        )


@dataclass(frozen=True)
class BinarizationMap:
    """Fitted split definitions; column j of the design matrix is splits[j]."""

    variable_names: tuple[str, ...]
    kinds: tuple[str, ...]
    splits: tuple[SplitSpec, ...]
    categories: tuple[tuple[str, ...] | None, ...]
    fitted_on: str = ""

    def __post_init__(self):
        # thresholds strictly increasing, at most one missing flag per variable
        for v in range(len(self.variable_names)):
            ts = [s.threshold for s in self.splits if s.variable_index == v and s.kind == THRESHOLD]
            if any(b <= a for a, b in zip(ts, ts[1:])):
                raise DataValidationError(f"thresholds for variable {v} not strictly increasing")
            n_miss = sum(1 for s in self.splits if s.variable_index == v and s.kind == MISSING)
            if n_miss > 1:
                raise DataValidationError(f"variable {v} has more than one missing indicator")

    @property
    def p(self) -> int:
        return len(self.splits)

    @property
    def q(self) -> int:
        return len(self.variable_names)

    @cached_property
    def columns_by_variable(self) -> tuple[np.ndarray, ...]:
        cols: list[list[int]] = [[] for _ in self.variable_names]
        for j, s in enumerate(self.splits):
            cols[s.variable_index].append(j)
        return tuple(np.asarray(c, dtype=int) for c in cols)

    @cached_property
    def group_variables(self) -> tuple[int, ...]:
        """Raw variable index behind each group (variables with >= 1 split)."""
        return tuple(v for v in range(self.q) if self.columns_by_variable[v].size)

    @cached_property
    def groups(self) -> tuple[np.ndarray, ...]:
        """Column index sets, one group per raw variable with splits."""
        return tuple(self.columns_by_variable[v] for v in self.group_variables)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @cached_property
    def column_group(self) -> np.ndarray:
        """Group index of each design-matrix column."""
        out = np.full(self.p, -1, dtype=int)
        for g, cols in enumerate(self.groups):
            out[cols] = g
        return out


@dataclass(frozen=True)
class BinarizedDataset:
    """Design matrix in {0,1}, labels in {-1,+1}, and the map that built it."""

    matrix: np.ndarray
    labels: np.ndarray
    map: BinarizationMap

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2:
            raise DataValidationError("matrix must be 2-D")
        if m.shape[0] < 1 or m.shape[1] < 1:
            raise DataValidationError("need n >= 1 rows and p >= 1 columns")
        if m.shape[1] != self.map.p:
            raise DataValidationError("matrix width does not match map")
        if not np.isin(m, (0.0, 1.0)).all():
            raise DataValidationError("matrix entries must be 0 or 1")
        y = self.labels
        if y.shape != (m.shape[0],) or not np.isin(y, (-1.0, 1.0)).all():
            raise DataValidationError("labels must be one of {-1,+1} per row")
        dead = np.flatnonzero(m.sum(axis=0) == 0)
        if dead.size:
            log.warning("constant-zero columns (never fire on this data): %s", dead.tolist())

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def p(self) -> int:
        return self.matrix.shape[1]

    @cached_property
    def column_rows(self) -> tuple[np.ndarray, ...]:
        """Row indices where each column fires; the deterministic sum path."""
        return tuple(np.flatnonzero(self.matrix[:, j]) for j in range(self.p))


def _parse_float(token, variable: str):
    """Parse one cell as float; non-finite -> missing; unparseable -> error."""
    try:
        v = float(token)
    except (TypeError, ValueError):
        raise DataValidationError(
            f"variable {variable!r}: cannot parse {token!r} as a number"
        ) from None
    return v if np.isfinite(v) else None


def _as_token(value) -> str:
    return value if isinstance(value, str) else repr(float(value))


def load_csv(path, label: str | None = None, schema: dict[str, str] | None = None) -> RawDataset:
    """Read a delimited file with a header row into a RawDataset.

    Missing cells are empty fields or "NA". Columns where every non-missing
    cell parses as a finite number default to continuous, everything else to
    categorical; `schema` (name -> "continuous"|"categorical") overrides.
    `label` names the outcome column, which must hold exactly two distinct
    values; the smaller one (numeric if both parse, else lexicographic) maps
    to -1 and the larger to +1.
    """
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataValidationError(f"{path}: empty file") from None
        rows = list(reader)
    if not rows:
        raise DataValidationError(f"{path}: no data rows")
    for i, row in enumerate(rows):
        if len(row) != len(header):
            raise DataValidationError(f"{path}: row {i + 2} has {len(row)} fields, expected {len(header)}")
    if len(set(header)) != len(header):
        raise DataValidationError(f"{path}: duplicate column names")

    schema = dict(schema or {})
    for name in schema:
        if name not in header:
            raise DataValidationError(f"schema names unknown column {name!r}")

    label_idx = None
    if label is not None:
        if label not in header:
            raise DataValidationError(f"label column {label!r} not found")
        label_idx = header.index(label)

    names, columns, kinds = [], [], []
    for c, name in enumerate(header):
        if c == label_idx:
            continue
        cells = [row[c].strip() for row in rows]
        tokens = [None if t in MISSING_TOKENS else t for t in cells]
        kind = schema.get(name)
        if kind is None:
            parsed = _try_parse_column(tokens)
            kind = CONTINUOUS if parsed is not None else CATEGORICAL
            col = parsed if parsed is not None else np.array(tokens, dtype=object)
        elif kind == CONTINUOUS:
            col = np.array(
                [None if t is None else _parse_float(t, name) for t in tokens], dtype=object
            )
        elif kind == CATEGORICAL:
            col = np.array(tokens, dtype=object)
        else:
            raise DataValidationError(f"schema kind {kind!r} for {name!r} not recognized")
        names.append(name)
        columns.append(col)
        kinds.append(kind)

    labels = label_values = None
    if label_idx is not None:
        raw = [row[label_idx].strip() for row in rows]
        if any(t in MISSING_TOKENS for t in raw):
            raise DataValidationError(f"label column {label!r} has missing values")
        distinct = sorted(set(raw))
        if len(distinct) != 2:
            raise DataValidationError(
                f"label column {label!r} must have exactly 2 distinct values, found {len(distinct)}"
            )
        try:
            distinct.sort(key=float)
        except ValueError:
            pass  # lexicographic order already in place
        neg, pos = distinct
        labels = np.where(np.array(raw) == pos, 1.0, -1.0)
        label_values = (neg, pos)

    return RawDataset(tuple(names), tuple(columns), tuple(kinds), labels, label_values)


def _try_parse_column(tokens):
    """All non-missing cells parse as finite floats -> object array of floats."""
    out = []
    for t in tokens:
        if t is None:
            out.append(None)
            continue
        try:
            v = float(t)
        except ValueError:
            return None
        out.append(v if np.isfinite(v) else None)
    return np.array(out, dtype=object)


def fingerprint(raw: RawDataset) -> str:
    """Deterministic digest of schema + cell contents, for provenance checks."""
    h = hashlib.sha256()
    h.update(repr((raw.variable_names, raw.kinds, raw.n)).encode())
    for col, kind in zip(raw.columns, raw.kinds):
        if kind == CONTINUOUS:
            arr = np.array([np.nan if x is None else float(x) for x in col], dtype=np.float64)
            h.update(arr.tobytes())
        else:
            h.update("\x1f".join("\x00" if x is None else _as_token(x) for x in col).encode())
    return h.hexdigest()


def _nearest_rank_thresholds(values: np.ndarray, bins: int) -> list[float]:
    """Quantile thresholds via the nearest-rank rule, deduplicated in order."""
    n = values.size
    seen, out = set(), []
    for i in range(1, bins):
        idx = (i * n + bins - 1) // bins - 1  # ceil(i/bins * n) - 1, exactly
        t = float(values[idx])
        if t not in seen:
            seen.add(t)
            out.append(t)
    # a threshold at the column max fires on every row: drop it
    return [t for t in out if t < float(values[-1])]


def fit_binarizer(
    raw: RawDataset,
    bins_per_variable: int = 20,
    schema_overrides: dict[str, str] | None = None,
) -> BinarizationMap:
    """Learn split definitions from raw data.

    Continuous variables get at most bins_per_variable - 1 threshold splits at
    nearest-rank empirical quantiles (two distinct values collapse to a single
    split at the lower one); categorical variables get one cumulative split
    between each adjacent pair of token-sorted values; a missing indicator is
    added for every variable with at least one missing cell.
    """
    if bins_per_variable < 2:
        raise DataValidationError("bins_per_variable must be >= 2")
    if raw.n < 1:
        raise DataValidationError("cannot fit on an empty dataset")
    overrides = dict(schema_overrides or {})
    for name in overrides:
        if name not in raw.variable_names:
            raise DataValidationError(f"schema override names unknown variable {name!r}")

    splits: list[SplitSpec] = []
    categories: list[tuple[str, ...] | None] = []
    kinds: list[str] = []
    for v, name in enumerate(raw.variable_names):
        kind = overrides.get(name, raw.kinds[v])
        if kind not in (CONTINUOUS, CATEGORICAL):
            raise DataValidationError(f"kind {kind!r} for {name!r} not recognized")
        col = raw.columns[v]
        present = [x for x in col if x is not None]
        n_missing = len(col) - len(present)
        cats: tuple[str, ...] | None = None

        if not present:
            log.warning("variable %r is entirely missing; indicator only", name)
        elif kind == CONTINUOUS:
            vals = np.sort(np.array([_parse_or_raise(x, name) for x in present], dtype=np.float64))
            uniq = np.unique(vals)
            if uniq.size == 1:
                log.warning("variable %r has a single value; no splits", name)
            elif uniq.size == 2:
                splits.append(SplitSpec(v, THRESHOLD, threshold=float(uniq[0])))
            else:
                for t in _nearest_rank_thresholds(vals, bins_per_variable):
                    splits.append(SplitSpec(v, THRESHOLD, threshold=t))
        else:
            tokens = sorted({_as_token(x) for x in present})
            cats = tuple(tokens)
            if len(tokens) == 1:
                log.warning("variable %r has a single category; no splits", name)
            for boundary in tokens[:-1]:
                splits.append(SplitSpec(v, CATEGORY, boundary=boundary))

        if n_missing > 0:
            splits.append(SplitSpec(v, MISSING))
        categories.append(cats)
        kinds.append(kind)

    return BinarizationMap(
        variable_names=raw.variable_names,
        kinds=tuple(kinds),
        splits=tuple(splits),
        categories=tuple(categories),
        fitted_on=fingerprint(raw),
    )


def _parse_or_raise(value, variable: str) -> float:
    if isinstance(value, str):
        v = _parse_float(value, variable)
        if v is None:
            raise DataValidationError(f"variable {variable!r}: non-finite value")
        return v
    return float(value)


def transform_matrix(bmap: BinarizationMap, raw: RawDataset) -> np.ndarray:
    """Apply fitted splits to raw data; extra columns in raw are ignored."""
    col_of = {name: i for i, name in enumerate(raw.variable_names)}
    n = raw.n
    out = np.zeros((n, bmap.p), dtype=np.float64)
    for v, name in enumerate(bmap.variable_names):
        if name not in col_of:
            raise SchemaMismatchError(name)
        col = raw.columns[col_of[name]]
        jcols = bmap.columns_by_variable[v]
        if jcols.size == 0:
            continue
        miss = np.array([x is None for x in col], dtype=bool)
        if bmap.kinds[v] == CONTINUOUS:
            vals = np.array(
                [0.0 if x is None else _parse_or_raise(x, name) for x in col], dtype=np.float64
            )
            for j in jcols:
                s = bmap.splits[j]
                if s.kind == THRESHOLD:
                    out[:, j] = (~miss) & (vals <= s.threshold)
                else:  # MISSING
                    out[:, j] = miss
        else:
            cats = bmap.categories[v] or ()
            rank_of = {c: r for r, c in enumerate(cats)}
            ranks = np.full(n, len(cats), dtype=int)
            unknown = set()
            for i, x in enumerate(col):
                if x is None:
                    continue
                tok = _as_token(x)
                r = rank_of.get(tok)
                if r is None:
                    unknown.add(tok)  # fires no splits
                else:
                    ranks[i] = r
            if unknown:
                log.warning("variable %r: unseen categories %s fire no splits", name, sorted(unknown))
            for j in jcols:
                s = bmap.splits[j]
                if s.kind == CATEGORY:
                    out[:, j] = (~miss) & (ranks <= rank_of[s.boundary])
                else:  # MISSING
                    out[:, j] = miss
    return out


def apply_binarizer(bmap: BinarizationMap, raw: RawDataset) -> BinarizedDataset:
    """Binarize a labeled raw dataset with an already-fitted map."""
    if raw.labels is None:
        raise DataValidationError("apply_binarizer needs labels; use transform_matrix otherwise")
    return BinarizedDataset(matrix=transform_matrix(bmap, raw), labels=raw.labels, map=bmap)


def apply_record(bmap: BinarizationMap, record) -> np.ndarray:
    """Binarize a single record (mapping variable name -> raw value)."""
    x = np.zeros(bmap.p, dtype=np.float64)
    for v, name in enumerate(bmap.variable_names):
        try:
            value = record[name]
        except KeyError:
            raise SchemaMismatchError(name) from None
        missing = value is None or (isinstance(value, str) and value.strip() in MISSING_TOKENS)
        val = None
        if not missing and bmap.kinds[v] == CONTINUOUS:
            # non-finite numerics count as missing, matching load_csv
            val = _parse_float(value.strip() if isinstance(value, str) else value, name)
            missing = val is None
        for j in bmap.columns_by_variable[v]:
            s = bmap.splits[j]
            if s.kind == MISSING:
                x[j] = 1.0 if missing else 0.0
            elif missing:
                x[j] = 0.0
            elif s.kind == THRESHOLD:
                x[j] = 1.0 if val <= s.threshold else 0.0
            else:
                cats = bmap.categories[v] or ()
                tok = value.strip() if isinstance(value, str) else _as_token(value)
                rank = cats.index(tok) if tok in cats else len(cats)
                x[j] = 1.0 if rank <= cats.index(s.boundary) else 0.0
    return x
