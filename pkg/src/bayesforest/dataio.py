"""Delimited-file ingestion, discretization, and fold planning.

The model downstream is entirely categorical, so every column ends up as
0-based category codes with a known arity.  Continuous columns are binned
either by recursive entropy minimization with an MDL stopping rule
(`discretize_mdlp`) or by a single median split (`discretize_binary`).
Binning thresholds and category maps are fit on training rows only and
packaged as a :class:`DiscretizationPlan`, so the same plan can be replayed
onto held-out rows.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigurationError, EmptyDatasetError, ParseError

DEFAULT_MISSING_TOKENS = frozenset({"?", "", "NA"})

# Numeric columns with at most this many distinct values are treated as
# already-discrete categories rather than being re-binned.
MAX_CATEGORICAL_DISTINCT = 8

# Feature-count threshold for the auto discretization mode: small tables get
# MDLP, wide ones get the cheaper binary split.
AUTO_MDLP_MAX_FEATURES = 100


@dataclass(frozen=True)
class RawTable:
    """A parsed delimited file: verbatim cell strings plus the class column."""

    rows: tuple[tuple[str, ...], ...]
    header: tuple[str, ...] | None
    class_column: int

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    @property
    def n_cols(self) -> int:
        if self.rows:
            return len(self.rows[0])
        if self.header is not None:
            return len(self.header)
        return 0

    @property
    def n_features(self) -> int:
        return self.n_cols - 1

    def column_names(self) -> list[str]:
        """Header names, or generated ``X1..Xd`` / ``class`` placeholders."""
        if self.header is not None:
            return list(self.header)
        names = []
        k = 1
        for i in range(self.n_cols):
            if i == self.class_column:
                names.append("class")
            else:
                names.append(f"X{k}")
                k += 1
        return names

    def subset(self, indices) -> "RawTable":
        rows = tuple(self.rows[i] for i in indices)
        return RawTable(rows=rows, header=self.header, class_column=self.class_column)


@dataclass(frozen=True)
class Dataset:
    """Fully discretized data: category codes plus per-column arities.

    `features` is an (n, d) integer matrix, `klass` the n class codes.
    `cutpoints[j]` holds the numeric thresholds used for column j (empty for
    originally categorical columns).
    """

    features: np.ndarray
    arities: tuple[int, ...]
    klass: np.ndarray
    class_arity: int
    feature_names: tuple[str, ...]
    cutpoints: tuple[tuple[float, ...], ...]
    class_labels: tuple[str, ...] = ()

    def __post_init__(self):
        n, d = self.features.shape
        if len(self.arities) != d or len(self.feature_names) != d or len(self.cutpoints) != d:
            raise ValueError("per-feature metadata length does not match feature count")
        if self.klass.shape != (n,):
            raise ValueError("class vector length does not match row count")
        if any(a < 1 for a in self.arities):
            raise ValueError("feature arities must be >= 1")
        if self.class_arity < 2:
            raise ValueError("need at least 2 classes")
        if n and (self.features.max(axis=0) >= np.asarray(self.arities)).any():
            raise ValueError("feature value out of range for its arity")
        if n and self.klass.max() >= self.class_arity:
            raise ValueError("class value out of range")

    @property
    def n(self) -> int:
        return self.features.shape[0]

    @property
    def d(self) -> int:
        return self.features.shape[1]


@dataclass(frozen=True)
class FoldPlan:
    """Cross-validation fold assignment for n rows."""

    k: int
    assignment: np.ndarray
    seed: int

    def train_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment != fold)

    def test_indices(self, fold: int) -> np.ndarray:
        return np.flatnonzero(self.assignment == fold)


@dataclass(frozen=True)
class ColumnCodec:
    """How one column maps raw cells to category codes.

    Exactly one of `cutpoints` (numeric binning) or `categories`
    (value-to-index by sorted distinct training values) is active.
    """

    name: str
    kind: str  # "numeric" or "categorical"
    cutpoints: tuple[float, ...] = ()
    categories: tuple = ()
    numeric_values: bool = False  # categorical column whose cells parse as floats
    index: dict = field(default_factory=dict, repr=False, compare=False)

    def arity(self) -> int:
        if self.kind == "numeric":
            return len(self.cutpoints) + 1
        return len(self.categories)


@dataclass(frozen=True)
class DiscretizationPlan:
    """Per-column codecs fit on training rows, replayable on any table."""

    feature_codecs: tuple[ColumnCodec, ...]
    class_codec: ColumnCodec
    class_column: int


def load_table(path, delimiter: str = ",", has_header: bool = True,
               class_column: int | str = -1) -> RawTable:
    """Parse a delimited text file into a :class:`RawTable`.

    Cell strings are preserved verbatim.  Every row must have the same cell
    count; a ragged row raises :class:`ParseError` naming its 1-based line.
    `class_column` may be a column index (negative counts from the end) or,
    when a header is present, a column name.
    """
    rows: list[tuple[str, ...]] = []
    header: tuple[str, ...] | None = None
    width: int | None = None
    with open(path, newline="") as fh:
        reader = csv.reader(fh, delimiter=delimiter)
        for lineno, record in enumerate(reader, start=1):
            if not record:
                continue  # skip blank lines
            if lineno == 1 and has_header:
                header = tuple(record)
                width = len(header)
                continue
            if width is None:
                width = len(record)
            elif len(record) != width:
                raise ParseError(
                    f"expected {width} cells, found {len(record)}", line=lineno)
            rows.append(tuple(record))
    if width is None:
        raise ParseError(f"no data in {path}")
    if width < 2:
        raise ConfigurationError("need at least one feature column and a class column")

    if isinstance(class_column, str):
        if header is None:
            raise ConfigurationError(
                "class column given by name but the file has no header")
        try:
            cls_idx = header.index(class_column)
        except ValueError:
            raise ConfigurationError(
                f"class column {class_column!r} not found in header") from None
    else:
        cls_idx = class_column if class_column >= 0 else width + class_column
        if not 0 <= cls_idx < width:
            raise ConfigurationError(
                f"class column index {class_column} out of range for {width} columns")
    return RawTable(rows=tuple(rows), header=header, class_column=cls_idx)


def drop_missing(table: RawTable, missing_tokens=DEFAULT_MISSING_TOKENS) -> RawTable:
    """Remove every row containing a cell in `missing_tokens` (order kept)."""
    tokens = frozenset(missing_tokens)
    kept = tuple(r for r in table.rows if not any(c in tokens for c in r))
    if not kept:
        raise EmptyDatasetError("all rows contained missing values")
    return RawTable(rows=kept, header=table.header, class_column=table.class_column)


def _entropy_bits(counts: np.ndarray) -> np.ndarray:
    """Shannon entropy (base 2) per row of a count matrix."""
    counts = np.atleast_2d(counts).astype(float)
    totals = counts.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        p = np.where(totals > 0, counts / totals, 0.0)
        terms = np.where(p > 0, p * np.log2(p), 0.0)
    return -terms.sum(axis=1)


def discretize_mdlp(values, klass) -> list[float]:
    """Recursive entropy-minimizing binary splits with the MDL stopping rule.

    At each level the candidate threshold (midpoint between adjacent distinct
    values) with maximal information gain is accepted iff

        gain > (log2(N-1) + log2(3^k - 2) - k*Ent(S)
                + k1*Ent(S1) + k2*Ent(S2)) / N

    where k, k1, k2 count the classes present in the segment and its halves.
    Accepted cuts recurse into both halves.  Returns sorted thresholds
    (empty for a constant or uninformative column).
    """
    values = np.asarray(values, dtype=float)
    klass = np.asarray(klass, dtype=np.int64)
    if values.shape != klass.shape:
        raise ValueError("values and class labels must have equal length")
    n = values.shape[0]
    if n < 2:
        return []
    order = np.argsort(values, kind="stable")
    v = values[order]
    y = klass[order]
    n_classes = int(y.max()) + 1 if n else 1
    # prefix[i, c] = count of class c among the first i sorted rows
    prefix = np.zeros((n + 1, n_classes), dtype=np.int64)
    np.add.at(prefix, (np.arange(1, n + 1), y), 1)
    np.cumsum(prefix, axis=0, out=prefix)

    cuts: list[float] = []
    stack = [(0, n)]
    while stack:
        lo, hi = stack.pop()
        seg_n = hi - lo
        if seg_n < 2:
            continue
        boundaries = np.flatnonzero(v[lo + 1:hi] > v[lo:hi - 1]) + lo + 1
        if boundaries.size == 0:
            continue  # constant segment
        seg_counts = prefix[hi] - prefix[lo]
        ent_s = float(_entropy_bits(seg_counts)[0])
        k_s = int((seg_counts > 0).sum())

        left = prefix[boundaries] - prefix[lo]
        right = seg_counts - left
        n_left = boundaries - lo
        n_right = seg_n - n_left
        ent_l = _entropy_bits(left)
        ent_r = _entropy_bits(right)
        gains = ent_s - (n_left * ent_l + n_right * ent_r) / seg_n
        best = int(np.argmax(gains))  # ties resolve to the lowest threshold
        gain = float(gains[best])
        if gain <= 0.0:
            continue
        k1 = int((left[best] > 0).sum())
        k2 = int((right[best] > 0).sum())
        delta = (math.log2(3.0 ** k_s - 2.0)
                 - k_s * ent_s + k1 * float(ent_l[best]) + k2 * float(ent_r[best]))
        if gain <= (math.log2(seg_n - 1) + delta) / seg_n:
            continue
        p = int(boundaries[best])
        cuts.append(float((v[p - 1] + v[p]) / 2.0))
        stack.append((lo, p))
        stack.append((p, hi))
    return sorted(cuts)


def discretize_binary(values) -> list[float]:
    """Single cut at the median of the distinct values; constant -> no cut."""
    distinct = np.unique(np.asarray(values, dtype=float))
    if distinct.size < 2:
        return []
    return [float(np.median(distinct))]


def _parse_float(cell: str, lineno: int) -> float:
    try:
        return float(cell)
    except ValueError:
        raise ParseError(f"expected a numeric value, found {cell!r}", line=lineno) from None


def _is_numeric_column(cells) -> bool:
    try:
        for c in cells:
            float(c)
    except ValueError:
        return False
    return True


def _categorical_codec(name: str, cells, numeric: bool) -> ColumnCodec:
    if numeric:
        cats = tuple(sorted({float(c) for c in cells}))
    else:
        cats = tuple(sorted(set(cells)))
    return ColumnCodec(name=name, kind="categorical", categories=cats,
                       numeric_values=numeric,
                       index={c: i for i, c in enumerate(cats)})


def fit_discretization(table: RawTable, mode: str = "auto",
                       max_categorical_distinct: int = MAX_CATEGORICAL_DISTINCT
                       ) -> DiscretizationPlan:
    """Fit per-column codecs on (training) rows.

    mode: ``mdlp``, ``binary``, or ``auto`` (mdlp when d <= 100, binary
    otherwise).  Numeric columns with few distinct values and all
    non-numeric columns are mapped categorically by sorted distinct value.
    """
    if mode not in ("auto", "mdlp", "binary"):
        raise ConfigurationError(f"unknown discretization mode {mode!r}")
    if table.n_rows == 0:
        raise EmptyDatasetError("cannot fit discretization on an empty table")
    if mode == "auto":
        mode = "mdlp" if table.n_features <= AUTO_MDLP_MAX_FEATURES else "binary"

    names = table.column_names()
    cls = table.class_column
    class_cells = [r[cls] for r in table.rows]
    class_codec = _categorical_codec(names[cls], class_cells,
                                     _is_numeric_column(class_cells))
    if class_codec.arity() < 2:
        raise EmptyDatasetError("class column has fewer than 2 distinct labels")
    y = np.array([class_codec.index[_column_key(class_codec, c)] for c in class_cells],
                 dtype=np.int64)

    codecs: list[ColumnCodec] = []
    for col in range(table.n_cols):
        if col == cls:
            continue
        cells = [r[col] for r in table.rows]
        numeric = _is_numeric_column(cells)
        if numeric:
            vals = np.array([float(c) for c in cells])
            if np.unique(vals).size > max_categorical_distinct:
                cuts = discretize_mdlp(vals, y) if mode == "mdlp" else discretize_binary(vals)
                codecs.append(ColumnCodec(name=names[col], kind="numeric",
                                          cutpoints=tuple(cuts)))
                continue
        codecs.append(_categorical_codec(names[col], cells, numeric))
    return DiscretizationPlan(feature_codecs=tuple(codecs), class_codec=class_codec,
                              class_column=cls)


def _column_key(codec: ColumnCodec, cell: str):
    return float(cell) if codec.numeric_values else cell


def _encode_column(codec: ColumnCodec, cells) -> tuple:
    """Map one column's cells through its codec; returns (codes, arity)."""
    if codec.kind == "numeric":
        vals = np.array([_parse_float(c, i + 1) for i, c in enumerate(cells)])
        codes = np.searchsorted(np.asarray(codec.cutpoints), vals, side="left")
        return codes.astype(np.int64), len(codec.cutpoints) + 1
    reserved = len(codec.categories)
    codes = np.array([codec.index.get(_column_key(codec, c), reserved)
                      for c in cells], dtype=np.int64)
    return codes, reserved + (1 if (codes == reserved).any() else 0)


def encode_feature_rows(plan: DiscretizationPlan, rows) -> tuple:
    """Discretize label-free rows (d cells each, in plan codec order).

    Returns (features matrix, arities).  Used for test files that carry no
    class column.
    """
    d = len(plan.feature_codecs)
    rows = [tuple(r) for r in rows]
    if any(len(r) != d for r in rows):
        raise ParseError(f"expected {d} feature cells per row")
    features = np.zeros((len(rows), d), dtype=np.int64)
    arities = []
    for j, codec in enumerate(plan.feature_codecs):
        codes, arity = _encode_column(codec, [r[j] for r in rows])
        features[:, j] = codes
        arities.append(arity)
    return features, tuple(arities)


def apply_cutpoints(table: RawTable, plan: DiscretizationPlan) -> Dataset:
    """Replay a fitted plan onto a table, producing a :class:`Dataset`.

    Numeric values beyond any threshold land in the outermost bin.  A
    category unseen when the plan was fit maps to a reserved extra index,
    which is counted in the arity only when it actually occurs.
    """
    if table.class_column != plan.class_column:
        raise ConfigurationError("table/plan class column mismatch")
    if table.n_features != len(plan.feature_codecs):
        raise ConfigurationError(
            f"plan has {len(plan.feature_codecs)} feature columns, "
            f"table has {table.n_features}")
    if table.n_rows == 0:
        raise EmptyDatasetError("no rows to discretize")

    n = table.n_rows
    d = table.n_features
    features = np.zeros((n, d), dtype=np.int64)
    arities: list[int] = []
    cutpoints: list[tuple[float, ...]] = []
    feature_cols = [c for c in range(table.n_cols) if c != table.class_column]
    for j, (col, codec) in enumerate(zip(feature_cols, plan.feature_codecs)):
        codes, arity = _encode_column(codec, [r[col] for r in table.rows])
        features[:, j] = codes
        arities.append(arity)
        cutpoints.append(tuple(codec.cutpoints))

    ccodec = plan.class_codec
    reserved = len(ccodec.categories)
    klass = np.array([ccodec.index.get(_column_key(ccodec, r[table.class_column]), reserved)
                      for r in table.rows], dtype=np.int64)
    class_arity = reserved + (1 if (klass == reserved).any() else 0)
    return Dataset(features=features, arities=tuple(arities), klass=klass,
                   class_arity=class_arity,
                   feature_names=tuple(c.name for c in plan.feature_codecs),
                   cutpoints=tuple(cutpoints),
                   class_labels=tuple(str(c) for c in ccodec.categories))


def make_folds(n: int, k: int, seed: int) -> FoldPlan:
    """Random near-equal split of n rows into k folds, deterministic in seed."""
    if k < 2:
        raise ConfigurationError("fold count must be at least 2")
    if n < k:
        raise ConfigurationError(f"cannot split {n} rows into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    assignment = np.empty(n, dtype=np.int64)
    assignment[perm] = np.arange(n) % k
    return FoldPlan(k=k, assignment=assignment, seed=seed)


def columns_report(plan: DiscretizationPlan, dataset: Dataset) -> dict:
    """Arity/cutpoint summary emitted as a JSON side file by the CLI."""
    cols = []
    for j, codec in enumerate(plan.feature_codecs):
        entry: dict = {"name": codec.name, "kind": codec.kind,
                       "arity": int(dataset.arities[j])}
        if codec.kind == "numeric":
            entry["cutpoints"] = list(codec.cutpoints)
        else:
            entry["categories"] = [str(c) for c in codec.categories]
        cols.append(entry)
    return {"columns": cols,
            "class": {"name": plan.class_codec.name,
                      "labels": [str(c) for c in plan.class_codec.categories]}}
