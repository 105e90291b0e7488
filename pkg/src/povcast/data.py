"""Count-matrix loading, validation, smoothing and slicing.

The central object is an entity x period matrix of non-negative counts.
Period indices are 1-based everywhere in the public API, matching the
natural "book 1 .. book d" numbering.
"""

from __future__ import annotations

import csv
import io
import warnings
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import IO, Sequence

import numpy as np

from .errors import DomainError, EmptyError, ParseError, ShapeError


@dataclass(frozen=True)
class PovMatrix:
    """Validated integer count matrix: rows are entities, columns periods."""

    entity_names: tuple[str, ...]
    counts: np.ndarray  # (N, d) int64, read-only
    period_labels: tuple[str, ...]

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.int64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"expected a non-empty 2-d matrix, got shape {arr.shape}")
        if (arr < 0).any():
            raise DomainError("counts must be non-negative")
        if len(self.entity_names) != arr.shape[0]:
            raise ShapeError("entity_names length does not match row count")
        if len(self.period_labels) != arr.shape[1]:
            raise ShapeError("period_labels length does not match column count")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)
        object.__setattr__(self, "entity_names", tuple(self.entity_names))
        object.__setattr__(self, "period_labels", tuple(self.period_labels))

    @property
    def n_entities(self) -> int:
        return self.counts.shape[0]

    @property
    def n_periods(self) -> int:
        return self.counts.shape[1]

    @property
    def zero_row_indices(self) -> tuple[int, ...]:
        """0-based indices of all-zero rows (possible after slicing)."""
        return tuple(np.flatnonzero(~self.counts.any(axis=1)))


@dataclass(frozen=True)
class SmoothedMatrix:
    """Real-valued matrix produced by redistributing a column pair."""

    entity_names: tuple[str, ...]
    counts: np.ndarray  # (N, d) float64, read-only
    period_labels: tuple[str, ...]

    def __post_init__(self):
        arr = np.asarray(self.counts, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ShapeError(f"expected a non-empty 2-d matrix, got shape {arr.shape}")
        if (arr < 0).any():
            raise DomainError("counts must be non-negative")
        arr.setflags(write=False)
        object.__setattr__(self, "counts", arr)
        object.__setattr__(self, "entity_names", tuple(self.entity_names))
        object.__setattr__(self, "period_labels", tuple(self.period_labels))

    @property
    def n_entities(self) -> int:
        return self.counts.shape[0]

    @property
    def n_periods(self) -> int:
        return self.counts.shape[1]


def load_matrix(source: str | Path | IO[str], *, require_nonzero_rows: bool = True) -> PovMatrix:
    """Parse a CSV count matrix.

    Layout: header row of period labels (first header cell is a free-form
    row-name label), then one row per entity whose first cell is the
    entity name and whose remaining cells are non-negative integers.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r", encoding="utf-8", newline="") as fh:
            return load_matrix(fh, require_nonzero_rows=require_nonzero_rows)

    rows = list(csv.reader(source))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if len(rows) < 2:
        raise EmptyError("need a header row and at least one data row")
    header = rows[0]
    if len(header) < 2:
        raise ShapeError("header must name at least one period column")
    period_labels = [c.strip() for c in header[1:]]
    width = len(header)

    names: list[str] = []
    data: list[list[int]] = []
    for r, row in enumerate(rows[1:], start=2):
        if len(row) != width:
            raise ShapeError(f"row {r} has {len(row)} cells, expected {width}")
        name = row[0].strip()
        if not name:
            raise ParseError(f"row {r}: empty entity name")
        values = []
        for c, cell in enumerate(row[1:], start=2):
            text = cell.strip()
            try:
                value = int(text)
            except ValueError:
                raise ParseError(f"row {r}, column {c}: {text!r} is not an integer") from None
            if value < 0:
                raise ParseError(f"row {r}, column {c}: negative count {value}")
            values.append(value)
        names.append(name)
        data.append(values)

    matrix = PovMatrix(tuple(names), np.array(data, dtype=np.int64), tuple(period_labels))
    if require_nonzero_rows and matrix.zero_row_indices:
        bad = ", ".join(matrix.entity_names[i] for i in matrix.zero_row_indices)
        raise ParseError(f"all-zero rows are not valid observed data: {bad}")
    return matrix


def serialize(matrix: PovMatrix | SmoothedMatrix, row_label: str = "entity") -> str:
    """Render a matrix back to CSV. Floats use round-trip repr."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow([row_label, *matrix.period_labels])
    is_int = np.issubdtype(matrix.counts.dtype, np.integer)
    for name, row in zip(matrix.entity_names, matrix.counts):
        if "," in name:
            raise ParseError(f"entity name {name!r} contains a comma; not representable")
        cells = [str(int(v)) if is_int else repr(float(v)) for v in row]
        writer.writerow([name, *cells])
    return buf.getvalue()


def smooth(
    m: PovMatrix | SmoothedMatrix,
    j1: int,
    j2: int,
    c1: float | None = None,
    c2: float | None = None,
) -> SmoothedMatrix:
    """Redistribute the mass of the column pair (j1, j2) in proportion (c1, c2).

    j1, j2 are 1-based period indices.  When the weights are omitted they
    default to the column sums of the source pair, which keeps each
    smoothed column's total equal to its weight.  The second smoothed cell
    is computed as remainder so every row's pair-sum is preserved exactly.
    """
    if j1 == j2:
        raise IndexError("j1 and j2 must differ")
    for j in (j1, j2):
        if not 1 <= j <= m.n_periods:
            raise IndexError(f"column {j} out of range 1..{m.n_periods}")
    if c1 is None:
        c1 = float(m.counts[:, j1 - 1].sum())
    if c2 is None:
        c2 = float(m.counts[:, j2 - 1].sum())
    if c1 <= 0 or c2 <= 0:
        raise DomainError(f"weights must be positive, got ({c1}, {c2})")

    out = m.counts.astype(np.float64)
    pair_sum = out[:, j1 - 1] + out[:, j2 - 1]
    first = c1 * pair_sum / (c1 + c2)
    out[:, j1 - 1] = first
    out[:, j2 - 1] = pair_sum - first
    return SmoothedMatrix(m.entity_names, out, m.period_labels)


def submatrix(m: PovMatrix, rows: Sequence[int], cols: Sequence[int]) -> PovMatrix:
    """Select rows/columns by 1-based index, preserving order.

    Zero rows in the result are allowed but reported with a warning,
    since model fits are expected to drop them.
    """
    rows = list(rows)
    cols = list(cols)
    if not rows or not cols:
        raise IndexError("row and column selections must be non-empty")
    for i in rows:
        if not 1 <= i <= m.n_entities:
            raise IndexError(f"row {i} out of range 1..{m.n_entities}")
    for j in cols:
        if not 1 <= j <= m.n_periods:
            raise IndexError(f"column {j} out of range 1..{m.n_periods}")
    ri = [i - 1 for i in rows]
    ci = [j - 1 for j in cols]
    sub = PovMatrix(
        tuple(m.entity_names[i] for i in ri),
        m.counts[np.ix_(ri, ci)],
        tuple(m.period_labels[j] for j in ci),
    )
    if sub.zero_row_indices:
        bad = ", ".join(sub.entity_names[i] for i in sub.zero_row_indices)
        warnings.warn(f"submatrix contains all-zero rows: {bad}", stacklevel=2)
    return sub


def drop_zero_rows(m: PovMatrix) -> PovMatrix:
    """Remove all-zero rows; errors if nothing would remain."""
    keep = [i for i in range(m.n_entities) if i not in m.zero_row_indices]
    if not keep:
        raise EmptyError("every row is zero")
    return PovMatrix(
        tuple(m.entity_names[i] for i in keep),
        m.counts[keep, :],
        m.period_labels,
    )


def new_entity_counts(m: PovMatrix) -> list[int]:
    """Per period j >= 2: total counts contributed by entities debuting in j.

    An entity debuts in period j when its first nonzero entry is column j.
    Returns a list for periods 2..d.
    """
    first_nonzero = np.where(
        m.counts.any(axis=1),
        np.argmax(m.counts > 0, axis=1),
        m.n_periods,  # all-zero rows never debut
    )
    out = []
    for j in range(1, m.n_periods):
        debut = first_nonzero == j
        out.append(int(m.counts[debut, j].sum()))
    return out


def table1_path() -> Path:
    """Path to the bundled reference data set."""
    return Path(resources.files("povcast").joinpath("fixtures/table1.csv"))  # type: ignore[arg-type]


def load_table1() -> PovMatrix:
    return load_matrix(table1_path())
