"""Reading tables, standardizing them, synthetic truths and rolling windows."""

from __future__ import annotations

import calendar
import csv
import datetime as dt
import logging
import math
import re
from dataclasses import dataclass

import numpy as np
from scipy.linalg import solve_triangular

from .errors import (
    ConstantColumn,
    DimensionMismatch,
    InvalidParameter,
    MissingValue,
    NotPositiveDefinite,
    ParseError,
    UnsortedTimestamps,
)
from .model import COVARIANCE, Dataset, EdgeIndicators, SymmetricPDMatrix, check_mode

log = logging.getLogger(__name__)

_MISSING = {"", "na", "nan", "null", "none"}


@dataclass
class RawTable:
    """Rectangular numeric table, optionally with column names and a date per row."""

    values: np.ndarray
    header: list[str] | None = None
    time_index: list[dt.date] | None = None

    def __post_init__(self):
        self.values = np.atleast_2d(np.asarray(self.values, dtype=float))
        if self.header is not None and len(self.header) != self.cols:
            raise DimensionMismatch(f"{len(self.header)} names for {self.cols} columns")
        if self.time_index is not None and len(self.time_index) != self.rows:
            raise DimensionMismatch(f"{len(self.time_index)} timestamps for {self.rows} rows")

    @property
    def rows(self) -> int:
        return self.values.shape[0]

    @property
    def cols(self) -> int:
        return self.values.shape[1]

    def select(self, mask) -> "RawTable":
        idx = np.flatnonzero(mask)
        times = [self.time_index[i] for i in idx] if self.time_index is not None else None
        return RawTable(self.values[idx], self.header, times)


def _parse_date(text: str, row: int, column: int) -> dt.date:
    try:
        return dt.date.fromisoformat(text.strip())
    except ValueError:
        raise ParseError(f"cannot parse {text!r} as a YYYY-MM-DD date", row, column) from None


def load_csv(path, has_header: bool = False, time_column: str | None = None) -> RawTable:
    """Parse a comma separated numeric table.

    Row and column numbers in error messages are 1-based positions in the
    file, so a header line counts as row 1. Empty cells and ``NA``/``NaN``
    are rejected as missing values rather than imputed.
    """
    if time_column is not None and not has_header:
        raise InvalidParameter("a time column can only be named when the file has a header")
    with open(path, newline="") as fh:
        lines = list(csv.reader(fh))
    lines = [(k + 1, row) for k, row in enumerate(lines) if any(cell.strip() for cell in row)]
    if not lines:
        raise ParseError(f"{path}: no data")

    header = None
    time_pos = None
    if has_header:
        _, header = lines.pop(0)
        header = [h.strip() for h in header]
        if time_column is not None:
            if time_column not in header:
                raise ParseError(f"time column {time_column!r} not found in header {header}")
            time_pos = header.index(time_column)
            header = header[:time_pos] + header[time_pos + 1:]
    if not lines:
        raise ParseError(f"{path}: header but no data rows")

    width = len(lines[0][1])
    values = []
    times = [] if time_pos is not None else None
    for lineno, row in lines:
        if len(row) != width:
            raise ParseError(f"expected {width} fields, found {len(row)}", lineno, len(row))
        parsed = []
        for col, cell in enumerate(row, start=1):
            if col - 1 == time_pos:
                times.append(_parse_date(cell, lineno, col))
                continue
            text = cell.strip()
            if text.lower() in _MISSING:
                raise MissingValue("missing value", lineno, col)
            try:
                x = float(text)
            except ValueError:
                raise ParseError(f"non-numeric value {text!r}", lineno, col) from None
            if not math.isfinite(x):
                raise MissingValue(f"non-finite value {text!r}", lineno, col)
            parsed.append(x)
        values.append(parsed)
    return RawTable(np.array(values, dtype=float).reshape(len(values), -1), header, times)


def write_csv(table: RawTable, path) -> None:
    """Write ``table`` in the format :func:`load_csv` reads, time column first when present."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        if table.header is not None or table.time_index is not None:
            names = table.header or [f"x{k + 1}" for k in range(table.cols)]
            w.writerow((["date"] if table.time_index is not None else []) + list(names))
        for k, row in enumerate(table.values):
            lead = [table.time_index[k].isoformat()] if table.time_index is not None else []
            w.writerow(lead + [repr(float(x)) for x in row])


def load_matrix(path) -> np.ndarray:
    """Read a square matrix from a headerless CSV file."""
    m = load_csv(path).values
    if m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"{path}: expected a square matrix, got {m.shape[0]}x{m.shape[1]}")
    return m


def standardize(raw: RawTable) -> Dataset:
    """Center every column and scale it so its sum of squares equals ``n``.

    With this divisor-``n`` convention every diagonal entry of ``S = Y'Y``
    equals ``n``. Applying it twice changes nothing beyond rounding.
    """
    y = raw.values
    n = y.shape[0]
    if n < 2:
        raise InvalidParameter(f"need at least 2 rows to standardize, got {n}")
    centered = y - y.mean(axis=0)
    ss = np.einsum("ij,ij->j", centered, centered)
    scale = np.abs(y).max(axis=0)
    for k in range(y.shape[1]):
        # relative test so that columns of tiny magnitude are not flagged
        if ss[k] <= (1e-12 * scale[k]) ** 2 * n:
            raise ConstantColumn(raw.header[k] if raw.header else k + 1)
    return Dataset(centered * np.sqrt(n / ss), labels=raw.header, timestamps=raw.time_index)


@dataclass
class SparseTruth:
    """A known sparse matrix and the edges given by its non-zero off-diagonal entries."""

    matrix: SymmetricPDMatrix
    edges: EdgeIndicators

    @classmethod
    def from_values(cls, values) -> "SparseTruth":
        m = SymmetricPDMatrix(values)
        if not m.is_pd():
            raise NotPositiveDefinite("truth matrix is not positive definite")
        return cls(m, EdgeIndicators.from_matrix(m.values))


_P12_DIAGONAL = [0.239, 1.554, 0.362, 0.199, 0.349, 0.295, 0.715, 0.164, 0.518, 0.379, 0.159, 0.207]
# (row, column, value), 1-based, upper triangle
_P12_OFF_DIAGONAL = [
    (1, 2, 0.117), (1, 8, 0.031), (3, 4, 0.002), (4, 5, 0.094), (5, 12, -0.036),
    (6, 7, -0.229), (6, 8, 0.002), (8, 9, 0.112), (8, 10, -0.028), (8, 11, -0.008),
    (9, 10, -0.193), (9, 11, -0.090), (10, 11, 0.167),
]


def paper_p12_covariance() -> SparseTruth:
    """The 12 x 12 sparse covariance benchmark with 13 edges."""
    m = np.diag(_P12_DIAGONAL)
    for i, j, x in _P12_OFF_DIAGONAL:
        m[i - 1, j - 1] = m[j - 1, i - 1] = x
    return SparseTruth.from_values(m)


def tridiagonal_truth(p: int, diagonal: float = 1.0, off: float = 0.45) -> SparseTruth:
    """Chain graph: constant diagonal and first off-diagonals, zero elsewhere."""
    m = np.diag(np.full(p, float(diagonal)))
    k = np.arange(p - 1)
    m[k, k + 1] = m[k + 1, k] = off
    return SparseTruth.from_values(m)


def identity_truth(p: int) -> SparseTruth:
    return SparseTruth.from_values(np.eye(p))


def sample_gaussian(truth, n: int, rng: np.random.Generator, mode: str = COVARIANCE) -> RawTable:
    """``n`` independent rows from ``N(0, Sigma)``.

    ``Sigma`` is ``truth`` itself in covariance mode and its inverse in
    concentration mode. Either way only one Cholesky factorization is done.
    """
    check_mode(mode)
    if isinstance(truth, SparseTruth):
        truth = truth.matrix
    if not isinstance(truth, SymmetricPDMatrix):
        truth = SymmetricPDMatrix(truth)
    lower = truth.cholesky().lower
    eps = rng.standard_normal((n, truth.dim))
    if mode == COVARIANCE:
        y = eps @ lower.T
    else:
        # Omega = L L' so x = L^{-T} eps has covariance Omega^{-1}
        y = solve_triangular(lower, eps.T, lower=True, trans="T").T
    return RawTable(y)


# Durations are written as an integer and a unit: d(ays), w(eeks), m(onths)
# or y(ears). Month arithmetic clamps to the end of shorter months.
_DURATION = re.compile(r"^\s*(\d+)\s*([dwmy])\s*$", re.IGNORECASE)


@dataclass(frozen=True)
class Duration:
    months: int = 0
    days: int = 0

    @classmethod
    def parse(cls, text) -> "Duration":
        if isinstance(text, Duration):
            return text
        if isinstance(text, dt.timedelta):
            return cls(days=text.days)
        m = _DURATION.match(str(text))
        if not m:
            raise InvalidParameter(f"cannot parse duration {text!r}; use e.g. 365d, 4w, 12m or 1y")
        k, unit = int(m.group(1)), m.group(2).lower()
        if k <= 0:
            raise InvalidParameter(f"duration must be positive, got {text!r}")
        return {
            "d": cls(days=k),
            "w": cls(days=7 * k),
            "m": cls(months=k),
            "y": cls(months=12 * k),
        }[unit]

    def after(self, day: dt.date) -> dt.date:
        month0 = day.month - 1 + self.months
        year, month = day.year + month0 // 12, month0 % 12 + 1
        d = min(day.day, calendar.monthrange(year, month)[1])
        return dt.date(year, month, d) + dt.timedelta(days=self.days)


@dataclass
class Window:
    start: dt.date
    end: dt.date
    data: Dataset


def rolling_windows(raw: RawTable, window, step, skipped: list | None = None):
    """Standardized datasets over sliding date windows.

    Window ``k`` covers dates in ``[start_k, start_k + window)`` with
    ``start_k = first + k * step`` and is produced only while it fits within
    the observed dates. When even the first window does not fit, the whole
    series is returned as a single window. Windows with at most ``p`` rows
    are skipped; a record of each one is logged and appended to ``skipped``
    when a list is passed.
    """
    if raw.time_index is None:
        raise InvalidParameter("rolling windows need a time index")
    times = raw.time_index
    if any(b < a for a, b in zip(times, times[1:])):
        raise UnsortedTimestamps("timestamps must be sorted in ascending order")
    window, step = Duration.parse(window), Duration.parse(step)
    first, last = times[0], times[-1]
    stamps = np.array([t.toordinal() for t in times])

    bounds = []
    k = 0
    while True:
        start = _shift(first, step, k)
        end = window.after(start)
        if end > last + dt.timedelta(days=1):
            break
        bounds.append((start, end))
        k += 1
    if not bounds:
        bounds = [(first, last + dt.timedelta(days=1))]

    out = []
    for start, end in bounds:
        mask = (stamps >= start.toordinal()) & (stamps < end.toordinal())
        rows = int(mask.sum())
        if rows < raw.cols + 1:
            record = {"start": start.isoformat(), "end": end.isoformat(), "rows": rows}
            log.warning("skipping window %s to %s: %d rows for %d columns", start, end, rows, raw.cols)
            if skipped is not None:
                skipped.append(record)
            continue
        out.append(Window(start, end, standardize(raw.select(mask))))
    return out


def _shift(day: dt.date, step: Duration, k: int) -> dt.date:
    # apply k steps from the anchor at once so month clamping does not accumulate
    return Duration(step.months * k, step.days * k).after(day)
