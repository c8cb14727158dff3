"""Record parsing, time binning and gap repair.

Two input layouts are understood:

``canonical_csv``
    ``cell_id,timestamp_ms,internet_activity`` with an optional header line.
``telecom_tsv``
    The 8-column tab-separated dump of the Milan telecommunications
    challenge (square id, time interval, country code, sms-in, sms-out,
    call-in, call-out, internet). Only columns 1, 2 and 8 are read.

Missing bins are carried as NaN inside :class:`TimeSeries` and repaired by
:func:`impute_gaps`.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Iterator, TextIO

import numpy as np

GAP = math.nan

CANONICAL_HEADER = "cell_id,timestamp_ms,internet_activity"
FORMATS = ("canonical_csv", "telecom_tsv")


class RecordParseError(ValueError):
    """A malformed input line; ``lineno`` is 1-based."""

    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno
        self.message = message


class UnimputableSeriesError(ValueError):
    pass


@dataclass(frozen=True)
class ActivityRecord:
    cell_id: int
    timestamp_ms: int
    internet_activity: float

    def __post_init__(self):
        object.__setattr__(self, "internet_activity", float(self.internet_activity))
        if self.cell_id < 1:
            raise ValueError(f"cell_id must be >= 1, got {self.cell_id}")
        if not math.isfinite(self.internet_activity) or self.internet_activity < 0:
            raise ValueError(f"internet_activity must be finite and >= 0, got {self.internet_activity}")


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Regularly binned activity for one cell; NaN entries are gaps.

    Index ``i`` covers ``[start_ms + i*bin_width_ms, start_ms + (i+1)*bin_width_ms)``.
    """

    cell_ref: int | str
    bin_width_ms: int
    start_ms: int
    values: np.ndarray

    def __post_init__(self):
        if self.bin_width_ms <= 0:
            raise ValueError("bin_width_ms must be positive")
        values = np.array(self.values, dtype=float)
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return len(self.values)

    @property
    def end_ms(self) -> int:
        return self.start_ms + len(self.values) * self.bin_width_ms

    @property
    def gap_mask(self) -> np.ndarray:
        return np.isnan(self.values)

    @property
    def n_gaps(self) -> int:
        return int(self.gap_mask.sum())

    def timestamps(self) -> np.ndarray:
        return self.start_ms + self.bin_width_ms * np.arange(len(self.values), dtype=np.int64)


@dataclass
class ParseResult:
    """Records from :func:`parse_records` plus the line-level tally."""

    records: list[ActivityRecord] = field(default_factory=list)
    errors: list[tuple[int, str]] = field(default_factory=list)
    skipped_empty: int = 0

    def __iter__(self) -> Iterator[ActivityRecord]:
        return iter(self.records)

    def __len__(self):
        return len(self.records)


def _parse_canonical(line: str, lineno: int) -> ActivityRecord | None:
    parts = line.split(",")
    if len(parts) != 3:
        raise RecordParseError(lineno, f"expected 3 comma-separated fields, got {len(parts)}")
    return _make_record(parts[0], parts[1], parts[2], lineno)


def _parse_telecom(line: str, lineno: int) -> ActivityRecord | None:
    parts = line.split("\t")
    if len(parts) != 8:
        raise RecordParseError(lineno, f"expected 8 tab-separated fields, got {len(parts)}")
    if not parts[7].strip():
        return None
    return _make_record(parts[0], parts[1], parts[7], lineno)


def _make_record(cell: str, ts: str, activity: str, lineno: int) -> ActivityRecord:
    try:
        cell_id = int(cell)
        timestamp_ms = int(ts)
        value = float(activity)
    except ValueError:
        raise RecordParseError(lineno, f"non-numeric field in {cell!r}, {ts!r}, {activity!r}") from None
    try:
        return ActivityRecord(cell_id, timestamp_ms, value)
    except ValueError as exc:
        raise RecordParseError(lineno, str(exc)) from None


def parse_records(lines: Iterable[str], fmt: str = "canonical_csv", strict: bool = True) -> ParseResult:
    """Parse line-oriented text into activity records.

    In strict mode the first bad line raises :class:`RecordParseError`; in
    lenient mode bad lines are skipped and listed in ``result.errors``.
    Telecom rows with an empty internet column are skipped and counted in
    ``result.skipped_empty``.
    """
    if fmt not in FORMATS:
        raise ValueError(f"unknown format {fmt!r}; expected one of {FORMATS}")
    parse_line = _parse_canonical if fmt == "canonical_csv" else _parse_telecom
    result = ParseResult()
    for lineno, raw in enumerate(lines, start=1):
        line = raw.rstrip("\r\n")
        if not line.strip():
            continue
        if fmt == "canonical_csv" and line.strip() == CANONICAL_HEADER:
            continue
        try:
            record = parse_line(line, lineno)
        except RecordParseError as exc:
            if strict:
                raise
            result.errors.append((exc.lineno, exc.message))
            continue
        if record is None:
            result.skipped_empty += 1
        else:
            result.records.append(record)
    return result


def write_records(records: Iterable[ActivityRecord], fh: TextIO, header: bool = True) -> int:
    """Write records as canonical CSV; returns the number of rows written.

    Floats are written with ``repr`` so that a re-parse is exact.
    """
    if header:
        fh.write(CANONICAL_HEADER + "\n")
    n = 0
    for r in records:
        fh.write(f"{r.cell_id},{r.timestamp_ms},{r.internet_activity!r}\n")
        n += 1
    return n


def _check_window(bin_width_ms: int, start_ms: int, end_ms: int) -> int:
    if bin_width_ms <= 0:
        raise ValueError("bin_width_ms must be positive")
    if end_ms <= start_ms:
        raise ValueError("end_ms must be greater than start_ms")
    span = end_ms - start_ms
    if span % bin_width_ms:
        raise ValueError(f"window of {span} ms is not a whole number of {bin_width_ms} ms bins")
    return span // bin_width_ms


def series_by_cell(
    records: Iterable[ActivityRecord],
    bin_width_ms: int,
    start_ms: int,
    end_ms: int,
    cells: Iterable[int] | None = None,
) -> dict[int, TimeSeries]:
    """Bin records of every cell at once.

    Records in the same (cell, bin) are summed in input order. Records
    outside ``[start_ms, end_ms)`` are ignored. When ``cells`` is given, those
    cells are always present in the output (all-GAP if unseen) and other
    cells are dropped.
    """
    n_bins = _check_window(bin_width_ms, start_ms, end_ms)
    wanted = None if cells is None else list(cells)
    wanted_set = None if wanted is None else set(wanted)
    sums: dict[int, np.ndarray] = {}
    seen: dict[int, np.ndarray] = {}
    for r in records:
        if wanted_set is not None and r.cell_id not in wanted_set:
            continue
        if not start_ms <= r.timestamp_ms < end_ms:
            continue
        i = (r.timestamp_ms - start_ms) // bin_width_ms
        if r.cell_id not in sums:
            sums[r.cell_id] = np.zeros(n_bins)
            seen[r.cell_id] = np.zeros(n_bins, dtype=bool)
        sums[r.cell_id][i] += r.internet_activity
        seen[r.cell_id][i] = True
    out = {}
    for cell in (wanted if wanted is not None else sorted(sums)):
        if cell in sums:
            values = np.where(seen[cell], sums[cell], GAP)
        else:
            values = np.full(n_bins, GAP)
        out[cell] = TimeSeries(cell, bin_width_ms, start_ms, values)
    return out


def to_series(
    records: Iterable[ActivityRecord], cell_id: int, bin_width_ms: int, start_ms: int, end_ms: int
) -> TimeSeries:
    """Bin one cell's records; bins without records are GAP."""
    return series_by_cell(records, bin_width_ms, start_ms, end_ms, cells=[cell_id])[cell_id]


def impute_values(values: np.ndarray) -> np.ndarray:
    """Fill NaN gaps in a 1-D array.

    An isolated gap becomes the mean of its two neighbours. Longer interior
    runs are linearly interpolated between the bounding observations, and
    leading or trailing runs copy the nearest observation. Observed entries
    are returned unchanged.
    """
    values = np.asarray(values, dtype=float)
    gaps = np.isnan(values)
    if not gaps.any():
        return values.copy()
    observed = np.flatnonzero(~gaps)
    if observed.size == 0:
        raise UnimputableSeriesError("unimputable series: no observed values")
    out = values.copy()
    idx = np.flatnonzero(gaps)
    # right bounding observation for each gap
    pos = np.searchsorted(observed, idx)
    lead = pos == 0
    trail = pos == observed.size
    out[idx[lead]] = values[observed[0]]
    out[idx[trail]] = values[observed[-1]]
    inner = ~(lead | trail)
    i = idx[inner]
    lo = observed[pos[inner] - 1]
    hi = observed[pos[inner]]
    # weighted form reduces to (left + right) / 2 exactly for a single gap
    out[i] = (values[lo] * (hi - i) + values[hi] * (i - lo)) / (hi - lo)
    return out


def impute_gaps(series: TimeSeries) -> TimeSeries:
    try:
        values = impute_values(series.values)
    except UnimputableSeriesError:
        raise UnimputableSeriesError(f"unimputable series for cell {series.cell_ref}: every bin is GAP") from None
    return TimeSeries(series.cell_ref, series.bin_width_ms, series.start_ms, values)
