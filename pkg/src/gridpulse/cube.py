"""Grid-indexed activity cube, spatial downsampling and time-slot aggregation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, TextIO

import numpy as np

from .ingest import ActivityRecord, TimeSeries, impute_values

HOUR_MS = 3_600_000
DAY_MS = 24 * HOUR_MS


class AlignmentError(ValueError):
    pass


@dataclass(frozen=True)
class GridSpec:
    """Row-major grid of square cells; ``cell_id = row*cols + col + 1``."""

    rows: int
    cols: int
    cell_area_km2: float = 0.05

    def __post_init__(self):
        if self.rows < 1 or self.cols < 1:
            raise ValueError("grid dimensions must be positive")
        if self.cell_area_km2 <= 0:
            raise ValueError("cell_area_km2 must be positive")

    @property
    def n_cells(self) -> int:
        return self.rows * self.cols

    def cell_to_rc(self, cell_id: int) -> tuple[int, int]:
        if not 1 <= cell_id <= self.n_cells:
            raise ValueError(f"cell id {cell_id} outside grid {self.rows}x{self.cols}")
        return divmod(cell_id - 1, self.cols)

    def rc_to_cell(self, row: int, col: int) -> int:
        if not (0 <= row < self.rows and 0 <= col < self.cols):
            raise ValueError(f"({row}, {col}) outside grid {self.rows}x{self.cols}")
        return row * self.cols + col + 1

    @classmethod
    def parse(cls, text: str, cell_area_km2: float = 0.05) -> "GridSpec":
        """Parse ``"RxC"``, e.g. ``"100x100"``."""
        try:
            rows, cols = (int(p) for p in text.lower().split("x"))
        except ValueError:
            raise ValueError(f"grid must look like RxC, got {text!r}") from None
        return cls(rows, cols, cell_area_km2)


MILAN_GRID = GridSpec(100, 100, 0.05)


@dataclass(frozen=True, eq=False)
class ActivityCube:
    """Dense ``(row, col, bin)`` activity array.

    The array is read-only. ``missing_cells`` lists cell ids that had no input
    series and were zero-filled at build time.
    """

    grid: GridSpec
    bin_width_ms: int
    start_ms: int
    data: np.ndarray
    missing_cells: tuple[int, ...] = ()

    def __post_init__(self):
        data = np.array(self.data, dtype=float)
        if data.ndim != 3 or data.shape[:2] != (self.grid.rows, self.grid.cols):
            raise ValueError(f"data shape {data.shape} does not match grid {self.grid.rows}x{self.grid.cols}")
        if not np.all(np.isfinite(data)) or (data < 0).any():
            raise ValueError("cube entries must be finite and non-negative")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)

    @property
    def n_bins(self) -> int:
        return self.data.shape[2]

    @property
    def end_ms(self) -> int:
        return self.start_ms + self.n_bins * self.bin_width_ms

    def series(self, row: int, col: int) -> np.ndarray:
        return self.data[row, col]

    def total(self) -> float:
        return float(self.data.sum())


def build_cube(series_set: Iterable[TimeSeries], grid: GridSpec) -> ActivityCube:
    """Assemble imputed, aligned per-cell series into a cube.

    Cells of the grid without a series are zero-filled and reported in
    ``cube.missing_cells``.
    """
    series_list = list(series_set)
    if not series_list:
        raise ValueError("no series to build a cube from")
    ref = series_list[0]
    n_bins = len(ref)
    data = np.zeros((grid.rows, grid.cols, n_bins))
    present = set()
    for s in series_list:
        if (s.bin_width_ms, s.start_ms, len(s)) != (ref.bin_width_ms, ref.start_ms, n_bins):
            raise AlignmentError(
                f"series for cell {s.cell_ref} is misaligned: bin width {s.bin_width_ms}, "
                f"start {s.start_ms}, length {len(s)}; expected {ref.bin_width_ms}, {ref.start_ms}, {n_bins}"
            )
        if s.n_gaps:
            raise ValueError(f"series for cell {s.cell_ref} still has {s.n_gaps} gaps; impute first")
        if s.cell_ref in present:
            raise ValueError(f"duplicate series for cell {s.cell_ref}")
        r, c = grid.cell_to_rc(int(s.cell_ref))
        data[r, c] = s.values
        present.add(s.cell_ref)
    missing = tuple(cid for cid in range(1, grid.n_cells + 1) if cid not in present)
    return ActivityCube(grid, ref.bin_width_ms, ref.start_ms, data, missing)


def stream_cube(
    records: Iterable[ActivityRecord],
    grid: GridSpec,
    bin_width_ms: int,
    start_ms: int,
    end_ms: int,
) -> ActivityCube:
    """Bin, impute and assemble in a single pass over ``records``.

    Records are consumed as an iterator and never held in memory, so this is
    the route for large inputs: call it once per analysis window. Records
    outside the window or the grid are ignored.
    """
    if bin_width_ms <= 0 or end_ms <= start_ms or (end_ms - start_ms) % bin_width_ms:
        raise ValueError("window must be a positive whole number of bins")
    n_bins = (end_ms - start_ms) // bin_width_ms
    sums = np.zeros((grid.n_cells, n_bins))
    seen = np.zeros((grid.n_cells, n_bins), dtype=bool)
    for r in records:
        if not (start_ms <= r.timestamp_ms < end_ms) or r.cell_id > grid.n_cells:
            continue
        i = (r.timestamp_ms - start_ms) // bin_width_ms
        sums[r.cell_id - 1, i] += r.internet_activity
        seen[r.cell_id - 1, i] = True
    missing = []
    for k in range(grid.n_cells):
        if not seen[k].any():
            missing.append(k + 1)
            continue
        if not seen[k].all():
            sums[k] = impute_values(np.where(seen[k], sums[k], np.nan))
    data = sums.reshape(grid.rows, grid.cols, n_bins)
    return ActivityCube(grid, bin_width_ms, start_ms, data, tuple(missing))


def downsample(cube: ActivityCube, factor: int) -> ActivityCube:
    """Merge ``factor x factor`` blocks of cells by summing their series.

    100x100 with factor 20 gives the 5x5 grid where each coarse cell stands
    for 400 original cells.
    """
    rows, cols = cube.grid.rows, cube.grid.cols
    if factor < 1 or rows % factor or cols % factor:
        raise ValueError(f"factor {factor} does not divide grid {rows}x{cols}")
    if factor == 1:
        return cube
    out = cube.data.reshape(rows // factor, factor, cols // factor, factor, cube.n_bins).sum(axis=(1, 3))
    grid = GridSpec(rows // factor, cols // factor, cube.grid.cell_area_km2 * factor * factor)
    return ActivityCube(grid, cube.bin_width_ms, cube.start_ms, out)


def aggregate_bins(cube: ActivityCube, bins_per_slot: int) -> ActivityCube:
    if bins_per_slot < 1 or cube.n_bins % bins_per_slot:
        raise ValueError(f"{cube.n_bins} bins cannot be split into slots of {bins_per_slot}")
    if bins_per_slot == 1:
        return cube
    r, c = cube.grid.rows, cube.grid.cols
    out = cube.data.reshape(r, c, cube.n_bins // bins_per_slot, bins_per_slot).sum(axis=3)
    return ActivityCube(cube.grid, cube.bin_width_ms * bins_per_slot, cube.start_ms, out, cube.missing_cells)


def slot_aggregate(cube: ActivityCube, slot_hours: int) -> ActivityCube:
    """Sum consecutive bins into slots of ``slot_hours`` hours.

    With 3-hour slots a day splits into 8 slots, counted from the cube start.
    """
    slot_ms = slot_hours * HOUR_MS
    if slot_hours < 1 or slot_ms % cube.bin_width_ms:
        raise ValueError(f"{slot_hours} h slots are not a whole number of {cube.bin_width_ms} ms bins")
    return aggregate_bins(cube, slot_ms // cube.bin_width_ms)


def hourly(cube: ActivityCube) -> ActivityCube:
    return slot_aggregate(cube, 1)


def export_cube_csv(cube: ActivityCube, fh: TextIO) -> None:
    fh.write("row,col,bin_index,value\n")
    for r in range(cube.grid.rows):
        for c in range(cube.grid.cols):
            for b, v in enumerate(cube.data[r, c].tolist()):
                fh.write(f"{r},{c},{b},{v!r}\n")

