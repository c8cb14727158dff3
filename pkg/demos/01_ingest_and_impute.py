# %% [markdown]
# # Ingest and gap repair
#
# Generate a small synthetic record stream, bin it per cell and repair the
# dropped bins.

# %%
import io

import numpy as np

from gridpulse import GridSpec, SynthConfig, generate, impute_gaps, parse_records, series_by_cell, write_records

config = SynthConfig(grid=GridSpec(4, 4), days=2, gap_rate=0.05, seed=1)
records = generate(config)
print(len(records), "records,", config.grid.n_cells * config.n_bins - len(records), "bins dropped")

# %% round trip through canonical CSV
buf = io.StringIO()
write_records(records, buf)
parsed = parse_records(io.StringIO(buf.getvalue()))
assert parsed.records == records

# %%
series = series_by_cell(parsed, config.bin_width_ms, config.start_ms, config.end_ms)
cell = series[6]
print("cell 6 gaps:", np.flatnonzero(cell.gap_mask).tolist())

# %% an isolated gap becomes the mean of its neighbours
fixed = impute_gaps(cell)
i = int(np.flatnonzero(cell.gap_mask)[0])
print(cell.values[i - 1 : i + 2], "->", fixed.values[i - 1 : i + 2])

# %% the table example from the Milan dump
print(impute_gaps(type(cell)(1, 600_000, 0, [57.78, np.nan, 44.21])).values)
