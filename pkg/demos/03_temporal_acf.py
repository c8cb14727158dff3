# %% [markdown]
# # Daily cycle in the autocorrelation

# %%
import numpy as np

from gridpulse import SynthConfig, acf, build_cube, generate, hourly, impute_gaps, series_by_cell

config = SynthConfig(days=8, seed=2)
records = generate(config)
series = series_by_cell(records, config.bin_width_ms, config.start_ms, config.end_ms)
cube = hourly(build_cube([impute_gaps(s) for s in series.values()], config.grid))

# %%
hours = cube.series(5, 5)
res = acf(hours, 168, step_ms=cube.bin_width_ms)
print("first local maxima:", res.peaks()[:5].tolist())
print("gamma at 12, 24, 48:", np.round(res.gamma[[12, 24, 48]], 3).tolist())

# %% the full-length denominator tapers long lags
full = acf(hours, 168, denominator="full")
print("full-denominator gamma at 24, 96:", np.round(full.gamma[[24, 96]], 3).tolist())
