# %% [markdown]
# # Choosing k and naming tiers
#
# Hour-of-day profiles plus log total activity, z-scored, then BIC over
# k = 1..8.

# %%
from gridpulse import SynthConfig, build_cube, extract_features, generate, impute_gaps, score_k, series_by_cell
from gridpulse import tier_labels, zscore_normalize

config = SynthConfig(seed=7)
records = generate(config)
series = series_by_cell(records, config.bin_width_ms, config.start_ms, config.end_ms)
cube = build_cube([impute_gaps(s) for s in series.values()], config.grid)
features = zscore_normalize(extract_features(cube))

# %%
report = score_k(features, range(1, 9), "bic", seed=7)
for s in report.scores:
    print(f"k={s.k}  wcss={s.wcss:9.2f}  bic={s.bic:9.2f}")
print("chosen:", report.chosen_k)

# %% tier map, high activity in the middle
tiers = tier_labels(report.best, features)
for r in range(config.grid.rows):
    print(" ".join(tiers[(r, c)][0].upper() for c in range(config.grid.cols)))
