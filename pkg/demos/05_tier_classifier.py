# %% [markdown]
# # Predicting the tier of a cell
#
# Cluster tiers become labels for a one-hidden-layer network.

# %%
import io

from gridpulse import SynthConfig, build_cube, extract_features, generate, impute_gaps, init_model, load_model
from gridpulse import save_model, score_k, series_by_cell, tier_ranks, train, zscore_normalize
from gridpulse.classifier import predict

config = SynthConfig(seed=7)
records = generate(config)
series = series_by_cell(records, config.bin_width_ms, config.start_ms, config.end_ms)
cube = build_cube([impute_gaps(s) for s in series.values()], config.grid)
features = zscore_normalize(extract_features(cube))
labels = tier_ranks(score_k(features, [3], seed=7).best, features)

# %%
model, report = train(init_model(features.values.shape[1], 32, 3, seed=7), features, labels,
                      epochs=50, lr=0.05, seed=7)
for e in report.epochs[::10] + [report.final]:
    print(f"epoch {e.epoch:2d}  train loss {e.train_loss:.4f}  test acc {e.test_acc:.2f}")

# %% plain-text weights reload bit for bit
buf = io.StringIO()
save_model(model, buf)
again = load_model(io.StringIO(buf.getvalue()))
print("predictions agree:", (predict(again, features.values) == predict(model, features.values)).all())
