#!/usr/bin/env python3
# Baselines: random search in original vs auto-designed space, and the
# stability of frequency estimates under CES vs an accuracy-truncation EA.
import numpy as np

from padnas import (
    CesConfig,
    Oracle,
    PipelineConfig,
    build_space,
    ces_search,
    distribution_variance,
    estimate_distributions,
    random_search_baseline,
    sample_uniform,
    select_counting_set,
    spos_search,
    synth_latency_table,
)
from padnas.pipeline import Pipeline
from padnas.space import scaled_profile

space = build_space(scaled_profile("large", [("T1", 1), ("T2", 2), ("T3", 2), ("T4", 2), ("T5", 2)]))
table = synth_latency_table(space, rng=1)
rng = np.random.default_rng(0)
lats = sorted(table.predict(sample_uniform(space, rng)) for _ in range(600))
band_lo, band_hi = lats[60], lats[540]

cfg = PipelineConfig(
    space_profile=space.to_profile(), stages=4,
    lat_min=band_lo, lat_max=band_hi,
    ces=CesConfig(population_size=64, iterations=40), seed=3,
)
pipe = Pipeline(cfg)
pipe.run()
pruned = pipe.space
print(f"auto-designed space: {space.size():.2e} -> {pruned.size():.2e}")

from padnas import LatencyBand

band = LatencyBand(band_lo, band_hi)
truth_seed = pipe.oracle.seed
orig_oracle = Oracle(space, table, backend="synthetic", seed=truth_seed)
pruned_oracle = Oracle(pruned, table, backend="synthetic", seed=truth_seed)
r_orig = random_search_baseline(space, band, orig_oracle, 5, rng=np.random.default_rng(10))
r_pruned = random_search_baseline(pruned, band, pruned_oracle, 5, rng=np.random.default_rng(11))
print("\nrandom search, 5 samples each (true accuracy):")
print(f"  original space : mean {np.mean([e.accuracy for e in r_orig]):.4f}")
print(f"  pruned space   : mean {np.mean([e.accuracy for e in r_pruned]):.4f}")

print("\nfrequency-estimate stability across 5 simulated supernet runs:")
for name, search in (("CES (rank-sorted)", ces_search), ("truncation EA", spos_search)):
    runs = []
    for seed in range(5):
        oracle = Oracle(space, table, backend="supernet", seed=42, version=seed)
        result = search(space, table, band, oracle, CesConfig(population_size=64, iterations=40, seed=seed))
        runs.append(estimate_distributions(select_counting_set(result, 10), space))
    var = distribution_variance(runs)["aggregate_mean_variance"]
    print(f"  {name:18s}: aggregate per-op variance {var:.5f}")
