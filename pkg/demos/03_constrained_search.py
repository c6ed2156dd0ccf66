#!/usr/bin/env python3
# Constrained NSGA-II search on a desk-scale space: front, archive, feasibility.
import numpy as np

from padnas import CesConfig, LatencyBand, Oracle, build_space, ces_search, sample_uniform, synth_latency_table
from padnas.space import scaled_profile

space = build_space(scaled_profile("large", [("T1", 1), ("T2", 2), ("T3", 2), ("T4", 2), ("T5", 2)]))
table = synth_latency_table(space, rng=1)
rng = np.random.default_rng(0)
lats = sorted(table.predict(sample_uniform(space, rng)) for _ in range(600))
band = LatencyBand(lats[60], lats[540])
print(f"space size {space.size():.2e}, band [{band.lat_min:.1f}, {band.lat_max:.1f}] ms")

oracle = Oracle(space, table, backend="supernet", seed=11)
cfg = CesConfig(population_size=64, iterations=40, seed=0)
result = ces_search(space, table, band, oracle, cfg)

print(f"\nevaluated {result.evaluations} unique architectures "
      f"({result.queries} queries, {result.cache_hits} cache hits)")
print(f"archive latencies all within the band: "
      f"{all(band.contains(i.latency_ms) for i in result.archive)}")

front = sorted((i for i in result.population if i.rank == 1), key=lambda i: i.latency_ms)
print(f"\nfinal Pareto front ({len(front)} points):")
print(f"  {'latency':>8}  {'accuracy':>8}")
for ind in front:
    print(f"  {ind.latency_ms:8.2f}  {ind.accuracy:8.4f}")

print("\nfront growth over iterations:",
      " ".join(str(len(f)) for f in result.front_history[::5]))
