#!/usr/bin/env python3
# Lookup-table latency prediction and the feasibility band.
import numpy as np

from padnas import (
    LatencyBand,
    build_space,
    is_feasible,
    latency_extremes,
    sample_uniform,
    synth_latency_table,
)

space = build_space("basic")
table = synth_latency_table(space, rng=0)

print(f"synthetic lookup table: {len(table.entries)} (layer, op) entries")
lo, hi = latency_extremes(space, table)
print(f"achievable latency range: {lo:.2f} .. {hi:.2f} ms")

rng = np.random.default_rng(1)
lats = np.array([table.predict(sample_uniform(space, rng)) for _ in range(3000)])
print(f"uniform-sample latency: mean {lats.mean():.1f} ms, p5 {np.percentile(lats, 5):.1f}, "
      f"p95 {np.percentile(lats, 95):.1f}")

band = LatencyBand(60.0, 70.0)
inside = np.mean((lats >= band.lat_min) & (lats <= band.lat_max))
print(f"\nband [{band.lat_min}, {band.lat_max}] ms is a closed interval; "
      f"{inside:.0%} of uniform samples fall inside")

arch = sample_uniform(space, np.random.default_rng(2))
print("\none architecture:")
print(f"  predicted latency: {table.predict(arch):.2f} ms")
print(f"  feasible in [60, 70]: {is_feasible(table, band, arch)}")

print("\nper-layer breakdown (first 6 layers):")
for j, op in enumerate(arch.choices[:6]):
    print(f"  layer {j}: {op:16s} {table.entries[(j, op)]:6.2f} ms")
