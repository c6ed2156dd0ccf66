#!/usr/bin/env python3
# The full progressive pipeline: search -> estimate -> prune -> finetune, M=4.
import numpy as np

from padnas import CesConfig, PipelineConfig, build_space, sample_uniform, synth_latency_table
from padnas.pipeline import Pipeline
from padnas.space import scaled_profile

space = build_space(scaled_profile("large", [("T1", 1), ("T2", 2), ("T3", 2), ("T4", 2), ("T5", 2)]))
table = synth_latency_table(space, rng=1)
rng = np.random.default_rng(0)
lats = sorted(table.predict(sample_uniform(space, rng)) for _ in range(600))

cfg = PipelineConfig(
    space_profile=space.to_profile(),
    stages=4,
    lat_min=lats[60],
    lat_max=lats[540],
    ces=CesConfig(population_size=64, iterations=40),
    seed=7,
)
pipe = Pipeline(cfg)
best, reports = pipe.run()

print("stage-by-stage:")
for r in reports:
    line = f"  stage {r.stage} [{r.kind:13s}] size {r.space_size_in:.2e} -> {r.space_size_out:.2e}"
    if r.tau and r.tau["tau"] is not None:
        line += f"  tau={r.tau['tau']:.3f} (n={r.tau['n']})"
    if r.prune:
        line += f"  removed {len(r.prune['removed'])} ops"
    print(line)

print(f"\nsearch-space size fell by 10^{np.log10(float(reports[0].space_size_out) / float(reports[-1].space_size_out)):.1f}")

print(f"\ntop architectures (accuracy from the simulated supernet, re-scored on the ground truth):")
truth = pipe.oracle.true_accuracy
for ev in best:
    print(f"  lat {ev.latency_ms:6.2f} ms  supernet {ev.accuracy:.4f}  true {truth(ev.architecture):.4f}")
    print(f"    {' -> '.join(ev.architecture.choices)}")
