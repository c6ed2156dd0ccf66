#!/usr/bin/env python3
# Accuracy over the wire: drive the search with the external evaluator
# process instead of the in-process oracle (same line-JSON protocol a real
# training cluster would speak). Needs the padnas-evaluator package.
import sys

import numpy as np

from padnas import CesConfig, PipelineConfig, build_space, run_pipeline, sample_uniform, synth_latency_table
from padnas.space import scaled_profile

try:
    import padnas_evaluator  # noqa: F401
except ImportError:
    sys.exit("padnas-evaluator is not installed; pip install -e evaluator/ first")

space = build_space(scaled_profile("basic", [("T1", 1), ("T2", 2), ("T3", 2)]))
table = synth_latency_table(space, rng=1)
rng = np.random.default_rng(0)
lats = sorted(table.predict(sample_uniform(space, rng)) for _ in range(400))

import tempfile
from pathlib import Path

with tempfile.TemporaryDirectory() as tmp:
    lut = Path(tmp) / "lut.json"
    table.save(lut)
    cfg = PipelineConfig(
        space_profile=space.to_profile(),
        stages=3,
        lat_min=lats[40],
        lat_max=lats[360],
        ces=CesConfig(population_size=16, iterations=6),
        oracle_backend="external",
        external_cmd=[sys.executable, "-m", "padnas_evaluator", "--mode", "surrogate"],
        lut_path=str(lut),
        seed=1,
    )
    best, reports = run_pipeline(cfg)

print("pipeline ran against the surrogate evaluator process:")
for r in reports:
    print(f"  stage {r.stage} [{r.kind}] size {r.space_size_in:.2e} -> {r.space_size_out:.2e}")
print("\nbest architectures (accuracy received over the wire):")
for ev in best:
    print(f"  lat {ev.latency_ms:6.2f} ms  acc {ev.accuracy:.4f}  [{ev.source}]")
