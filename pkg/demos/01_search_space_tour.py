#!/usr/bin/env python3
# Tour of the layer-wise search spaces: built-in profiles, sizes, pruning edits.
import numpy as np

from padnas import build_space, sample_uniform

basic = build_space("basic")
large = build_space("large")

print("built-in profiles")
print(f"  basic: {basic.num_layers} layers, size {basic.size()}  (~{basic.size():.2e})")
print(f"  large: {large.num_layers} layers, size {large.size()}  (~{large.size():.2e})")

print("\nper-layer menus (basic)")
for layer in basic.layers[:5]:
    flags = []
    if not layer.allows_identity:
        flags.append("no-identity")
    if layer.fixed_expansion_one:
        flags.append("expansion=1")
    print(f"  layer {layer.index:2d} [{layer.stage_name}] {len(layer.candidates)} ops {flags}")
print("  ...")

rng = np.random.default_rng(0)
arch = sample_uniform(basic, rng)
print("\na uniform sample:")
print(" ", " -> ".join(arch.choices[:6]), "...")
print("  valid:", basic.validate(arch))

print("\npruning is an immutable edit")
pruned = basic.prune_operation(2, "IBConv_K3_E3")
print(f"  before: layer 2 has {len(basic.layers[2].candidates)} ops, size {basic.size():.3e}")
print(f"  after : layer 2 has {len(pruned.layers[2].candidates)} ops, size {pruned.size():.3e}")
print(f"  size ratio = {pruned.size() / basic.size():.4f} (exactly 6/7)")
print("  pruned is sub-space of basic:", pruned.is_subspace_of(basic))
