"""Lookup-table latency prediction and feasibility bands.

An architecture's latency is the sum of per-(layer, operation) entries
from a lookup table, plus an optional fixed overhead for the
non-searchable stem/head (default 0). Feasibility is a closed interval
check at both ends of the band.
"""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .space import Architecture, IDENTITY_ID, SearchSpace


class CoverageError(KeyError):
    """The lookup table has no entry for a required (layer, operation) pair."""

    def __init__(self, layer: int, op_id: str):
        super().__init__(f"no latency entry for layer {layer}, op {op_id!r}")
        self.layer = layer
        self.op_id = op_id

    def __str__(self) -> str:  # KeyError would repr() the message
        return self.args[0]


@dataclass(frozen=True)
class LatencyBand:
    """Closed feasibility interval [lat_min, lat_max] in milliseconds."""

    lat_min: float
    lat_max: float

    def __post_init__(self) -> None:
        if not (0 <= self.lat_min <= self.lat_max):
            raise ValueError(f"need 0 <= lat_min <= lat_max, got {self}")

    def contains(self, ms: float) -> bool:
        return self.lat_min <= ms <= self.lat_max


@dataclass
class LatencyTable:
    """Map (layer index, op id) -> milliseconds, with device metadata."""

    entries: dict[tuple[int, str], float]
    device: str = "synthetic"
    resolution: int = 224
    fixed_overhead_ms: float = 0.0

    def __post_init__(self) -> None:
        for (layer, op), ms in self.entries.items():
            if ms < 0:
                raise ValueError(f"negative latency {ms} for layer {layer}, op {op!r}")

    def predict(self, arch: Architecture) -> float:
        """Sum of entries over the architecture's choices, in layer order."""
        total = self.fixed_overhead_ms
        for layer, op in enumerate(arch.choices):
            try:
                total += self.entries[(layer, op)]
            except KeyError:
                raise CoverageError(layer, op) from None
        return total

    def covers(self, space: SearchSpace) -> bool:
        return all(
            (layer.index, cid) in self.entries
            for layer in space.layers
            for cid in layer.candidates
        )

    def missing_for(self, space: SearchSpace) -> list[tuple[int, str]]:
        return [
            (layer.index, cid)
            for layer in space.layers
            for cid in layer.candidates
            if (layer.index, cid) not in self.entries
        ]

    def to_dict(self) -> dict:
        return {
            "device": self.device,
            "resolution": self.resolution,
            "fixed_overhead_ms": self.fixed_overhead_ms,
            "entries": [
                {"layer": layer, "op": op, "ms": ms}
                for (layer, op), ms in sorted(self.entries.items())
            ],
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")


def load_latency_table(path: str | Path) -> LatencyTable:
    try:
        data = json.loads(Path(path).read_text())
        entries = {(int(e["layer"]), str(e["op"])): float(e["ms"]) for e in data["entries"]}
        return LatencyTable(
            entries=entries,
            device=str(data.get("device", "unknown")),
            resolution=int(data.get("resolution", 224)),
            fixed_overhead_ms=float(data.get("fixed_overhead_ms", 0.0)),
        )
    except (json.JSONDecodeError, KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"malformed latency table file {path}: {exc}") from None


def predict_latency(table: LatencyTable, arch: Architecture) -> float:
    return table.predict(arch)


def is_feasible(table: LatencyTable, band: LatencyBand, arch: Architecture) -> bool:
    return band.contains(table.predict(arch))


def latency_extremes(space: SearchSpace, table: LatencyTable) -> tuple[float, float]:
    """Greedy per-layer minimum and maximum achievable latencies."""
    lo = table.fixed_overhead_ms
    hi = table.fixed_overhead_ms
    for layer in space.layers:
        costs = []
        for cid in layer.candidates:
            try:
                costs.append(table.entries[(layer.index, cid)])
            except KeyError:
                raise CoverageError(layer.index, cid) from None
        lo += min(costs)
        hi += max(costs)
    return lo, hi


@dataclass(frozen=True)
class CostModel:
    """Synthetic per-operation cost, monotone in kernel and expansion.

    cost(k, e) = base_ms + unit_ms * k^2 * e, scaled per layer and jittered
    by at most +-jitter (small enough to preserve monotonicity for the
    built-in menus, where comparable operations differ by >= 20%).
    """

    base_ms: float = 0.5
    unit_ms: float = 0.022
    first_layer_scale: float = 1.5
    last_layer_scale: float = 0.6
    jitter: float = 0.05

    def op_cost(self, kernel: int, expansion: int) -> float:
        return self.base_ms + self.unit_ms * kernel * kernel * expansion


def _jitter_unit(seed: int, layer: int, op_id: str) -> float:
    digest = hashlib.sha256(f"lut|{seed}|{layer}|{op_id}".encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2.0**64


def synth_latency_table(
    space: SearchSpace,
    model: CostModel | None = None,
    rng: int | None = None,
    device: str = "synthetic",
) -> LatencyTable:
    """Full-coverage synthetic table; Identity costs 0.

    Jitter is hashed per (seed, layer, op), so a given operation costs the
    same regardless of which other candidates share the layer; sub-spaces
    of a space therefore get identical entries for their common operations.
    """
    model = model or CostModel()
    seed = int(rng) if rng is not None else 0
    n = max(space.num_layers - 1, 1)
    entries: dict[tuple[int, str], float] = {}
    for layer in space.layers:
        frac = layer.index / n
        scale = model.first_layer_scale + (model.last_layer_scale - model.first_layer_scale) * frac
        for cid in layer.candidates:
            op = space.catalog[cid]
            if op.is_identity:
                entries[(layer.index, cid)] = 0.0
                continue
            wobble = 1.0 + model.jitter * (2.0 * _jitter_unit(seed, layer.index, cid) - 1.0)
            entries[(layer.index, cid)] = scale * model.op_cost(op.kernel, op.expansion) * wobble
    return LatencyTable(entries=entries, device=device)
