"""Layer-wise discrete operation search spaces.

A search space is an ordered list of layers, each with its own menu of
candidate operations: inverted-bottleneck convolutions ("IBConv_KX_EY",
kernel X, expansion Y) or an identity passthrough. Two built-in profiles
mirror a MobileNetV2-style supernet macro-structure of 22 searchable
layers grouped in seven stages:

* ``basic``  - kernels {3,5,7} x expansions {3,6}, plus Identity
* ``large``  - kernels {3,5,7} x expansions {1..6}, plus Identity

In both profiles the first layer is restricted to expansion 1 (three
candidates) and the first layer of every stage forbids Identity. Custom
profiles load from a JSON dict or file.

Spaces and architectures are immutable values; pruning an operation
returns a new space and never mutates the original.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Mapping

import numpy as np

IDENTITY_ID = "Identity"

KERNELS = (3, 5, 7)
BASIC_EXPANSIONS = (3, 6)
LARGE_EXPANSIONS = (1, 2, 3, 4, 5, 6)

# (stage name, number of blocks); the first block of every stage forbids
# Identity, and the single block of the first stage is expansion-fixed.
STAGE_LAYOUT = (
    ("SBS1", 1),
    ("SBS2", 4),
    ("SBS3", 4),
    ("SBS4", 4),
    ("SBS5", 4),
    ("SBS6", 4),
    ("SBS7", 1),
)


class PruningFloorError(ValueError):
    """Removing this operation would leave its layer without candidates."""


def conv_id(kernel: int, expansion: int) -> str:
    return f"IBConv_K{kernel}_E{expansion}"


@dataclass(frozen=True)
class Operation:
    """One candidate block choice: a conv variant or the identity."""

    id: str
    kernel: int | None = None
    expansion: int | None = None
    is_identity: bool = False

    def __post_init__(self) -> None:
        absent = self.kernel is None and self.expansion is None
        if self.is_identity != absent:
            raise ValueError(
                f"operation {self.id!r}: identity flag must match absent kernel/expansion"
            )


@dataclass(frozen=True)
class LayerSpec:
    """Per-layer candidate menu plus the structural constraints it obeys."""

    index: int
    stage_name: str
    allows_identity: bool
    fixed_expansion_one: bool
    candidates: tuple[str, ...]


@dataclass(frozen=True)
class Architecture:
    """One concrete operation choice per layer."""

    choices: tuple[str, ...]

    def __len__(self) -> int:
        return len(self.choices)


class SearchSpace:
    """Ordered layers with candidate menus and an operation catalog."""

    def __init__(self, layers: Iterable[LayerSpec], catalog: Mapping[str, Operation]):
        self.layers: tuple[LayerSpec, ...] = tuple(layers)
        self.catalog: dict[str, Operation] = dict(catalog)
        self._check_invariants()

    def _check_invariants(self) -> None:
        if not self.layers:
            raise ValueError("search space needs at least one layer")
        for layer in self.layers:
            if not layer.candidates:
                raise ValueError(f"layer {layer.index} has no candidates")
            if len(set(layer.candidates)) != len(layer.candidates):
                raise ValueError(f"layer {layer.index} has duplicate candidates")
            for cid in layer.candidates:
                op = self.catalog.get(cid)
                if op is None:
                    raise ValueError(f"layer {layer.index} candidate {cid!r} not in catalog")
                if op.is_identity and not layer.allows_identity:
                    raise ValueError(f"layer {layer.index} forbids identity but lists {cid!r}")
                if layer.fixed_expansion_one and not op.is_identity and op.expansion != 1:
                    raise ValueError(
                        f"layer {layer.index} is expansion-fixed but lists {cid!r}"
                    )

    @property
    def num_layers(self) -> int:
        return len(self.layers)

    def size(self) -> int:
        """Exact number of architectures (big-integer product, no rounding)."""
        return math.prod(len(layer.candidates) for layer in self.layers)

    def validate(self, arch: Architecture) -> bool:
        """True iff every choice is a current candidate of its layer."""
        if len(arch.choices) != self.num_layers:
            raise ValueError(
                f"architecture has {len(arch.choices)} choices, space has {self.num_layers} layers"
            )
        return all(c in layer.candidates for c, layer in zip(arch.choices, self.layers))

    def prune_operation(self, layer_index: int, op_id: str) -> "SearchSpace":
        """Return a new space with ``op_id`` removed from one layer."""
        layer = self.layers[layer_index]
        if op_id not in layer.candidates:
            raise ValueError(f"operation {op_id!r} not in layer {layer_index}")
        if len(layer.candidates) == 1:
            raise PruningFloorError(
                f"pruning floor: cannot remove last candidate {op_id!r} of layer {layer_index}"
            )
        kept = tuple(c for c in layer.candidates if c != op_id)
        new_layer = LayerSpec(
            layer.index, layer.stage_name, layer.allows_identity,
            layer.fixed_expansion_one, kept,
        )
        layers = list(self.layers)
        layers[layer_index] = new_layer
        return SearchSpace(layers, self.catalog)

    def replace_candidates(self, layer_index: int, kept: Iterable[str]) -> "SearchSpace":
        """Return a new space with one layer's menu replaced (order preserved)."""
        layer = self.layers[layer_index]
        kept = tuple(kept)
        if not kept:
            raise PruningFloorError(f"pruning floor: layer {layer_index} would be empty")
        for cid in kept:
            if cid not in layer.candidates:
                raise ValueError(f"operation {cid!r} not in layer {layer_index}")
        new_layer = LayerSpec(
            layer.index, layer.stage_name, layer.allows_identity,
            layer.fixed_expansion_one, kept,
        )
        layers = list(self.layers)
        layers[layer_index] = new_layer
        return SearchSpace(layers, self.catalog)

    def is_subspace_of(self, other: "SearchSpace") -> bool:
        """True iff every layer menu here is contained in ``other``'s."""
        if self.num_layers != other.num_layers:
            return False
        return all(
            set(a.candidates) <= set(b.candidates)
            for a, b in zip(self.layers, other.layers)
        )

    def to_profile(self) -> dict:
        """Profile dict (JSON-ready) describing this space."""
        return {
            "layers": [
                {
                    "stage": layer.stage_name,
                    "allows_identity": layer.allows_identity,
                    "fixed_expansion_one": layer.fixed_expansion_one,
                    "candidates": list(layer.candidates),
                }
                for layer in self.layers
            ],
            "catalog": {
                op.id: {
                    "kernel": op.kernel,
                    "expansion": op.expansion,
                    "is_identity": op.is_identity,
                }
                for op in sorted(self.catalog.values(), key=lambda o: o.id)
            },
        }

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SearchSpace):
            return NotImplemented
        return self.layers == other.layers and self.catalog == other.catalog

    def __repr__(self) -> str:
        sizes = "x".join(str(len(l.candidates)) for l in self.layers)
        return f"SearchSpace({self.num_layers} layers, {sizes})"


def _menu(expansions: Iterable[int]) -> list[str]:
    # ascending kernel, then expansion; Identity is appended last where allowed
    return [conv_id(k, e) for k in KERNELS for e in sorted(expansions)]


def _builtin_catalog() -> dict[str, Operation]:
    ops = [Operation(conv_id(k, e), k, e) for k in KERNELS for e in LARGE_EXPANSIONS]
    ops.append(Operation(IDENTITY_ID, is_identity=True))
    return {op.id: op for op in ops}


def scaled_profile(name: str, stage_layout: Iterable[tuple[str, int]]) -> dict:
    """Profile with the built-in menus and rules over a custom stage layout.

    The first listed stage is expansion-fixed (three kernel choices at
    expansion 1) and the first block of every stage forbids Identity.
    Useful for desk-scale spaces in tests and demos.
    """
    if name == "basic":
        conv_menu = _menu(BASIC_EXPANSIONS)
    elif name == "large":
        conv_menu = _menu(LARGE_EXPANSIONS)
    else:
        raise ValueError(f"unknown profile {name!r}")
    fixed_menu = [conv_id(k, 1) for k in KERNELS]
    catalog = _builtin_catalog()
    stage_layout = tuple(stage_layout)

    layers = []
    for stage_idx, (stage_name, repeat) in enumerate(stage_layout):
        for block in range(repeat):
            first = block == 0
            fixed = stage_idx == 0
            if fixed:
                candidates = list(fixed_menu)
            else:
                candidates = list(conv_menu)
                if not first:
                    candidates.append(IDENTITY_ID)
            layers.append(
                {
                    "stage": stage_name,
                    "allows_identity": not first,
                    "fixed_expansion_one": fixed,
                    "candidates": candidates,
                }
            )

    used = {cid for layer in layers for cid in layer["candidates"]}
    return {
        "layers": layers,
        "catalog": {
            op.id: {"kernel": op.kernel, "expansion": op.expansion, "is_identity": op.is_identity}
            for op in catalog.values()
            if op.id in used
        },
    }


def builtin_profile(name: str) -> dict:
    """Profile dict for a built-in space ("basic" or "large")."""
    return scaled_profile(name, STAGE_LAYOUT)


def space_from_profile(profile: dict) -> SearchSpace:
    """Build a space from a profile dict; raises ValueError on bad shape."""
    try:
        raw_layers = profile["layers"]
        raw_catalog = profile["catalog"]
    except (TypeError, KeyError) as exc:
        raise ValueError(f"malformed profile: missing {exc}") from None
    if not isinstance(raw_layers, list) or not raw_layers:
        raise ValueError("malformed profile: layers must be a non-empty list")

    catalog = {}
    for cid, fields in raw_catalog.items():
        try:
            catalog[cid] = Operation(
                cid,
                fields.get("kernel"),
                fields.get("expansion"),
                bool(fields.get("is_identity", False)),
            )
        except (AttributeError, TypeError) as exc:
            raise ValueError(f"malformed catalog entry {cid!r}: {exc}") from None

    layers = []
    for j, entry in enumerate(raw_layers):
        try:
            layers.append(
                LayerSpec(
                    index=j,
                    stage_name=str(entry.get("stage", f"L{j}")),
                    allows_identity=bool(entry["allows_identity"]),
                    fixed_expansion_one=bool(entry.get("fixed_expansion_one", False)),
                    candidates=tuple(entry["candidates"]),
                )
            )
        except (TypeError, KeyError) as exc:
            raise ValueError(f"malformed layer {j}: {exc}") from None
    return SearchSpace(layers, catalog)


def build_space(profile: str | dict | Path) -> SearchSpace:
    """Build a search space from a built-in name, profile dict, or JSON file."""
    if isinstance(profile, dict):
        return space_from_profile(profile)
    if isinstance(profile, Path) or (isinstance(profile, str) and profile.endswith(".json")):
        path = Path(profile)
        if not path.exists():
            raise ValueError(f"profile file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"malformed profile file {path}: {exc}") from None
        return space_from_profile(data)
    if isinstance(profile, str):
        return space_from_profile(builtin_profile(profile))
    raise ValueError(f"unsupported profile descriptor: {profile!r}")


def sample_uniform(space: SearchSpace, rng: np.random.Generator) -> Architecture:
    """Draw each layer's choice independently and uniformly."""
    choices = tuple(
        layer.candidates[int(rng.integers(len(layer.candidates)))]
        for layer in space.layers
    )
    return Architecture(choices)
