"""Accuracy oracles standing in for supernet evaluation.

Three backends share one interface:

* ``synthetic``  - deterministic ground-truth landscape over architectures,
  the stand-in for stand-alone training from scratch.
* ``supernet``   - ground truth plus deterministic coupling noise whose
  per-layer scale grows with the number of operations sharing that layer
  and shrinks as the (simulated) supernet is finetuned.
* ``external``   - accuracy comes from an external evaluator process over
  the newline-delimited JSON protocol (see :mod:`padnas.wire`).

Ground-truth derivation (also implemented verbatim by conforming external
evaluators in surrogate mode; all arithmetic is IEEE-754 double):

    h64(s)  = first 8 bytes of SHA-256(UTF-8(s)) as a big-endian integer
    unit(s) = h64(s) / 2^64                       -> [0, 1)
    sym(s)  = 2*unit(s) - 1                       -> [-1, 1)
    cap(op) = k*k*e / 300 for ids "IBConv_K{k}_E{e}", else 0 (Identity etc.)

    u_j(op)     = sym("u|{seed}|{j}|{op}") + cap(op) - 0.5
    score(arch) = sum_j u_j(op_j)                          j = 0..J-1
                + sum_j 0.25 * sym("v|{seed}|{j}|{op_j}|{op_j+1}")  j = 0..J-2
    accuracy    = 0.3 + 0.5 / (1 + exp(-score))

Terms accumulate left to right, all u terms before all v terms. The
capacity term makes bigger (slower) operations pay off on average, giving
the accuracy/latency front a genuine tradeoff; the pairwise v terms
couple adjacent layers so a greedy per-layer choice is not trivially
optimal.

Coupling noise (supernet backend only) is a per-layer bias on each
operation choice, mimicking shared weights that flatter some operations
and not others; it perturbs the pre-squash score, so predicted accuracy
stays inside the squash range and maximizing it can never saturate, and
it shrinks as menus are pruned and the supernet is finetuned:

    sigma_j  = sigma0 * (|candidates_j| - 1) / (1 + finetune_epochs / tau_decay)
    eps      = sum_j sigma_j * sym("noise|{seed}|{version}|{j}|{op_j}")
    accuracy = 0.3 + 0.5 / (1 + exp(-(score + eps)))

Every evaluation is a pure function of (backend, seed, state version), so
results are bit-identical on repeat and independent of call order.
"""
from __future__ import annotations

import hashlib
import math
import re
import threading
from dataclasses import dataclass

from .latency import LatencyTable
from .space import Architecture, SearchSpace

ACC_LO = 0.3
ACC_HI = 0.8
INTERACTION_WEIGHT = 0.25
CAPACITY_NORM = 300.0

BACKENDS = ("synthetic", "supernet", "external")

_CONV_ID = re.compile(r"^IBConv_K(\d+)_E(\d+)$")


def _sym(text: str) -> float:
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return 2.0 * (int.from_bytes(digest[:8], "big") / 2.0**64) - 1.0


def op_capacity(op_id: str) -> float:
    match = _CONV_ID.match(op_id)
    if match is None:
        return 0.0
    k, e = int(match.group(1)), int(match.group(2))
    return k * k * e / CAPACITY_NORM


def _squash(score: float) -> float:
    return ACC_LO + (ACC_HI - ACC_LO) / (1.0 + math.exp(-score))


def score_fn(seed: int, choices: tuple[str, ...]) -> float:
    """Pre-squash fitness score of an architecture under a seed."""
    score = 0.0
    for j, op in enumerate(choices):
        score += _sym(f"u|{seed}|{j}|{op}") + op_capacity(op) - 0.5
    for j in range(len(choices) - 1):
        score += INTERACTION_WEIGHT * _sym(f"v|{seed}|{j}|{choices[j]}|{choices[j + 1]}")
    return score


def true_accuracy_fn(seed: int, choices: tuple[str, ...]) -> float:
    """Canonical ground-truth accuracy of an architecture under a seed."""
    return _squash(score_fn(seed, choices))


def coupling_noise_fn(
    seed: int, version: int, choices: tuple[str, ...], sigmas: tuple[float, ...]
) -> float:
    eps = 0.0
    for j, (op, sigma) in enumerate(zip(choices, sigmas)):
        if sigma != 0.0:
            eps += sigma * _sym(f"noise|{seed}|{version}|{j}|{op}")
    return eps


class BackendError(RuntimeError):
    """Operation not supported by the active oracle backend."""


@dataclass(frozen=True)
class Evaluation:
    architecture: Architecture
    accuracy: float
    latency_ms: float
    source: str

    def __post_init__(self) -> None:
        if not (0.0 <= self.accuracy <= 1.0):
            raise ValueError(f"accuracy {self.accuracy} outside [0, 1]")


@dataclass
class CacheStats:
    queries: int = 0
    hits: int = 0
    misses: int = 0

    def snapshot(self) -> tuple[int, int, int]:
        return (self.queries, self.hits, self.misses)


_SOURCE_TAG = {"synthetic": "synthetic-truth", "supernet": "supernet-sim", "external": "external"}


class Oracle:
    """Architecture-accuracy oracle bound to a space and a latency table.

    State transitions (``finetune``, ``rebind_space``) return new oracles
    with an advanced state version and a fresh evaluation cache; the
    ground-truth landscape is shared and stable across them. ``evaluate``
    is thread-safe; transitions must not race with in-flight evaluations.
    """

    def __init__(
        self,
        space: SearchSpace,
        table: LatencyTable,
        backend: str = "supernet",
        seed: int = 0,
        sigma0: float = 0.1,
        tau_decay_epochs: float = 80.0,
        client=None,
        version: int = 0,
        finetune_epochs: int = 0,
    ):
        if backend not in BACKENDS:
            raise ValueError(f"unknown backend {backend!r}")
        if backend == "external" and client is None:
            raise ValueError("external backend needs a client")
        if sigma0 < 0:
            raise ValueError("sigma0 must be >= 0")
        self.space = space
        self.table = table
        self.backend = backend
        self.seed = seed
        self.sigma0 = sigma0
        self.tau_decay_epochs = tau_decay_epochs
        self.client = client
        self.version = version
        self.finetune_epochs = finetune_epochs
        self.stats = CacheStats()
        self._cache: dict[tuple[str, ...], float] = {}
        self._lock = threading.Lock()

    @property
    def sigmas(self) -> tuple[float, ...]:
        decay = 1.0 / (1.0 + self.finetune_epochs / self.tau_decay_epochs)
        return tuple(
            self.sigma0 * (len(layer.candidates) - 1) * decay for layer in self.space.layers
        )

    def true_accuracy(self, arch: Architecture) -> float:
        if self.backend == "external":
            raise BackendError("true accuracy is not available from the external backend")
        return true_accuracy_fn(self.seed, arch.choices)

    def supernet_accuracy(self, arch: Architecture) -> float:
        if self.backend != "supernet":
            raise BackendError(f"supernet accuracy unavailable on backend {self.backend!r}")
        eps = coupling_noise_fn(self.seed, self.version, arch.choices, self.sigmas)
        return _squash(score_fn(self.seed, arch.choices) + eps)

    def _accuracy(self, arch: Architecture) -> float:
        if self.backend == "synthetic":
            return self.true_accuracy(arch)
        if self.backend == "supernet":
            return self.supernet_accuracy(arch)
        try:
            return self.client.evaluate(list(arch.choices))
        except Exception as exc:
            raise RuntimeError(f"external evaluation failed for {arch.choices}: {exc}") from exc

    def evaluate(self, arch: Architecture) -> Evaluation:
        """Accuracy (cached per state version) plus predicted latency."""
        if not self.space.validate(arch):
            raise ValueError(f"architecture {arch.choices} is not valid in the bound space")
        key = arch.choices
        with self._lock:
            self.stats.queries += 1
            cached = self._cache.get(key)
            if cached is not None:
                self.stats.hits += 1
                acc = cached
        if cached is None:
            acc = self._accuracy(arch)
            with self._lock:
                racer = self._cache.get(key)
                if racer is not None:
                    self.stats.hits += 1
                    acc = racer
                else:
                    self.stats.misses += 1
                    self._cache[key] = acc
        return Evaluation(arch, acc, self.table.predict(arch), _SOURCE_TAG[self.backend])

    def _successor(self, space: SearchSpace, finetune_epochs: int) -> "Oracle":
        return Oracle(
            space=space,
            table=self.table,
            backend=self.backend,
            seed=self.seed,
            sigma0=self.sigma0,
            tau_decay_epochs=self.tau_decay_epochs,
            client=self.client,
            version=self.version + 1,
            finetune_epochs=finetune_epochs,
        )

    def finetune(self, epochs: int, lr_analog: float = 0.1) -> "Oracle":
        """Advance the state version and decay coupling noise by ``epochs``."""
        if epochs < 0:
            raise ValueError("epochs must be >= 0")
        if self.backend == "external" and self.client is not None:
            self.client.finetune(epochs, lr_analog)
        return self._successor(self.space, self.finetune_epochs + epochs)

    def rebind_space(self, pruned: SearchSpace) -> "Oracle":
        """Bind to a pruned sub-space; noise scales follow the new menus.

        The ground-truth landscape is untouched (pruned-supernet weights
        are inherited, not retrained from scratch).
        """
        if not pruned.is_subspace_of(self.space):
            extra = [
                (layer.index, cid)
                for layer, old in zip(pruned.layers, self.space.layers)
                for cid in layer.candidates
                if cid not in old.candidates
            ]
            raise ValueError(f"pruned space is not a sub-space; unknown ops {extra}")
        if self.backend == "external" and self.client is not None:
            self.client.rebind(pruned.to_profile())
        return self._successor(pruned, self.finetune_epochs)
