"""Deterministic surrogate accuracy, independent reimplementation.

Conforming engines compute architecture ground-truth accuracy from the
seed alone; this module mirrors that derivation exactly (IEEE-754 double
arithmetic throughout) so surrogate-mode responses match in-process
values bit for bit:

    h64(s)  = first 8 bytes of SHA-256(UTF-8(s)), big-endian integer
    unit(s) = h64(s) / 2^64
    sym(s)  = 2*unit(s) - 1
    cap(op) = k*k*e / 300 for op ids "IBConv_K{k}_E{e}", else 0

    score = sum_j [ sym("u|{seed}|{j}|{op_j}") + cap(op_j) - 0.5 ]
          + sum_j 0.25 * sym("v|{seed}|{j}|{op_j}|{op_j+1}")
    acc   = 0.3 + 0.5 / (1 + exp(-score))

u terms accumulate first (j ascending), then v terms (j ascending).
"""
from __future__ import annotations

import hashlib
import math
import re

_CONV = re.compile(r"^IBConv_K(\d+)_E(\d+)$")


def _sym(text: str) -> float:
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return 2.0 * (int.from_bytes(digest[:8], "big") / 2.0**64) - 1.0


def _capacity(op_id: str) -> float:
    match = _CONV.match(op_id)
    if not match:
        return 0.0
    k, e = int(match.group(1)), int(match.group(2))
    return k * k * e / 300.0


def surrogate_accuracy(seed: int, arch: list[str]) -> float:
    score = 0.0
    for j, op in enumerate(arch):
        score += _sym(f"u|{seed}|{j}|{op}") + _capacity(op) - 0.5
    for j in range(len(arch) - 1):
        score += 0.25 * _sym(f"v|{seed}|{j}|{arch[j]}|{arch[j + 1]}")
    return 0.3 + 0.5 / (1.0 + math.exp(-score))
