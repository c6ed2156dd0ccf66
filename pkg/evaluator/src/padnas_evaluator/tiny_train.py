"""Weight-shared tiny model backing the ``tiny-train`` mode.

A genuinely trained (if miniature) accuracy source: every (layer,
operation) pair owns a small weight matrix on a shared feature pipeline
over the scikit-learn digits data. Finetune directives run path-wise SGD
steps with uniformly sampled operations per layer; rebinding to a pruned
menu keeps the surviving weights (inheritance). Evaluation assembles the
requested sub-model and reports held-out accuracy in [0, 1].

Best-effort by design: it demonstrates that a real training process can
sit behind the wire protocol. Determinism holds for a fixed seed and
directive sequence.
"""
from __future__ import annotations

import hashlib

import numpy as np

DIM = 16


def _load_digits(rng: np.random.Generator):
    from sklearn.datasets import load_digits

    data = load_digits()
    x = data.data.astype(np.float64)
    x = (x - x.mean(axis=0)) / (x.std(axis=0) + 1e-9)
    y = data.target
    order = rng.permutation(len(x))
    x, y = x[order], y[order]
    split = len(x) // 2
    # fixed random projection down to DIM features keeps the model tiny
    proj = rng.standard_normal((x.shape[1], DIM)) / np.sqrt(x.shape[1])
    return x[:split] @ proj, y[:split], x[split:] @ proj, y[split:]


class TinyTrainModel:
    def __init__(self, seed: int, layer_candidates: list[list[str]]):
        self.seed = seed
        self.rng = np.random.default_rng(seed)
        self.layers = [list(c) for c in layer_candidates]
        self.x_train, self.y_train, self.x_val, self.y_val = _load_digits(self.rng)
        self.n_classes = int(self.y_train.max()) + 1
        self.weights: dict[tuple[int, str], np.ndarray] = {}
        for j, menu in enumerate(self.layers):
            for op in menu:
                self.weights[(j, op)] = self._init_weight(j, op)
        self.readout = self.rng.standard_normal((DIM, self.n_classes)) * 0.1

    def _init_weight(self, layer: int, op: str) -> np.ndarray:
        digest = hashlib.sha256(f"w|{self.seed}|{layer}|{op}".encode()).digest()
        gen = np.random.default_rng(int.from_bytes(digest[:8], "big"))
        return gen.standard_normal((DIM, DIM)) / np.sqrt(DIM)

    def _forward(self, arch: list[str], x: np.ndarray) -> np.ndarray:
        h = x
        for j, op in enumerate(arch):
            if op == "Identity":
                continue
            h = np.tanh(h @ self.weights[(j, op)])
        return h @ self.readout

    def rebind(self, layer_candidates: list[list[str]]) -> None:
        """Shrink menus; surviving operation weights are inherited as-is."""
        self.layers = [list(c) for c in layer_candidates]
        keep = {(j, op) for j, menu in enumerate(self.layers) for op in menu}
        self.weights = {k: w for k, w in self.weights.items() if k in keep}
        for j, menu in enumerate(self.layers):
            for op in menu:
                self.weights.setdefault((j, op), self._init_weight(j, op))

    def finetune(self, epochs: int, lr: float) -> None:
        """Path-wise SGD: each step samples one operation per layer uniformly."""
        steps = max(1, epochs) * 4
        batch = 64
        for _ in range(steps):
            arch = [menu[int(self.rng.integers(len(menu)))] for menu in self.layers]
            idx = self.rng.integers(len(self.x_train), size=batch)
            x, y = self.x_train[idx], self.y_train[idx]
            acts = [x]
            h = x
            used = []
            for j, op in enumerate(arch):
                if op != "Identity":
                    h = np.tanh(h @ self.weights[(j, op)])
                    used.append((j, op))
                acts.append(h)
            logits = h @ self.readout
            probs = np.exp(logits - logits.max(axis=1, keepdims=True))
            probs /= probs.sum(axis=1, keepdims=True)
            grad = probs
            grad[np.arange(batch), y] -= 1.0
            grad /= batch
            d_read = h.T @ grad
            dh = grad @ self.readout.T
            self.readout -= lr * d_read
            for j, op in reversed(used):
                pre = acts[j]
                post_idx = j + 1
                dh = dh * (1.0 - acts[post_idx] ** 2)
                d_w = pre.T @ dh
                dh = dh @ self.weights[(j, op)].T
                self.weights[(j, op)] -= lr * d_w

    def evaluate(self, arch: list[str]) -> float:
        logits = self._forward(arch, self.x_val)
        return float((logits.argmax(axis=1) == self.y_val).mean())
