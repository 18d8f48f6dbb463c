"""Representation evaluation: linear probing, ordering checks, CSV export.

The probe trains a single affine layer with softmax cross-entropy by
full-batch gradient descent (lr 0.1, 500 steps, zero init, no
regularization) on frozen embeddings and reports Top-1 accuracy on the
test split. The encoder is never mutated.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .encoder import EncoderParams, forward
from .errors import EmptySplit

PROBE_LR = 0.1
PROBE_STEPS = 500


@dataclass
class ProbeResult:
    top1: float
    per_class_accuracy: np.ndarray
    n_train: int
    n_test: int
    seed: int = 0

    def record(self) -> str:
        """Single-line key=value record for run logs."""
        pc = ";".join(repr(float(x)) for x in self.per_class_accuracy)
        return (f"top1={self.top1!r} n_train={self.n_train} n_test={self.n_test} "
                f"seed={self.seed} per_class={pc}")


def embed(params: EncoderParams, x: np.ndarray) -> np.ndarray:
    """Frozen-encoder embeddings (evaluation mode, running statistics)."""
    z, _ = forward(params, x, train_mode=False)
    return z


def _softmax_rows(s: np.ndarray) -> np.ndarray:
    e = np.exp(s - s.max(axis=1, keepdims=True))
    return e / e.sum(axis=1, keepdims=True)


def linear_probe(frozen_encoder, labeled_train, labeled_test,
                 seed: int = 0, lr: float = PROBE_LR, steps: int = PROBE_STEPS) -> ProbeResult:
    """`frozen_encoder` is EncoderParams or any callable mapping samples
    to embeddings; either way it is only read, never mutated."""
    if labeled_train.n == 0 or labeled_test.n == 0:
        raise EmptySplit("probe needs non-empty train and test splits")
    c = labeled_train.class_count
    embed_fn = frozen_encoder if callable(frozen_encoder) else \
        (lambda x: embed(frozen_encoder, x))
    ztr = embed_fn(labeled_train.samples)
    zte = embed_fn(labeled_test.samples)
    ytr = labeled_train.labels
    n, d = ztr.shape

    w = np.zeros((d, c))
    b = np.zeros(c)
    onehot = np.eye(c)[ytr]
    for _ in range(steps):
        p = _softmax_rows(ztr @ w + b)
        g = (p - onehot) / n
        w -= lr * (ztr.T @ g)
        b -= lr * g.sum(axis=0)

    pred = np.argmax(zte @ w + b, axis=1)
    yte = labeled_test.labels
    per_class = np.zeros(c)
    counts = np.zeros(c, dtype=np.int64)
    for cls in range(c):
        mask = yte == cls
        counts[cls] = int(mask.sum())
        per_class[cls] = float(np.mean(pred[mask] == cls)) if counts[cls] else 0.0
    top1 = float(np.mean(pred == yte))
    return ProbeResult(top1, per_class, labeled_train.n, labeled_test.n, seed)


def representation_contract_check(embed_fn, triples) -> float:
    """Fraction of (near, far) triples whose embedding-space cosine-distance
    ordering contradicts the input-space ordering. Lower is better.

    Each triple is (x_i, x_j, x_k) with x_j known-near and x_k known-far
    from x_i in input space.
    """
    violations = 0
    total = 0
    for xi, xj, xk in triples:
        ui, uj, uk = embed_fn(np.stack([xi, xj, xk]))
        d_near = 1.0 - float(np.dot(ui, uj))
        d_far = 1.0 - float(np.dot(ui, uk))
        total += 1
        if d_near >= d_far:
            violations += 1
    return violations / total if total else 0.0


def export_embeddings(params: EncoderParams, dataset, path: str) -> None:
    """Write CSV `label,e1,...,eD` of frozen-encoder embeddings."""
    z = embed(params, dataset.samples)
    d = z.shape[1]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("label," + ",".join(f"e{i + 1}" for i in range(d)) + "\n")
        for lbl, row in zip(dataset.labels, z):
            f.write(str(int(lbl)) + "," + ",".join(repr(float(v)) for v in row) + "\n")
