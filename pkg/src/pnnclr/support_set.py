"""Fixed-capacity FIFO queue of embeddings for nearest-neighbor retrieval.

The queue stores unit-norm embeddings (oldest first) together with an
optional class label and the training step they were inserted at. Labels
are diagnostics only; nothing on the training path reads them. Retrieval
is brute-force exact cosine search (queue sizes stay small enough that an
ANN index would only add failure modes), tie-broken toward the oldest
entry so results are deterministic.
"""

from __future__ import annotations

import numpy as np

from . import kernels
from .errors import EmptySupportSet, MissingLabels, NotNormalized
from .vecspace import UNIT_NORM_TOL

NO_LABEL = -1


class SupportSet:
    def __init__(self, capacity: int, dim: int):
        if capacity < 1 or dim < 1:
            raise ValueError("capacity and dim must be positive")
        self.capacity = int(capacity)
        self.dim = int(dim)
        self.embeddings = np.empty((0, dim), dtype=np.float64)
        self.labels = np.empty(0, dtype=np.int64)
        self.steps = np.empty(0, dtype=np.int64)

    def __len__(self) -> int:
        return self.embeddings.shape[0]

    def insert_batch(self, batch: np.ndarray, labels=None, step: int = 0) -> None:
        """Append rows of `batch` in order, evicting the oldest beyond capacity."""
        batch = np.asarray(batch, dtype=np.float64)
        if batch.ndim == 1:
            batch = batch[None, :]
        norms = np.linalg.norm(batch, axis=1)
        if np.any(np.abs(norms - 1.0) > UNIT_NORM_TOL):
            worst = float(np.max(np.abs(norms - 1.0)))
            raise NotNormalized(f"insert_batch: row norm off unit by {worst:.3e}")
        n = batch.shape[0]
        if labels is None:
            labels = np.full(n, NO_LABEL, dtype=np.int64)
        else:
            labels = np.asarray(labels, dtype=np.int64)
        steps = np.full(n, int(step), dtype=np.int64)

        self.embeddings = np.concatenate([self.embeddings, batch])[-self.capacity:]
        self.labels = np.concatenate([self.labels, labels])[-self.capacity:]
        self.steps = np.concatenate([self.steps, steps])[-self.capacity:]

    def nearest_neighbor(self, z: np.ndarray):
        """Return (embedding, index, similarity) of the best-matching entry."""
        if len(self) == 0:
            raise EmptySupportSet("nearest_neighbor on empty support set")
        z = np.asarray(z, dtype=np.float64)
        idx, sims = kernels.nn_search(self.embeddings, z[None, :])
        i = int(idx[0])
        return self.embeddings[i].copy(), i, float(sims[0])

    def nearest_neighbor_batch(self, queries: np.ndarray):
        """Vectorized retrieval: (embeddings, indices, similarities) per row."""
        if len(self) == 0:
            raise EmptySupportSet("nearest_neighbor on empty support set")
        queries = np.asarray(queries, dtype=np.float64)
        idx, sims = kernels.nn_search(self.embeddings, queries)
        return self.embeddings[idx].copy(), idx, sims

    def class_match_rate(self, queries: np.ndarray, query_labels) -> float:
        """Fraction of queries whose retrieved NN carries the same label."""
        if len(self) == 0:
            raise EmptySupportSet("class_match_rate on empty support set")
        if np.any(self.labels == NO_LABEL):
            raise MissingLabels("queue contains unlabeled entries")
        query_labels = np.asarray(query_labels, dtype=np.int64)
        _, idx, _ = self.nearest_neighbor_batch(np.asarray(queries, dtype=np.float64))
        return float(np.mean(self.labels[idx] == query_labels))
