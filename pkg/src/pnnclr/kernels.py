"""Hot inner-loop kernels with numba acceleration and a pure-numpy fallback.

Backend selection: numba is used when importable unless the environment
variable PNNCLR_DISABLE_NUMBA is set to a truthy value ("1", "true", "yes").
Both backends consume identical inputs (including pre-drawn random numbers).
The Monte-Carlo kernel only compares pre-drawn keys, so its counts are
bit-identical across backends. The similarity search accumulates dot
products in backend-specific order; retrieved indices agree (up to
numerically exact ties) and similarities agree to rounding error.

Kernels here are the brute-force similarity search over the support queue
and the subset-hit counter behind the Monte-Carlo probability estimator.
The dense encoder math stays on numpy/BLAS where it is already fastest.
"""

from __future__ import annotations

import os

import numpy as np

_disable = os.environ.get("PNNCLR_DISABLE_NUMBA", "0").lower() in ("1", "true", "yes")

try:
    from numba import njit, prange

    _have_numba = True
except ImportError:  # pragma: no cover - numba is a declared dependency
    _have_numba = False

NUMBA_ENABLED = _have_numba and not _disable


# ---------------------------------------------------------------------------
# nearest-neighbor search: argmax of dot products, first max wins (lowest
# index) so results are deterministic under ties.

def nn_search_numpy(queue: np.ndarray, queries: np.ndarray):
    sims = queries @ queue.T
    idx = np.argmax(sims, axis=1)
    best = sims[np.arange(queries.shape[0]), idx]
    return idx.astype(np.int64), best


if _have_numba:

    @njit(cache=True, parallel=True)
    def _nn_search_nb(queue, queries):
        n, d = queries.shape
        m = queue.shape[0]
        idx = np.empty(n, dtype=np.int64)
        best = np.empty(n, dtype=np.float64)
        for i in prange(n):
            bi = 0
            bs = -np.inf
            for j in range(m):
                s = 0.0
                for k in range(d):
                    s += queries[i, k] * queue[j, k]
                if s > bs:
                    bs = s
                    bi = j
            idx[i] = bi
            best[i] = bs
        return idx, best

    def nn_search_numba(queue: np.ndarray, queries: np.ndarray):
        return _nn_search_nb(
            np.ascontiguousarray(queue), np.ascontiguousarray(queries)
        )


# ---------------------------------------------------------------------------
# Monte-Carlo subset-hit counting. Each row of `keys` assigns i.i.d. uniform
# keys to all population items for one trial; the subset_size smallest keys
# form a uniform random subset. The designated items are columns
# [0, n_designated). A trial is a hit when the subset contains at least one
# designated item, i.e. min(designated keys) <= subset_size-th smallest key.

def mc_subset_hits_numpy(keys: np.ndarray, n_designated: int, subset_size: int) -> int:
    if subset_size == 0:
        return 0
    thresh = np.partition(keys, subset_size - 1, axis=1)[:, subset_size - 1]
    dmin = keys[:, :n_designated].min(axis=1)
    return int(np.count_nonzero(dmin <= thresh))


if _have_numba:

    @njit(cache=True, parallel=True)
    def _mc_subset_hits_nb(keys, n_designated, subset_size):
        trials = keys.shape[0]
        hits = 0
        for t in prange(trials):
            row = keys[t].copy()
            thresh = np.partition(row, subset_size - 1)[subset_size - 1]
            dmin = row[0]
            for j in range(1, n_designated):
                if keys[t, j] < dmin:
                    dmin = keys[t, j]
            if dmin <= thresh:
                hits += 1
        return hits

    def mc_subset_hits_numba(keys: np.ndarray, n_designated: int, subset_size: int) -> int:
        if subset_size == 0:
            return 0
        return int(_mc_subset_hits_nb(np.ascontiguousarray(keys), n_designated, subset_size))


if NUMBA_ENABLED:
    nn_search = nn_search_numba
    mc_subset_hits = mc_subset_hits_numba
else:
    nn_search = nn_search_numpy
    mc_subset_hits = mc_subset_hits_numpy
