"""Probability analysis of support-set composition, verified three ways.

For a balanced population of N_c classes with N_e items each, a uniformly
random queue of N_q items contains at least one item of a designated class
with probability

    P = 1 - prod_{j=0}^{N_e-1} (N_c*N_e - j - N_q) / (N_c*N_e - j),

evaluated in log space so million-item populations do not overflow. Closed-form bounds sandwich it:

    1 - ((M - N_q)/M)^{N_e}  <=  P  <=  1 - ((M - N_e + 1 - N_q)/(M - N_e + 1))^{N_e}

with M = N_c*N_e (upper-bound base clamped at 0). A Monte-Carlo estimator
simulates random N_q-subsets directly as an independent cross-check, and
an empirical retrieval-rate probe measures how often hard-NN retrieval
returns the query's class under a given embedding function.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import InvalidSpec
from .rng import as_generator
from .support_set import SupportSet


@dataclass(frozen=True)
class PopulationSpec:
    num_classes: int
    items_per_class: int
    queue_size: int

    def __post_init__(self):
        if self.num_classes < 1 or self.items_per_class < 1 or self.queue_size < 0:
            raise InvalidSpec("num_classes, items_per_class must be positive; queue_size >= 0")
        if self.queue_size > self.num_classes * self.items_per_class:
            raise InvalidSpec("queue_size exceeds population size")

    @property
    def population(self) -> int:
        return self.num_classes * self.items_per_class


def p_b_exact(spec: PopulationSpec) -> float:
    """Exact at-least-one probability via a log-space product."""
    m = spec.population
    ne, nq = spec.items_per_class, spec.queue_size
    if nq == 0:
        return 0.0
    if nq > m - ne:
        return 1.0  # pigeonhole: the queue cannot avoid the designated class
    j = np.arange(ne, dtype=np.float64)
    log_terms = np.log(m - j - nq) - np.log(m - j)
    return float(1.0 - np.exp(np.sum(log_terms)))


def p_b_bounds(spec: PopulationSpec):
    """(lower, upper) closed-form bounds on p_b_exact."""
    m = spec.population
    ne, nq = spec.items_per_class, spec.queue_size
    lower = 1.0 - ((m - nq) / m) ** ne
    base = (m - ne + 1 - nq) / (m - ne + 1)
    upper = 1.0 - max(base, 0.0) ** ne
    return float(lower), float(upper)


def p_b_monte_carlo(spec: PopulationSpec, trials: int, rng, chunk: int = None):
    """Simulate random N_q-subsets; returns (estimate, standard error).

    Each trial assigns i.i.d. uniform keys to the whole population; the
    N_q smallest keys form a uniform random subset, and a hit is a subset
    containing at least one designated-class item. Both compute backends
    consume the same key stream, so results are backend-independent.
    """
    if trials < 1:
        raise InvalidSpec("trials must be >= 1")
    gen = as_generator(rng)
    m = spec.population
    if chunk is None:
        chunk = max(1, min(trials, 4_000_000 // m))
    hits = 0
    done = 0
    while done < trials:
        b = min(chunk, trials - done)
        keys = gen.uniform(size=(b, m))
        hits += kernels.mc_subset_hits(keys, spec.items_per_class, spec.queue_size)
        done += b
    p = hits / trials
    se = float(np.sqrt(p * (1.0 - p) / trials))
    return float(p), se


def p_psi_empirical(embed_fn, samples: np.ndarray, labels: np.ndarray,
                    queue_capacity: int, batch_size: int, steps: int, rng):
    """Class-match rate of hard-NN retrieval under the queue protocol.

    Streams shuffled batches through `embed_fn`, querying the queue before
    inserting each batch (mirroring the training step order). Returns a
    list of (step, rate); steps with an empty queue are skipped.
    """
    gen = as_generator(rng)
    samples = np.asarray(samples, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    n = samples.shape[0]
    first = np.asarray(embed_fn(samples[:1]), dtype=np.float64)
    q = SupportSet(queue_capacity, first.shape[1])
    curve = []
    for step in range(steps):
        idx = gen.choice(n, size=min(batch_size, n), replace=False)
        z = np.asarray(embed_fn(samples[idx]), dtype=np.float64)
        if len(q) > 0:
            curve.append((step, q.class_match_rate(z, labels[idx])))
        q.insert_batch(z, labels[idx], step)
    return curve
