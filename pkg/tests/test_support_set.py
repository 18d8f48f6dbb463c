import numpy as np
import pytest

from pnnclr.errors import EmptySupportSet, MissingLabels, NotNormalized
from pnnclr.support_set import SupportSet
from pnnclr.vecspace import cosine_sim

from conftest import unit_rows


def _named_vectors(n, d=8):
    """n distinct unit vectors, recognizable by their argmax coordinate."""
    return [np.eye(d)[i] for i in range(n)]


def test_fifo_basic_eviction():
    a, b, c, d = _named_vectors(4)
    q = SupportSet(3, 8)
    q.insert_batch(np.stack([a, b, c]))
    q.insert_batch(d[None, :])
    assert np.array_equal(q.embeddings, np.stack([b, c, d]))


def test_fifo_under_capacity():
    a, b = _named_vectors(2)
    q = SupportSet(3, 8)
    q.insert_batch(np.stack([a, b]))
    assert np.array_equal(q.embeddings, np.stack([a, b]))


def test_fifo_overfull_insert():
    # capacity 2, queue [a,b], insert [c,d,e] -> [d,e] (hand-simulated FIFO)
    a, b, c, d, e = _named_vectors(5)
    q = SupportSet(2, 8)
    q.insert_batch(np.stack([a, b]))
    q.insert_batch(np.stack([c, d, e]))
    assert np.array_equal(q.embeddings, np.stack([d, e]))


def test_fifo_law_random_streams(gen):
    for _ in range(100):
        cap = int(gen.integers(1, 10))
        d = int(gen.integers(2, 6))
        q = SupportSet(cap, d)
        stream = []
        for _ in range(int(gen.integers(1, 8))):
            batch = unit_rows(gen, int(gen.integers(1, 7)), d)
            stream.append(batch)
            q.insert_batch(batch)
        flat = np.concatenate(stream)
        assert np.array_equal(q.embeddings, flat[-cap:])


def test_insert_rejects_unnormalized():
    q = SupportSet(4, 3)
    with pytest.raises(NotNormalized):
        q.insert_batch(np.array([[1.0, 1.0, 0.0]]))


def test_nearest_neighbor_argmax():
    q = SupportSet(4, 2)
    q.insert_batch(np.array([[1.0, 0.0], [0.0, 1.0]]))
    z = np.array([0.9, 0.436])
    z = z / np.linalg.norm(z)
    entry, idx, sim = q.nearest_neighbor(z)
    # oracle: argmax over the two dot products
    sims = [cosine_sim(z, np.array([1.0, 0.0])), cosine_sim(z, np.array([0.0, 1.0]))]
    assert idx == int(np.argmax(sims))
    assert idx == 0
    assert np.array_equal(entry, [1.0, 0.0])
    assert abs(sim - sims[0]) < 1e-12


def test_nearest_neighbor_self_retrieval(gen):
    z = unit_rows(gen, 1, 5)[0]
    q = SupportSet(4, 5)
    q.insert_batch(z[None, :])
    _, idx, sim = q.nearest_neighbor(z)
    assert idx == 0
    assert abs(sim - 1.0) < 1e-12


def test_nearest_neighbor_tie_lowest_index():
    q = SupportSet(4, 2)
    q.insert_batch(np.array([[1.0, 0.0], [1.0, 0.0]]))
    _, idx, _ = q.nearest_neighbor(np.array([1.0, 0.0]))
    assert idx == 0


def test_nearest_neighbor_empty_raises():
    with pytest.raises(EmptySupportSet):
        SupportSet(4, 2).nearest_neighbor(np.array([1.0, 0.0]))


def test_nearest_neighbor_dominates_all_entries(gen):
    for _ in range(50):
        d = int(gen.integers(2, 6))
        q = SupportSet(16, d)
        q.insert_batch(unit_rows(gen, int(gen.integers(1, 10)), d))
        z = unit_rows(gen, 1, d)[0]
        _, _, best = q.nearest_neighbor(z)
        for e in q.embeddings:
            assert best >= cosine_sim(z, e) - 1e-12


def test_nearest_neighbor_deterministic(gen):
    q = SupportSet(32, 6)
    q.insert_batch(unit_rows(gen, 20, 6))
    queries = unit_rows(gen, 10, 6)
    _, i1, s1 = q.nearest_neighbor_batch(queries)
    _, i2, s2 = q.nearest_neighbor_batch(queries)
    assert np.array_equal(i1, i2)
    assert np.array_equal(s1, s2)


def test_class_match_rate_all_and_none():
    a, b = _named_vectors(2)
    q = SupportSet(4, 8)
    q.insert_batch(np.stack([a, b]), labels=[0, 1])
    assert q.class_match_rate(np.stack([a, b]), [0, 1]) == 1.0
    assert q.class_match_rate(np.stack([a, b]), [5, 6]) == 0.0


def test_class_match_rate_mixed_hand_case():
    # retrievals enumerated by hand (each basis query retrieves itself):
    # query e0 (label 0) -> queue e0 (label 0): match
    # query e1 (label 0) -> queue e1 (label 1): miss
    # query e2 (label 1) -> queue e2 (label 0): miss
    # query e3 (label 1) -> queue e3 (label 1): match   => rate 0.5
    vecs = _named_vectors(4)
    q = SupportSet(4, 8)
    q.insert_batch(np.stack(vecs), labels=[0, 1, 0, 1])
    rate = q.class_match_rate(np.stack(vecs), [0, 0, 1, 1])
    assert rate == 0.5


def test_class_match_rate_missing_labels(gen):
    q = SupportSet(4, 3)
    q.insert_batch(unit_rows(gen, 2, 3))
    with pytest.raises(MissingLabels):
        q.class_match_rate(unit_rows(gen, 1, 3), [0])
