import hashlib

import numpy as np
import pytest

from pnnclr.datakit import BlobSpec, LabeledDataset, gen_blobs, split
from pnnclr.encoder import init_params
from pnnclr.errors import EmptySplit
from pnnclr.evalkit import embed, export_embeddings, linear_probe, \
    representation_contract_check
from pnnclr.rng import RngStream
from pnnclr.trainer import TrainConfig
from pnnclr.vecspace import normalize_rows


def _identityish(x):
    """Embedder for hand-built cases: row-normalized input."""
    return normalize_rows(np.asarray(x, dtype=np.float64))


def test_probe_one_class_perfect():
    ds = LabeledDataset(np.random.default_rng(0).standard_normal((20, 3)) + 5.0,
                        np.zeros(20, dtype=np.int64), 1)
    tr, te = split(ds, 0.5, seed=0)
    res = linear_probe(_identityish, tr, te)
    assert res.top1 == 1.0
    assert res.per_class_accuracy.tolist() == [1.0]


def test_probe_linearly_separable_perfect():
    # two clusters on opposite axes: a linear probe on normalized inputs
    # must separate them completely
    gen = np.random.default_rng(1)
    a = np.array([5.0, 0.0]) + 0.1 * gen.standard_normal((40, 2))
    b = np.array([-5.0, 0.0]) + 0.1 * gen.standard_normal((40, 2))
    ds = LabeledDataset(np.concatenate([a, b]),
                        np.array([0] * 40 + [1] * 40), 2)
    tr, te = split(ds, 0.75, seed=0)
    res = linear_probe(_identityish, tr, te)
    assert res.top1 == 1.0
    assert res.n_train == 60 and res.n_test == 20


def test_probe_uninformative_embedding_chance_level():
    # constant embedding carries no signal: accuracy equals the majority
    # class frequency, here 1/C with balanced classes
    ds = gen_blobs(BlobSpec(class_count=4, per_class=100, dim=6, seed=2))
    tr, te = split(ds, 0.8, seed=0)
    res = linear_probe(lambda x: np.tile([1.0, 0.0], (len(x), 1)), tr, te)
    assert abs(res.top1 - 0.25) < 1e-12


def test_probe_random_labels_near_chance():
    gen = np.random.default_rng(3)
    samples = gen.standard_normal((400, 8))
    labels = gen.integers(0, 4, 400)
    # ensure all classes present on both sides
    labels[:4] = [0, 1, 2, 3]
    ds = LabeledDataset(samples, labels, 4)
    tr, te = split(ds, 0.8, seed=0)
    res = linear_probe(_identityish, tr, te)
    assert res.top1 < 0.45  # chance is ~0.25; generous band


def test_probe_does_not_mutate_encoder():
    cfg = TrainConfig(hidden_dims=(16,), projection_dim=8)
    params = init_params(cfg.arch(6), RngStream(4))
    digest_before = hashlib.sha256(
        b"".join(a.tobytes() for a in params.all_arrays().values())).hexdigest()
    ds = gen_blobs(BlobSpec(class_count=3, per_class=20, dim=6, seed=5))
    tr, te = split(ds, 0.8, seed=0)
    linear_probe(params, tr, te)
    digest_after = hashlib.sha256(
        b"".join(a.tobytes() for a in params.all_arrays().values())).hexdigest()
    assert digest_before == digest_after


def test_probe_deterministic():
    cfg = TrainConfig(hidden_dims=(16,), projection_dim=8)
    params = init_params(cfg.arch(6), RngStream(6))
    ds = gen_blobs(BlobSpec(class_count=3, per_class=30, dim=6, seed=7))
    tr, te = split(ds, 0.8, seed=0)
    r1 = linear_probe(params, tr, te)
    r2 = linear_probe(params, tr, te)
    assert r1.top1 == r2.top1
    assert np.array_equal(r1.per_class_accuracy, r2.per_class_accuracy)


def test_probe_empty_split_raises():
    ds = gen_blobs(BlobSpec(class_count=2, per_class=5, dim=3))

    class Empty:
        n = 0
    with pytest.raises(EmptySplit):
        linear_probe(_identityish, ds, Empty())
    with pytest.raises(EmptySplit):
        linear_probe(_identityish, Empty(), ds)


def test_probe_result_record_format():
    ds = gen_blobs(BlobSpec(class_count=2, per_class=10, dim=3, seed=8))
    tr, te = split(ds, 0.8, seed=0)
    res = linear_probe(_identityish, tr, te, seed=9)
    rec = res.record()
    assert rec.startswith(f"top1={res.top1!r} ")
    assert "seed=9" in rec and "per_class=" in rec


def test_embed_uses_eval_mode():
    # in evaluation mode embeddings depend only on the row, not on batch
    # companions (running statistics, not batch statistics)
    cfg = TrainConfig(hidden_dims=(16,), projection_dim=8,
                      use_batchnorm_in_head=True)
    params = init_params(cfg.arch(5), RngStream(10))
    gen = np.random.default_rng(11)
    x = gen.standard_normal((6, 5))
    full = embed(params, x)
    solo = embed(params, x[2:3])
    assert np.allclose(full[2], solo[0], atol=1e-12)


def test_contract_check_identity_embedding_zero_violations():
    gen = np.random.default_rng(12)
    triples = []
    for _ in range(50):
        xi = gen.standard_normal(4)
        xj = xi + 0.01 * gen.standard_normal(4)  # near
        xk = -xi + 0.01 * gen.standard_normal(4)  # far
        triples.append((xi, xj, xk))
    assert representation_contract_check(_identityish, triples) == 0.0


def test_contract_check_adversarial_embedding_full_violations():
    # embedder that swaps the near and far rows reverses every ordering
    def flipper(batch):
        z = normalize_rows(np.asarray(batch, dtype=np.float64))
        return z[[0, 2, 1]]
    gen = np.random.default_rng(13)
    triples = []
    for _ in range(20):
        xi = gen.standard_normal(4)
        triples.append((xi, xi + 0.01 * gen.standard_normal(4),
                        -xi + 0.01 * gen.standard_normal(4)))
    assert representation_contract_check(flipper, triples) == 1.0


def test_export_embeddings_csv(tmp_path):
    cfg = TrainConfig(hidden_dims=(16,), projection_dim=4)
    params = init_params(cfg.arch(3), RngStream(14))
    ds = gen_blobs(BlobSpec(class_count=2, per_class=3, dim=3, seed=15))
    path = tmp_path / "emb.csv"
    export_embeddings(params, ds, str(path))
    lines = path.read_text().splitlines()
    assert lines[0] == "label,e1,e2,e3,e4"
    assert len(lines) == 1 + ds.n
    z = embed(params, ds.samples)
    first = lines[1].split(",")
    assert int(first[0]) == int(ds.labels[0])
    assert [float(v) for v in first[1:]] == z[0].tolist()
    # byte-identical on re-export
    path2 = tmp_path / "emb2.csv"
    export_embeddings(params, ds, str(path2))
    assert path.read_bytes() == path2.read_bytes()
