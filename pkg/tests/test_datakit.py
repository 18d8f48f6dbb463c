import struct

import numpy as np
import pytest

from pnnclr.datakit import BlobSpec, LabeledDataset, format_config, gen_blobs, \
    load_dataset, parse_config, save_dataset, split
from pnnclr.errors import ClassTooSmall, ConfigRangeError, ConfigTypeError, \
    FormatViolation, UnknownKey


def test_blobs_shapes_and_labels():
    ds = gen_blobs(BlobSpec(class_count=3, per_class=10, dim=4))
    assert ds.samples.shape == (30, 4)
    assert np.array_equal(np.bincount(ds.labels), [10, 10, 10])
    assert ds.class_count == 3


def test_blobs_deterministic():
    a = gen_blobs(BlobSpec(seed=7, class_count=2, per_class=5, dim=3))
    b = gen_blobs(BlobSpec(seed=7, class_count=2, per_class=5, dim=3))
    assert np.array_equal(a.samples, b.samples)
    c = gen_blobs(BlobSpec(seed=8, class_count=2, per_class=5, dim=3))
    assert not np.array_equal(a.samples, c.samples)


def test_blobs_cluster_statistics():
    # per-class sample std approaches within_class_std; 5000 points per class
    spec = BlobSpec(class_count=2, per_class=5000, dim=8, within_class_std=1.5,
                    center_scale=1.0, seed=3)
    ds = gen_blobs(spec)
    for c in range(2):
        pts = ds.samples[ds.labels == c]
        centered = pts - pts.mean(axis=0)
        assert abs(centered.std() - 1.5) < 0.03
        assert np.all(np.abs(pts.mean(axis=0)) < 1.0 + 5 * 1.5 / np.sqrt(5000))


def test_dataset_validation():
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((3, 2)), np.array([0, 1, 5]), 2)
    with pytest.raises(ValueError):
        LabeledDataset(np.array([[np.nan, 0.0]]), np.array([0]), 1)
    with pytest.raises(ValueError):
        LabeledDataset(np.zeros((3, 2)), np.array([0, 1]), 2)


# --- file IO -----------------------------------------------------------------


def test_dataset_roundtrip(tmp_path):
    ds = gen_blobs(BlobSpec(class_count=3, per_class=7, dim=5, seed=1))
    path = tmp_path / "d.pnnd"
    save_dataset(ds, str(path))
    back = load_dataset(str(path))
    assert np.array_equal(back.samples, ds.samples)
    assert np.array_equal(back.labels, ds.labels)
    assert back.class_count == 3


def test_dataset_hand_built_bytes(tmp_path):
    # byte-level oracle for the layout: magic, u32 version/N/D/C, payload
    samples = np.array([[1.5, -2.0], [0.0, 3.25]])
    labels = np.array([0, 1], dtype=np.uint32)
    raw = (b"PNND" + struct.pack("<IIII", 1, 2, 2, 2)
           + samples.astype("<f8").tobytes() + labels.astype("<u4").tobytes())
    path = tmp_path / "hand.pnnd"
    path.write_bytes(raw)
    ds = load_dataset(str(path))
    assert np.array_equal(ds.samples, samples)
    assert np.array_equal(ds.labels, [0, 1])
    # and the writer produces exactly these bytes
    out = tmp_path / "out.pnnd"
    save_dataset(ds, str(out))
    assert out.read_bytes() == raw


def test_dataset_bad_magic(tmp_path):
    path = tmp_path / "x.pnnd"
    path.write_bytes(b"XXXX" + b"\x00" * 32)
    with pytest.raises(FormatViolation):
        load_dataset(str(path))


def test_dataset_truncated(tmp_path):
    ds = gen_blobs(BlobSpec(class_count=2, per_class=3, dim=2))
    path = tmp_path / "t.pnnd"
    save_dataset(ds, str(path))
    path.write_bytes(path.read_bytes()[:-5])
    with pytest.raises(FormatViolation):
        load_dataset(str(path))


def test_dataset_bad_version(tmp_path):
    path = tmp_path / "v.pnnd"
    path.write_bytes(b"PNND" + struct.pack("<IIII", 99, 0, 0, 0))
    with pytest.raises(FormatViolation):
        load_dataset(str(path))


# --- splitting ---------------------------------------------------------------


def test_split_disjoint_and_complete():
    ds = gen_blobs(BlobSpec(class_count=4, per_class=25, dim=3))
    tr, te = split(ds, 0.8, seed=0)
    assert tr.n + te.n == ds.n
    assert tr.n == 80 and te.n == 20
    # per-class stratification
    assert np.array_equal(np.bincount(tr.labels), [20] * 4)
    assert np.array_equal(np.bincount(te.labels), [5] * 4)


def test_split_deterministic():
    ds = gen_blobs(BlobSpec(class_count=3, per_class=10, dim=3))
    a = split(ds, 0.7, seed=5)
    b = split(ds, 0.7, seed=5)
    assert np.array_equal(a[0].samples, b[0].samples)
    c = split(ds, 0.7, seed=6)
    assert not np.array_equal(a[0].samples, c[0].samples)


def test_split_class_too_small():
    ds = LabeledDataset(np.zeros((2, 2)), np.array([0, 1]), 2)
    with pytest.raises(ClassTooSmall):
        split(ds, 0.9, seed=0)


def test_split_bad_fraction():
    ds = gen_blobs(BlobSpec(class_count=2, per_class=5, dim=2))
    for f in (0.0, 1.0, -0.5):
        with pytest.raises(ConfigRangeError):
            split(ds, f, seed=0)


# --- configuration parsing ---------------------------------------------------


def test_parse_config_defaults():
    cfg = parse_config(text="")
    assert cfg.method == "pnnclr"
    assert cfg.alpha == 0.25
    assert cfg.tau == 0.1


def test_parse_config_full(tmp_path):
    text = """
    # run settings
    method = nnclr
    alpha = 0.5   # inline comment
    lambda = 0.95
    hidden_dims = 32,32
    use_batchnorm_in_head = false
    steps = 100
    """
    path = tmp_path / "run.cfg"
    path.write_text(text)
    cfg = parse_config(path=str(path))
    assert cfg.method == "nnclr"
    assert cfg.alpha == 0.5
    assert cfg.lam == 0.95
    assert cfg.hidden_dims == (32, 32)
    assert cfg.use_batchnorm_in_head is False
    assert cfg.steps == 100


def test_parse_config_overrides_win():
    cfg = parse_config(text="steps = 10\n", overrides={"steps": 99, "seed": 4})
    assert cfg.steps == 99
    assert cfg.seed == 4


def test_parse_config_unknown_key():
    with pytest.raises(UnknownKey):
        parse_config(text="bogus = 1\n")


def test_parse_config_type_errors():
    with pytest.raises(ConfigTypeError):
        parse_config(text="steps = many\n")
    with pytest.raises(ConfigTypeError):
        parse_config(text="use_batchnorm_in_head = maybe\n")
    with pytest.raises(ConfigTypeError):
        parse_config(text="just a line\n")


def test_parse_config_range_errors():
    for bad in ("alpha = 0.0", "alpha = 1.0", "beta = 1.0", "tau = -1",
                "batch_size = 0", "method = byol", "hidden_dims = 0,4",
                "mask_prob = 1.5"):
        with pytest.raises(ConfigRangeError):
            parse_config(text=bad + "\n")


def test_format_config_roundtrip():
    cfg = parse_config(text="method = simclr\nalpha = 0.3\nhidden_dims = 8\n")
    back = parse_config(text=format_config(cfg))
    assert back == cfg
