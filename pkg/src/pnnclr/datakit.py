"""Synthetic datasets, dataset file IO, and run-configuration parsing.

Dataset file layout (little-endian, documented in README):
  magic b"PNND", u32 version, u32 N, u32 D, u32 C,
  N*D float64 samples (row-major), N u32 labels.

Config files are line-oriented `key = value` with `#` comments; unknown
keys, bad types, and out-of-range values raise typed errors naming the key.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, fields

import numpy as np

from .errors import ClassTooSmall, ConfigRangeError, ConfigTypeError, EmptySplit, \
    FormatViolation, UnknownKey
from .rng import RngStream, TAG_DATA
from .trainer import TrainConfig

DATASET_MAGIC = b"PNND"
DATASET_VERSION = 1


@dataclass
class LabeledDataset:
    samples: np.ndarray  # (N, D) float64
    labels: np.ndarray   # (N,) int in [0, C)
    class_count: int

    def __post_init__(self):
        self.samples = np.ascontiguousarray(self.samples, dtype=np.float64)
        self.labels = np.ascontiguousarray(self.labels, dtype=np.int64)
        if self.samples.ndim != 2 or self.samples.shape[0] != self.labels.shape[0]:
            raise ValueError("samples/labels shape mismatch")
        if self.samples.shape[0] < 1:
            raise ValueError("dataset must be non-empty")
        if np.any(self.labels < 0) or np.any(self.labels >= self.class_count):
            raise ValueError("label out of range")
        if not np.all(np.isfinite(self.samples)):
            raise ValueError("non-finite sample values")

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def dim(self) -> int:
        return self.samples.shape[1]


@dataclass(frozen=True)
class BlobSpec:
    class_count: int = 8
    per_class: int = 500
    dim: int = 32
    center_scale: float = 1.0
    within_class_std: float = 2.0
    seed: int = 0

    def __post_init__(self):
        if self.class_count < 1 or self.per_class < 1 or self.dim < 1:
            raise ValueError("class_count, per_class, dim must be positive")
        if self.within_class_std <= 0:
            raise ValueError("within_class_std must be positive")


def gen_blobs(spec: BlobSpec) -> LabeledDataset:
    """C Gaussian clusters with centers uniform in [-s, s]^D."""
    rng = RngStream(spec.seed, (TAG_DATA,))
    gen = rng.generator()
    centers = gen.uniform(-spec.center_scale, spec.center_scale,
                          (spec.class_count, spec.dim))
    samples = np.empty((spec.class_count * spec.per_class, spec.dim))
    labels = np.empty(spec.class_count * spec.per_class, dtype=np.int64)
    for c in range(spec.class_count):
        lo = c * spec.per_class
        samples[lo:lo + spec.per_class] = (
            centers[c] + spec.within_class_std * gen.standard_normal((spec.per_class, spec.dim))
        )
        labels[lo:lo + spec.per_class] = c
    return LabeledDataset(samples, labels, spec.class_count)


def save_dataset(ds: LabeledDataset, path: str) -> None:
    with open(path, "wb") as f:
        f.write(DATASET_MAGIC)
        f.write(struct.pack("<IIII", DATASET_VERSION, ds.n, ds.dim, ds.class_count))
        f.write(ds.samples.astype("<f8").tobytes(order="C"))
        f.write(ds.labels.astype("<u4").tobytes())


def load_dataset(path: str) -> LabeledDataset:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != DATASET_MAGIC:
        raise FormatViolation(f"{path}: bad magic {raw[:4]!r}")
    if len(raw) < 20:
        raise FormatViolation(f"{path}: truncated header")
    version, n, d, c = struct.unpack("<IIII", raw[4:20])
    if version != DATASET_VERSION:
        raise FormatViolation(f"{path}: unsupported version {version}")
    need = 20 + n * d * 8 + n * 4
    if len(raw) != need:
        raise FormatViolation(f"{path}: expected {need} bytes, got {len(raw)}")
    samples = np.frombuffer(raw, dtype="<f8", count=n * d, offset=20).reshape(n, d)
    labels = np.frombuffer(raw, dtype="<u4", count=n, offset=20 + n * d * 8)
    return LabeledDataset(samples.copy(), labels.astype(np.int64), c)


def split(ds: LabeledDataset, train_fraction: float, seed: int):
    """Stratified, disjoint, deterministic train/test split."""
    if not 0.0 < train_fraction < 1.0:
        raise ConfigRangeError(f"train_fraction must be in (0,1), got {train_fraction}")
    gen = RngStream(seed, (TAG_DATA, 1)).generator()
    train_idx, test_idx = [], []
    for c in range(ds.class_count):
        idx = np.flatnonzero(ds.labels == c)
        if idx.size == 0:
            continue
        perm = gen.permutation(idx)
        n_train = int(round(train_fraction * idx.size))
        n_train = min(max(n_train, 0), idx.size)
        if idx.size - n_train == 0:
            raise ClassTooSmall(f"class {c} would have no test items")
        train_idx.append(perm[:n_train])
        test_idx.append(perm[n_train:])
    train_idx = np.concatenate(train_idx)
    test_idx = np.concatenate(test_idx)
    if train_idx.size == 0 or test_idx.size == 0:
        raise EmptySplit("split produced an empty side")
    mk = lambda ix: LabeledDataset(ds.samples[ix], ds.labels[ix], ds.class_count)
    return mk(np.sort(train_idx)), mk(np.sort(test_idx))


# ---------------------------------------------------------------------------
# configuration parsing

_TUPLE_KEYS = {"hidden_dims"}
_RANGES = {
    "alpha": (0.0, 1.0, "open"),
    "beta": (0.0, 1.0, "half"),       # [0, 1)
    "tau": (0.0, float("inf"), "open"),
    "lam": (0.0, 1.0, "open"),
    "lr": (0.0, float("inf"), "open"),
    "noise_std": (0.0, float("inf"), "closed"),
    "mask_prob": (0.0, 1.0, "closed"),
    "weight_decay": (0.0, float("inf"), "closed"),
}
_MIN_INT = {"batch_size": 1, "queue_capacity": 1, "projection_dim": 1,
            "steps": 0, "checkpoint_every": 0}


def _coerce(key: str, raw: str, default):
    raw = raw.strip()
    try:
        if key in _TUPLE_KEYS:
            if raw == "":
                return ()
            return tuple(int(p.strip()) for p in raw.split(","))
        if isinstance(default, bool):
            low = raw.lower()
            if low in ("true", "1", "yes", "on"):
                return True
            if low in ("false", "0", "no", "off"):
                return False
            raise ValueError(raw)
        if isinstance(default, int):
            return int(raw)
        if isinstance(default, float):
            return float(raw)
        return raw
    except ValueError as e:
        raise ConfigTypeError(f"key {key!r}: cannot parse {raw!r}") from e


def _check_range(key: str, value) -> None:
    if key in _RANGES:
        lo, hi, kind = _RANGES[key]
        ok = {
            "open": lo < value < hi,
            "half": lo <= value < hi,
            "closed": lo <= value <= hi,
        }[kind]
        if not ok:
            raise ConfigRangeError(f"key {key!r}: value {value} out of range")
    if key in _MIN_INT and value < _MIN_INT[key]:
        raise ConfigRangeError(f"key {key!r}: value {value} below minimum {_MIN_INT[key]}")
    if key == "method" and value not in ("simclr", "nnclr", "pnnclr"):
        raise ConfigRangeError(f"key {key!r}: unknown method {value!r}")
    if key == "optimizer" and value not in ("adam", "sgd"):
        raise ConfigRangeError(f"key {key!r}: unknown optimizer {value!r}")
    if key in _TUPLE_KEYS and any(v < 1 for v in value):
        raise ConfigRangeError(f"key {key!r}: dims must be >= 1")


# config keys may differ from dataclass field names
_KEY_TO_FIELD = {"lambda": "lam"}
_FIELD_TO_KEY = {v: k for k, v in _KEY_TO_FIELD.items()}


def parse_config(path: str = None, text: str = None, overrides: dict = None) -> TrainConfig:
    """Build a TrainConfig from a config file and/or override mapping."""
    defaults = TrainConfig()
    values = {f.name: getattr(defaults, f.name) for f in fields(TrainConfig)}

    items = []
    if path is not None:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    if text is not None:
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigTypeError(f"line {lineno}: expected 'key = value'")
            key, raw = line.split("=", 1)
            items.append((key.strip(), raw))
    if overrides:
        items.extend((k, v) for k, v in overrides.items() if v is not None)

    for key, raw in items:
        name = _KEY_TO_FIELD.get(key, key)
        if name not in values:
            raise UnknownKey(f"unknown config key {key!r}")
        if isinstance(raw, str):
            value = _coerce(name, raw, values[name])
        else:
            value = raw
        _check_range(name, value)
        values[name] = value
    cfg = TrainConfig(**values)
    cfg.validate()
    return cfg


def format_config(cfg: TrainConfig) -> str:
    """Canonical `key = value` text that round-trips through parse_config."""
    lines = []
    for f in fields(TrainConfig):
        v = getattr(cfg, f.name)
        key = _FIELD_TO_KEY.get(f.name, f.name)
        if f.name in _TUPLE_KEYS:
            v = ",".join(str(x) for x in v)
        elif isinstance(v, bool):
            v = "true" if v else "false"
        elif isinstance(v, float):
            v = repr(v)
        lines.append(f"{key} = {v}")
    return "\n".join(lines) + "\n"
