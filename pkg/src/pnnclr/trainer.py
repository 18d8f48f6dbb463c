"""Training loop: view generation, dual forward passes, anchor retrieval,
loss/gradient, optimizer step, EMA target update, queue insertion, and
checkpointing.

Step order is fixed and test-verified: augment, online forward on both
views, target forward on both views (constants), anchor retrieval from the
queue, symmetrized loss and backward into online params only, optimizer
step, EMA update of the target, and finally insertion of the view-1 target
embeddings into the queue. Retrieval therefore always sees the queue as it
was before the current batch.

Every random draw is derived from (seed, purpose, step[, element]), so a
checkpoint needs no generator state: resuming from step s replays exactly
the trajectory of an uninterrupted run.

Checkpoint file layout (little-endian, documented in README):
  magic b"PNNC", u32 version, u64 header_length, UTF-8 JSON header
  (config, step, input_dim, queue metadata, adam step count, array
  manifest: name/dtype/shape in order), then the raw array bytes
  concatenated in manifest order.
"""

from __future__ import annotations

import json
import struct
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .encoder import EncoderArch, EncoderParams, backward, forward, init_params
from .errors import FormatViolation, NonFinite, ShapeMismatch
from .objective import LossReport, loss_symmetrized
from .pnn import PnnConfig
from .rng import RngStream, TAG_AUG, TAG_INIT, TAG_PNN, TAG_SHUFFLE
from .support_set import SupportSet

CHECKPOINT_MAGIC = b"PNNC"
CHECKPOINT_VERSION = 1
LOG_HEADER = "step,loss,nn_class_match_rate,mean_displacement,lr"


@dataclass
class TrainConfig:
    method: str = "pnnclr"
    alpha: float = 0.25
    beta: float = 0.10
    tau: float = 0.1
    lam: float = 0.99
    batch_size: int = 64
    queue_capacity: int = 1024
    hidden_dims: tuple = (64, 64)
    projection_dim: int = 16
    use_batchnorm_in_head: bool = True
    optimizer: str = "adam"
    lr: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 0.0
    momentum: float = 0.9
    steps: int = 2000
    seed: int = 0
    noise_std: float = 1.0
    mask_prob: float = 0.1
    renormalize_output: bool = True
    paper_literal_sums: bool = False
    use_ema: str = "auto"  # auto | on | off
    checkpoint_every: int = 0

    def validate(self) -> None:
        if self.method not in ("simclr", "nnclr", "pnnclr"):
            raise ValueError(f"unknown method {self.method!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must be in (0, 1)")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError("beta must be in [0, 1)")
        if self.tau <= 0 or not 0.0 < self.lam < 1.0:
            raise ValueError("tau must be positive and lambda in (0, 1)")
        if self.batch_size < 1 or self.queue_capacity < 1:
            raise ValueError("batch_size and queue_capacity must be >= 1")
        if self.use_ema not in ("auto", "on", "off"):
            raise ValueError("use_ema must be auto, on, or off")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")

    @property
    def uses_target(self) -> bool:
        if self.use_ema == "auto":
            return self.method == "pnnclr"
        return self.use_ema == "on"

    @property
    def uses_queue(self) -> bool:
        return self.method in ("nnclr", "pnnclr")

    def arch(self, input_dim: int) -> EncoderArch:
        return EncoderArch(input_dim, tuple(self.hidden_dims), self.projection_dim,
                           use_batchnorm_in_head=self.use_batchnorm_in_head)

    def pnn_config(self) -> PnnConfig:
        return PnnConfig(self.alpha, self.beta, self.renormalize_output)


class TrainState:
    def __init__(self, config: TrainConfig, input_dim: int, online: EncoderParams,
                 target: Optional[EncoderParams], queue: Optional[SupportSet],
                 opt_m: dict, opt_v: dict, opt_t: int, step: int = 0):
        self.config = config
        self.input_dim = input_dim
        self.online = online
        self.target = target
        self.queue = queue
        self.opt_m = opt_m
        self.opt_v = opt_v
        self.opt_t = opt_t
        self.step = step


def init_state(config: TrainConfig, input_dim: int) -> TrainState:
    config.validate()
    online = init_params(config.arch(input_dim), RngStream(config.seed, (TAG_INIT,)))
    target = online.copy() if config.uses_target else None
    queue = SupportSet(config.queue_capacity, config.projection_dim) if config.uses_queue else None
    zeros = {k: np.zeros_like(a) for k, a in online.trainable().items()}
    opt_v = {k: np.zeros_like(a) for k, a in online.trainable().items()}
    return TrainState(config, input_dim, online, target, queue, zeros, opt_v, 0)


def augment_batch(x: np.ndarray, noise_std: float, mask_prob: float,
                  rng: RngStream) -> np.ndarray:
    """View = (x + gaussian noise) * random keep-mask."""
    gen = rng.generator()
    out = np.asarray(x, dtype=np.float64)
    eps = gen.standard_normal(out.shape)
    view = out + noise_std * eps
    if mask_prob > 0.0:
        keep = gen.uniform(size=out.shape) >= mask_prob
        view = view * keep
    return view


def ema_update(target: EncoderParams, online: EncoderParams, lam: float) -> None:
    """In-place convex combination lam*target + (1-lam)*online, all arrays."""
    t_arrays = target.all_arrays()
    o_arrays = online.all_arrays()
    if set(t_arrays) != set(o_arrays):
        raise ShapeMismatch("ema_update: mismatched parameter sets")
    for name in t_arrays:
        if t_arrays[name].shape != o_arrays[name].shape:
            raise ShapeMismatch(f"ema_update: {name} shape mismatch")
        target.set_array(name, lam * t_arrays[name] + (1.0 - lam) * o_arrays[name])


def _optimizer_step(state: TrainState, grads: dict) -> None:
    cfg = state.config
    params = state.online
    state.opt_t += 1
    t = state.opt_t
    for name, p in params.trainable().items():
        g = grads[name]
        if cfg.weight_decay > 0.0:
            g = g + cfg.weight_decay * p
        if cfg.optimizer == "adam":
            m = state.opt_m[name] = cfg.beta1 * state.opt_m[name] + (1 - cfg.beta1) * g
            v = state.opt_v[name] = cfg.beta2 * state.opt_v[name] + (1 - cfg.beta2) * g * g
            mhat = m / (1 - cfg.beta1 ** t)
            vhat = v / (1 - cfg.beta2 ** t)
            params.set_array(name, p - cfg.lr * mhat / (np.sqrt(vhat) + cfg.eps))
        else:  # sgd with momentum
            buf = state.opt_m[name] = cfg.momentum * state.opt_m[name] + g
            params.set_array(name, p - cfg.lr * buf)


def train_step(state: TrainState, x_batch: np.ndarray, labels=None) -> LossReport:
    cfg = state.config
    step = state.step
    base = RngStream(cfg.seed)

    ra = base.child(TAG_AUG, step)
    v1 = augment_batch(x_batch, cfg.noise_std, cfg.mask_prob, ra.child(1))
    v2 = augment_batch(x_batch, cfg.noise_std, cfg.mask_prob, ra.child(2))

    z1p, tr1 = forward(state.online, v1, train_mode=True)
    z2p, tr2 = forward(state.online, v2, train_mode=True)

    if cfg.uses_target:
        tz1, _ = forward(state.target, v1, train_mode=True)
        tz2, _ = forward(state.target, v2, train_mode=True)
    else:
        tz1, tz2 = z1p.copy(), z2p.copy()

    match_rate = None
    if (cfg.uses_queue and state.queue is not None and len(state.queue) > 0
            and labels is not None and not np.any(state.queue.labels < 0)):
        match_rate = state.queue.class_match_rate(tz1, labels)

    report, g1, g2 = loss_symmetrized(
        cfg.method, tz1, z1p, tz2, z2p, cfg.tau,
        q=state.queue, pnn_cfg=cfg.pnn_config(),
        rng=base.child(TAG_PNN, step),
        mean_reduce=not cfg.paper_literal_sums,
    )
    if not np.isfinite(report.loss):
        raise NonFinite(f"step {step}: non-finite loss {report.loss}")

    grads = backward(state.online, tr1, g1)
    for name, g in backward(state.online, tr2, g2).items():
        grads[name] = grads[name] + g
    if any(not np.all(np.isfinite(g)) for g in grads.values()):
        raise NonFinite(f"step {step}: non-finite gradient")

    _optimizer_step(state, grads)

    if cfg.use_batchnorm_in_head:
        for tr in (tr1, tr2):
            _, _, mu, var = tr.bn
            state.online.update_running_stats(mu, var)

    if cfg.uses_target:
        ema_update(state.target, state.online, cfg.lam)

    if cfg.uses_queue:
        state.queue.insert_batch(tz1, labels, step)

    report.nn_class_match_rate = match_rate
    state.step += 1
    return report


def _csv_value(x) -> str:
    if x is None:
        return ""
    return repr(float(x))


def format_log_row(step: int, report: LossReport, lr: float) -> str:
    return ",".join([
        str(step), _csv_value(report.loss), _csv_value(report.nn_class_match_rate),
        _csv_value(report.mean_displacement), _csv_value(lr),
    ])


def train(config: TrainConfig, dataset, log_path: str = None,
          checkpoint_path: str = None, state: TrainState = None):
    """Run train_step over shuffled mini-batches; returns (state, log rows).

    `dataset` provides .samples, .labels, .n, .dim. The final ragged batch
    of each epoch is dropped. Pass a loaded checkpoint state to resume.
    """
    if state is None:
        state = init_state(config, dataset.dim)
    cfg = state.config
    n = dataset.n
    bpe = n // cfg.batch_size
    if bpe == 0:
        raise ValueError("dataset smaller than one batch")

    rows = []
    log_file = open(log_path, "w", encoding="utf-8", newline="\n") if log_path else None
    try:
        if log_file:
            log_file.write(LOG_HEADER + "\n")
        perm = None
        perm_epoch = -1
        while state.step < cfg.steps:
            step = state.step
            epoch = step // bpe
            if epoch != perm_epoch:
                perm = RngStream(cfg.seed, (TAG_SHUFFLE, epoch)).generator().permutation(n)
                perm_epoch = epoch
            pos = step % bpe
            idx = perm[pos * cfg.batch_size:(pos + 1) * cfg.batch_size]
            labels = dataset.labels[idx] if dataset.labels is not None else None
            try:
                report = train_step(state, dataset.samples[idx], labels)
            except NonFinite:
                if log_file:
                    log_file.flush()
                raise
            row = format_log_row(step, report, cfg.lr)
            rows.append(row)
            if log_file:
                log_file.write(row + "\n")
            if (checkpoint_path and cfg.checkpoint_every > 0
                    and state.step % cfg.checkpoint_every == 0):
                save_checkpoint(state, checkpoint_path)
    finally:
        if log_file:
            log_file.close()
    if checkpoint_path:
        save_checkpoint(state, checkpoint_path)
    return state, rows


# ---------------------------------------------------------------------------
# checkpoint serialization


def _config_to_dict(cfg: TrainConfig) -> dict:
    d = {}
    for f in fields(TrainConfig):
        v = getattr(cfg, f.name)
        d[f.name] = list(v) if isinstance(v, tuple) else v
    return d


def _config_from_dict(d: dict) -> TrainConfig:
    kw = dict(d)
    if "hidden_dims" in kw:
        kw["hidden_dims"] = tuple(kw["hidden_dims"])
    return TrainConfig(**kw)


def save_checkpoint(state: TrainState, path: str) -> None:
    arrays = []

    def add(prefix, mapping):
        for name, a in mapping.items():
            arrays.append((f"{prefix}.{name}", np.ascontiguousarray(a)))

    add("online", state.online.all_arrays())
    if state.target is not None:
        add("target", state.target.all_arrays())
    add("opt_m", state.opt_m)
    add("opt_v", state.opt_v)
    if state.queue is not None:
        add("queue", {"embeddings": state.queue.embeddings,
                      "labels": state.queue.labels,
                      "steps": state.queue.steps})

    manifest = [{"name": n, "dtype": str(a.dtype), "shape": list(a.shape)}
                for n, a in arrays]
    header = {
        "config": _config_to_dict(state.config),
        "step": state.step,
        "input_dim": state.input_dim,
        "opt_t": state.opt_t,
        "has_target": state.target is not None,
        "queue_capacity": None if state.queue is None else state.queue.capacity,
        "arrays": manifest,
    }
    hdr = json.dumps(header, sort_keys=True).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(struct.pack("<I", CHECKPOINT_VERSION))
        f.write(struct.pack("<Q", len(hdr)))
        f.write(hdr)
        for _, a in arrays:
            f.write(a.astype(a.dtype.newbyteorder("<")).tobytes(order="C"))


def load_checkpoint(path: str) -> TrainState:
    with open(path, "rb") as f:
        raw = f.read()
    if raw[:4] != CHECKPOINT_MAGIC:
        raise FormatViolation(f"{path}: bad magic {raw[:4]!r}")
    (version,) = struct.unpack("<I", raw[4:8])
    if version != CHECKPOINT_VERSION:
        raise FormatViolation(f"{path}: unsupported version {version}")
    (hlen,) = struct.unpack("<Q", raw[8:16])
    header = json.loads(raw[16:16 + hlen].decode("utf-8"))
    off = 16 + hlen

    loaded = {}
    for m in header["arrays"]:
        dt = np.dtype(m["dtype"]).newbyteorder("<")
        count = int(np.prod(m["shape"])) if m["shape"] else 1
        nbytes = count * dt.itemsize
        if off + nbytes > len(raw):
            raise FormatViolation(f"{path}: truncated array data")
        a = np.frombuffer(raw, dtype=dt, count=count, offset=off).reshape(m["shape"])
        loaded[m["name"]] = a.astype(dt.newbyteorder("="))
        off += nbytes
    if off != len(raw):
        raise FormatViolation(f"{path}: trailing bytes")

    cfg = _config_from_dict(header["config"])
    input_dim = header["input_dim"]
    state = init_state(cfg, input_dim)
    state.step = header["step"]
    state.opt_t = header["opt_t"]

    for name in state.online.all_arrays():
        state.online.set_array(name, loaded[f"online.{name}"].copy())
    if header["has_target"]:
        for name in state.target.all_arrays():
            state.target.set_array(name, loaded[f"target.{name}"].copy())
    for name in list(state.opt_m):
        state.opt_m[name] = loaded[f"opt_m.{name}"].copy()
        state.opt_v[name] = loaded[f"opt_v.{name}"].copy()
    if header["queue_capacity"] is not None:
        q = state.queue
        q.embeddings = loaded["queue.embeddings"].copy()
        q.labels = loaded["queue.labels"].copy()
        q.steps = loaded["queue.steps"].copy()
    return state
