"""Small MLP encoder with projection head and exact reverse-mode gradients.

Topology is fixed: a stack of dense+ReLU backbone layers, then a head of
dense -> (optional batch standardization) -> ReLU -> dense, followed by
row-wise L2 normalization of the output. The normalization Jacobian
(I - z z^T)/||v|| is part of the backward pass, so gradients are exact for
losses defined on the unit-norm embeddings.

Weight init is He/Kaiming normal: W_ij ~ N(0, 2/fan_in), biases zero.
ReLU's subgradient at exactly 0 is taken as 0. The batch standardization
layer uses per-feature batch statistics (biased variance, eps 1e-5) during
training and running statistics (momentum 0.9) at evaluation time.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NonFinite, ShapeMismatch, ZeroVector
from .rng import RngStream
from .vecspace import ZERO_NORM_TOL

BN_EPS = 1e-5
BN_MOMENTUM = 0.9


@dataclass(frozen=True)
class EncoderArch:
    input_dim: int
    hidden_dims: tuple = (64, 64)
    projection_dim: int = 16
    hidden_activation: str = "relu"
    use_batchnorm_in_head: bool = False

    def __post_init__(self):
        object.__setattr__(self, "hidden_dims", tuple(int(h) for h in self.hidden_dims))
        if self.input_dim < 1 or self.projection_dim < 1 or any(h < 1 for h in self.hidden_dims):
            raise ValueError("all dims must be >= 1")
        if self.hidden_activation != "relu":
            raise ValueError("only relu is supported")

    @property
    def head_width(self) -> int:
        return self.hidden_dims[-1] if self.hidden_dims else self.input_dim

    def layer_dims(self):
        """(in, out) pairs for every dense layer, backbone then head."""
        dims = [self.input_dim, *self.hidden_dims]
        pairs = [(dims[i], dims[i + 1]) for i in range(len(self.hidden_dims))]
        pairs.append((self.head_width, self.head_width))
        pairs.append((self.head_width, self.projection_dim))
        return pairs


class EncoderParams:
    """All weights/biases (plus optional batch-norm state) for one encoder."""

    def __init__(self, arch: EncoderArch, weights, biases, bn_gamma=None, bn_beta=None,
                 bn_run_mean=None, bn_run_var=None):
        self.arch = arch
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.bn_gamma = None if bn_gamma is None else np.asarray(bn_gamma, dtype=np.float64)
        self.bn_beta = None if bn_beta is None else np.asarray(bn_beta, dtype=np.float64)
        self.bn_run_mean = None if bn_run_mean is None else np.asarray(bn_run_mean, dtype=np.float64)
        self.bn_run_var = None if bn_run_var is None else np.asarray(bn_run_var, dtype=np.float64)

    def trainable(self) -> dict:
        """Ordered name -> array mapping of everything the optimizer touches."""
        d = {}
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            d[f"w{i}"] = w
            d[f"b{i}"] = b
        if self.arch.use_batchnorm_in_head:
            d["bn_gamma"] = self.bn_gamma
            d["bn_beta"] = self.bn_beta
        return d

    def buffers(self) -> dict:
        if self.arch.use_batchnorm_in_head:
            return {"bn_run_mean": self.bn_run_mean, "bn_run_var": self.bn_run_var}
        return {}

    def all_arrays(self) -> dict:
        return {**self.trainable(), **self.buffers()}

    def set_array(self, name: str, value: np.ndarray) -> None:
        value = np.asarray(value, dtype=np.float64)
        if name.startswith("w"):
            self.weights[int(name[1:])] = value
        elif name.startswith("b") and name[1:].isdigit():
            self.biases[int(name[1:])] = value
        else:
            setattr(self, name, value)

    def copy(self) -> "EncoderParams":
        return EncoderParams(
            self.arch,
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            None if self.bn_gamma is None else self.bn_gamma.copy(),
            None if self.bn_beta is None else self.bn_beta.copy(),
            None if self.bn_run_mean is None else self.bn_run_mean.copy(),
            None if self.bn_run_var is None else self.bn_run_var.copy(),
        )

    def update_running_stats(self, batch_mean: np.ndarray, batch_var: np.ndarray) -> None:
        self.bn_run_mean = BN_MOMENTUM * self.bn_run_mean + (1 - BN_MOMENTUM) * batch_mean
        self.bn_run_var = BN_MOMENTUM * self.bn_run_var + (1 - BN_MOMENTUM) * batch_var


def init_params(arch: EncoderArch, rng: RngStream) -> EncoderParams:
    gen = rng.generator()
    weights, biases = [], []
    for fan_in, fan_out in arch.layer_dims():
        std = np.sqrt(2.0 / fan_in)
        weights.append(gen.standard_normal((fan_in, fan_out)) * std)
        biases.append(np.zeros(fan_out))
    if arch.use_batchnorm_in_head:
        w = arch.head_width
        return EncoderParams(arch, weights, biases,
                             np.ones(w), np.zeros(w), np.zeros(w), np.ones(w))
    return EncoderParams(arch, weights, biases)


class ForwardTrace:
    """Per-layer activations retained for the backward pass."""

    def __init__(self):
        self.layer_inputs = []   # input to each dense layer, backbone + head
        self.backbone_pre = []   # pre-activations of backbone layers
        self.head_pre = None     # head dense1 output (pre-BN)
        self.bn = None           # (xhat, inv_std, batch_mean, batch_var) or None
        self.head_act_pre = None  # input to the head ReLU
        self.prenorm = None      # head dense2 output before L2 normalization
        self.norms = None
        self.z = None


def forward(params: EncoderParams, x_batch: np.ndarray, train_mode: bool = True):
    """Run the encoder; returns (unit-norm embeddings, trace)."""
    arch = params.arch
    x = np.asarray(x_batch, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != arch.input_dim:
        raise ShapeMismatch(f"forward: expected (n, {arch.input_dim}), got {x.shape}")
    tr = ForwardTrace()
    n_backbone = len(arch.hidden_dims)

    h = x
    for i in range(n_backbone):
        tr.layer_inputs.append(h)
        pre = h @ params.weights[i] + params.biases[i]
        tr.backbone_pre.append(pre)
        h = np.maximum(pre, 0.0)

    tr.layer_inputs.append(h)
    u = h @ params.weights[n_backbone] + params.biases[n_backbone]
    tr.head_pre = u

    if arch.use_batchnorm_in_head:
        if train_mode:
            mu = u.mean(axis=0)
            var = u.var(axis=0)
        else:
            mu = params.bn_run_mean
            var = params.bn_run_var
        inv_std = 1.0 / np.sqrt(var + BN_EPS)
        xhat = (u - mu) * inv_std
        tr.bn = (xhat, inv_std, mu, var)
        y = params.bn_gamma * xhat + params.bn_beta
    else:
        y = u
    tr.head_act_pre = y
    a = np.maximum(y, 0.0)

    tr.layer_inputs.append(a)
    v = a @ params.weights[n_backbone + 1] + params.biases[n_backbone + 1]
    if not np.all(np.isfinite(v)):
        raise NonFinite("forward: non-finite activation")
    norms = np.linalg.norm(v, axis=1)
    if np.any(norms < ZERO_NORM_TOL):
        raise ZeroVector("forward: projection row with zero norm")
    z = v / norms[:, None]
    tr.prenorm = v
    tr.norms = norms
    tr.z = z
    return z, tr


def backward(params: EncoderParams, trace: ForwardTrace, dL_dz: np.ndarray) -> dict:
    """Exact gradients of a scalar loss w.r.t. every trainable array."""
    arch = params.arch
    g = np.asarray(dL_dz, dtype=np.float64)
    if g.shape != trace.z.shape:
        raise ShapeMismatch(f"backward: dL_dz {g.shape} vs output {trace.z.shape}")
    n_backbone = len(arch.hidden_dims)
    grads = {}

    # L2 normalization: dL/dv = (g - (g.z) z) / ||v||
    z = trace.z
    gv = (g - np.sum(g * z, axis=1, keepdims=True) * z) / trace.norms[:, None]

    # head dense2
    a = trace.layer_inputs[-1]
    grads[f"w{n_backbone + 1}"] = a.T @ gv
    grads[f"b{n_backbone + 1}"] = gv.sum(axis=0)
    ga = gv @ params.weights[n_backbone + 1].T

    # head ReLU (subgradient 0 at 0)
    gy = ga * (trace.head_act_pre > 0)

    if arch.use_batchnorm_in_head:
        xhat, inv_std, _, _ = trace.bn
        grads["bn_gamma"] = np.sum(gy * xhat, axis=0)
        grads["bn_beta"] = gy.sum(axis=0)
        gxhat = gy * params.bn_gamma
        gu = inv_std * (
            gxhat
            - gxhat.mean(axis=0)
            - xhat * np.mean(gxhat * xhat, axis=0)
        )
    else:
        gu = gy

    # head dense1
    h = trace.layer_inputs[n_backbone]
    grads[f"w{n_backbone}"] = h.T @ gu
    grads[f"b{n_backbone}"] = gu.sum(axis=0)
    gh = gu @ params.weights[n_backbone].T

    # backbone, in reverse
    for i in range(n_backbone - 1, -1, -1):
        gpre = gh * (trace.backbone_pre[i] > 0)
        grads[f"w{i}"] = trace.layer_inputs[i].T @ gpre
        grads[f"b{i}"] = gpre.sum(axis=0)
        gh = gpre @ params.weights[i].T
    return grads


def flatten_trainable(params: EncoderParams) -> np.ndarray:
    """Concatenate all trainable arrays into one vector (fixed order)."""
    return np.concatenate([a.ravel() for a in params.trainable().values()])


def assign_flat(params: EncoderParams, vec: np.ndarray) -> None:
    """Inverse of flatten_trainable (shapes taken from the current params)."""
    off = 0
    for name, a in params.trainable().items():
        params.set_array(name, vec[off:off + a.size].reshape(a.shape).copy())
        off += a.size
    if off != vec.size:
        raise ShapeMismatch("assign_flat: size mismatch")
