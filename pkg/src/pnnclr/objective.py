"""Contrastive losses: SimCLR-style, NNCLR-style, and pseudo-NN anchored.

All three share one softmax-over-similarities core. For a batch of n rows,
row i has a constant anchor a_i (stop-gradient) and the loss is

    L_i = -log( exp(a_i . p_i / tau) / sum_k exp(a_i . p_k / tau) )

where p_k are the positive-branch embeddings of the whole batch (the
denominator runs over all n of them, including p_i). The three methods
differ only in where a_i comes from: the row's own target embedding
(simclr), its hard nearest neighbor from the support queue (nnclr), or the
pseudo nearest neighbor (pnnclr). Gradients are returned with respect to
the positive matrix only; anchors never receive gradient.

Per-item losses are averaged over the batch by default so magnitudes are
comparable across methods; mean_reduce=False keeps plain sums instead.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import ShapeMismatch
from .pnn import PnnConfig, pseudo_nearest_neighbor_batch
from .rng import RngStream
from .support_set import SupportSet

METHODS = ("simclr", "nnclr", "pnnclr")


@dataclass(frozen=True)
class LossConfig:
    temperature: float = 0.1
    method: str = "pnnclr"
    symmetrize: bool = True

    def __post_init__(self):
        if self.temperature <= 0:
            raise ValueError("temperature must be positive")
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}")


@dataclass
class LossReport:
    loss: float
    per_item_losses: np.ndarray
    nn_class_match_rate: Optional[float] = None
    mean_displacement: Optional[float] = None


def info_nce_row(anchor: np.ndarray, positives: np.ndarray, pos_index: int, tau: float):
    """Single-row loss and its gradient w.r.t. every positives row."""
    anchor = np.asarray(anchor, dtype=np.float64)
    positives = np.asarray(positives, dtype=np.float64)
    n = positives.shape[0]
    if not 0 <= pos_index < n:
        raise IndexError(f"pos_index {pos_index} out of range for {n} positives")
    s = positives @ anchor / tau
    m = s.max()
    e = np.exp(s - m)
    lse = m + np.log(e.sum())
    loss = float(lse - s[pos_index])
    p = e / e.sum()
    coef = p.copy()
    coef[pos_index] -= 1.0
    grad = coef[:, None] * anchor[None, :] / tau
    return loss, grad


def _info_nce_batch(anchors: np.ndarray, positives: np.ndarray, tau: float,
                    mean_reduce: bool):
    """Row-wise loss (anchor i against all positives) with one shared grad."""
    if anchors.shape != positives.shape:
        raise ShapeMismatch(f"anchors {anchors.shape} vs positives {positives.shape}")
    n = anchors.shape[0]
    s = anchors @ positives.T / tau
    m = s.max(axis=1, keepdims=True)
    e = np.exp(s - m)
    lse = (m[:, 0] + np.log(e.sum(axis=1)))
    per_item = lse - np.diag(s)
    p = e / e.sum(axis=1, keepdims=True)
    coef = p - np.eye(n)
    grad_positives = coef.T @ anchors / tau
    if mean_reduce:
        loss = float(per_item.mean())
        grad_positives = grad_positives / n
    else:
        loss = float(per_item.sum())
    return loss, per_item, grad_positives


def loss_simclr(z: np.ndarray, z_plus: np.ndarray, tau: float, mean_reduce: bool = True):
    """Anchors are the rows of z themselves (treated as constants)."""
    z = np.asarray(z, dtype=np.float64)
    z_plus = np.asarray(z_plus, dtype=np.float64)
    loss, per_item, grad = _info_nce_batch(z, z_plus, tau, mean_reduce)
    return LossReport(loss, per_item), grad


def loss_nnclr(z: np.ndarray, z_plus: np.ndarray, q: SupportSet, tau: float,
               mean_reduce: bool = True):
    """Anchors are hard nearest neighbors of z retrieved from the queue."""
    z = np.asarray(z, dtype=np.float64)
    anchors, _, _ = q.nearest_neighbor_batch(z)
    loss, per_item, grad = _info_nce_batch(anchors, np.asarray(z_plus, dtype=np.float64),
                                           tau, mean_reduce)
    return LossReport(loss, per_item), grad


def loss_pnnclr(z: np.ndarray, z_plus: np.ndarray, q: SupportSet, pnn_cfg: PnnConfig,
                tau: float, rng: RngStream, mean_reduce: bool = True):
    """Anchors are pseudo nearest neighbors; reports mean displacement."""
    z = np.asarray(z, dtype=np.float64)
    anchors = pseudo_nearest_neighbor_batch(z, q, pnn_cfg, rng)
    loss, per_item, grad = _info_nce_batch(anchors, np.asarray(z_plus, dtype=np.float64),
                                           tau, mean_reduce)
    disp = float(np.mean(np.linalg.norm(anchors - z, axis=1)))
    return LossReport(loss, per_item, mean_displacement=disp), grad


def anchors_for(method: str, z: np.ndarray, q, pnn_cfg, rng) -> np.ndarray:
    """The constant anchor matrix a given method derives from target z."""
    if method == "simclr" or q is None or len(q) == 0:
        # empty queue: NN/pNN path bypassed, each row anchors on itself
        return np.asarray(z, dtype=np.float64).copy()
    if method == "nnclr":
        anchors, _, _ = q.nearest_neighbor_batch(z)
        return anchors
    if method == "pnnclr":
        return pseudo_nearest_neighbor_batch(z, q, pnn_cfg, rng)
    raise ValueError(f"unknown method {method!r}")


def loss_symmetrized(method: str, v1_z: np.ndarray, v1_zplus: np.ndarray,
                     v2_z: np.ndarray, v2_zplus: np.ndarray, tau: float,
                     q: SupportSet = None, pnn_cfg: PnnConfig = None,
                     rng: RngStream = None, mean_reduce: bool = True):
    """Total loss over both view orderings.

    Term 1 anchors come from view-1 target embeddings with view-2 positives;
    term 2 swaps the views. Returns (report, grad_v1_zplus, grad_v2_zplus).
    """
    rng = rng if rng is not None else RngStream(0)
    a1 = anchors_for(method, v1_z, q, pnn_cfg, rng.child(1))
    a2 = anchors_for(method, v2_z, q, pnn_cfg, rng.child(2))
    l1, per1, g2 = _info_nce_batch(a1, np.asarray(v2_zplus, dtype=np.float64),
                                   tau, mean_reduce)
    l2, per2, g1 = _info_nce_batch(a2, np.asarray(v1_zplus, dtype=np.float64),
                                   tau, mean_reduce)
    disp = None
    if method == "pnnclr" and q is not None and len(q) > 0:
        disp = float(0.5 * (np.mean(np.linalg.norm(a1 - v1_z, axis=1))
                            + np.mean(np.linalg.norm(a2 - v2_z, axis=1))))
    report = LossReport(l1 + l2, np.concatenate([per1, per2]), mean_displacement=disp)
    return report, g1, g2
