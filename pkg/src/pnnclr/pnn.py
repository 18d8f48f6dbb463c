"""Pseudo-nearest-neighbor sampling.

Given a query embedding z and its hard nearest neighbor nn from the support
queue, the pseudo neighbor is built in two stages:

  1. deterministic shrinkage toward the neighbor,
         z'' = z + (1 - alpha) * (nn - z),
     so z'' sits on the segment [z, nn] at distance (1-alpha)*||nn - z||
     from z;
  2. isotropic Gaussian resampling around z'' with per-coordinate standard
     deviation sigma = beta * ||z'' - z||.

With beta = 0 the sampler is deterministic; alpha = 1 reduces it to the
identity (plain augmented-view anchors) and alpha = 0 to the hard NN. The
output is treated as a constant by the loss (stop-gradient); by default it
is renormalized to the unit sphere so temperature semantics match the
cosine-similarity loss, with a flag to keep the raw interpolated point.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionMismatch
from .rng import RngStream
from .support_set import SupportSet
from .vecspace import normalize, normalize_rows


@dataclass(frozen=True)
class PnnConfig:
    alpha: float = 0.25
    beta: float = 0.10
    renormalize_output: bool = True

    def __post_init__(self):
        # endpoints are legal here so reduction tests can hit them exactly;
        # training configs restrict alpha to the open interval.
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError(f"alpha must be in [0, 1], got {self.alpha}")
        if not 0.0 <= self.beta < 1.0:
            raise ValueError(f"beta must be in [0, 1), got {self.beta}")


def shrink_toward_nn(z: np.ndarray, nn: np.ndarray, alpha: float) -> np.ndarray:
    """Interpolated point z + (1 - alpha) * (nn - z)."""
    z = np.asarray(z, dtype=np.float64)
    nn = np.asarray(nn, dtype=np.float64)
    if z.shape != nn.shape:
        raise DimensionMismatch(f"shrink_toward_nn: {z.shape} vs {nn.shape}")
    return z + (1.0 - alpha) * (nn - z)


def resample(z: np.ndarray, z2: np.ndarray, beta: float, rng: RngStream) -> np.ndarray:
    """Gaussian draw around z2 with per-coordinate std beta * ||z2 - z||."""
    z = np.asarray(z, dtype=np.float64)
    z2 = np.asarray(z2, dtype=np.float64)
    sigma = beta * float(np.linalg.norm(z2 - z))
    if sigma == 0.0:
        return z2.copy()
    eps = rng.generator().standard_normal(z2.shape[0])
    return z2 + sigma * eps


def pseudo_nearest_neighbor(
    z: np.ndarray, q: SupportSet, cfg: PnnConfig, rng: RngStream
) -> np.ndarray:
    """Full pNN pipeline: hard NN lookup, shrinkage, resampling, renorm."""
    nn, _, _ = q.nearest_neighbor(z)
    z2 = shrink_toward_nn(z, nn, cfg.alpha)
    zp = resample(z, z2, cfg.beta, rng)
    if cfg.renormalize_output:
        zp = normalize(zp)  # ZeroVector here signals pathological collapse
    return zp


def pseudo_nearest_neighbor_batch(
    zs: np.ndarray, q: SupportSet, cfg: PnnConfig, rng: RngStream
) -> np.ndarray:
    """Row-wise pNN with one derived substream per batch element.

    Element i draws from rng.child(i), so results do not depend on
    evaluation order or parallelism.
    """
    zs = np.asarray(zs, dtype=np.float64)
    nns, _, _ = q.nearest_neighbor_batch(zs)
    z2 = zs + (1.0 - cfg.alpha) * (nns - zs)
    if cfg.beta == 0.0:
        out = z2
    else:
        sigma = cfg.beta * np.linalg.norm(z2 - zs, axis=1)
        out = z2.copy()
        for i in range(zs.shape[0]):
            if sigma[i] > 0.0:
                eps = rng.child(i).generator().standard_normal(zs.shape[1])
                out[i] += sigma[i] * eps
    if cfg.renormalize_output:
        out = normalize_rows(out)  # ZeroVector signals pathological collapse
    return out
