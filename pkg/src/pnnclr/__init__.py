"""Contrastive self-supervised learning with pseudo-nearest-neighbor sampling.

Desk-scale engine: a small MLP encoder trained with SimCLR-, NNCLR-, or
pseudo-NN-anchored InfoNCE losses (exact analytic gradients), a FIFO
support queue, an EMA target network, linear-probe evaluation, and an
independent verification of the support-set probability analysis.
"""

from .pnn import PnnConfig, pseudo_nearest_neighbor, resample, shrink_toward_nn
from .rng import RngStream
from .support_set import SupportSet
from .trainer import TrainConfig

__all__ = [
    "PnnConfig",
    "RngStream",
    "SupportSet",
    "TrainConfig",
    "pseudo_nearest_neighbor",
    "resample",
    "shrink_toward_nn",
]

__version__ = "0.1.0"
