"""Parallel nerve-cord training of residual network pairs, in pure numpy."""

from .brain import (BrainConfig, CordConfig, NerveCord, PatienceGate, PnnConfig, gate_update,
                    pnn_train, soft_vote, swap_stems)
from .data import AugmentConfig, ImageDataset, load_cifar_binary, make_synthetic, split_validation
from .models import SPECS, ArchitectureSpec, build_network, get_spec, param_count, stem_parameters
from .rng import SeededRng
from .stats import descriptive, kruskal_wallis, mann_whitney_u, systematic_seeds
from .training import OptimizerConfig, cosine_lr, evaluate, sgd_step, train_baseline

__all__ = [
    "ArchitectureSpec", "AugmentConfig", "BrainConfig", "CordConfig", "ImageDataset",
    "NerveCord", "OptimizerConfig", "PatienceGate", "PnnConfig", "SPECS", "SeededRng",
    "build_network", "cosine_lr", "descriptive", "evaluate", "gate_update", "get_spec",
    "kruskal_wallis", "load_cifar_binary", "make_synthetic", "mann_whitney_u", "param_count",
    "pnn_train", "sgd_step", "soft_vote", "split_validation", "stem_parameters", "swap_stems",
    "systematic_seeds", "train_baseline",
]
