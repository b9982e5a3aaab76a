"""Min-max adversarial training and evaluation of dense-network intrusion detectors."""

from .attacks import ATTACK_METHODS, METHODS, AttackConfig, AttackResult, inner_maximize
from .data import Dataset, SynthConfig, load_csv, synth_generate
from .nn import DenseNet, forward, init_network
from .trainer import TrainConfig, TrainHistory, train_all_five, train_model

__version__ = "0.1.0"

__all__ = [
    "ATTACK_METHODS",
    "METHODS",
    "AttackConfig",
    "AttackResult",
    "Dataset",
    "DenseNet",
    "SynthConfig",
    "TrainConfig",
    "TrainHistory",
    "forward",
    "init_network",
    "inner_maximize",
    "load_csv",
    "synth_generate",
    "train_all_five",
    "train_model",
]
