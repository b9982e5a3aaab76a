"""Experiment configuration: INI file + presets + command-line overrides.

Precedence, lowest first: built-in defaults, the selected preset, the config
file, explicit command-line flags.
"""

import configparser
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path

from .attacks import AttackConfig
from .data import SynthConfig
from .errors import ConfigError
from .seeding import derive_seed
from .trainer import TrainConfig


@dataclass
class ExperimentConfig:
    # [data]
    source: str = "synth"
    path: str = ""
    label_column: str = "label"
    positive_label: str = "1"
    drop: str = "id,attack_cat"
    categorical_encoding: str = "ordinal"
    train_fraction: float = 0.6
    val_fraction: float = 0.2
    # [synth]
    n_features: int = 16
    n_attack: int = 2000
    n_benign: int = 2000
    class_separation: float = 6.0
    noise_scale: float = 1.0
    # [features]  k = 0 keeps every column; a list file overrides k
    features: str = "0"
    # [pca]  0 disables
    pca: float = 0.0
    # [model]
    hidden: str = "300,100,40"
    # [train]
    epochs: int = 100
    batch_size: int = 100
    learning_rate: float = 0.01
    patience: int = 10
    augment: bool = False
    # [attack]
    epsilon: float = 0.1
    step_size: float = 0.01
    iterations: int = 50
    # [run]
    seed: int = 0
    out: str = "run"
    preset: str = ""

    def validate(self):
        if self.source not in ("synth", "csv"):
            raise ConfigError(f"data source must be 'synth' or 'csv', got {self.source!r}")
        if self.source == "csv" and not self.path:
            raise ConfigError("csv source needs a path")
        if self.source == "synth" and self.path:
            raise ConfigError("give either a synthetic source or a csv path, not both")
        if self.pca and not 0 < self.pca <= 1:
            raise ConfigError(f"pca threshold must lie in (0, 1], got {self.pca}")
        self.hidden_sizes()
        self.train_config().validate()
        return self

    def hidden_sizes(self):
        try:
            sizes = [int(s) for s in str(self.hidden).split(",") if s.strip()]
        except ValueError:
            raise ConfigError(f"hidden layer sizes must be comma-separated integers, got {self.hidden!r}") from None
        if any(s < 1 for s in sizes):
            raise ConfigError("hidden layer sizes must be positive")
        return sizes

    def seed_for(self, label):
        return derive_seed(self.seed, label)

    def synth_config(self):
        return SynthConfig(
            self.n_features, self.n_attack, self.n_benign, self.class_separation, self.noise_scale, self.seed_for("synth")
        )

    def attack_config(self, method="natural", lower=0.0, upper=1.0, seed_label="attack"):
        return AttackConfig(
            method, self.epsilon, self.step_size, self.iterations, lower, upper, self.seed_for(seed_label)
        )

    def train_config(self, method="natural", lower=0.0, upper=1.0):
        return TrainConfig(
            epochs=self.epochs,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            attack=self.attack_config(method, lower, upper),
            seed=self.seed_for("train"),
            convergence_patience=self.patience,
            augment=self.augment,
        )

    def to_ini(self):
        parser = configparser.ConfigParser()
        values = asdict(self)
        for section, keys in SECTIONS.items():
            parser[section] = {k: str(values[k]) for k in keys}
        return parser


SECTIONS = {
    "data": ("source", "path", "label_column", "positive_label", "drop", "categorical_encoding", "train_fraction", "val_fraction"),
    "synth": ("n_features", "n_attack", "n_benign", "class_separation", "noise_scale"),
    "features": ("features",),
    "pca": ("pca",),
    "model": ("hidden",),
    "train": ("epochs", "batch_size", "learning_rate", "patience", "augment"),
    "attack": ("epsilon", "step_size", "iterations"),
    "run": ("seed", "out", "preset"),
}

PRESETS = {
    "experiment1": dict(
        hidden="300,100,40", batch_size=100, learning_rate=0.01, iterations=50, epochs=100, features="28", pca=0.0
    ),
    "experiment2": dict(
        hidden="200,200,200", batch_size=8, learning_rate=0.001, iterations=50, epochs=150, features="28", pca=0.95
    ),
}

_TYPES = {f.name: f.type for f in fields(ExperimentConfig)}


def _coerce(key, value):
    kind = _TYPES[key]
    try:
        if kind == "bool" or kind is bool:
            if isinstance(value, bool):
                return value
            return str(value).strip().lower() in ("1", "true", "yes", "on")
        if kind == "int" or kind is int:
            return int(value)
        if kind == "float" or kind is float:
            return float(value)
    except ValueError:
        raise ConfigError(f"bad value for {key}: {value!r}") from None
    return str(value)


def read_ini(path):
    parser = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    values = {}
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{path}: unknown section [{section}]")
        for key, value in parser[section].items():
            if key not in SECTIONS[section]:
                raise ConfigError(f"{path}: unknown key {key!r} in [{section}]")
            values[key] = _coerce(key, value)
    return values


def build_config(config_path=None, preset=None, overrides=None):
    file_values = read_ini(config_path) if config_path else {}
    chosen = preset or file_values.get("preset") or ""
    cfg = ExperimentConfig()
    if chosen:
        if chosen not in PRESETS:
            raise ConfigError(f"unknown preset {chosen!r}; expected one of {sorted(PRESETS)}")
        cfg = replace(cfg, **PRESETS[chosen], preset=chosen)
    cfg = replace(cfg, **file_values)
    if chosen:
        cfg = replace(cfg, preset=chosen)
    cleaned = {k: _coerce(k, v) for k, v in (overrides or {}).items() if v is not None}
    return replace(cfg, **cleaned).validate()


def save_ini(cfg, path):
    with open(Path(path), "w", encoding="utf-8") as fh:
        cfg.to_ini().write(fh)
