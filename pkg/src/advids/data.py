"""Tabular dataset ingestion, feature ranking, min-max scaling, splitting and synthetic data."""

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import kernels
from .errors import ConfigError, DataError, ParseError, SchemaError, ShapeError

SPLITS = ("train", "val", "test")


@dataclass(eq=False)
class Dataset:
    X: np.ndarray
    y: np.ndarray
    feature_names: list
    split: np.ndarray = None
    normalized: bool = False

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.float64)
        self.y = np.asarray(self.y, dtype=np.int64)
        if self.split is None:
            self.split = np.full(len(self.y), "train", dtype=object)
        else:
            self.split = np.asarray(self.split, dtype=object)
        if self.X.ndim != 2 or not (self.X.shape[0] == len(self.y) == len(self.split)):
            raise ShapeError("X, y and split tags must have the same number of rows")
        if self.X.shape[1] != len(self.feature_names):
            raise ShapeError("feature_names does not match the column count of X")
        if not np.all((self.y == 0) | (self.y == 1)):
            raise DataError("labels must be 0 (benign) or 1 (attack)")

    def __len__(self):
        return len(self.y)

    @property
    def n_features(self):
        return self.X.shape[1]

    def mask(self, tag):
        return self.split == tag

    def part(self, tag):
        """``(X, y)`` of one split."""
        m = self.mask(tag)
        return self.X[m], self.y[m]

    def select_features(self, indices):
        idx = list(indices)
        return replace(self, X=self.X[:, idx], feature_names=[self.feature_names[i] for i in idx])

    def with_features(self, X, names):
        return replace(self, X=X, feature_names=list(names))


def _as_float(text):
    try:
        value = float(text)
    except ValueError:
        return None
    return value if math.isfinite(value) else None


def load_csv(path, label_column="label", positive_label="1", drop_columns=(), categorical=None, encoding="ordinal"):
    """Read a headered CSV into a :class:`Dataset`.

    A column is treated as categorical when it is listed in ``categorical`` or,
    if that is ``None``, when its first data cell is not a number.  Categorical
    columns are ordinal-encoded by sorted vocabulary (``encoding="ordinal"``) or
    expanded to indicator columns (``encoding="onehot"``).  Empty or
    non-numeric cells in numeric columns raise :class:`ParseError` with the
    1-based data row number.  If the file has a ``split`` column, its values
    become the split tags.
    """
    if encoding not in ("ordinal", "onehot"):
        raise ConfigError(f"unknown categorical encoding {encoding!r}")
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise SchemaError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if label_column not in header:
        raise SchemaError(f"{path}: label column {label_column!r} not found in header")
    label_idx = header.index(label_column)
    split_idx = header.index("split") if "split" in header and label_column != "split" else None
    skip = {label_idx} | {header.index(c) for c in drop_columns if c in header}
    if split_idx is not None:
        skip.add(split_idx)
    columns = [j for j in range(len(header)) if j not in skip]
    for r, row in enumerate(body, start=1):
        if len(row) != len(header):
            raise ParseError(f"{path}: row {r} has {len(row)} fields, expected {len(header)}", row=r)
    if categorical is None:
        cat = {j for j in columns if body and _as_float(body[0][j]) is None}
    else:
        missing = [c for c in categorical if c not in header]
        if missing:
            raise SchemaError(f"{path}: categorical columns not found: {missing}")
        cat = {header.index(c) for c in categorical}

    blocks, names = [], []
    for j in columns:
        cells = [row[j].strip() for row in body]
        if j in cat:
            for r, c in enumerate(cells, start=1):
                if c == "":
                    raise ParseError(f"{path}: row {r}: empty value in column {header[j]!r}", row=r, column=header[j])
            vocab = sorted(set(cells))
            if encoding == "ordinal":
                lookup = {v: float(k) for k, v in enumerate(vocab)}
                blocks.append(np.array([lookup[c] for c in cells])[:, None])
                names.append(header[j])
            else:
                codes = np.array([vocab.index(c) for c in cells])
                blocks.append((codes[:, None] == np.arange(len(vocab))[None, :]).astype(np.float64))
                names.extend(f"{header[j]}={v}" for v in vocab)
        else:
            values = np.empty(len(cells))
            for r, c in enumerate(cells, start=1):
                v = _as_float(c)
                if v is None:
                    raise ParseError(
                        f"{path}: row {r}: cannot parse {c!r} in numeric column {header[j]!r}",
                        row=r,
                        column=header[j],
                    )
                values[r - 1] = v
            blocks.append(values[:, None])
            names.append(header[j])
    X = np.hstack(blocks) if blocks else np.empty((len(body), 0))
    y = np.array([1 if row[label_idx].strip() == str(positive_label) else 0 for row in body], dtype=np.int64)
    split = None
    if split_idx is not None:
        split = np.array([row[split_idx].strip() for row in body], dtype=object)
        bad = sorted(set(split) - set(SPLITS))
        if bad:
            raise ParseError(f"{path}: unknown split tags {bad}")
    return Dataset(X, y, names, split)


def write_csv(dataset, path, label_column="label"):
    """Write features, label and split tag; floats use ``repr`` so values round-trip exactly."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(dataset.feature_names) + [label_column, "split"])
        for row, label, tag in zip(dataset.X, dataset.y, dataset.split):
            w.writerow([repr(float(v)) for v in row] + [int(label), tag])
    return Path(path)


# ---------------------------------------------------------------------------
# feature ranking
# ---------------------------------------------------------------------------


def _entropy(counts):
    total = counts.sum()
    if total == 0:
        return 0.0
    p = counts[counts > 0] / total
    return float(-(p * np.log2(p)).sum())


def equal_frequency_bins(values, n_bins=10):
    """Bin index per value using quantile cut points; tied cut points collapse."""
    edges = np.unique(np.quantile(values, np.arange(1, n_bins) / n_bins))
    return np.searchsorted(edges, values, side="right").astype(np.int64), len(edges) + 1


def information_gain(x, y, n_bins=10):
    bins, k = equal_frequency_bins(x, n_bins)
    joint = kernels.joint_counts(bins, np.asarray(y, dtype=np.int64), k)
    h_y = _entropy(joint.sum(axis=0))
    n = joint.sum()
    h_cond = sum(joint[b].sum() / n * _entropy(joint[b]) for b in range(k))
    return max(h_y - h_cond, 0.0)


def feature_scores(dataset, n_bins=10):
    X, y = dataset.part("train")
    if len(y) == 0:
        raise DataError("feature ranking needs a non-empty train split")
    return np.array([information_gain(X[:, j], y, n_bins) for j in range(X.shape[1])])


def rank_features(dataset, k, n_bins=10):
    """Indices of the ``k`` features with highest information gain on the train split.

    Ties keep the lower column index first.
    """
    if k > dataset.n_features or k < 1:
        raise ConfigError(f"cannot select {k} of {dataset.n_features} features")
    scores = feature_scores(dataset, n_bins)
    order = np.argsort(-scores, kind="stable")
    return [int(i) for i in order[:k]]


# ---------------------------------------------------------------------------
# normalisation
# ---------------------------------------------------------------------------


@dataclass
class NormalizationModel:
    min: np.ndarray
    max: np.ndarray
    feature_names: list = field(default_factory=list)

    def save(self, path):
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(self.feature_names or [f"f{j}" for j in range(len(self.min))])
            w.writerow([repr(float(v)) for v in self.min])
            w.writerow([repr(float(v)) for v in self.max])
        return Path(path)

    @classmethod
    def load(cls, path):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if len(rows) != 3:
            raise SchemaError(f"{path}: expected header, min and max rows")
        return cls(np.array([float(v) for v in rows[1]]), np.array([float(v) for v in rows[2]]), rows[0])


def fit_normalizer(dataset):
    X, _ = dataset.part("train")
    if len(X) == 0:
        raise DataError("normaliser needs a non-empty train split")
    return NormalizationModel(X.min(axis=0), X.max(axis=0), list(dataset.feature_names))


def normalize_array(model, X):
    X = np.asarray(X, dtype=np.float64)
    if X.shape[-1] != len(model.min):
        raise ShapeError(f"normaliser has {len(model.min)} features, data has {X.shape[-1]}")
    span = model.max - model.min
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (X - model.min) / safe, 0.0)
    return np.clip(out, 0.0, 1.0)


def apply_normalizer(model, dataset):
    return replace(dataset, X=normalize_array(model, dataset.X), normalized=True)


# ---------------------------------------------------------------------------
# splitting
# ---------------------------------------------------------------------------


def split(dataset, train_fraction=0.6, val_fraction=0.2, seed=0):
    """Stratified, seeded train/val/test tagging; the remainder after train and val is test."""
    if train_fraction <= 0 or val_fraction < 0 or train_fraction + val_fraction > 1 + 1e-12:
        raise ConfigError(f"invalid split fractions train={train_fraction}, val={val_fraction}")
    tags = np.empty(len(dataset), dtype=object)
    for cls in (0, 1):
        idx = np.flatnonzero(dataset.y == cls)
        perm = np.random.default_rng([int(seed), cls]).permutation(idx)
        n_train = int(math.floor(len(idx) * train_fraction + 1e-9))
        n_val = int(math.floor(len(idx) * val_fraction + 1e-9))
        tags[perm[:n_train]] = "train"
        tags[perm[n_train : n_train + n_val]] = "val"
        tags[perm[n_train + n_val :]] = "test"
    return replace(dataset, split=tags)


# ---------------------------------------------------------------------------
# synthetic data
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SynthConfig:
    n_features: int = 16
    n_attack: int = 2000
    n_benign: int = 2000
    class_separation: float = 6.0
    noise_scale: float = 1.0
    seed: int = 0

    def validate(self):
        if self.n_features < 1 or self.n_attack < 1 or self.n_benign < 1:
            raise ConfigError("synthetic feature and class counts must be >= 1")
        if self.class_separation < 0 or not self.noise_scale > 0:
            raise ConfigError("class_separation must be >= 0 and noise_scale > 0")
        return self


def synth_direction(cfg):
    rng = np.random.default_rng(cfg.seed)
    u = rng.standard_normal(cfg.n_features)
    return u / np.linalg.norm(u)


def synth_generate(cfg):
    """Two isotropic Gaussian clusters whose means differ by ``class_separation``
    along a random unit direction, mapped affinely into [0, 1] and clipped.

    Benign rows come first, then attack rows.
    """
    cfg.validate()
    u = synth_direction(cfg)
    rng = np.random.default_rng([cfg.seed, 1])
    half = 0.5 * cfg.class_separation
    benign = rng.standard_normal((cfg.n_benign, cfg.n_features)) * cfg.noise_scale - half * u
    attack = rng.standard_normal((cfg.n_attack, cfg.n_features)) * cfg.noise_scale + half * u
    raw = np.vstack([benign, attack])
    # +-(half + 4 sigma) lands inside the box; only far-tail values are clipped
    scale = 1.0 / (2.0 * (half + 4.0 * cfg.noise_scale))
    X = np.clip(0.5 + raw * scale, 0.0, 1.0)
    y = np.r_[np.zeros(cfg.n_benign, dtype=np.int64), np.ones(cfg.n_attack, dtype=np.int64)]
    return Dataset(X, y, [f"f{j}" for j in range(cfg.n_features)], normalized=True)
