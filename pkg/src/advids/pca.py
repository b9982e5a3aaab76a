"""Principal component analysis via the sample covariance eigendecomposition."""

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError, SchemaError, ShapeError


@dataclass
class PcaModel:
    mean: np.ndarray
    components: np.ndarray  # (k_max, m), rows sorted by decreasing variance
    explained_variance_ratio: np.ndarray

    @property
    def n_components(self):
        return self.components.shape[0]

    def save(self, path):
        """Rows: mean, one row per component, explained-variance ratios (padded with blanks to width m)."""
        m = len(self.mean)
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow([repr(float(v)) for v in self.mean])
            for comp in self.components:
                w.writerow([repr(float(v)) for v in comp])
            ratios = [repr(float(v)) for v in self.explained_variance_ratio]
            w.writerow(ratios + [""] * (m - len(ratios)))
        return Path(path)

    @classmethod
    def load(cls, path):
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
        if len(rows) < 3:
            raise SchemaError(f"{path}: expected mean, component and ratio rows")
        mean = np.array([float(v) for v in rows[0]])
        components = np.array([[float(v) for v in r] for r in rows[1:-1]])
        ratios = np.array([float(v) for v in rows[-1] if v != ""])
        return cls(mean, components, ratios)


def fit_pca(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2:
        raise DataError("PCA needs at least 2 rows")
    if not np.all(np.isfinite(X)):
        raise DataError("PCA input contains non-finite values")
    mean = X.mean(axis=0)
    centered = X - mean
    cov = centered.T @ centered / (X.shape[0] - 1)
    evals, evecs = np.linalg.eigh(cov)
    evals = np.clip(evals, 0.0, None)
    order = np.argsort(-evals, kind="stable")
    evals, comps = evals[order], evecs[:, order].T
    # sign convention: largest-magnitude entry of each component is positive
    pivot = np.argmax(np.abs(comps), axis=1)
    signs = np.sign(comps[np.arange(len(comps)), pivot])
    comps = comps * np.where(signs == 0, 1.0, signs)[:, None]
    total = evals.sum()
    ratios = evals / total if total > 0 else np.zeros_like(evals)
    return PcaModel(mean, comps, ratios)


def select_components(model, threshold):
    """Smallest ``k`` whose cumulative explained-variance ratio reaches ``threshold``."""
    if not 0 < threshold <= 1:
        raise ConfigError(f"variance threshold must lie in (0, 1], got {threshold}")
    cumulative = np.cumsum(model.explained_variance_ratio)
    hits = np.flatnonzero(cumulative >= threshold - 1e-12)
    return int(hits[0]) + 1 if len(hits) else model.n_components


def transform(model, X, k):
    X = np.asarray(X, dtype=np.float64)
    if not 1 <= k <= model.n_components:
        raise ConfigError(f"k={k} outside 1..{model.n_components}")
    if X.shape[-1] != len(model.mean):
        raise ShapeError(f"PCA fitted on {len(model.mean)} features, data has {X.shape[-1]}")
    return (X - model.mean) @ model.components[:k].T


def inverse_transform(model, Z):
    Z = np.asarray(Z, dtype=np.float64)
    k = Z.shape[-1]
    return Z @ model.components[:k] + model.mean
