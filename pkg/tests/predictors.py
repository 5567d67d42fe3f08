"""Toy predictors with known interaction structure."""
from __future__ import annotations

import numpy as np


class ConstantPredictor:
    def __init__(self, probs=(0.7, 0.3)):
        self.probs = np.asarray(probs, dtype=np.float64)
        self.class_count = len(self.probs)

    def predict_proba(self, batch):
        return np.tile(self.probs, (len(batch), 1))


class AdditivePredictor:
    """P(class 1) = 0.5 + sum of bounded per-modality terms; additive in probability space."""

    class_count = 2

    def __init__(self, dims, seed=0, scale=0.5):
        rng = np.random.default_rng(seed)
        self.weights = [rng.standard_normal(d) / np.sqrt(d) for d in dims]
        self.scale = scale / len(dims)

    def predict_proba(self, batch):
        p1 = 0.5 + sum(self.scale * np.tanh(3.0 * (np.asarray(x, np.float64) * w).sum(axis=1))
                       for x, w in zip(batch.modalities, self.weights))
        return np.stack([1 - p1, p1], axis=1)


class ProductPredictor:
    """Pure two-way interaction: P(class 1) = 0.5 + 0.4 * s1 * s2 with s_m = tanh(.)."""

    class_count = 2

    def __init__(self, dims, seed=0):
        rng = np.random.default_rng(seed)
        self.weights = [rng.standard_normal(d) / np.sqrt(d) for d in dims]

    def predict_proba(self, batch):
        s = [np.tanh(3.0 * (np.asarray(x, np.float64) * w).sum(axis=1)) for x, w in zip(batch.modalities, self.weights)]
        p1 = 0.5 + 0.4 * s[0] * s[1]
        return np.stack([1 - p1, p1], axis=1)
