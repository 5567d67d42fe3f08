from __future__ import annotations

import numpy as np


def f1_macro(predictions, labels, class_count: int) -> float:
    """Unweighted mean of per-class F1, in percent.

    A class with no true and no predicted members scores 0.
    """
    pred = np.asarray(predictions, dtype=np.int64)
    true = np.asarray(labels, dtype=np.int64)
    if pred.shape != true.shape:
        raise ValueError(f"length mismatch: {pred.shape} vs {true.shape}")
    if true.size and (true.min() < 0 or true.max() >= class_count):
        raise ValueError("labels outside [0, class_count)")
    scores = []
    for c in range(class_count):
        tp = np.sum((pred == c) & (true == c))
        fp = np.sum((pred == c) & (true != c))
        fn = np.sum((pred != c) & (true == c))
        denom = 2 * tp + fp + fn
        scores.append(0.0 if denom == 0 else 2 * tp / denom)
    return 100.0 * float(np.mean(scores))


def majority_f1(labels, class_count: int) -> float:
    """Macro-F1 of always predicting the most frequent label."""
    labels = np.asarray(labels, dtype=np.int64)
    majority = int(np.argmax(np.bincount(labels, minlength=class_count)))
    return f1_macro(np.full_like(labels, majority), labels, class_count)
