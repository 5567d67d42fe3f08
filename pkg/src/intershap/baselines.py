"""Performance-based interaction baselines: EMAP gap and SHAPE.

Both are measured in macro-F1 percentage points on a labelled split.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .coalitions import CoalitionGame, interaction_matrix
from .data import ModalBatch, MultimodalDataset, compose
from .metrics import f1_macro, majority_f1
from .value_function import MaskingConfig, Predictor, donor_indices

EMAP_GRID_CAP = 1000


class UnsupportedModalitiesError(ValueError):
    pass


@dataclass
class BaselineScores:
    emap_f1: float | None = None
    model_f1: float | None = None
    emap_gap: float | None = None
    shape_score: float | None = None
    emap_grid_size: int | None = None

    def to_dict(self) -> dict:
        return asdict(self)


def _grid_ids(dataset: MultimodalDataset, split: str, cap: int, seed: int) -> np.ndarray:
    ids = dataset.indices(split)
    if ids.size == 0:
        raise ValueError(f"split {split!r} is empty")
    if ids.size > cap:
        ids = np.sort(np.random.default_rng([seed, 0xE3A9]).choice(ids, size=cap, replace=False))
    return ids


def emap_projection_raw(predictor: Predictor, batch: ModalBatch, row_chunk: int = 64) -> np.ndarray:
    """Additive projection of a two-modality predictor over the batch's own samples.

    ``proj(t) = mean_j f(m1_t, m2_j) + mean_j f(m1_j, m2_t) - mean_jk f(m1_j, m2_k)``,
    unclipped.
    """
    if batch.modality_count != 2:
        raise UnsupportedModalitiesError(f"EMAP is defined for two modalities, got {batch.modality_count}")
    G = len(batch)
    C = predictor.class_count
    row_sum = np.zeros((G, C))
    col_sum = np.zeros((G, C))
    all_ids = np.arange(G)
    for start in range(0, G, row_chunk):
        rows = np.arange(start, min(start + row_chunk, G))
        # grid cell (j, k): modality 0 from sample j, modality 1 (and its bits) from sample k
        first = batch.take(np.repeat(rows, G))
        second = batch.take(np.tile(all_ids, len(rows)))
        probs = np.asarray(predictor.predict_proba(compose(first, second, 0b01)), dtype=np.float64)
        probs = probs.reshape(len(rows), G, C)
        row_sum[rows] = probs.sum(axis=1)
        col_sum += probs.sum(axis=0)
    grand = row_sum.sum(axis=0) / (G * G)
    return row_sum / G + col_sum / G - grand


def to_simplex(p: np.ndarray) -> np.ndarray:
    p = np.clip(p, 0.0, None)
    total = p.sum(axis=1, keepdims=True)
    uniform = np.full_like(p, 1.0 / p.shape[1])
    return np.where(total > 0, p / np.where(total > 0, total, 1.0), uniform)


def emap_projection(
    predictor: Predictor,
    dataset: MultimodalDataset,
    split: str = "test",
    cap: int = EMAP_GRID_CAP,
    seed: int = 0,
) -> tuple[np.ndarray, np.ndarray]:
    """``(sample ids, projected probability vectors)`` over a seeded grid of at most ``cap`` samples."""
    if dataset.modality_count != 2:
        raise UnsupportedModalitiesError(f"EMAP is defined for two modalities, got {dataset.modality_count}")
    ids = _grid_ids(dataset, split, cap, seed)
    return ids, to_simplex(emap_projection_raw(predictor, dataset.batch(ids)))


def emap_gap(
    predictor: Predictor,
    dataset: MultimodalDataset,
    split: str = "test",
    cap: int = EMAP_GRID_CAP,
    seed: int = 0,
) -> BaselineScores:
    """Model macro-F1 minus the macro-F1 of its additive projection."""
    ids, proj = emap_projection(predictor, dataset, split, cap, seed)
    labels = dataset.labels[ids]
    C = predictor.class_count
    model_pred = np.asarray(predictor.predict_proba(dataset.batch(ids))).argmax(axis=1)
    model_f1 = f1_macro(model_pred, labels, C)
    emap_f1 = f1_macro(proj.argmax(axis=1), labels, C)
    return BaselineScores(emap_f1=emap_f1, model_f1=model_f1, emap_gap=model_f1 - emap_f1, emap_grid_size=len(ids))


def performance_game(
    predictor: Predictor,
    dataset: MultimodalDataset,
    split: str,
    cfg: MaskingConfig,
    limit: int | None = None,
) -> CoalitionGame:
    """Macro-F1 as a function of which modalities are left intact.

    Absent modalities are donor-replaced from the training split, averaged
    over ``cfg.repetitions`` draws; the empty coalition scores as always
    predicting the majority class.
    """
    ids = dataset.indices(split)
    if limit is not None:
        ids = ids[:limit]
    if ids.size == 0:
        raise ValueError(f"split {split!r} is empty")
    M = dataset.modality_count
    if M < 2:
        raise UnsupportedModalitiesError("SHAPE needs at least two modalities")
    C = predictor.class_count
    labels = dataset.labels[ids]
    pool_idx = dataset.indices("train")
    pool = dataset.batch(pool_idx)
    present = dataset.batch(ids)
    full = (1 << M) - 1
    values = np.empty(1 << M)
    values[full] = f1_macro(np.asarray(predictor.predict_proba(present)).argmax(axis=1), labels, C)
    values[0] = majority_f1(labels, C)
    for S in range(1, full):
        donors = np.stack([donor_indices(cfg, k, S, len(pool)) for k in ids])  # (n, reps)
        scores = []
        for r in range(cfg.repetitions):
            probs = np.asarray(predictor.predict_proba(compose(present, pool.take(donors[:, r]), S)))
            scores.append(f1_macro(probs.argmax(axis=1), labels, C))
        values[S] = float(np.mean(scores))
    return CoalitionGame(M, values)


def shape_score(
    predictor: Predictor,
    dataset: MultimodalDataset,
    split: str = "test",
    cfg: MaskingConfig = MaskingConfig(),
    limit: int | None = None,
) -> float:
    """Total signed off-diagonal interaction of the performance game, in F1 points."""
    game = performance_game(predictor, dataset, split, cfg, limit)
    mat = interaction_matrix(game)
    return float(mat.sum() - np.trace(mat))
