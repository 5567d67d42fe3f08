"""Coalition games from a black-box predictor by masking modalities.

An absent modality is replaced with the same modality of a donor sample drawn
uniformly from the baseline pool (the training split). One donor supplies all
absent modalities of a draw. Each coalition is evaluated ``repetitions``
times and averaged. Every (sample, coalition) pair gets its own random stream,
so results do not depend on batching, ordering or thread count.
"""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Protocol, Sequence

import numpy as np

from .coalitions import CoalitionGame, enumerate_coalitions
from .data import ModalBatch, MultimodalDataset, MultimodalSample, compose

TARGET_MODES = ("anchored", "max_per_coalition")


class Predictor(Protocol):
    class_count: int

    def predict_proba(self, batch: ModalBatch) -> np.ndarray: ...


@dataclass(frozen=True)
class MaskingConfig:
    repetitions: int = 64
    seed: int = 0

    def __post_init__(self) -> None:
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")


@dataclass(frozen=True)
class TargetRule:
    """Which probability the game tracks.

    ``anchored`` fixes the class to the argmax of the unmasked prediction and
    reads that class for every coalition; ``max_per_coalition`` takes the
    largest class probability of each masked prediction instead.
    """

    mode: str = "anchored"

    def __post_init__(self) -> None:
        if self.mode not in TARGET_MODES:
            raise ValueError(f"target mode must be one of {TARGET_MODES}")


def thread_count(threads: int | None = None) -> int:
    if threads is None:
        threads = int(os.environ.get("INTERSHAP_THREADS", "1") or 1)
    return max(1, int(threads))


def donor_indices(cfg: MaskingConfig, sample_index: int, mask: int, pool_size: int) -> np.ndarray:
    """Positions in the baseline pool used for one (sample, coalition) pair."""
    rng = np.random.default_rng([cfg.seed, int(sample_index), int(mask)])
    return rng.integers(0, pool_size, size=cfg.repetitions)


def _check_probs(probs: np.ndarray, n: int, class_count: int) -> np.ndarray:
    probs = np.asarray(probs, dtype=np.float64)
    if probs.shape != (n, class_count):
        raise ValueError(f"predictor returned shape {probs.shape}, expected {(n, class_count)}")
    return probs


def _games_for_chunk(
    batch: ModalBatch,
    sample_ids: np.ndarray,
    predictor: Predictor,
    pool: ModalBatch,
    cfg: MaskingConfig,
    rule: TargetRule,
) -> tuple[np.ndarray, np.ndarray]:
    M = batch.modality_count
    n, reps, C = len(batch), cfg.repetitions, predictor.class_count
    full = (1 << M) - 1
    base = _check_probs(predictor.predict_proba(batch), n, C)
    anchor = base.argmax(axis=1)
    values = np.empty((n, 1 << M))
    values[:, full] = base[np.arange(n), anchor] if rule.mode == "anchored" else base.max(axis=1)

    masks = [S for S in enumerate_coalitions(M) if S != full]
    # present rows repeated per draw; donors gathered per (sample, mask)
    present = batch.take(np.repeat(np.arange(n), reps))
    pieces = []
    for S in masks:
        donors = np.concatenate([donor_indices(cfg, k, S, len(pool)) for k in sample_ids])
        pieces.append(compose(present, pool.take(donors), S))
    probs = _check_probs(predictor.predict_proba(ModalBatch.concat(pieces)), len(masks) * n * reps, C)
    probs = probs.reshape(len(masks), n, reps, C)
    if rule.mode == "anchored":
        target = np.take_along_axis(probs, anchor[None, :, None, None], axis=3)[..., 0]
    else:
        target = probs.max(axis=3)
    values[:, masks] = target.mean(axis=2).T
    return values, anchor


@dataclass
class GameBatch:
    """Games for a list of samples plus the bookkeeping reports need."""

    values: np.ndarray  # (N, 2**M)
    anchor: np.ndarray  # (N,) anchored class per sample
    sample_ids: np.ndarray
    modality_count: int

    def games(self) -> list[CoalitionGame]:
        return [CoalitionGame(self.modality_count, v) for v in self.values]


def game_values(
    dataset: MultimodalDataset,
    sample_ids: Sequence[int],
    predictor: Predictor,
    cfg: MaskingConfig,
    rule: TargetRule = TargetRule(),
    pool_split: str = "train",
    chunk: int = 64,
    threads: int | None = None,
) -> GameBatch:
    """Games for ``sample_ids`` of ``dataset``, baseline pool = ``pool_split``."""
    if predictor.class_count < 2:
        raise ValueError("predictor must have at least two classes")
    sample_ids = np.asarray(sample_ids, dtype=np.int64)
    if sample_ids.size == 0:
        raise ValueError("no samples to explain")
    pool_idx = dataset.indices(pool_split)
    if pool_idx.size == 0:
        raise ValueError(f"baseline pool ({pool_split} split) is empty")
    pool = dataset.batch(pool_idx)
    starts = list(range(0, len(sample_ids), chunk))

    def work(start: int):
        ids = sample_ids[start:start + chunk]
        return _games_for_chunk(dataset.batch(ids), ids, predictor, pool, cfg, rule)

    n_threads = thread_count(threads)
    if n_threads == 1:
        results = [work(s) for s in starts]
    else:
        with ThreadPoolExecutor(n_threads) as ex:
            results = list(ex.map(work, starts))
    values = np.concatenate([r[0] for r in results])
    anchor = np.concatenate([r[1] for r in results])
    return GameBatch(values, anchor, sample_ids, dataset.modality_count)


def game_batch(
    dataset: MultimodalDataset,
    split: str,
    predictor: Predictor,
    cfg: MaskingConfig,
    rule: TargetRule = TargetRule(),
    limit: int | None = None,
    threads: int | None = None,
) -> list[CoalitionGame]:
    """One game per sample of ``split`` (first ``limit`` samples if given), in split order."""
    ids = dataset.indices(split)
    if ids.size == 0:
        raise ValueError(f"split {split!r} is empty")
    if limit is not None:
        ids = ids[:limit]
    return game_values(dataset, ids, predictor, cfg, rule, threads=threads).games()


def build_game(
    sample: MultimodalSample,
    predictor: Predictor,
    cfg: MaskingConfig,
    rule: TargetRule = TargetRule(),
    baseline_pool: Sequence[MultimodalSample] | ModalBatch = (),
    sample_index: int = 0,
) -> CoalitionGame:
    """Game for a single sample against an explicit baseline pool."""
    pool = baseline_pool if isinstance(baseline_pool, ModalBatch) else (
        ModalBatch.from_samples(list(baseline_pool)) if len(baseline_pool) else None
    )
    if pool is None or len(pool) == 0:
        raise ValueError("baseline pool is empty")
    batch = ModalBatch.from_samples([sample])
    values, _ = _games_for_chunk(batch, np.array([sample_index]), predictor, pool, cfg, rule)
    return CoalitionGame(sample.modality_count, values[0])
