"""Exact coalition games over modalities.

A game over ``M`` modalities is stored as a dense float array of length
``2**M`` indexed by coalition bitmask (bit ``i`` set means modality ``i`` is
present). All iteration is in ascending bit-pattern order.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from math import factorial
from typing import Callable, Iterable, Sequence

import numpy as np

MAX_MODALITIES = 20


class MissingCoalitionError(ValueError):
    """Raised when a game does not define a value for every coalition."""


def _check_modality_count(M: int) -> None:
    if not isinstance(M, (int, np.integer)) or M < 1 or M > MAX_MODALITIES:
        raise ValueError(f"modality count must be in [1, {MAX_MODALITIES}], got {M!r}")


def popcount(mask: int) -> int:
    return bin(mask).count("1")


def enumerate_coalitions(M: int) -> list[int]:
    """All ``2**M`` coalition masks in ascending order."""
    _check_modality_count(M)
    return list(range(1 << M))


def mask_from_members(members: Iterable[int]) -> int:
    mask = 0
    for i in members:
        mask |= 1 << int(i)
    return mask


def members(mask: int, M: int) -> tuple[int, ...]:
    return tuple(i for i in range(M) if mask >> i & 1)


@lru_cache(maxsize=None)
def shapley_weight_exact(s: int, M: int) -> Fraction:
    if M < 1 or s < 0 or s > M - 1:
        raise ValueError(f"shapley weight needs 0 <= s <= M-1, got s={s}, M={M}")
    return Fraction(factorial(s) * factorial(M - s - 1), factorial(M))


def shapley_weight(s: int, M: int) -> float:
    """``s! (M-s-1)! / M!``, evaluated exactly and rounded once."""
    return float(shapley_weight_exact(s, M))


@lru_cache(maxsize=None)
def sii_weight_exact(s: int, M: int) -> Fraction:
    if M < 2 or s < 0 or s > M - 2:
        raise ValueError(f"interaction weight needs M >= 2 and 0 <= s <= M-2, got s={s}, M={M}")
    return Fraction(factorial(s) * factorial(M - s - 2), 2 * factorial(M - 1))


def sii_weight(s: int, M: int) -> float:
    """``s! (M-s-2)! / (2 (M-1)!)``, evaluated exactly and rounded once."""
    return float(sii_weight_exact(s, M))


@dataclass(frozen=True)
class CoalitionGame:
    """Value of every modality coalition for one explained sample."""

    modality_count: int
    values: np.ndarray

    def __post_init__(self) -> None:
        _check_modality_count(self.modality_count)
        values = np.asarray(self.values, dtype=np.float64)
        if values.shape != (1 << self.modality_count,):
            raise MissingCoalitionError(
                f"game over {self.modality_count} modalities needs {1 << self.modality_count} "
                f"values, got shape {values.shape}"
            )
        if not np.all(np.isfinite(values)):
            raise MissingCoalitionError("game contains non-finite (missing) coalition values")
        values = values.copy()
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @classmethod
    def from_mapping(cls, M: int, mapping: dict) -> "CoalitionGame":
        """Build from ``{mask or iterable of members: value}``; every coalition is required."""
        _check_modality_count(M)
        values = np.full(1 << M, np.nan)
        for key, value in mapping.items():
            mask = key if isinstance(key, (int, np.integer)) else mask_from_members(key)
            if not 0 <= mask < 1 << M:
                raise ValueError(f"coalition {key!r} out of range for M={M}")
            values[mask] = value
        missing = np.flatnonzero(np.isnan(values))
        if missing.size:
            raise MissingCoalitionError(f"no value for coalitions {missing.tolist()}")
        return cls(M, values)

    @classmethod
    def from_function(cls, M: int, fn: Callable[[int], float]) -> "CoalitionGame":
        return cls(M, np.array([fn(mask) for mask in enumerate_coalitions(M)], dtype=np.float64))

    @property
    def full(self) -> int:
        return (1 << self.modality_count) - 1

    def __getitem__(self, mask: int) -> float:
        return float(self.values[mask])

    def __add__(self, other: "CoalitionGame") -> "CoalitionGame":
        if other.modality_count != self.modality_count:
            raise ValueError("cannot add games over different modality counts")
        return CoalitionGame(self.modality_count, self.values + other.values)

    def scaled(self, factor: float) -> "CoalitionGame":
        return CoalitionGame(self.modality_count, self.values * factor)


def _check_index(game: CoalitionGame, i: int) -> None:
    if not 0 <= i < game.modality_count:
        raise ValueError(f"modality index {i} out of range for M={game.modality_count}")


def shapley_value(game: CoalitionGame, i: int) -> float:
    M = game.modality_count
    _check_index(game, i)
    v = game.values
    bit = 1 << i
    total = 0.0
    for S in range(1 << M):
        if S & bit:
            continue
        total += shapley_weight(popcount(S), M) * (v[S | bit] - v[S])
    return total


def shapley_values(game: CoalitionGame) -> np.ndarray:
    return np.array([shapley_value(game, i) for i in range(game.modality_count)])


def interaction_index(game: CoalitionGame, i: int, j: int) -> float:
    """Pairwise Shapley interaction index between modalities ``i`` and ``j``."""
    M = game.modality_count
    _check_index(game, i)
    _check_index(game, j)
    if i == j:
        raise ValueError("interaction_index needs i != j; use self_interaction for the diagonal")
    v = game.values
    bi, bj = 1 << i, 1 << j
    both = bi | bj
    total = 0.0
    for S in range(1 << M):
        if S & both:
            continue
        delta = v[S | both] - v[S | bi] - v[S | bj] + v[S]
        total += sii_weight(popcount(S), M) * delta
    return total


def self_interaction(phi_i: float, offdiag_row: Sequence[float]) -> float:
    """Shapley value minus the summed pairwise interactions of that modality."""
    return phi_i - float(sum(offdiag_row))


def interaction_matrix(game: CoalitionGame) -> np.ndarray:
    """Signed ``M x M`` matrix: pairwise interactions off the diagonal, self terms on it.

    The entries sum to ``v(full) - v(empty)``.
    """
    M = game.modality_count
    out = np.zeros((M, M))
    for i in range(M):
        for j in range(i + 1, M):
            out[i, j] = out[j, i] = interaction_index(game, i, j)
    phi = shapley_values(game)
    for i in range(M):
        out[i, i] = self_interaction(phi[i], [out[i, j] for j in range(M) if j != i])
    return out


@lru_cache(maxsize=None)
def _operators(M: int) -> tuple[np.ndarray, np.ndarray]:
    """Linear maps from a game vector to Shapley values and pairwise interactions.

    Returns ``(shap_op, pair_op)`` with shapes ``(M, 2**M)`` and ``(M, M, 2**M)``.
    """
    n = 1 << M
    shap_op = np.zeros((M, n))
    pair_op = np.zeros((M, M, n))
    for i in range(M):
        bi = 1 << i
        for S in range(n):
            if S & bi:
                continue
            w = shapley_weight(popcount(S), M)
            shap_op[i, S | bi] += w
            shap_op[i, S] -= w
        for j in range(i + 1, M):
            bj = 1 << j
            for S in range(n):
                if S & (bi | bj):
                    continue
                w = sii_weight(popcount(S), M)
                pair_op[i, j, S | bi | bj] += w
                pair_op[i, j, S | bi] -= w
                pair_op[i, j, S | bj] -= w
                pair_op[i, j, S] += w
            pair_op[j, i] = pair_op[i, j]
    shap_op.flags.writeable = False
    pair_op.flags.writeable = False
    return shap_op, pair_op


def interaction_matrices(values: np.ndarray, M: int) -> np.ndarray:
    """Vectorised :func:`interaction_matrix` for a stack of games.

    ``values`` has shape ``(N, 2**M)``; the result has shape ``(N, M, M)``.
    """
    _check_modality_count(M)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim != 2 or values.shape[1] != 1 << M:
        raise MissingCoalitionError(f"expected shape (N, {1 << M}), got {values.shape}")
    shap_op, pair_op = _operators(M)
    phi = values @ shap_op.T
    out = np.einsum("ijk,nk->nij", pair_op, values)
    diag = phi - out.sum(axis=2)  # pair_op diagonal is zero
    idx = np.arange(M)
    out[:, idx, idx] = diag
    return out
