"""Global and local InterSHAP and modality contributions."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .coalitions import CoalitionGame, interaction_matrices


def _stack(games: Sequence[CoalitionGame] | np.ndarray, M: int | None = None) -> tuple[np.ndarray, int]:
    if isinstance(games, np.ndarray):
        if M is None:
            M = int(np.log2(games.shape[1]))
        return games, M
    games = list(games)
    if not games:
        raise ValueError("need at least one game")
    Ms = {g.modality_count for g in games}
    if len(Ms) != 1:
        raise ValueError(f"games mix modality counts {sorted(Ms)}")
    return np.stack([g.values for g in games]), Ms.pop()


@dataclass
class GlobalExplanation:
    phi_bar: np.ndarray
    signed_mean: np.ndarray
    interactions: float
    behaviour: float
    intershap: float
    modality_total: float
    modality_share: list[float]
    sample_count: int
    degenerate: bool = False

    def to_dict(self) -> dict:
        return {
            "phi_bar": self.phi_bar.tolist(),
            "signed_mean": self.signed_mean.tolist(),
            "interactions": self.interactions,
            "behaviour": self.behaviour,
            "intershap": self.intershap,
            "modality_total": self.modality_total,
            "modality_share": list(self.modality_share),
            "sample_count": self.sample_count,
            "degenerate": self.degenerate,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GlobalExplanation":
        d = dict(d)
        d["phi_bar"] = np.asarray(d["phi_bar"], dtype=np.float64)
        d["signed_mean"] = np.asarray(d["signed_mean"], dtype=np.float64)
        return cls(**d)


def _interaction_ratio(mat: np.ndarray) -> tuple[float, float, float, bool]:
    behaviour = float(mat.sum())
    interactions = float(behaviour - np.trace(mat))
    if behaviour <= 0.0:
        return interactions, behaviour, 0.0, True
    return interactions, behaviour, interactions / behaviour, False


def global_from_matrices(matrices: np.ndarray) -> GlobalExplanation:
    """Aggregate signed per-sample interaction matrices ``(N, M, M)``.

    The absolute value is taken after averaging over samples, so opposing
    per-sample effects cancel.
    """
    signed_mean = matrices.mean(axis=0)
    phi_bar = np.abs(signed_mean)
    interactions, behaviour, intershap, degenerate = _interaction_ratio(phi_bar)
    shares = [0.0] * len(phi_bar) if degenerate else [float(v) / behaviour for v in np.diag(phi_bar)]
    return GlobalExplanation(
        phi_bar=phi_bar,
        signed_mean=signed_mean,
        interactions=interactions,
        behaviour=behaviour,
        intershap=intershap,
        modality_total=0.0 if degenerate else 1.0 - intershap,
        modality_share=shares,
        sample_count=len(matrices),
        degenerate=degenerate,
    )


def global_intershap(games: Sequence[CoalitionGame] | np.ndarray) -> GlobalExplanation:
    values, M = _stack(games)
    return global_from_matrices(interaction_matrices(values, M))


def modality_contributions(expl: GlobalExplanation) -> tuple[float, list[float]]:
    """``(1 - InterSHAP, per-modality diagonal share of behaviour)``; zeros when degenerate."""
    if expl.degenerate:
        return 0.0, [0.0] * len(expl.modality_share)
    return 1.0 - expl.intershap, [float(v) / expl.behaviour for v in np.abs(np.diag(expl.phi_bar))]


@dataclass
class LocalExplanation:
    per_sample_I: np.ndarray
    mean_local: float
    degenerate: np.ndarray
    per_sample_matrices: np.ndarray | None = field(default=None, repr=False)

    def to_dict(self, include_matrices: bool = False) -> dict:
        d = {
            "per_sample_I": self.per_sample_I.tolist(),
            "mean_local": self.mean_local,
            "degenerate": self.degenerate.astype(bool).tolist(),
        }
        if include_matrices and self.per_sample_matrices is not None:
            d["per_sample_matrices"] = self.per_sample_matrices.tolist()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LocalExplanation":
        mats = d.get("per_sample_matrices")
        return cls(
            per_sample_I=np.asarray(d["per_sample_I"], dtype=np.float64),
            mean_local=d["mean_local"],
            degenerate=np.asarray(d["degenerate"], dtype=bool),
            per_sample_matrices=None if mats is None else np.asarray(mats, dtype=np.float64),
        )


def local_from_matrices(matrices: np.ndarray, keep: bool = False) -> LocalExplanation:
    """Per-sample ratio with absolute values inside the sums."""
    absm = np.abs(matrices)
    behaviour = absm.sum(axis=(1, 2))
    diag = np.trace(absm, axis1=1, axis2=2)
    degenerate = behaviour <= 0.0
    ratio = np.zeros(len(matrices))
    ok = ~degenerate
    ratio[ok] = (behaviour[ok] - diag[ok]) / behaviour[ok]
    return LocalExplanation(ratio, float(ratio.mean()), degenerate, matrices if keep else None)


def local_intershap(games: Sequence[CoalitionGame] | np.ndarray, keep: bool = False) -> LocalExplanation:
    values, M = _stack(games)
    return local_from_matrices(interaction_matrices(values, M), keep=keep)
