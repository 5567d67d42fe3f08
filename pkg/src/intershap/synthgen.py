"""Synthetic multimodal datasets with controlled cross-modal structure.

Three families:

* ``hd_xor`` - binary information bits projected into noisy high-dimensional
  chunks, distributed over modalities as uniqueness, redundancy or synergy.
* ``sum`` - two modalities ``[x1, r]`` and ``[x2, r]``; the label thresholds
  the sum of a setting-dependent segment.
* ``random`` - Gaussian noise with independent fair labels.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .data import MultimodalDataset

METHODS = ("hd_xor", "sum", "random")
SETTINGS = ("uniqueness", "synergy", "redundancy", "mix1", "mix2", "random")
INFO_MEAN = 0.35
SUM_THRESHOLD = 0.5

DEFAULT_DIMS = {
    2: (110, 90),
    3: (110, 90, 100),
    4: (110, 90, 100, 110),
}


@dataclass
class SynthConfig:
    method: str = "hd_xor"
    setting: str = "synergy"
    N: int = 20_000
    M: int = 2
    dims: tuple[int, ...] | None = None
    info_dim: int = 50
    seed: int = 0
    split: tuple[float, float, float] = (0.7, 0.15, 0.15)
    unique_modality: int = 0

    def __post_init__(self) -> None:
        if self.dims is None:
            if self.method == "sum":
                self.dims = (100, 100)
            else:
                self.dims = DEFAULT_DIMS.get(self.M, tuple([100] * self.M))
        self.dims = tuple(int(d) for d in self.dims)
        self.split = tuple(float(f) for f in self.split)
        if self.method == "random":
            self.setting = "random"
        self.validate()

    def validate(self) -> None:
        if self.method not in METHODS:
            raise ValueError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.setting not in SETTINGS:
            raise ValueError(f"unknown setting {self.setting!r}; expected one of {SETTINGS}")
        if self.N < 10:
            raise ValueError("N must be at least 10")
        if self.M < 1 or len(self.dims) != self.M:
            raise ValueError(f"dims {self.dims} do not match M={self.M}")
        if len(self.split) != 3 or any(f <= 0 for f in self.split) or abs(sum(self.split) - 1.0) > 1e-9:
            raise ValueError(f"split fractions must be positive and sum to 1, got {self.split}")
        if not 0 <= self.unique_modality < self.M:
            raise ValueError(f"unique_modality {self.unique_modality} out of range")
        if self.info_dim < 1:
            raise ValueError("info_dim must be positive")
        if self.method == "hd_xor":
            if self.setting in ("mix1", "mix2", "random"):
                raise ValueError(f"hd_xor does not support setting {self.setting!r}")
            if self.M < 2:
                raise ValueError("hd_xor needs at least two modalities")
            if min(self.dims) < self.info_dim:
                raise ValueError(f"hd_xor needs every dim >= info_dim={self.info_dim}, got {self.dims}")
        if self.method == "sum":
            if self.M != 2:
                raise ValueError("sum datasets have exactly two modalities")
            if self.setting == "random":
                raise ValueError("sum does not support setting 'random'")
            if self.dims[0] != self.dims[1] or self.dims[0] % 4:
                raise ValueError("sum datasets need equal dims divisible by 4")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        d["split"] = list(self.split)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SynthConfig":
        known = {k: v for k, v in d.items() if k in cls.__dataclass_fields__}
        return cls(**known)

    @classmethod
    def from_file(cls, path: str | Path) -> "SynthConfig":
        return cls.from_dict(json.loads(Path(path).read_text()))


def gen_info(A: int, d: int, rng: np.random.Generator, n: int = 1, bits: np.ndarray | None = None):
    """Draw ``n`` sets of ``A`` fair bits, their XOR label and their projections.

    Returns ``(chunks, labels, bits)`` with shapes ``(n, A, d)``, ``(n,)`` and
    ``(n, A)``. Chunk ``a`` is Normal(+0.35, 1) when bit ``a`` is 1, else
    Normal(-0.35, 1). ``bits`` may be forced.
    """
    if A < 2 or d < 1:
        raise ValueError("gen_info needs A >= 2 and d >= 1")
    if bits is None:
        bits = rng.integers(0, 2, size=(n, A), dtype=np.uint8)
    else:
        bits = np.asarray(bits, dtype=np.uint8).reshape(-1, A)
        n = len(bits)
    labels = np.bitwise_xor.reduce(bits, axis=1).astype(np.uint8)
    means = np.where(bits == 1, INFO_MEAN, -INFO_MEAN)[:, :, None]
    chunks = means + rng.standard_normal((n, A, d))
    return chunks, labels, bits


def _unit(x: np.ndarray) -> np.ndarray:
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def split_dataset(N: int, fractions, seed: int) -> np.ndarray:
    """Seeded shuffle then contiguous train/val/test blocks; remainder goes to train."""
    fractions = tuple(fractions)
    if len(fractions) != 3 or any(f <= 0 for f in fractions) or abs(sum(fractions) - 1) > 1e-9:
        raise ValueError(f"bad split fractions {fractions}")
    n_val = int(np.floor(N * fractions[1] + 1e-9))
    n_test = int(np.floor(N * fractions[2] + 1e-9))
    n_train = N - n_val - n_test
    perm = np.random.default_rng([seed, 0x5EED]).permutation(N)
    split = np.empty(N, dtype=np.uint8)
    split[perm[:n_train]] = 0
    split[perm[n_train:n_train + n_val]] = 1
    split[perm[n_train + n_val:]] = 2
    return split


def hd_xor(cfg: SynthConfig) -> MultimodalDataset:
    if cfg.method != "hd_xor":
        raise ValueError("hd_xor needs method='hd_xor'")
    rng = np.random.default_rng(cfg.seed)
    M, N, d = cfg.M, cfg.N, cfg.info_dim
    A = M if (cfg.setting == "synergy" and M >= 3) else 2
    width = d if cfg.setting == "synergy" else 2 * d
    projections = [rng.uniform(-0.5, 0.5, size=(dim, width)) for dim in cfg.dims]
    chunks, labels, bits = gen_info(A, d, rng, n=N)

    if cfg.setting == "redundancy":
        info = chunks[:, :2].reshape(N, 2 * d)
        raw = [info for _ in range(M)]
        owners = tuple(tuple(range(M)) for _ in range(A))
    elif cfg.setting == "uniqueness":
        u = cfg.unique_modality
        info = chunks[:, :2].reshape(N, 2 * d)
        raw = [info if m == u else rng.standard_normal((N, 2 * d)) for m in range(M)]
        owners = ((u,), (u,))
    else:  # synergy
        raw = [chunks[:, m] for m in range(M)]
        owners = tuple((m,) for m in range(M))

    mods = [(_unit(x) @ P.T).astype(np.float32) for x, P in zip(raw, projections)]
    return MultimodalDataset(
        modalities=mods,
        labels=labels,
        split=split_dataset(N, cfg.split, cfg.seed),
        latent_bits=bits,
        bit_owners=owners,
        projections=[P.astype(np.float32) for P in projections],
        config=cfg.to_dict(),
    )


def sum_segments(cfg: SynthConfig) -> list[tuple[int, slice]]:
    """``(modality, slice)`` pieces whose sum defines the label, for the given setting."""
    half = cfg.dims[0] // 2
    x = slice(0, half)
    r = slice(half, 2 * half)
    q = half // 2
    if cfg.setting == "redundancy":
        return [(0, r)]
    if cfg.setting == "uniqueness":
        return [(cfg.unique_modality, x)]
    if cfg.setting == "synergy":
        return [(0, x), (1, x)]
    if cfg.setting == "mix1":
        return [(0, slice(0, q)), (1, slice(q, half))]
    if cfg.setting == "mix2":
        return [(0, slice(q, half)), (1, slice(0, q))]
    raise ValueError(f"unsupported sum setting {cfg.setting!r}")


def sum_dataset(cfg: SynthConfig) -> MultimodalDataset:
    if cfg.method != "sum":
        raise ValueError("sum_dataset needs method='sum'")
    rng = np.random.default_rng(cfg.seed)
    N, half = cfg.N, cfg.dims[0] // 2
    x1 = _unit(rng.standard_normal((N, half)))
    x2 = _unit(rng.standard_normal((N, half)))
    r = _unit(rng.standard_normal((N, half)))
    mods = [np.concatenate([x1, r], axis=1), np.concatenate([x2, r], axis=1)]
    total = sum(mods[m][:, sl].sum(axis=1) for m, sl in sum_segments(cfg))
    labels = (total > SUM_THRESHOLD).astype(np.uint8)
    return MultimodalDataset(
        modalities=[x.astype(np.float32) for x in mods],
        labels=labels,
        split=split_dataset(N, cfg.split, cfg.seed),
        config=cfg.to_dict(),
    )


def random_dataset(cfg: SynthConfig) -> MultimodalDataset:
    rng = np.random.default_rng(cfg.seed)
    mods = [rng.standard_normal((cfg.N, dim)).astype(np.float32) for dim in cfg.dims]
    labels = rng.integers(0, 2, size=cfg.N, dtype=np.uint8)
    return MultimodalDataset(
        modalities=mods,
        labels=labels,
        split=split_dataset(cfg.N, cfg.split, cfg.seed),
        config=cfg.to_dict(),
    )


def generate(cfg: SynthConfig) -> MultimodalDataset:
    return {"hd_xor": hd_xor, "sum": sum_dataset, "random": random_dataset}[cfg.method](cfg)
