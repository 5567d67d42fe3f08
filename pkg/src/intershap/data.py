"""Multimodal samples, batches and the dataset directory format."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

FORMAT_VERSION = 1
SPLIT_NAMES = ("train", "val", "test")
SPLIT_CODES = {name: code for code, name in enumerate(SPLIT_NAMES)}


class ProvenanceError(ValueError):
    """A sample lacks the latent generation bits an operation needs."""


@dataclass
class MultimodalSample:
    """One sample: a vector per modality, a label and optional latent bits.

    ``latent_bits`` holds the generating bits; ``bit_owners[a]`` lists the
    modalities that carry bit ``a`` so the bit travels with them when masked.
    """

    modalities: list[np.ndarray]
    label: int = 0
    latent_bits: np.ndarray | None = None
    bit_owners: tuple[tuple[int, ...], ...] = ()

    @property
    def modality_count(self) -> int:
        return len(self.modalities)


@dataclass
class ModalBatch:
    """Column-oriented batch of samples: ``modalities[m]`` has shape ``(n, dims[m])``."""

    modalities: list[np.ndarray]
    latent_bits: np.ndarray | None = None
    bit_owners: tuple[tuple[int, ...], ...] = ()

    def __post_init__(self) -> None:
        sizes = {len(x) for x in self.modalities}
        if len(sizes) > 1:
            raise ValueError(f"modalities disagree on batch size: {sorted(sizes)}")
        if self.latent_bits is not None and len(self.latent_bits) != len(self):
            raise ValueError("latent_bits rows do not match batch size")

    def __len__(self) -> int:
        return len(self.modalities[0]) if self.modalities else 0

    @property
    def modality_count(self) -> int:
        return len(self.modalities)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(x.shape[1] for x in self.modalities)

    @classmethod
    def from_samples(cls, samples: Sequence[MultimodalSample]) -> "ModalBatch":
        if not samples:
            raise ValueError("empty sample list")
        M = samples[0].modality_count
        mods = [np.stack([np.asarray(s.modalities[m]) for s in samples]) for m in range(M)]
        latent = None
        if all(s.latent_bits is not None for s in samples):
            latent = np.stack([np.asarray(s.latent_bits, dtype=np.uint8) for s in samples])
        return cls(mods, latent, samples[0].bit_owners)

    def take(self, idx: np.ndarray | Sequence[int]) -> "ModalBatch":
        idx = np.asarray(idx, dtype=np.int64)
        latent = None if self.latent_bits is None else self.latent_bits[idx]
        return ModalBatch([x[idx] for x in self.modalities], latent, self.bit_owners)

    def sample(self, k: int, label: int = 0) -> MultimodalSample:
        latent = None if self.latent_bits is None else self.latent_bits[k].copy()
        return MultimodalSample([x[k].copy() for x in self.modalities], label, latent, self.bit_owners)

    @staticmethod
    def concat(batches: Sequence["ModalBatch"]) -> "ModalBatch":
        first = batches[0]
        mods = [np.concatenate([b.modalities[m] for b in batches]) for m in range(first.modality_count)]
        latent = None
        if first.latent_bits is not None:
            latent = np.concatenate([b.latent_bits for b in batches])
        return ModalBatch(mods, latent, first.bit_owners)


def _bits_present(bit_owners: Sequence[Sequence[int]], mask: int) -> np.ndarray:
    return np.array([any(mask >> m & 1 for m in owners) for owners in bit_owners], dtype=bool)


def compose(present: ModalBatch, donor: ModalBatch, mask: int) -> ModalBatch:
    """Keep modalities in ``mask`` from ``present`` and take the rest from ``donor``.

    Latent bits follow the modalities that carry them.
    """
    if present.dims != donor.dims or len(present) != len(donor):
        raise ValueError(f"shape mismatch: {present.dims} x {len(present)} vs {donor.dims} x {len(donor)}")
    mods = [
        present.modalities[m] if mask >> m & 1 else donor.modalities[m]
        for m in range(present.modality_count)
    ]
    latent = None
    if present.latent_bits is not None and donor.latent_bits is not None:
        keep = _bits_present(present.bit_owners, mask)
        latent = np.where(keep[None, :], present.latent_bits, donor.latent_bits)
    return ModalBatch(mods, latent, present.bit_owners)


def mask_sample(sample: MultimodalSample, mask: int, replacement: MultimodalSample) -> MultimodalSample:
    """Single-sample form of :func:`compose`; the label comes from whichever
    sample supplies the output when the mask is empty or full."""
    if sample.modality_count != replacement.modality_count or any(
        np.shape(a) != np.shape(b) for a, b in zip(sample.modalities, replacement.modalities)
    ):
        raise ValueError("sample and replacement have different modality shapes")
    M = sample.modality_count
    mods = [np.array(sample.modalities[m] if mask >> m & 1 else replacement.modalities[m]) for m in range(M)]
    latent = None
    if sample.latent_bits is not None and replacement.latent_bits is not None:
        keep = _bits_present(sample.bit_owners, mask)
        latent = np.where(keep, sample.latent_bits, replacement.latent_bits).astype(np.uint8)
    label = replacement.label if mask == 0 else sample.label
    return MultimodalSample(mods, label, latent, sample.bit_owners)


@dataclass
class MultimodalDataset:
    """A dataset held column-wise, with split membership and generation metadata."""

    modalities: list[np.ndarray]
    labels: np.ndarray
    split: np.ndarray
    latent_bits: np.ndarray | None = None
    bit_owners: tuple[tuple[int, ...], ...] = ()
    projections: list[np.ndarray] | None = None
    config: dict = field(default_factory=dict)
    class_count: int = 2

    def __post_init__(self) -> None:
        n = len(self.labels)
        for m, x in enumerate(self.modalities):
            if len(x) != n:
                raise ValueError(f"modality {m} has {len(x)} rows, expected {n}")
        if len(self.split) != n:
            raise ValueError("split assignment length mismatch")

    def __len__(self) -> int:
        return len(self.labels)

    @property
    def modality_count(self) -> int:
        return len(self.modalities)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(x.shape[1] for x in self.modalities)

    def indices(self, split: str) -> np.ndarray:
        if split == "all":
            return np.arange(len(self))
        return np.flatnonzero(self.split == SPLIT_CODES[split])

    def batch(self, idx: np.ndarray | Sequence[int] | None = None) -> ModalBatch:
        full = ModalBatch(self.modalities, self.latent_bits, self.bit_owners)
        return full if idx is None else full.take(idx)

    def sample(self, k: int) -> MultimodalSample:
        return self.batch().sample(k, int(self.labels[k]))

    def samples(self, idx: Sequence[int]) -> list[MultimodalSample]:
        return [self.sample(int(k)) for k in idx]


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _write_array(path: Path, arr: np.ndarray, dtype: str) -> str:
    path.write_bytes(np.ascontiguousarray(arr, dtype=np.dtype(dtype)).tobytes())
    return _sha256(path)


def save_dataset(ds: MultimodalDataset, out_dir: str | Path) -> dict:
    """Write the dataset directory and return its manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    checksums = {}
    for m, x in enumerate(ds.modalities):
        checksums[f"modality_{m}.f32"] = _write_array(out / f"modality_{m}.f32", x, "<f4")
    checksums["labels.u8"] = _write_array(out / "labels.u8", ds.labels, "u1")
    checksums["split.u8"] = _write_array(out / "split.u8", ds.split, "u1")
    if ds.latent_bits is not None:
        checksums["latent_bits.u8"] = _write_array(out / "latent_bits.u8", ds.latent_bits, "u1")
    proj_shapes = []
    for m, p in enumerate(ds.projections or []):
        checksums[f"proj_{m}.f32"] = _write_array(out / f"proj_{m}.f32", p, "<f4")
        proj_shapes.append(list(p.shape))
    cfg = dict(ds.config)
    manifest = {
        "format_version": FORMAT_VERSION,
        "method": cfg.get("method", "external"),
        "setting": cfg.get("setting"),
        "unique_modality": cfg.get("unique_modality"),
        "N": len(ds),
        "M": ds.modality_count,
        "dims": list(ds.dims),
        "info_dim": cfg.get("info_dim"),
        "seed": cfg.get("seed"),
        "split_fractions": cfg.get("split", [0.7, 0.15, 0.15]),
        "split_sizes": {name: int(np.sum(ds.split == code)) for name, code in SPLIT_CODES.items()},
        "class_count": ds.class_count,
        "latent_bit_count": 0 if ds.latent_bits is None else int(ds.latent_bits.shape[1]),
        "bit_owners": [list(o) for o in ds.bit_owners],
        "projection_shapes": proj_shapes,
        "checksums": checksums,
    }
    (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
    return manifest


def manifest_hash(path: str | Path) -> str:
    return _sha256(Path(path))


def load_dataset(path: str | Path, verify: bool = True) -> MultimodalDataset:
    root = Path(path)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise FileNotFoundError(f"no manifest.json in {root}")
    manifest = json.loads(manifest_path.read_text())
    if manifest.get("format_version") != FORMAT_VERSION:
        raise ValueError(f"unsupported dataset format version {manifest.get('format_version')!r}")
    if verify:
        for name, digest in manifest["checksums"].items():
            if _sha256(root / name) != digest:
                raise ValueError(f"checksum mismatch for {name}")
    N, dims = manifest["N"], manifest["dims"]

    def read(name: str, dtype: str, shape: tuple) -> np.ndarray:
        arr = np.frombuffer((root / name).read_bytes(), dtype=np.dtype(dtype))
        return arr.reshape(shape).copy()

    mods = [read(f"modality_{m}.f32", "<f4", (N, d)).astype(np.float32) for m, d in enumerate(dims)]
    labels = read("labels.u8", "u1", (N,))
    split = read("split.u8", "u1", (N,))
    latent = None
    if manifest.get("latent_bit_count"):
        latent = read("latent_bits.u8", "u1", (N, manifest["latent_bit_count"]))
    projections = [
        read(f"proj_{m}.f32", "<f4", tuple(shape)).astype(np.float32)
        for m, shape in enumerate(manifest.get("projection_shapes", []))
    ] or None
    config = {
        k: manifest.get(k)
        for k in ("method", "setting", "unique_modality", "info_dim", "seed")
    }
    config.update(N=N, M=manifest["M"], dims=list(dims), split=manifest["split_fractions"])
    return MultimodalDataset(
        modalities=mods,
        labels=labels,
        split=split,
        latent_bits=latent,
        bit_owners=tuple(tuple(o) for o in manifest.get("bit_owners", [])),
        projections=projections,
        config=config,
        class_count=manifest.get("class_count", 2),
    )
