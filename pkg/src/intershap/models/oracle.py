from __future__ import annotations

import numpy as np

from ..data import ModalBatch, MultimodalSample, ProvenanceError


class UnsupportedSettingError(ValueError):
    pass


class XorOracle:
    """The generating function of the HD-XOR labels, read off the latent bits.

    For uniqueness only the bits carried by the unique modality are used.
    Outputs are one-hot on the parity of the used bits, so the oracle
    reproduces the dataset labels exactly.
    """

    class_count = 2

    def __init__(self, setting: str, unique_modality: int = 0):
        if setting not in ("uniqueness", "synergy"):
            raise UnsupportedSettingError(
                f"the XOR oracle only applies to synergy and uniqueness datasets, not {setting!r}: "
                "for redundancy it is ambiguous which modality's copy of the information to read, "
                "and random labels were not generated by XOR"
            )
        self.setting = setting
        self.unique_modality = unique_modality

    def _used_bits(self, bit_owners) -> list[int]:
        if self.setting == "uniqueness":
            return [a for a, owners in enumerate(bit_owners) if self.unique_modality in owners]
        return list(range(len(bit_owners)))

    def predict_proba(self, batch: ModalBatch) -> np.ndarray:
        if batch.latent_bits is None:
            raise ProvenanceError("XOR oracle needs latent bits; dataset has no generation provenance")
        used = self._used_bits(batch.bit_owners) if batch.bit_owners else list(range(batch.latent_bits.shape[1]))
        parity = np.bitwise_xor.reduce(batch.latent_bits[:, used].astype(np.int64), axis=1)
        out = np.zeros((len(batch), 2))
        out[np.arange(len(batch)), parity] = 1.0
        return out


def xor_oracle_predict(sample: MultimodalSample, setting: str, unique_modality: int = 0) -> np.ndarray:
    if sample.latent_bits is None:
        raise ProvenanceError("sample carries no latent bits")
    return XorOracle(setting, unique_modality).predict_proba(ModalBatch.from_samples([sample]))[0]
