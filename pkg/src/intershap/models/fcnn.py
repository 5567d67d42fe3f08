"""Small fully connected multimodal network with early/intermediate/late fusion.

Every fusion strategy is the same three-layer MLP over the concatenated
modalities; intermediate and late fusion restrict some weight matrices to be
block diagonal (one block per modality), so the modalities only meet at the
fusion point:

* early - all three layers dense.
* intermediate - input layer block diagonal, dense from the hidden layer on.
* late - input and hidden layers block diagonal, dense output layer.
"""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Sequence

import numpy as np

from ..data import ModalBatch

FUSIONS = ("early", "intermediate", "late")
ACTIVATIONS = ("relu", "linear")
# Inference always runs in padded blocks of this many rows so that a sample's
# output does not depend on the batch it arrives in (BLAS kernels differ by shape).
INFERENCE_BLOCK = 256


@dataclass(frozen=True)
class FcnnSpec:
    fusion: str
    dims: tuple[int, ...]
    class_count: int = 2
    activation: str = "relu"

    def __post_init__(self) -> None:
        if self.fusion not in FUSIONS:
            raise ValueError(f"fusion must be one of {FUSIONS}, got {self.fusion!r}")
        if self.activation not in ACTIVATIONS:
            raise ValueError(f"activation must be one of {ACTIVATIONS}")
        if self.class_count < 2:
            raise ValueError("class_count must be >= 2")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))
        if any(s <= 0 for s in self.layer_sizes):
            raise ValueError(f"non-positive layer size in {self.layer_sizes}")

    @property
    def input_dim(self) -> int:
        return sum(self.dims)

    def _blocks(self, layer: int) -> list[tuple[int, int]] | None:
        """Per-modality ``(in, out)`` block sizes of a block-diagonal layer, else None."""
        halves = [d // 2 for d in self.dims]
        if layer == 0 and self.fusion in ("intermediate", "late"):
            return list(zip(self.dims, halves))
        if layer == 1 and self.fusion == "late":
            return [(h, h // 2) for h in halves]
        return None

    @property
    def layer_sizes(self) -> list[int]:
        """Widths ``[input, hidden, head, classes]``."""
        if self.fusion == "early":
            hidden = self.input_dim // 2
            head = hidden // 2
        else:
            hidden = sum(d // 2 for d in self.dims)
            head = sum((d // 2) // 2 for d in self.dims) if self.fusion == "late" else hidden // 2
        return [self.input_dim, hidden, head, self.class_count]

    def weight_masks(self) -> list[np.ndarray | None]:
        sizes = self.layer_sizes
        masks: list[np.ndarray | None] = []
        for layer in range(3):
            blocks = self._blocks(layer)
            if blocks is None:
                masks.append(None)
                continue
            mask = np.zeros((sizes[layer], sizes[layer + 1]))
            r = c = 0
            for fan_in, fan_out in blocks:
                mask[r:r + fan_in, c:c + fan_out] = 1.0
                r += fan_in
                c += fan_out
            masks.append(mask)
        return masks

    def to_dict(self) -> dict:
        d = asdict(self)
        d["dims"] = list(self.dims)
        d["layer_sizes"] = self.layer_sizes
        return d


Params = list[np.ndarray]  # [W0, b0, W1, b1, W2, b2]


def init_params(spec: FcnnSpec, rng: np.random.Generator) -> Params:
    """Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) init; fan_in is per block for block layers."""
    sizes = spec.layer_sizes
    params: Params = []
    for layer, mask in enumerate(spec.weight_masks()):
        n_in, n_out = sizes[layer], sizes[layer + 1]
        if mask is None:
            fan_in = np.full(n_out, n_in, dtype=np.float64)
        else:
            fan_in = mask.sum(axis=0)
        bound = 1.0 / np.sqrt(fan_in)
        W = rng.uniform(-1.0, 1.0, size=(n_in, n_out)) * bound
        b = rng.uniform(-1.0, 1.0, size=n_out) * bound
        if mask is not None:
            W = W * mask
        params += [W, b]
    return params


def zero_params(spec: FcnnSpec) -> Params:
    sizes = spec.layer_sizes
    out: Params = []
    for layer in range(3):
        out += [np.zeros((sizes[layer], sizes[layer + 1])), np.zeros(sizes[layer + 1])]
    return out


def softmax(z: np.ndarray) -> np.ndarray:
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def _act(spec: FcnnSpec, z: np.ndarray) -> np.ndarray:
    return np.maximum(z, 0.0) if spec.activation == "relu" else z


def forward(spec: FcnnSpec, params: Params, x: np.ndarray, keep: bool = False):
    """Logits for a concatenated input matrix; with ``keep`` also the layer activations."""
    W0, b0, W1, b1, W2, b2 = params
    z0 = x @ W0 + b0
    h0 = _act(spec, z0)
    z1 = h0 @ W1 + b1
    h1 = _act(spec, z1)
    logits = h1 @ W2 + b2
    if keep:
        return logits, (x, z0, h0, z1, h1)
    return logits


def loss_and_grads(spec: FcnnSpec, params: Params, x: np.ndarray, y: np.ndarray):
    """Mean softmax cross-entropy and its parameter gradients."""
    logits, (x, z0, h0, z1, h1) = forward(spec, params, x, keep=True)
    n = len(x)
    z = logits - logits.max(axis=1, keepdims=True)
    logp = z - np.log(np.exp(z).sum(axis=1, keepdims=True))
    loss = -logp[np.arange(n), y].mean()
    d = np.exp(logp)
    d[np.arange(n), y] -= 1.0
    d /= n
    W0, _, W1, _, W2, _ = params
    gW2 = h1.T @ d
    gb2 = d.sum(axis=0)
    d = d @ W2.T
    if spec.activation == "relu":
        d = d * (z1 > 0)
    gW1 = h0.T @ d
    gb1 = d.sum(axis=0)
    d = d @ W1.T
    if spec.activation == "relu":
        d = d * (z0 > 0)
    gW0 = x.T @ d
    gb0 = d.sum(axis=0)
    grads = [gW0, gb0, gW1, gb1, gW2, gb2]
    for layer, mask in enumerate(spec.weight_masks()):
        if mask is not None:
            grads[2 * layer] *= mask
    return float(loss), grads


def concat_inputs(spec: FcnnSpec, batch: ModalBatch | Sequence[np.ndarray]) -> np.ndarray:
    mods = batch.modalities if isinstance(batch, ModalBatch) else list(batch)
    dims = tuple(np.shape(x)[1] for x in mods)
    if dims != spec.dims:
        raise ValueError(f"input dims {dims} do not match network dims {spec.dims}")
    return np.concatenate([np.asarray(x, dtype=np.float64) for x in mods], axis=1)


def predict_logits(spec: FcnnSpec, params: Params, x: np.ndarray) -> np.ndarray:
    n = len(x)
    pad = (-n) % INFERENCE_BLOCK
    if pad:
        x = np.concatenate([x, np.zeros((pad, x.shape[1]))])
    out = [forward(spec, params, x[i:i + INFERENCE_BLOCK]) for i in range(0, len(x), INFERENCE_BLOCK)]
    return np.concatenate(out)[:n] if out else np.zeros((0, spec.class_count))


def fcnn_forward(spec: FcnnSpec, params: Params, sample) -> np.ndarray:
    """Class probabilities for one :class:`MultimodalSample` (or a batch)."""
    if isinstance(sample, ModalBatch):
        x = concat_inputs(spec, sample)
        return softmax(predict_logits(spec, params, x))
    mods = [np.asarray(m, dtype=np.float64)[None, :] for m in sample.modalities]
    return softmax(predict_logits(spec, params, concat_inputs(spec, mods)))[0]


class FcnnModel:
    """Trained network wrapped as a predictor."""

    def __init__(self, spec: FcnnSpec, params: Params, manifest: dict | None = None):
        self.spec = spec
        self.params = [np.asarray(p, dtype=np.float64) for p in params]
        self.manifest = manifest or {}

    @property
    def class_count(self) -> int:
        return self.spec.class_count

    def predict_proba(self, batch: ModalBatch) -> np.ndarray:
        return softmax(predict_logits(self.spec, self.params, concat_inputs(self.spec, batch)))


def gradient_check(
    spec: FcnnSpec,
    params: Params,
    x: np.ndarray,
    y: np.ndarray,
    step: float = 1e-4,
    max_entries: int = 40,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    Checks up to ``max_entries`` randomly chosen trainable entries per tensor.
    Entries whose perturbation moves a ReLU pre-activation across zero are
    skipped, since the loss is not differentiable there.
    """
    rng = np.random.default_rng(seed)
    params = [p.astype(np.float64).copy() for p in params]
    x = np.asarray(x, dtype=np.float64)
    _, grads = loss_and_grads(spec, params, x, y)

    def pattern():
        _, (_, z0, _, z1, _) = forward(spec, params, x, keep=True)
        return np.concatenate([(z0 > 0).ravel(), (z1 > 0).ravel()])

    base = pattern() if spec.activation == "relu" else None
    masks = spec.weight_masks()
    worst = 0.0
    for k, p in enumerate(params):
        mask = masks[k // 2] if k % 2 == 0 else None
        flat_ok = np.flatnonzero(np.ones(p.size) if mask is None else mask.ravel())
        picks = rng.choice(flat_ok, size=min(max_entries, flat_ok.size), replace=False)
        for idx in picks:
            pos = np.unravel_index(idx, p.shape)
            old = p[pos]
            p[pos] = old + step
            up, _ = loss_and_grads(spec, params, x, y)
            kink = base is not None and not np.array_equal(pattern(), base)
            p[pos] = old - step
            down, _ = loss_and_grads(spec, params, x, y)
            kink = kink or (base is not None and not np.array_equal(pattern(), base))
            p[pos] = old
            if kink:
                continue
            numeric = (up - down) / (2 * step)
            analytic = grads[k][pos]
            denom = max(abs(numeric), abs(analytic), 1e-8)
            worst = max(worst, abs(numeric - analytic) / denom)
    return worst
