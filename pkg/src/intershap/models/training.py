"""Adam training loop for :mod:`intershap.models.fcnn`."""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np

from ..data import MultimodalDataset
from ..metrics import f1_macro
from .fcnn import FcnnModel, FcnnSpec, concat_inputs, init_params, loss_and_grads, predict_logits

log = logging.getLogger(__name__)

DEFAULT_SEEDS = (1, 42, 113)


def default_epochs(modality_count: int) -> int:
    return 250 if modality_count >= 4 else 200


@dataclass
class TrainConfig:
    learning_rate: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    weight_decay: float = 1e-4
    epochs: int = 200
    batch_size: int = 256
    seed: int = 1
    weight_decay_mode: str = "decoupled"

    def to_dict(self) -> dict:
        return asdict(self)


class TrainingDiverged(RuntimeError):
    pass


@dataclass
class TrainingLog:
    train_loss: list[float] = field(default_factory=list)
    val_f1: list[float] = field(default_factory=list)
    initial_train_loss: float = float("nan")
    final_train_loss: float = float("nan")


class Adam:
    """Adam with decoupled weight decay."""

    def __init__(self, params, cfg: TrainConfig, masks=None):
        self.cfg = cfg
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0
        self.masks = masks or [None] * len(params)

    def step(self, params, grads) -> None:
        cfg = self.cfg
        self.t += 1
        c1 = 1.0 - cfg.beta1 ** self.t
        c2 = 1.0 - cfg.beta2 ** self.t
        for p, g, m, v, mask in zip(params, grads, self.m, self.v, self.masks):
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            update = (m / c1) / (np.sqrt(v / c2) + cfg.eps) + cfg.weight_decay * p
            if mask is not None:
                update *= mask
            p -= cfg.learning_rate * update


def _full_loss(spec: FcnnSpec, params, x, y, chunk: int = 4096) -> float:
    total = 0.0
    for i in range(0, len(x), chunk):
        loss, _ = loss_and_grads(spec, params, x[i:i + chunk], y[i:i + chunk])
        total += loss * len(x[i:i + chunk])
    return total / len(x)


def train_fcnn(spec: FcnnSpec, dataset: MultimodalDataset, cfg: TrainConfig) -> tuple[FcnnModel, TrainingLog]:
    """Train on the train split, logging train loss and validation macro-F1 per epoch."""
    train_idx = dataset.indices("train")
    val_idx = dataset.indices("val")
    if train_idx.size == 0 or val_idx.size == 0:
        raise ValueError("dataset needs non-empty train and val splits")
    x = concat_inputs(spec, dataset.batch(train_idx))
    y = dataset.labels[train_idx].astype(np.int64)
    xv = concat_inputs(spec, dataset.batch(val_idx))
    yv = dataset.labels[val_idx].astype(np.int64)

    rng = np.random.default_rng(cfg.seed)
    params = init_params(spec, rng)
    masks = []
    for layer_mask in spec.weight_masks():
        masks += [layer_mask, None]
    opt = Adam(params, cfg, masks)
    history = TrainingLog(initial_train_loss=_full_loss(spec, params, x, y))

    n = len(x)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        running = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = order[start:start + cfg.batch_size]
            loss, grads = loss_and_grads(spec, params, x[idx], y[idx])
            if not np.isfinite(loss):
                raise TrainingDiverged(f"non-finite loss at epoch {epoch}, step {opt.t}")
            opt.step(params, grads)
            running += loss * len(idx)
        history.train_loss.append(running / n)
        val_pred = predict_logits(spec, params, xv).argmax(axis=1)
        history.val_f1.append(f1_macro(val_pred, yv, spec.class_count))
        if epoch % 25 == 0 or epoch == cfg.epochs - 1:
            log.info("epoch %d loss %.4f val F1 %.2f", epoch, history.train_loss[-1], history.val_f1[-1])

    # stored weights are float32; round now so saved and in-memory models agree
    params = [p.astype(np.float32).astype(np.float64) for p in params]
    history.final_train_loss = _full_loss(spec, params, x, y)
    manifest = {
        "spec": spec.to_dict(),
        "train_config": cfg.to_dict(),
        "seed": cfg.seed,
        "activation": spec.activation,
        "rounding": "floor division for hidden and head widths",
        "weight_decay_coupling": cfg.weight_decay_mode,
        "initial_train_loss": history.initial_train_loss,
        "final_train_loss": history.final_train_loss,
        "final_val_f1": history.val_f1[-1] if history.val_f1 else None,
    }
    return FcnnModel(spec, params, manifest), history
