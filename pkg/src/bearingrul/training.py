"""Losses, Adam, the training loop, and evaluation metrics.

The asymmetric loss adds a hinge on overestimation to plain MSE:

    L = (1/N) sum_i [ (p_i - y_i)^2 + lam * max(0, p_i - y_i) ]

so late predictions (p > y) pay an extra linear penalty while early ones do
not; at lam = 0 it reduces exactly to MSE. The scoring metric is likewise
asymmetric: a sample with error e contributes exp(e/5) - 1 when late
(e >= 0) and exp(-e/15) - 1 when early, i.e. a late miss costs about three
times an equally large early one. Note the per-sample score term is
positive for any nonzero error; when comparing models on this metric the
convention reported alongside (sum or mean) must match.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import autodiff as ad
from . import model as model_mod
from .errors import DivergedLoss, EmptyBatch, EmptyDataset, ShapeMismatch

HINGE_RATE = 5.0    # divisor of late (positive) errors in the score
EARLY_RATE = 15.0   # divisor of early (negative) errors in the score


@dataclass(frozen=True)
class LossConfig:
    kind: str = "custom"       # "custom" or "mse"
    lam: float = 1.0           # hinge weight; ignored for kind="mse"

    def __post_init__(self):
        if self.kind not in ("custom", "mse"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if self.lam < 0:
            raise ValueError("lam must be >= 0")


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 1e-4
    batch_size: int = 16
    epochs: int = 100
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if min(self.learning_rate, self.batch_size, self.eps) <= 0:
            raise ValueError("learning_rate, batch_size and eps must be positive")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


@dataclass
class PredictionBatch:
    """Aligned predictions and targets; targets are normalized RUL in [0,1]."""

    preds: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        self.preds = np.asarray(self.preds, dtype=np.float64)
        self.targets = np.asarray(self.targets, dtype=np.float64)
        if self.preds.size == 0:
            raise EmptyBatch("empty prediction batch")
        if self.preds.shape != self.targets.shape:
            raise ShapeMismatch(
                f"preds {self.preds.shape} vs targets {self.targets.shape}")
        if self.targets.min() < 0.0 or self.targets.max() > 1.0:
            raise ValueError("targets must lie in [0, 1]")

    @property
    def errors(self) -> np.ndarray:
        return self.preds - self.targets

    def __len__(self):
        return self.preds.size


# ---------------------------------------------------------------------------
# Losses
# ---------------------------------------------------------------------------

def custom_loss(batch: PredictionBatch, lam: float = 1.0) -> float:
    """Mean of squared error plus lam * hinge on overestimation."""
    e = batch.errors
    return float(np.mean(e ** 2 + lam * np.maximum(0.0, e)))


def mse_loss(batch: PredictionBatch) -> float:
    return float(np.mean(batch.errors ** 2))


def loss_value(batch: PredictionBatch, cfg: LossConfig) -> float:
    return mse_loss(batch) if cfg.kind == "mse" else custom_loss(batch, cfg.lam)


def loss_node(preds: ad.Tensor, targets: np.ndarray, cfg: LossConfig) -> ad.Tensor:
    """Differentiable loss on a prediction tensor.

    The hinge uses relu, whose subgradient at exactly zero error is 0.
    """
    if preds.size == 0:
        raise EmptyBatch("empty prediction batch")
    diff = ad.sub(preds, np.asarray(targets, dtype=np.float64))
    loss = ad.mean(ad.square(diff))
    if cfg.kind == "custom" and cfg.lam > 0:
        loss = ad.add(loss, ad.mul(ad.mean(ad.relu(diff)), cfg.lam))
    return loss


# ---------------------------------------------------------------------------
# Optimizer
# ---------------------------------------------------------------------------

@dataclass
class AdamState:
    m: dict = field(default_factory=dict)
    v: dict = field(default_factory=dict)
    t: int = 0


def adam_step(params: dict, grads: dict, state: AdamState, cfg: TrainConfig,
              t: Optional[int] = None) -> AdamState:
    """One bias-corrected Adam update, in place on the parameter tensors."""
    state.t = state.t + 1 if t is None else t
    b1, b2 = cfg.beta1, cfg.beta2
    c1 = 1.0 - b1 ** state.t
    c2 = 1.0 - b2 ** state.t
    for name, tensor in params.items():
        g = grads.get(name)
        if g is None:
            continue
        if g.shape != tensor.data.shape:
            raise ShapeMismatch(f"{name}: grad {g.shape} vs param {tensor.data.shape}")
        m = state.m.get(name)
        if m is None:
            m = np.zeros_like(tensor.data)
            state.v[name] = np.zeros_like(tensor.data)
        v = state.v[name]
        m = b1 * m + (1.0 - b1) * g
        v = b2 * v + (1.0 - b2) * g * g
        state.m[name], state.v[name] = m, v
        tensor.data -= cfg.learning_rate * (m / c1) / (np.sqrt(v / c2) + cfg.eps)
    return state


# ---------------------------------------------------------------------------
# Training loop
# ---------------------------------------------------------------------------

@dataclass
class EpochStats:
    epoch: int
    train_loss: float
    val_mae: Optional[float] = None


def train(dataset, model_cfg, train_cfg: TrainConfig,
          loss_cfg: LossConfig = LossConfig(), val_dataset=None,
          init: Optional[model_mod.ModelParams] = None):
    """Seeded full training run; returns (params, history).

    Per epoch: shuffle (seeded), then per batch forward -> loss ->
    backward -> Adam. A non-finite batch loss aborts with DivergedLoss.
    Epoch order, shuffling, dropout masks and updates are all derived from
    train_cfg.seed, so identical configs give bit-identical trajectories.
    """
    if len(dataset) == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    if train_cfg.batch_size > len(dataset):
        raise EmptyDataset(
            f"batch_size {train_cfg.batch_size} exceeds dataset size {len(dataset)}")
    params = init if init is not None else model_mod.init_params(
        model_cfg, seed=train_cfg.seed)
    hor = model_mod.prepare_images([s.hor.pixels for s in dataset],
                                   model_cfg.input_side)
    ver = model_mod.prepare_images([s.ver.pixels for s in dataset],
                                   model_cfg.input_side)
    labels = np.array([s.label for s in dataset], dtype=np.float64)

    shuffle_rng = np.random.default_rng(np.random.SeedSequence(
        entropy=train_cfg.seed, spawn_key=(1,)))
    state = AdamState()
    history = []
    step = 0
    for epoch in range(train_cfg.epochs):
        order = (shuffle_rng.permutation(len(dataset)) if train_cfg.shuffle
                 else np.arange(len(dataset)))
        loss_sum, n_seen = 0.0, 0
        for start in range(0, len(dataset), train_cfg.batch_size):
            idx = order[start:start + train_cfg.batch_size]
            drop_rng = np.random.default_rng(np.random.SeedSequence(
                entropy=train_cfg.seed, spawn_key=(2, step)))
            preds = model_mod.forward_batch(params, model_cfg, hor[idx], ver[idx],
                                            training=True, rng=drop_rng)
            loss = loss_node(preds, labels[idx], loss_cfg)
            value = float(loss.data)
            if not np.isfinite(value):
                raise DivergedLoss(f"non-finite loss at epoch {epoch}, step {step}")
            params.zero_grad()
            ad.backward(loss)
            grads = {k: t.grad for k, t in params.tensors.items()}
            adam_step(params.tensors, grads, state, train_cfg)
            loss_sum += value * idx.size
            n_seen += idx.size
            step += 1
        stats = EpochStats(epoch=epoch, train_loss=loss_sum / n_seen)
        if val_dataset:
            val_preds = model_mod.predict_batch(params, model_cfg, val_dataset)
            val_targets = np.array([s.label for s in val_dataset])
            stats.val_mae = mae(PredictionBatch(val_preds, val_targets))
        history.append(stats)
    return params, history


# ---------------------------------------------------------------------------
# Metrics
# ---------------------------------------------------------------------------

def mae(batch: PredictionBatch) -> float:
    return float(np.mean(np.abs(batch.errors)))


def score_terms(errors: np.ndarray) -> np.ndarray:
    e = np.asarray(errors, dtype=np.float64)
    return np.where(e < 0, np.expm1(-e / EARLY_RATE), np.expm1(e / HINGE_RATE))


def score(batch: PredictionBatch, aggregation: str = "mean") -> float:
    """Asymmetric exponential score; "sum" is the verbatim definition,
    "mean" the size-independent reporting default."""
    terms = score_terms(batch.errors)
    if aggregation == "sum":
        return float(terms.sum())
    if aggregation == "mean":
        return float(terms.mean())
    raise ValueError(f"unknown aggregation {aggregation!r}")


def late_fraction(batch: PredictionBatch) -> float:
    """Fraction of samples predicted later than truth (pred > target)."""
    return float(np.mean(batch.errors > 0))


def metrics_report(batch: PredictionBatch) -> dict:
    """The standard metrics bundle emitted by evaluation commands."""
    return {
        "n": len(batch),
        "mae": mae(batch),
        "score_sum": score(batch, "sum"),
        "score_mean": score(batch, "mean"),
        "late_fraction": late_fraction(batch),
    }
