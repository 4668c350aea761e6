"""From-scratch trainer: Adam on binary cross-entropy plus activity regularization.

The loss is mean BCE of sigmoid(logit) against binary targets, computed in
the fused form max(z,0) - z*t + log1p(exp(-|z|)) which never overflows. The
activity regularizer penalizes hidden post-activations, pushing units toward
staying off and thereby shrinking the number of realized activation
patterns. Everything is plain numpy and deterministic for a fixed seed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

import numpy as np

from .data import Dataset
from .errors import InputError, ShapeError, TrainingDivergedError
from .network import Layer, Network, predict_batch, sigmoid

__all__ = [
    "AdamParams",
    "TrainConfig",
    "TrainHistory",
    "init_network",
    "train",
    "accuracy",
    "batch_loss",
    "batch_gradients",
    "history_to_csv",
]

REG_NORMS = ("l1", "l2")
REG_REDUCTIONS = ("mean", "sum")


@dataclass(frozen=True)
class AdamParams:
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7

    def __post_init__(self):
        if not (0.0 <= self.beta1 < 1.0 and 0.0 <= self.beta2 < 1.0):
            raise InputError("Adam betas must lie in [0, 1)")
        if self.epsilon <= 0.0:
            raise InputError("Adam epsilon must be positive")


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters; defaults reproduce the reference experiment setup.

    The regularizer is configurable in three directions: norm (l1 or l2),
    which hidden layers it covers (None = all), and whether the per-batch
    value is the mean over batch and units ("mean") or the per-sample sum
    over units averaged over the batch ("sum", the convention of common
    deep-learning frameworks).
    """

    hidden_widths: tuple[int, ...] = (4, 2)
    learning_rate: float = 0.01
    epochs: int = 10
    batch_size: int = 100
    activity_reg_coeff: float = 0.02
    seed: int = 0
    adam: AdamParams = field(default_factory=AdamParams)
    reg_norm: str = "l1"
    reg_reduction: str = "mean"
    reg_layers: tuple[int, ...] | None = None

    def __post_init__(self):
        widths = tuple(int(w) for w in self.hidden_widths)
        if not widths or any(w < 1 for w in widths):
            raise InputError(f"hidden_widths must be positive, got {self.hidden_widths}")
        object.__setattr__(self, "hidden_widths", widths)
        if self.learning_rate <= 0.0:
            raise InputError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 1:
            raise InputError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise InputError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.activity_reg_coeff < 0.0:
            raise InputError(
                f"activity_reg_coeff must be >= 0, got {self.activity_reg_coeff}"
            )
        if self.reg_norm not in REG_NORMS:
            raise InputError(f"reg_norm must be one of {REG_NORMS}, got {self.reg_norm!r}")
        if self.reg_reduction not in REG_REDUCTIONS:
            raise InputError(
                f"reg_reduction must be one of {REG_REDUCTIONS}, got {self.reg_reduction!r}"
            )
        if self.reg_layers is not None:
            layers = tuple(int(i) for i in self.reg_layers)
            if any(i < 0 or i >= len(widths) for i in layers):
                raise InputError(
                    f"reg_layers {layers} out of range for {len(widths)} hidden layers"
                )
            object.__setattr__(self, "reg_layers", layers)

    def regularized_layers(self, n_hidden: int | None = None) -> tuple[int, ...]:
        """Hidden-layer indices the activity penalty applies to.

        ``n_hidden`` is the hidden-layer count of the network actually being
        evaluated, which may differ from the configured architecture when the
        loss is computed on an externally built network.
        """
        if n_hidden is None:
            n_hidden = len(self.hidden_widths)
        if self.reg_layers is None:
            return tuple(range(n_hidden))
        bad = [i for i in self.reg_layers if i >= n_hidden]
        if bad:
            raise InputError(
                f"reg_layers {self.reg_layers} out of range for {n_hidden} hidden layers"
            )
        return self.reg_layers


@dataclass(frozen=True)
class TrainHistory:
    """Per-epoch mean training loss and full-dataset accuracy."""

    losses: tuple[float, ...]
    accuracies: tuple[float, ...]

    def __post_init__(self):
        if len(self.losses) != len(self.accuracies):
            raise InputError("losses and accuracies must have equal length")

    @property
    def epochs(self) -> int:
        return len(self.losses)


def _glorot(d: int, widths: tuple[int, ...], rng: np.random.Generator):
    """Glorot-uniform weights, zero biases, for dims d -> widths -> 1."""
    dims = [d, *widths, 1]
    Ws, bs = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (fan_in + fan_out))
        Ws.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        bs.append(np.zeros(fan_out))
    return Ws, bs


def init_network(d: int, config: TrainConfig) -> Network:
    """The network `train` starts from: same seed, same draws."""
    if d < 1:
        raise InputError(f"input dimension must be >= 1, got {d}")
    Ws, bs = _glorot(d, config.hidden_widths, np.random.default_rng(config.seed))
    return Network(tuple(Layer(w, b) for w, b in zip(Ws, bs)))


def _forward_logits(Ws, bs, X):
    a = X
    for W, b in zip(Ws[:-1], bs[:-1]):
        a = np.maximum(a @ W.T + b, 0.0)
    return (a @ Ws[-1].T + bs[-1])[:, 0]


def _loss_and_grads(Ws, bs, X, t, config: TrainConfig, want_grads: bool):
    """Mean BCE + activity penalty over one batch; optional backprop.

    The regularizer's subgradient at an exactly-zero activation is 0, which
    matches the strict-activity rule: a unit sitting on its kink contributes
    neither to the pattern nor to the penalty gradient.

    Arithmetic runs with numpy overflow/invalid warnings silenced: when the
    parameters blow up the loss goes non-finite, and the caller turns that
    into a typed divergence error instead of warning noise.
    """
    with np.errstate(over="ignore", invalid="ignore"):
        return _loss_and_grads_raw(Ws, bs, X, t, config, want_grads)


def _loss_and_grads_raw(Ws, bs, X, t, config: TrainConfig, want_grads: bool):
    B = X.shape[0]
    n_hidden = len(Ws) - 1
    zs, acts = [], [X]
    for i in range(n_hidden):
        z = acts[-1] @ Ws[i].T + bs[i]
        zs.append(z)
        acts.append(np.maximum(z, 0.0))
    logit = (acts[-1] @ Ws[-1].T + bs[-1])[:, 0]
    loss = float(
        np.mean(np.maximum(logit, 0.0) - logit * t + np.log1p(np.exp(-np.abs(logit))))
    )

    included = (
        config.regularized_layers(n_hidden) if config.activity_reg_coeff > 0.0 else ()
    )
    scales = {}
    for i in included:
        units = acts[i + 1].shape[1]
        scales[i] = config.activity_reg_coeff / (
            B * (units if config.reg_reduction == "mean" else 1)
        )
        pen = acts[i + 1] if config.reg_norm == "l1" else acts[i + 1] ** 2
        loss += scales[i] * float(pen.sum())
    if not want_grads:
        return loss, None

    dWs = [None] * len(Ws)
    dbs = [None] * len(bs)
    g = ((sigmoid(logit) - t) / B)[:, None]
    dWs[-1] = g.T @ acts[-1]
    dbs[-1] = g.sum(axis=0)
    ga = g @ Ws[-1]
    for i in reversed(range(n_hidden)):
        if i in scales:
            a = acts[i + 1]
            # post-activations are >= 0, so sign(a) is the l1 subgradient with 0 at 0
            ga = ga + scales[i] * (np.sign(a) if config.reg_norm == "l1" else 2.0 * a)
        gz = ga * (zs[i] > 0.0)
        dWs[i] = gz.T @ acts[i]
        dbs[i] = gz.sum(axis=0)
        ga = gz @ Ws[i]
    return loss, (dWs, dbs)


def _check_batch(net_or_d, features, targets):
    X = np.asarray(features, dtype=np.float64)
    t = np.asarray(targets)
    d = net_or_d if isinstance(net_or_d, int) else net_or_d.input_dim
    if X.ndim != 2 or X.shape[1] != d:
        raise ShapeError(f"features shape {X.shape} does not match input_dim={d}")
    if t.shape != (X.shape[0],):
        raise ShapeError(f"targets shape {t.shape} does not match {X.shape[0]} rows")
    if not np.all((t == 0) | (t == 1)):
        raise InputError("targets must be 0 or 1")
    return X, t.astype(np.float64)


def batch_loss(net: Network, features, targets, config: TrainConfig) -> float:
    """The full training objective on one batch, as a pure function of `net`."""
    X, t = _check_batch(net, features, targets)
    Ws = [l.weight for l in net.layers]
    bs = [l.bias for l in net.layers]
    loss, _ = _loss_and_grads(Ws, bs, X, t, config, want_grads=False)
    return loss


def batch_gradients(net: Network, features, targets, config: TrainConfig):
    """Backpropagated gradients of `batch_loss` for every layer.

    Returns (loss, [(dW, db) per layer]) so finite differences can audit the
    analytic gradient parameter by parameter.
    """
    X, t = _check_batch(net, features, targets)
    Ws = [l.weight for l in net.layers]
    bs = [l.bias for l in net.layers]
    loss, (dWs, dbs) = _loss_and_grads(Ws, bs, X, t, config, want_grads=True)
    return loss, list(zip(dWs, dbs))


def train(dataset: Dataset, config: TrainConfig) -> tuple[Network, TrainHistory]:
    """Mini-batch Adam over seeded epoch shuffles; the last short batch counts.

    Raises TrainingDivergedError naming the 1-based epoch if a batch loss
    goes non-finite. Identical dataset and config give bit-identical weights.
    """
    rng = np.random.default_rng(config.seed)
    Ws, bs = _glorot(dataset.n_features, config.hidden_widths, rng)
    X_all, t_all = dataset.features, dataset.targets.astype(np.float64)
    n = dataset.n_rows

    params = Ws + bs
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    beta1, beta2, eps = config.adam.beta1, config.adam.beta2, config.adam.epsilon
    step = 0
    losses, accuracies = [], []
    for epoch in range(1, config.epochs + 1):
        perm = rng.permutation(n)
        epoch_loss = 0.0
        for start in range(0, n, config.batch_size):
            idx = perm[start : start + config.batch_size]
            loss, (dWs, dbs) = _loss_and_grads(
                Ws, bs, X_all[idx], t_all[idx], config, want_grads=True
            )
            if not np.isfinite(loss):
                raise TrainingDivergedError(epoch)
            epoch_loss += loss * idx.shape[0]
            step += 1
            corr1 = 1.0 - beta1**step
            corr2 = 1.0 - beta2**step
            for p, mom, sec, grad in zip(params, m, v, dWs + dbs):
                mom *= beta1
                mom += (1.0 - beta1) * grad
                sec *= beta2
                sec += (1.0 - beta2) * grad**2
                p -= config.learning_rate * (mom / corr1) / (np.sqrt(sec / corr2) + eps)
        losses.append(epoch_loss / n)
        # errstate: exploded-but-not-yet-detected weights may overflow here;
        # the next epoch's loss check raises the typed error.
        with np.errstate(over="ignore", invalid="ignore"):
            accuracies.append(
                float(((_forward_logits(Ws, bs, X_all) > 0.0) == t_all).mean())
            )
    net = Network(tuple(Layer(w, b) for w, b in zip(Ws, bs)))
    return net, TrainHistory(losses=tuple(losses), accuracies=tuple(accuracies))


def accuracy(net: Network, dataset: Dataset) -> float:
    """Fraction of rows where the predicted class equals the target."""
    if dataset.n_rows == 0:
        raise InputError("accuracy needs a non-empty dataset")
    return float((predict_batch(net, dataset.features) == dataset.targets).mean())


def history_to_csv(history: TrainHistory) -> str:
    """Rows of (epoch, loss, accuracy), 1-based epochs."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["epoch", "loss", "accuracy"])
    for i, (loss, acc) in enumerate(zip(history.losses, history.accuracies), start=1):
        writer.writerow([i, repr(loss), repr(acc)])
    return buf.getvalue()
