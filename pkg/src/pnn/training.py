"""Single-network optimisation: SGD with momentum, cosine annealing, subepochs, evaluation."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .data import AugmentConfig, DatasetView, ImageDataset, full_view, split_validation
from .errors import ConfigError, DataError, DivergenceError
from .models import Network
from .nn import ParamTensor, softmax, softmax_cross_entropy, softmax_cross_entropy_grad
from .rng import SeededRng, seeded_shuffle


@dataclass(frozen=True)
class OptimizerConfig:
    # defaults are the standard CIFAR-10 / CIFAR-100 hyperparameters
    base_lr: float = 0.1
    momentum: float = 0.9
    weight_decay: float = 1e-4
    batch_size: int = 128
    total_epochs: int = 200
    decay_bn: bool = True  # apply weight decay to BN gamma/beta as well

    def __post_init__(self):
        for name in ("base_lr", "weight_decay"):
            if getattr(self, name) < 0:
                raise ConfigError("must be non-negative", field=name)
        if not 0 <= self.momentum < 1:
            raise ConfigError("must lie in [0, 1)", field="momentum")
        if self.batch_size < 1:
            raise ConfigError("must be >= 1", field="batch_size")
        if self.total_epochs < 1:
            raise ConfigError("must be >= 1", field="total_epochs")


def cosine_lr(epoch: int, total_epochs: int, base_lr: float) -> float:
    """Per-epoch cosine annealing from ``base_lr`` down to 0."""
    if total_epochs <= 0:
        raise ConfigError("must be positive", field="total_epochs")
    if not 0 <= epoch <= total_epochs:
        raise ValueError(f"epoch {epoch} outside [0, {total_epochs}]")
    return 0.5 * base_lr * (1.0 + math.cos(math.pi * epoch / total_epochs))


def _is_bn(p: ParamTensor) -> bool:
    return p.name.endswith((".gamma", ".beta"))


def sgd_step(params, lr: float, config: OptimizerConfig) -> None:
    """``buf = m*buf + (g + wd*w); w -= lr*buf``; then clear gradients.

    Non-trainable tensors (BN running statistics) are skipped.
    """
    params = [p for p in params if p.trainable]
    for p in params:
        if not np.all(np.isfinite(p.grad)):
            raise DivergenceError(f"non-finite gradient in {p.name}", name=p.name)
    for p in params:
        wd = config.weight_decay if (config.decay_bn or not _is_bn(p)) else 0.0
        g = p.grad + wd * p.value if wd else p.grad
        p.momentum_buf *= config.momentum
        p.momentum_buf += g
        p.value -= lr * p.momentum_buf
        p.zero_grad()


@dataclass
class EpochLog:
    epoch: int
    lr: float
    train_loss: float
    train_acc: float
    val_acc: float | None = None


@dataclass
class TrainLog:
    records: list[EpochLog] = field(default_factory=list)

    COLUMNS = ("epoch", "lr", "train_loss", "train_acc", "val_acc")

    def append(self, rec: EpochLog) -> None:
        if self.records and rec.epoch <= self.records[-1].epoch:
            raise ValueError("epochs must be strictly increasing")
        self.records.append(rec)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.COLUMNS)
        for r in self.records:
            w.writerow(["" if v is None else v for v in asdict(r).values()])
        return buf.getvalue()


def train_subepoch(net: Network, train_view: DatasetView, config: OptimizerConfig, lr: float,
                   rng: SeededRng) -> tuple[float, float]:
    """One shuffled pass over ``train_view``; returns (mean loss, accuracy).

    ``rng`` drives the minibatch order; augmentation draws come from the
    view's own stream. The last partial batch is kept.
    """
    n = len(train_view)
    if n == 0:
        raise DataError("cannot train on an empty view")
    dtype = net.stem.layers[0].weight.value.dtype
    order = np.asarray(seeded_shuffle(range(n), rng), dtype=np.int64)
    total_loss = 0.0
    correct = 0
    params = [t for t in net.registry.values() if t.trainable]
    for start in range(0, n, config.batch_size):
        pos = order[start : start + config.batch_size]
        x, y = train_view.load(pos, dtype=dtype)
        logits = net.forward(x, train=True)
        loss, probs = softmax_cross_entropy(logits, y)
        if not math.isfinite(loss):
            raise DivergenceError("non-finite training loss", name="loss")
        net.backward(softmax_cross_entropy_grad(probs, y).astype(dtype))
        sgd_step(params, lr, config)
        total_loss += loss * len(pos)
        correct += int((probs.argmax(axis=1) == y).sum())
    return total_loss / n, correct / n


def predict_proba(net: Network, view: DatasetView, batch_size: int = 256,
                  x: np.ndarray | None = None) -> np.ndarray:
    """Eval-mode softmax probabilities for every image of the view, in view order."""
    dtype = net.stem.layers[0].weight.value.dtype
    if x is None:
        x, _ = view.load(dtype=dtype)
    out = [softmax(net.forward(x[s : s + batch_size].astype(dtype), train=False))
           for s in range(0, len(x), batch_size)]
    return np.concatenate(out) if out else np.zeros((0, net.spec.num_classes), dtype)


def accuracy_from_probs(probs: np.ndarray, labels) -> float:
    labels = np.asarray(labels)
    if len(labels) == 0:
        raise DataError("cannot evaluate an empty view")
    return float((probs.argmax(axis=1) == labels).mean())


def evaluate(net: Network, view: DatasetView) -> tuple[float, float]:
    """``(accuracy, error %)`` with BN in eval mode; the network is not modified."""
    if len(view) == 0:
        raise DataError("cannot evaluate an empty view")
    acc = accuracy_from_probs(predict_proba(net, view), view.labels)
    return acc, 100.0 * (1.0 - acc)


def train_baseline(net: Network, train: ImageDataset, config: OptimizerConfig, epochs: int,
                   seed: int, stream: str, sub_epochs: int = 1, val_fraction: float = 0.1,
                   train_cfg: AugmentConfig | None = None,
                   val_cfg: AugmentConfig | None = None) -> TrainLog:
    """Train one network on its own, with no brain.

    Per epoch: draw a fresh validation split, run ``sub_epochs`` passes, and
    score the validation split. The random streams are keyed exactly as a
    nerve cord's (``{stream}/shuffle``, ``{stream}/augment``, run-level
    ``split``/``validation``), so this is the control a PNN run with the
    gate disabled must reproduce bit-for-bit.
    """
    split_rng = SeededRng(seed, "split")
    val_rng = SeededRng(seed, "validation")
    shuffle_rng = SeededRng(seed, f"{stream}/shuffle")
    aug_rng = SeededRng(seed, f"{stream}/augment")
    total = epochs * sub_epochs
    done = 0
    log = TrainLog()
    for epoch in range(epochs):
        train_view, val_view = split_validation(train, val_fraction, split_rng, train_cfg, val_cfg)
        train_view = train_view.with_rng(aug_rng)
        for _ in range(sub_epochs):
            lr = cosine_lr(done, total, config.base_lr)
            loss, acc = train_subepoch(net, train_view, config, lr, shuffle_rng)
            done += 1
        val_acc, _ = evaluate(net, val_view.with_rng(val_rng))
        log.append(EpochLog(epoch, lr, loss, acc, val_acc))
    return log


def make_test_view(train: ImageDataset, test: ImageDataset) -> DatasetView:
    """Un-augmented test view normalised with the training mean."""
    return full_view(test, "test", mean=train.per_pixel_mean)
