"""Planarian neural network orchestration.

Two or more nerve cords (independent networks) train over global epochs. At
the top of each global epoch the brain exchanges their StemBlocks if the
patience gate fired at the end of the previous one; each cord then runs its
subepochs, a fresh validation split is scored, and the gate is updated. After
the last epoch every cord and their soft-voted ensemble are tested once.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .data import AugmentConfig, ImageDataset, full_view, split_validation
from .errors import ConfigError, StemIncompatibleError
from .models import ArchitectureSpec, Network, build_network, stem_parameters
from .rng import SeededRng
from .training import (
    EpochLog,
    OptimizerConfig,
    TrainLog,
    accuracy_from_probs,
    cosine_lr,
    make_test_view,
    predict_proba,
    train_subepoch,
)

TOPOLOGIES = ("pairwise-swap", "ring-rotation")
SIGNALS = ("ensemble", "cord")


# ------------------------------------------------------------------- gate

@dataclass(frozen=True)
class PatienceGate:
    max_patience: float = 15
    patience_level: int = 0
    current_best_acc: float = 0.0
    weight_swap_condition: bool = False


def gate_update(gate: PatienceGate, new_acc: float) -> tuple[PatienceGate, bool]:
    """Feed one validation accuracy to the gate.

    Only a strict improvement over the best accuracy so far counts; it resets
    the level to 1. Anything else (equal or worse) raises the level, and the
    swap condition is ``level > max_patience``.
    """
    if not 0.0 <= new_acc <= 1.0:
        raise ValueError(f"accuracy must lie in [0, 1], got {new_acc}")
    if new_acc > gate.current_best_acc:
        return replace(gate, patience_level=1, current_best_acc=new_acc,
                       weight_swap_condition=False), False
    level = gate.patience_level + 1
    fire = level > gate.max_patience
    return replace(gate, patience_level=level, weight_swap_condition=fire), fire


def gate_after_swap(gate: PatienceGate) -> PatienceGate:
    return replace(gate, patience_level=0, weight_swap_condition=False)


# ------------------------------------------------------------------ cords

@dataclass
class NerveCord:
    """One member network with its own random streams and schedule position.

    Streams are keyed by ``stream`` (defaults to ``id``), not by list
    position, so reordering cords does not change what any cord sees.
    """

    id: str
    net: Network
    seed: int
    sub_epochs: int = 1
    stream: str | None = None
    completed: int = 0
    log: TrainLog = field(default_factory=TrainLog)

    def __post_init__(self):
        if self.sub_epochs < 1:
            raise ConfigError("must be >= 1", field=f"{self.id}.sub_epochs")
        self.stream = self.stream or self.id
        self.shuffle_rng = SeededRng(self.seed, f"{self.stream}/shuffle")
        self.augment_rng = SeededRng(self.seed, f"{self.stream}/augment")

    @classmethod
    def build(cls, id: str, spec: ArchitectureSpec, seed: int, sub_epochs: int = 1,
              stream: str | None = None, dtype=np.float32) -> "NerveCord":
        stream = stream or id
        net = build_network(spec, SeededRng(seed, f"{stream}/init"), dtype)
        return cls(id, net, seed, sub_epochs, stream)


def _check_congruent(a: list, b: list, a_id: str, b_id: str) -> None:
    for pa, pb in zip(a, b):
        if pa.shape != pb.shape or pa.value.dtype != pb.value.dtype:
            raise StemIncompatibleError(
                f"stem tensor {pa.name} differs: {a_id} has {pa.shape} {pa.value.dtype}, "
                f"{b_id} has {pb.shape} {pb.value.dtype}", name=pa.name)


def swap_stems(a: NerveCord, b: NerveCord) -> None:
    """Exchange StemBlock values and momentum buffers between two cords, in place.

    Shapes are checked for every tensor before anything is written.
    """
    sa, sb = stem_parameters(a.net), stem_parameters(b.net)
    _check_congruent(sa, sb, a.id, b.id)
    for pa, pb in zip(sa, sb):
        for attr in ("value", "momentum_buf"):
            ta, tb = getattr(pa, attr), getattr(pb, attr)
            tmp = ta.copy()
            ta[...] = tb
            tb[...] = tmp


def rotate_stems(cords: list[NerveCord]) -> None:
    """Ring rotation: cord ``i`` receives cord ``i-1``'s stem."""
    stems = [stem_parameters(c.net) for c in cords]
    for i in range(1, len(cords)):
        _check_congruent(stems[0], stems[i], cords[0].id, cords[i].id)
    for attr in ("value", "momentum_buf"):
        snap = [[getattr(p, attr).copy() for p in s] for s in stems]
        for i, s in enumerate(stems):
            for p, src in zip(s, snap[i - 1]):
                getattr(p, attr)[...] = src


def brain_exchange(cords: list[NerveCord], topology: str) -> None:
    if topology == "pairwise-swap":
        if len(cords) != 2:
            raise ConfigError("pairwise-swap needs exactly 2 cords", field="topology")
        swap_stems(cords[0], cords[1])
    elif topology == "ring-rotation":
        rotate_stems(cords)
    else:
        raise ConfigError(f"must be one of {TOPOLOGIES}", field="topology")


# ------------------------------------------------------------- soft voting

def soft_vote(prob_sets) -> tuple[np.ndarray, np.ndarray]:
    """Average class probabilities; argmax with ties going to the lowest class."""
    prob_sets = [np.asarray(p) for p in prob_sets]
    if not prob_sets:
        raise ValueError("soft_vote needs at least one probability set")
    shape = prob_sets[0].shape
    for p in prob_sets[1:]:
        if p.shape != shape:
            raise ValueError(f"probability sets differ in shape: {shape} vs {p.shape}")
    total = prob_sets[0].copy()
    for p in prob_sets[1:]:
        total = total + p
    probs = total / len(prob_sets)
    return probs, probs.argmax(axis=1)


# ---------------------------------------------------------------- configs

@dataclass(frozen=True)
class BrainConfig:
    global_epochs: int = 200
    max_patience: float = 15
    topology: str = "pairwise-swap"
    signal_source: str = "ensemble"
    signal_cord: int = 0  # which cord feeds the gate when signal_source == "cord"
    swap_every: int | None = None  # fixed-period swapping in global epochs; disables the gate

    def __post_init__(self):
        if self.global_epochs < 0:
            raise ConfigError("must be >= 0", field="global_epochs")
        if self.max_patience < 0:
            raise ConfigError("must be >= 0", field="max_patience")
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"must be one of {TOPOLOGIES}", field="topology")
        if self.signal_source not in SIGNALS:
            raise ConfigError(f"must be one of {SIGNALS}", field="signal_source")
        if self.swap_every is not None and self.swap_every < 1:
            raise ConfigError("must be >= 1", field="swap_every")


@dataclass(frozen=True)
class CordConfig:
    id: str
    arch: ArchitectureSpec
    sub_epochs: int = 1
    stream: str | None = None


@dataclass(frozen=True)
class PnnConfig:
    cords: tuple[CordConfig, ...]
    brain: BrainConfig = BrainConfig()
    optimizer: OptimizerConfig = OptimizerConfig()
    seed: int = 0
    val_fraction: float = 0.1
    train_augment: AugmentConfig = AugmentConfig(mode="train")
    val_augment: AugmentConfig = AugmentConfig(mode="validation")

    def build_cords(self, dtype=np.float32) -> list[NerveCord]:
        return [NerveCord.build(c.id, c.arch, self.seed, c.sub_epochs, c.stream, dtype)
                for c in self.cords]


# ----------------------------------------------------------------- record

@dataclass
class EpochRecord:
    epoch: int
    swapped: bool
    cord_val_acc: dict[str, float]
    ensemble_val_acc: float
    signal: float
    patience_level: int
    current_best_acc: float
    weight_swap_condition: bool
    cord_train_loss: dict[str, float]
    cord_train_acc: dict[str, float]


@dataclass
class PnnRunRecord:
    seed: int
    cord_ids: list[str]
    epochs: list[EpochRecord] = field(default_factory=list)
    cord_test_err: dict[str, float] = field(default_factory=dict)
    ensemble_test_err: float | None = None
    ensemble_train_acc: float | None = None
    swap_count: int = 0
    meta: dict = field(default_factory=dict)

    def check_integrity(self) -> None:
        if self.swap_count != sum(e.swapped for e in self.epochs):
            raise AssertionError("swap_count disagrees with per-epoch swap flags")
        if [e.epoch for e in self.epochs] != list(range(len(self.epochs))):
            raise AssertionError("epoch indices are not 0..n-1")
        for e in self.epochs:
            for v in (*e.cord_val_acc.values(), e.ensemble_val_acc):
                if not 0.0 <= v <= 1.0:
                    raise AssertionError(f"accuracy {v} outside [0, 1]")

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(_jsonable(self.to_dict()), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "PnnRunRecord":
        d = dict(d)
        d["epochs"] = [EpochRecord(**e) for e in d.get("epochs", [])]
        return cls(**d)

    def curves_csv(self) -> str:
        """Epoch-vs-validation-error curve data, one row per epoch."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch", *[f"{c}_val_err" for c in self.cord_ids], "ensemble_val_err",
                    "patience_level", "swapped"])
        for e in self.epochs:
            w.writerow([e.epoch, *[_pct(e.cord_val_acc[c]) for c in self.cord_ids],
                        _pct(e.ensemble_val_acc), e.patience_level, int(e.swapped)])
        return buf.getvalue()


def _pct(acc: float) -> float:
    return 100.0 * (1.0 - acc)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, float) and math.isinf(obj):
        return "inf"
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# ------------------------------------------------------------------ loop

@dataclass
class BrainState:
    """Run-level random streams shared by all cords."""

    split_rng: SeededRng
    val_rng: SeededRng

    @classmethod
    def for_seed(cls, seed: int) -> "BrainState":
        return cls(SeededRng(seed, "split"), SeededRng(seed, "validation"))


def _signal(cfg: BrainConfig, cord_accs: list[float], ensemble_acc: float) -> float:
    if cfg.signal_source == "ensemble":
        return ensemble_acc
    return cord_accs[cfg.signal_cord]


def run_global_epoch(cords: list[NerveCord], gate: PatienceGate, train: ImageDataset,
                     cfg: PnnConfig, state: BrainState, epoch: int) -> tuple[PatienceGate, EpochRecord]:
    """One global epoch: (1) pending swap, (2) subepochs per cord, (3) validation, (4) gate."""
    brain = cfg.brain
    if not cords:
        raise ConfigError("need at least one cord", field="cords")
    if brain.topology == "pairwise-swap" and len(cords) != 2:
        raise ConfigError("pairwise-swap needs exactly 2 cords", field="topology")

    if brain.swap_every is not None:
        do_swap = epoch > 0 and epoch % brain.swap_every == 0
    else:
        do_swap = gate.weight_swap_condition
    if do_swap:
        brain_exchange(cords, brain.topology)
        gate = gate_after_swap(gate)

    train_view, val_view = split_validation(train, cfg.val_fraction, state.split_rng,
                                            cfg.train_augment, cfg.val_augment)
    losses, accs, lrs = {}, {}, {}
    for cord in cords:
        view = train_view.with_rng(cord.augment_rng)
        total = brain.global_epochs * cord.sub_epochs
        for _ in range(cord.sub_epochs):
            lr = cosine_lr(cord.completed, total, cfg.optimizer.base_lr)
            loss, acc = train_subepoch(cord.net, view, cfg.optimizer, lr, cord.shuffle_rng)
            cord.completed += 1
        losses[cord.id], accs[cord.id], lrs[cord.id] = loss, acc, lr

    # one augmented draw of the validation images, shared by every cord
    x_val, y_val = val_view.with_rng(state.val_rng).load()
    probs = [predict_proba(c.net, val_view, x=x_val) for c in cords]
    cord_accs = [accuracy_from_probs(p, y_val) for p in probs]
    ens_acc = accuracy_from_probs(soft_vote(probs)[0], y_val)
    for cord, a in zip(cords, cord_accs):
        cord.log.append(EpochLog(epoch, lrs[cord.id], losses[cord.id], accs[cord.id], a))

    signal = _signal(brain, cord_accs, ens_acc)
    if brain.swap_every is None:
        gate, _ = gate_update(gate, signal)
    record = EpochRecord(
        epoch=epoch,
        swapped=bool(do_swap),
        cord_val_acc={c.id: a for c, a in zip(cords, cord_accs)},
        ensemble_val_acc=ens_acc,
        signal=signal,
        patience_level=gate.patience_level,
        current_best_acc=gate.current_best_acc,
        weight_swap_condition=gate.weight_swap_condition,
        cord_train_loss=losses,
        cord_train_acc=accs,
    )
    return gate, record


def ensemble_predict(cords: list[NerveCord], view) -> tuple[list[np.ndarray], np.ndarray, np.ndarray]:
    """Per-cord probabilities plus the soft-voted ``(probs, predictions)``."""
    x, _ = view.load()
    probs = [predict_proba(c.net, view, x=x) for c in cords]
    avg, pred = soft_vote(probs)
    return probs, avg, pred


def pnn_train(cfg: PnnConfig, train: ImageDataset, test: ImageDataset,
              cords: list[NerveCord] | None = None) -> PnnRunRecord:
    """Run all global epochs, then test each cord and the ensemble exactly once.

    Pass prebuilt ``cords`` to keep references to the trained networks.
    """
    if cords is None:
        cords = cfg.build_cords()
    ids = [c.id for c in cords]
    if len(set(ids)) != len(ids):
        raise ConfigError("cord ids must be unique", field="cords")
    state = BrainState.for_seed(cfg.seed)
    gate = PatienceGate(max_patience=cfg.brain.max_patience)
    record = PnnRunRecord(seed=cfg.seed, cord_ids=ids)
    for epoch in range(cfg.brain.global_epochs):
        gate, rec = run_global_epoch(cords, gate, train, cfg, state, epoch)
        record.epochs.append(rec)
        record.swap_count += int(rec.swapped)

    tv = make_test_view(train, test)
    probs, avg, pred = ensemble_predict(cords, tv)
    for c, p in zip(cords, probs):
        record.cord_test_err[c.id] = _pct(accuracy_from_probs(p, tv.labels))
    record.ensemble_test_err = _pct(float((pred == tv.labels).mean()))
    _, _, train_pred = ensemble_predict(cords, full_view(train, "test"))
    record.ensemble_train_acc = float((train_pred == train.labels).mean())
    return record
