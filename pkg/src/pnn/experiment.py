"""JSON experiment configs, multi-seed runs, and the on-disk results layout.

A results directory holds::

    config.json          normalised config snapshot (plus its hash)
    runs/seed_<s>.json   one record per seed
    curves/seed_<s>.csv  epoch-vs-validation-error data
    aggregate.csv        one row per seed, columns CSV_COLUMNS
    summary.json/.txt    mean / trimmed mean / median of each error column
    failures.json        only when some seed raised
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
import time
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .brain import TOPOLOGIES, BrainConfig, CordConfig, PnnConfig, SIGNALS, pnn_train
from .data import ImageDataset, cifar_files, load_cifar_binary, make_synthetic
from .errors import ConfigError, GeometryError
from .models import SPECS, build_network, get_spec
from .rng import SeededRng
from .stats import descriptive, median, systematic_seeds
from .training import OptimizerConfig, evaluate, make_test_view, train_baseline

CSV_COLUMNS = ["model", "seed", "cord1_err", "cord2_err", "ensemble_err", "swap_count", "wall_s"]
KINDS = ("pnn", "ensemble", "baseline")
SEED_POPULATION = 2**32 - 1


@dataclass(frozen=True)
class DatasetConfig:
    name: str = "synthetic"
    # synthetic
    classes: int = 3
    per_class: int = 40
    test_per_class: int = 20
    shape: tuple[int, int, int] = (3, 8, 8)
    separation: float = 5.0
    data_seed: int = 0
    # cifar
    root: str | None = None

    def __post_init__(self):
        if self.name not in ("synthetic", "cifar10", "cifar100"):
            raise ConfigError("must be synthetic, cifar10 or cifar100", field="dataset.name")
        if self.name == "synthetic":
            if self.classes < 2:
                raise ConfigError("must be >= 2", field="dataset.classes")
            if self.per_class < 1 or self.test_per_class < 1:
                raise ConfigError("must be >= 1", field="dataset.per_class")
            if len(self.shape) != 3:
                raise ConfigError("must be [C, H, W]", field="dataset.shape")
        elif not self.root:
            raise ConfigError("required for CIFAR datasets", field="dataset.root")

    @property
    def num_classes(self) -> int:
        return {"cifar10": 10, "cifar100": 100}.get(self.name, self.classes)

    @property
    def input_shape(self) -> tuple[int, int, int]:
        return tuple(self.shape) if self.name == "synthetic" else (3, 32, 32)

    def load(self) -> tuple[ImageDataset, ImageDataset]:
        if self.name == "synthetic":
            args = (self.classes,)
            kw = dict(shape=self.input_shape, separation=self.separation, seed=self.data_seed)
            return (make_synthetic(*args, self.per_class, sample_stream="train", **kw),
                    make_synthetic(*args, self.test_per_class, sample_stream="test", **kw))
        train_files, test_files = cifar_files(self.root, self.name)
        return load_cifar_binary(train_files, self.name), load_cifar_binary(test_files, self.name)


@dataclass(frozen=True)
class ExperimentConfig:
    kind: str
    models: tuple[str, ...]
    dataset: DatasetConfig = DatasetConfig()
    optimizer: dict = field(default_factory=dict)
    global_epochs: int = 200
    max_patience: float = 15
    sub_epochs: tuple[int, ...] | None = None
    topology: str = "pairwise-swap"
    signal_source: str = "ensemble"
    swap_every: int | None = None
    seeds: tuple[int, ...] | None = None
    systematic: dict | None = None
    val_fraction: float = 0.1
    label: str | None = None
    out: str | None = None
    record_wall_time: bool = False

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ConfigError(f"must be one of {KINDS}", field="kind")
        if not self.models:
            raise ConfigError("at least one model is required", field="models")
        for m in self.models:
            if m not in SPECS:
                raise ConfigError(f"unknown model {m!r}; available: {', '.join(sorted(SPECS))}",
                                  field="models")
        if self.kind == "baseline" and len(self.models) != 1:
            raise ConfigError("baseline runs train exactly one model", field="models")
        if self.kind != "baseline" and len(self.models) < 2:
            raise ConfigError(f"{self.kind} runs need at least two models", field="models")
        if self.sub_epochs is not None and len(self.sub_epochs) != len(self.models):
            raise ConfigError("needs one entry per model", field="sub_epochs")
        if (self.seeds is None) == (self.systematic is None):
            raise ConfigError("give exactly one of 'seeds' or 'systematic'", field="seeds")
        if self.seeds is not None and not self.seeds:
            raise ConfigError("seed list is empty", field="seeds")
        if self.systematic is not None:
            extra = set(self.systematic) - {"strata", "take"}
            if extra:
                raise ConfigError(f"unknown keys {sorted(extra)}", field="systematic")
        if self.topology not in TOPOLOGIES:
            raise ConfigError(f"must be one of {TOPOLOGIES}", field="topology")
        if self.signal_source not in SIGNALS:
            raise ConfigError(f"must be one of {SIGNALS}", field="signal_source")
        if self.global_epochs < 1:
            raise ConfigError("must be >= 1", field="global_epochs")
        # surface nested errors at load time
        for m in self.models:
            try:
                self.arch(m)
            except GeometryError as exc:
                raise ConfigError(f"{m} does not fit the dataset: {exc}", field="models") from None
        self.optimizer_config()
        self.seed_list()

    def optimizer_config(self) -> OptimizerConfig:
        known = {f.name for f in fields(OptimizerConfig)} - {"total_epochs"}
        extra = set(self.optimizer) - known
        if extra:
            raise ConfigError(f"unknown keys {sorted(extra)}", field="optimizer")
        return OptimizerConfig(**self.optimizer, total_epochs=self.global_epochs)

    def seed_list(self) -> list[int]:
        if self.seeds is not None:
            return [int(s) for s in self.seeds]
        return systematic_seeds(SEED_POPULATION, int(self.systematic.get("strata", 60)),
                                int(self.systematic.get("take", 5)))

    @property
    def model_label(self) -> str:
        if self.label:
            return self.label
        if self.kind == "baseline":
            return self.models[0]
        if self.kind == "ensemble":
            return "Ensemble"
        mp = self.max_patience
        if math.isinf(mp) or mp != int(mp):
            return f"PNN{mp}"
        return f"PNN{int(mp)}"

    def pnn_config(self, seed: int) -> PnnConfig:
        patience = math.inf if self.kind == "ensemble" else self.max_patience
        brain = BrainConfig(self.global_epochs, patience, self.topology, self.signal_source,
                            swap_every=None if self.kind == "ensemble" else self.swap_every)
        subs = self.sub_epochs or (1,) * len(self.models)
        cords = tuple(
            CordConfig(f"cord{i + 1}", self.arch(m), s) for i, (m, s) in
            enumerate(zip(self.models, subs))
        )
        return PnnConfig(cords, brain, self.optimizer_config(), seed, self.val_fraction)

    def arch(self, name: str):
        return get_spec(name, self.dataset.num_classes, self.dataset.input_shape)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["max_patience"] = "inf" if math.isinf(self.max_patience) else self.max_patience
        return d

    def config_hash(self) -> str:
        """Hash of everything that affects results: ``out`` and wall-time logging are excluded."""
        d = self.to_dict()
        d.pop("out")
        d.pop("record_wall_time")
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _tuple(v):
    return tuple(v) if isinstance(v, list) else v


def config_from_dict(d: dict) -> ExperimentConfig:
    if not isinstance(d, dict):
        raise ConfigError("top level must be a JSON object")
    d = dict(d)
    known = {f.name for f in fields(ExperimentConfig)}
    extra = set(d) - known
    if extra:
        raise ConfigError(f"unknown keys {sorted(extra)}", field="config")
    for req in ("kind", "models"):
        if req not in d:
            raise ConfigError("is required", field=req)
    ds = d.get("dataset", {})
    if not isinstance(ds, dict):
        raise ConfigError("must be an object", field="dataset")
    ds_known = {f.name for f in fields(DatasetConfig)}
    if set(ds) - ds_known:
        raise ConfigError(f"unknown keys {sorted(set(ds) - ds_known)}", field="dataset")
    d["dataset"] = DatasetConfig(**{k: _tuple(v) for k, v in ds.items()})
    if isinstance(d.get("max_patience"), str):
        if d["max_patience"].lower() not in ("inf", "infinity"):
            raise ConfigError("must be a number or \"inf\"", field="max_patience")
        d["max_patience"] = math.inf
    for k in ("models", "sub_epochs", "seeds"):
        if k in d:
            d[k] = _tuple(d[k])
    if isinstance(d.get("models"), str):
        d["models"] = (d["models"],)
    try:
        return ExperimentConfig(**d)
    except TypeError as exc:
        raise ConfigError(str(exc), field="config") from None


def load_config(path) -> ExperimentConfig:
    try:
        raw = json.loads(Path(path).read_text())
    except FileNotFoundError:
        raise ConfigError(f"no such file {path}", field="config") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}", field="config") from None
    return config_from_dict(raw)


# --------------------------------------------------------------------- runs

@dataclass
class RunResult:
    model: str
    seed: int
    cord_err: list[float]
    ensemble_err: float
    swap_count: int
    wall_s: float
    config_hash: str
    ensemble_train_acc: float | None = None
    record: dict | None = None
    curves: str | None = None

    def csv_row(self, with_wall: bool) -> dict:
        errs = self.cord_err + [None, None]
        return {
            "model": self.model,
            "seed": self.seed,
            "cord1_err": _fmt(errs[0]),
            "cord2_err": _fmt(errs[1]),
            "ensemble_err": _fmt(self.ensemble_err),
            "swap_count": self.swap_count,
            "wall_s": f"{self.wall_s:.3f}" if with_wall else "",
        }


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def run_seed(cfg: ExperimentConfig, seed: int) -> RunResult:
    """Train and test one seed; the same call in any process gives the same numbers."""
    start = time.perf_counter()
    train, test = cfg.dataset.load()
    if cfg.kind == "baseline":
        opt = cfg.optimizer_config()
        stream = "cord1"
        net = build_network(cfg.arch(cfg.models[0]), SeededRng(seed, f"{stream}/init"))
        subs = (cfg.sub_epochs or (1,))[0]
        log = train_baseline(net, train, opt, cfg.global_epochs, seed, stream, subs,
                             cfg.val_fraction)
        _, err = evaluate(net, make_test_view(train, test))
        record = {"seed": seed, "log": [asdict(e) for e in log.records], "test_err": err}
        return RunResult(cfg.model_label, seed, [err], err, 0, time.perf_counter() - start,
                         cfg.config_hash(), record=record, curves=log.to_csv())
    rec = pnn_train(cfg.pnn_config(seed), train, test)
    rec.check_integrity()
    return RunResult(
        cfg.model_label, seed, [rec.cord_test_err[c] for c in rec.cord_ids],
        rec.ensemble_test_err, rec.swap_count, time.perf_counter() - start, cfg.config_hash(),
        ensemble_train_acc=rec.ensemble_train_acc, record=rec.to_dict(),
        curves=rec.curves_csv(),
    )


def _run_seed_safe(cfg: ExperimentConfig, seed: int):
    try:
        return run_seed(cfg, seed), None
    except Exception as exc:  # reported in failures.json, not swallowed
        return None, {"seed": seed, "error": type(exc).__name__, "message": str(exc),
                      "traceback": traceback.format_exc()}


@dataclass
class ExperimentOutcome:
    out: Path
    results: list[RunResult]
    failures: list[dict]
    summary: dict


def summarise(results: list[RunResult]) -> dict:
    cols = {"ensemble_err": [r.ensemble_err for r in results]}
    for i in range(max((len(r.cord_err) for r in results), default=0)):
        cols[f"cord{i + 1}_err"] = [r.cord_err[i] for r in results if len(r.cord_err) > i]
    out = {}
    for name, vals in cols.items():
        if not vals:
            continue
        entry = {"n": len(vals), "mean": math.fsum(vals) / len(vals)}
        if len(vals) >= 3:
            d = descriptive(vals)
            entry.update(trimmed_mean=d.trimmed_mean, median=d.median)
        else:
            entry.update(trimmed_mean=None, median=median(vals))
        out[name] = entry
    return out


def summary_line(model: str, summary: dict) -> str:
    s = summary.get("ensemble_err")
    if not s:
        return f"{model}: no successful runs"
    tm = "n/a" if s["trimmed_mean"] is None else f"{s['trimmed_mean']:.2f}"
    return (f"{model}: n={s['n']} test error % mean={s['mean']:.2f} trimmed_mean={tm} "
            f"median={s['median']:.2f}")


def write_aggregate(path, results: list[RunResult], with_wall: bool) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=CSV_COLUMNS, lineterminator="\n")
        w.writeheader()
        for r in results:
            w.writerow(r.csv_row(with_wall))


def run_experiment(cfg: ExperimentConfig, out=None, workers: int = 1) -> ExperimentOutcome:
    out = Path(out or cfg.out or "results")
    seeds = cfg.seed_list()
    (out / "runs").mkdir(parents=True, exist_ok=True)
    (out / "curves").mkdir(exist_ok=True)
    snapshot = {**cfg.to_dict(), "config_hash": cfg.config_hash(), "seed_list": seeds}
    (out / "config.json").write_text(json.dumps(snapshot, indent=2, sort_keys=True) + "\n")

    if workers > 1 and len(seeds) > 1:
        with ProcessPoolExecutor(max_workers=min(workers, len(seeds))) as pool:
            outcomes = list(pool.map(_run_seed_safe, [cfg] * len(seeds), seeds))
    else:
        outcomes = [_run_seed_safe(cfg, s) for s in seeds]

    # pool.map preserves input order, so results are merged in seed-list order
    results = [r for r, _ in outcomes if r is not None]
    failures = [f for _, f in outcomes if f is not None]
    for r in results:
        payload = {k: v for k, v in asdict(r).items() if k != "curves"}
        (out / "runs" / f"seed_{r.seed}.json").write_text(
            json.dumps(_json_safe(payload), indent=2, sort_keys=True) + "\n")
        (out / "curves" / f"seed_{r.seed}.csv").write_text(r.curves)
    write_aggregate(out / "aggregate.csv", results, cfg.record_wall_time)
    summary = summarise(results)
    line = summary_line(cfg.model_label, summary)
    (out / "summary.json").write_text(json.dumps(
        {"model": cfg.model_label, "config_hash": cfg.config_hash(), "errors": summary},
        indent=2, sort_keys=True) + "\n")
    (out / "summary.txt").write_text(line + "\n")
    failure_path = out / "failures.json"
    if failures:
        failure_path.write_text(json.dumps(failures, indent=2) + "\n")
    elif failure_path.exists():
        failure_path.unlink()
    return ExperimentOutcome(out, results, failures, summary)


def _json_safe(obj):
    if isinstance(obj, dict):
        return {str(k): _json_safe(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_json_safe(v) for v in obj]
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    if hasattr(obj, "item"):
        return obj.item()
    return obj
