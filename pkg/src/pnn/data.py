"""CIFAR binary I/O, synthetic datasets, augmentation, and train/validation views."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, CorruptionError, DataError, DataFormatError
from .rng import SeededRng, seeded_shuffle

CIFAR_PIXELS = 3 * 32 * 32
VARIANTS = {
    # (label bytes per record, class count)
    "cifar10": (1, 10),
    "cifar100": (2, 100),
}
MODES = ("train", "validation", "test")


@dataclass
class ImageDataset:
    images: np.ndarray  # uint8, (N, C, H, W)
    labels: np.ndarray  # int64, (N,)
    class_count: int
    per_pixel_mean: np.ndarray = None  # float64, (C, H, W), pixel values scaled to [0, 1]
    coarse_labels: np.ndarray | None = None  # cifar100 only, kept for round-trips

    def __post_init__(self):
        self.images = np.asarray(self.images, dtype=np.uint8)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.images.ndim != 4 or len(self.images) != len(self.labels):
            raise DataError("images must be (N, C, H, W) with one label per image")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.class_count):
            raise CorruptionError(f"labels must lie in [0, {self.class_count})")
        if self.per_pixel_mean is None:
            self.per_pixel_mean = compute_pixel_mean(self.images)

    def __len__(self):
        return len(self.labels)

    @property
    def shape(self):
        return self.images.shape[1:]


def compute_pixel_mean(images: np.ndarray) -> np.ndarray:
    if len(images) == 0:
        return np.zeros(images.shape[1:], dtype=np.float64)
    return images.mean(axis=0, dtype=np.float64) / 255.0


def load_cifar_binary(paths, variant: str = "cifar10") -> ImageDataset:
    """Decode one or more CIFAR binary batch files into a single dataset.

    Records are ``label byte(s) + 1024 R + 1024 G + 1024 B``; for cifar100
    the coarse label precedes the fine label and the fine label is used.
    All files are validated before any dataset is built.
    """
    if variant not in VARIANTS:
        raise ValueError(f"variant must be one of {sorted(VARIANTS)}")
    nlab, classes = VARIANTS[variant]
    record = nlab + CIFAR_PIXELS
    chunks = []
    for path in ([paths] if isinstance(paths, (str, Path)) else paths):
        raw = np.frombuffer(Path(path).read_bytes(), dtype=np.uint8)
        if raw.size % record:
            whole = raw.size - raw.size % record
            raise DataFormatError(
                f"{path}: {raw.size} bytes is not a multiple of the {record}-byte record; "
                f"incomplete record at byte offset {whole}", offset=whole)
        recs = raw.reshape(-1, record)
        fine = recs[:, nlab - 1]
        bad = np.flatnonzero(fine >= classes)
        if bad.size:
            i = int(bad[0])
            raise CorruptionError(
                f"{path}: label {int(fine[i])} >= {classes} in record {i} "
                f"(byte offset {i * record + nlab - 1})")
        chunks.append(recs)
    recs = np.concatenate(chunks) if chunks else np.zeros((0, record), np.uint8)
    images = recs[:, nlab:].reshape(-1, 3, 32, 32).copy()
    return ImageDataset(
        images, recs[:, nlab - 1].astype(np.int64), classes,
        coarse_labels=recs[:, 0].astype(np.int64) if nlab == 2 else None,
    )


def write_cifar_binary(dataset: ImageDataset, path, variant: str = "cifar10") -> None:
    if dataset.shape != (3, 32, 32):
        raise DataError(f"CIFAR records hold 3x32x32 images, got {dataset.shape}")
    nlab, _ = VARIANTS[variant]
    n = len(dataset)
    out = np.empty((n, nlab + CIFAR_PIXELS), dtype=np.uint8)
    if nlab == 2:
        coarse = dataset.coarse_labels if dataset.coarse_labels is not None else np.zeros(n)
        out[:, 0] = coarse
    out[:, nlab - 1] = dataset.labels
    out[:, nlab:] = dataset.images.reshape(n, -1)
    Path(path).write_bytes(out.tobytes())


def cifar_files(root, variant: str) -> tuple[list[Path], list[Path]]:
    """Standard train/test file names inside an extracted CIFAR binary archive."""
    root = Path(root)
    if variant == "cifar10":
        return [root / f"data_batch_{i}.bin" for i in range(1, 6)], [root / "test_batch.bin"]
    return [root / "train.bin"], [root / "test.bin"]


# ---------------------------------------------------------------- synthetic

SYNTHETIC_NOISE = 16.0  # per-pixel std, in 0..255 units
SYNTHETIC_BASE = 128.0


def _spatial_patterns(h: int, w: int) -> list[np.ndarray]:
    yy, xx = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    flat = np.ones((h, w))
    lr = np.where(xx < w / 2, 1.0, -1.0)
    tb = np.where(yy < h / 2, 1.0, -1.0)
    return [p / np.linalg.norm(p) for p in (flat, lr, tb, lr * tb)]


def synthetic_class_means(classes: int, shape, separation: float, seed: int) -> np.ndarray:
    """Class mean images, pairwise ``separation * noise_std`` apart.

    Means are built from orthonormal low-frequency patterns (per-channel
    constants first), so that a convolutional net with global pooling can
    tell the classes apart; a seeded rotation mixes them.
    """
    c, h, w = shape
    d = c * h * w
    basis = []
    for pattern in _spatial_patterns(h, w):
        for ch in range(c):
            v = np.zeros(shape)
            v[ch] = pattern
            basis.append(v)
    rng = SeededRng(seed, "synthetic/means")
    if classes <= len(basis):
        b = np.stack([v.ravel() for v in basis[:classes]])
    else:
        b = np.linalg.qr(rng.normal(size=(d, classes)))[0].T
    q, r = np.linalg.qr(rng.normal(size=(classes, classes)))
    q = q * np.sign(np.diag(r))
    dirs = q @ b
    offsets = separation * SYNTHETIC_NOISE / math.sqrt(2.0) * dirs
    return (SYNTHETIC_BASE + offsets).reshape((classes,) + tuple(shape))


def make_synthetic(classes: int, per_class: int, shape=(3, 8, 8), separation: float = 5.0,
                   seed: int = 0, sample_stream: str = "train") -> ImageDataset:
    """Balanced Gaussian blobs quantised to bytes.

    Class means depend only on ``seed``; ``sample_stream`` selects the noise
    draw, so ``"train"`` and ``"test"`` sets share one distribution.
    """
    if classes < 2:
        raise ConfigError("need at least 2 classes", field="classes")
    means = synthetic_class_means(classes, shape, separation, seed)
    rng = SeededRng(seed, f"synthetic/samples/{sample_stream}")
    labels = np.repeat(np.arange(classes), per_class)
    noise = rng.normal(size=(len(labels),) + tuple(shape), scale=SYNTHETIC_NOISE)
    images = np.clip(np.rint(means[labels] + noise), 0, 255).astype(np.uint8)
    return ImageDataset(images, labels, classes)


# -------------------------------------------------------------- augmentation

@dataclass(frozen=True)
class AugmentConfig:
    mode: str = "train"
    pad: int = 4
    crop: tuple[int, int] | None = None  # None: crop back to the input size
    hflip_prob: float = 0.5
    subtract_mean: bool = True

    def __post_init__(self):
        if self.mode not in MODES:
            raise ConfigError(f"must be one of {MODES}", field="mode")


def draw_augment_params(cfg: AugmentConfig, shape, rng: SeededRng | None):
    """Random choices for one image: ``(row offset, col offset, flip)``.

    Train mode draws the two crop offsets, then the flip; validation mode
    draws only the flip; test mode draws nothing.
    """
    _, h, w = shape
    ch, cw = cfg.crop or (h, w)
    if cfg.mode == "train":
        dy = int(rng.integers(0, h + 2 * cfg.pad - ch + 1))
        dx = int(rng.integers(0, w + 2 * cfg.pad - cw + 1))
        return dy, dx, bool(rng.uniform() < cfg.hflip_prob)
    if cfg.mode == "validation":
        return cfg.pad, cfg.pad, bool(rng.uniform() < cfg.hflip_prob)
    return cfg.pad, cfg.pad, False


def apply_augment(image: np.ndarray, dy: int, dx: int, flip: bool, cfg: AugmentConfig,
                  mean: np.ndarray | None, dtype=np.float32) -> np.ndarray:
    _, h, w = image.shape
    ch, cw = cfg.crop or (h, w)
    if cfg.mode == "train":
        p = cfg.pad
        padded = np.pad(image, ((0, 0), (p, p), (p, p)))
        img = padded[:, dy : dy + ch, dx : dx + cw]
    else:
        img = image
    if flip:
        img = img[:, :, ::-1]
    out = img.astype(np.float64) / 255.0
    if cfg.subtract_mean and mean is not None:
        out = out - mean
    return out.astype(dtype)


def augment(image: np.ndarray, cfg: AugmentConfig, mean: np.ndarray | None,
            rng: SeededRng | None, dtype=np.float32) -> np.ndarray:
    """Augment one ``(C, H, W)`` byte image and scale it to reals."""
    dy, dx, flip = draw_augment_params(cfg, image.shape, rng)
    return apply_augment(image, dy, dx, flip, cfg, mean, dtype)


@dataclass
class DatasetView:
    """Indices into a dataset plus the augmentation applied when reading them.

    ``mean`` is the training set's per-pixel mean; views over validation or
    test images still subtract the training mean.
    """

    dataset: ImageDataset
    indices: np.ndarray
    cfg: AugmentConfig = field(default_factory=lambda: AugmentConfig(mode="test"))
    rng: SeededRng | None = None
    mean: np.ndarray | None = None

    def __post_init__(self):
        self.indices = np.asarray(self.indices, dtype=np.int64)
        if self.indices.size and (self.indices.min() < 0 or self.indices.max() >= len(self.dataset)):
            raise DataError("view indices out of range")
        if self.mean is None:
            self.mean = self.dataset.per_pixel_mean

    def __len__(self):
        return len(self.indices)

    @property
    def labels(self) -> np.ndarray:
        return self.dataset.labels[self.indices]

    def with_rng(self, rng: SeededRng | None) -> "DatasetView":
        return replace(self, rng=rng)

    def load(self, positions=None, dtype=np.float32):
        """Augmented ``(x, y)`` for the given view positions (default: all, in order)."""
        idx = self.indices if positions is None else self.indices[np.asarray(positions)]
        if self.cfg.mode != "test" and self.rng is None:
            raise DataError(f"{self.cfg.mode} view needs an rng for its random augmentation")
        imgs = self.dataset.images
        x = np.stack([augment(imgs[i], self.cfg, self.mean, self.rng, dtype) for i in idx]) \
            if len(idx) else np.zeros((0,) + self.dataset.shape, dtype)
        return x, self.dataset.labels[idx]


def full_view(dataset: ImageDataset, mode: str = "test", rng: SeededRng | None = None,
              mean: np.ndarray | None = None, cfg: AugmentConfig | None = None) -> DatasetView:
    cfg = cfg or AugmentConfig(mode=mode)
    return DatasetView(dataset, np.arange(len(dataset)), cfg, rng, mean)


def split_validation(train: ImageDataset, fraction: float, rng: SeededRng,
                     train_cfg: AugmentConfig | None = None,
                     val_cfg: AugmentConfig | None = None) -> tuple[DatasetView, DatasetView]:
    """Uniform random disjoint split; each call advances ``rng`` and draws afresh."""
    if not 0 < fraction < 1:
        raise ConfigError(f"must lie strictly between 0 and 1, got {fraction}", field="fraction")
    n = len(train)
    n_val = int(math.floor(fraction * n + 0.5))
    if n_val == 0 or n_val == n:
        raise ConfigError(f"fraction {fraction} of {n} images leaves one side empty",
                          field="fraction")
    perm = np.asarray(seeded_shuffle(range(n), rng), dtype=np.int64)
    val_idx = np.sort(perm[:n_val])
    train_idx = np.sort(perm[n_val:])
    train_cfg = train_cfg or AugmentConfig(mode="train")
    val_cfg = val_cfg or AugmentConfig(mode="validation")
    return (DatasetView(train, train_idx, train_cfg, None, train.per_pixel_mean),
            DatasetView(train, val_idx, val_cfg, None, train.per_pixel_mean))
