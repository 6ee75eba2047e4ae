import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from pnn.data import (AugmentConfig, ImageDataset, apply_augment, augment, draw_augment_params,
                      full_view, load_cifar_binary, make_synthetic, split_validation,
                      synthetic_class_means, write_cifar_binary)
from pnn.errors import ConfigError, CorruptionError, DataError, DataFormatError
from pnn.rng import SeededRng, seeded_shuffle

RECORD10 = 1 + 3072
RECORD100 = 2 + 3072


def _cifar10_bytes(labels, seed=0):
    r = np.random.default_rng(seed)
    out = bytearray()
    for lab in labels:
        out.append(lab)
        out += r.integers(0, 256, 3072, dtype=np.uint8).tobytes()
    return bytes(out)


@pytest.fixture
def cifar10_file(tmp_path):
    path = tmp_path / "data_batch_1.bin"
    path.write_bytes(_cifar10_bytes([3, 7]))
    return path


def test_cifar10_fixture_decodes_channel_major(cifar10_file):
    raw = cifar10_file.read_bytes()
    ds = load_cifar_binary([cifar10_file], "cifar10")
    assert len(ds) == 2 and ds.labels.tolist() == [3, 7]
    assert ds.shape == (3, 32, 32)
    # second record: R plane starts right after its label byte
    assert ds.images[1, 0, 0, 0] == raw[RECORD10 + 1]
    assert ds.images[1, 1, 0, 0] == raw[RECORD10 + 1 + 1024]
    assert ds.images[1, 2, 31, 31] == raw[2 * RECORD10 - 1]
    assert ds.images[0, 0, 0, 5] == raw[1 + 5]
    assert ds.images[0, 0, 1, 0] == raw[1 + 32]


def test_cifar10_round_trip_is_byte_identical(cifar10_file, tmp_path):
    ds = load_cifar_binary(cifar10_file)
    out = tmp_path / "copy.bin"
    write_cifar_binary(ds, out)
    assert out.read_bytes() == cifar10_file.read_bytes()


def test_cifar100_round_trip_uses_fine_label(tmp_path):
    r = np.random.default_rng(5)
    raw = bytearray()
    for coarse, fine in [(4, 99), (19, 0), (0, 42)]:
        raw += bytes([coarse, fine]) + r.integers(0, 256, 3072, dtype=np.uint8).tobytes()
    src = tmp_path / "train.bin"
    src.write_bytes(bytes(raw))
    ds = load_cifar_binary(src, "cifar100")
    assert ds.labels.tolist() == [99, 0, 42]
    assert ds.coarse_labels.tolist() == [4, 19, 0]
    assert ds.class_count == 100
    out = tmp_path / "out.bin"
    write_cifar_binary(ds, out, "cifar100")
    assert out.read_bytes() == bytes(raw)


def test_multiple_files_concatenate(tmp_path):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    a.write_bytes(_cifar10_bytes([1, 2], seed=1))
    b.write_bytes(_cifar10_bytes([9], seed=2))
    assert load_cifar_binary([a, b]).labels.tolist() == [1, 2, 9]


def test_truncated_file_reports_offset(cifar10_file, tmp_path):
    bad = tmp_path / "short.bin"
    bad.write_bytes(cifar10_file.read_bytes()[:-1])
    with pytest.raises(DataFormatError) as info:
        load_cifar_binary([cifar10_file, bad])
    assert info.value.offset == RECORD10
    assert str(RECORD10) in str(info.value)


def test_out_of_range_label_is_corruption(tmp_path):
    p = tmp_path / "bad.bin"
    p.write_bytes(_cifar10_bytes([2, 10]))
    with pytest.raises(CorruptionError):
        load_cifar_binary(p)


# ----------------------------------------------------------- augmentation

def _image(seed=0, shape=(3, 32, 32)):
    return np.random.default_rng(seed).integers(0, 256, shape, dtype=np.uint8)


def test_center_crop_without_flip_is_identity():
    img = _image()
    cfg = AugmentConfig(mode="train", subtract_mean=False)
    out = apply_augment(img, 4, 4, False, cfg, None, np.float64)
    np.testing.assert_array_equal(out, img / 255.0)


def test_flip_is_an_involution():
    img = _image(1)
    cfg = AugmentConfig(mode="validation", subtract_mean=False)
    once = apply_augment(img, 4, 4, True, cfg, None, np.float64)
    assert not np.array_equal(once, img / 255.0)
    twice = apply_augment((once * 255).round().astype(np.uint8), 4, 4, True, cfg, None, np.float64)
    np.testing.assert_array_equal(twice, img / 255.0)


@given(dy=st.integers(0, 8), dx=st.integers(0, 8), flip=st.booleans())
def test_train_crops_always_32x32(dy, dx, flip):
    out = apply_augment(_image(2), dy, dx, flip, AugmentConfig(mode="train"),
                        np.zeros((3, 32, 32)))
    assert out.shape == (3, 32, 32)


def test_crop_offsets_shift_content():
    img = _image(3)
    cfg = AugmentConfig(mode="train", subtract_mean=False)
    out = apply_augment(img, 0, 0, False, cfg, None, np.float64)
    # offset (0, 0): four rows/cols of zero padding, then the image's top-left corner
    assert np.all(out[:, :4, :] == 0) and np.all(out[:, :, :4] == 0)
    np.testing.assert_array_equal(out[:, 4:, 4:], img[:, :28, :28] / 255.0)


def test_augment_draws_replay():
    cfg = AugmentConfig(mode="train")
    draws = [[draw_augment_params(cfg, (3, 32, 32), rng) for _ in range(100)]
             for rng in (SeededRng(11, "aug"), SeededRng(11, "aug"))]
    assert draws[0] == draws[1]
    assert len({d[:2] for d in draws[0]}) > 10
    assert {d[2] for d in draws[0]} == {True, False}
    assert all(0 <= dy <= 8 and 0 <= dx <= 8 for dy, dx, _ in draws[0])


def test_validation_mode_only_flips_and_test_mode_draws_nothing():
    img = _image(4)
    mean = np.full((3, 32, 32), 0.5)
    rng = SeededRng(0, "v")
    for _ in range(20):
        out = augment(img, AugmentConfig(mode="validation"), mean, rng, np.float64)
        base = img / 255.0 - mean
        assert np.array_equal(out, base) or np.array_equal(out, base[:, :, ::-1])
    state = rng.state()
    out = augment(img, AugmentConfig(mode="test"), mean, rng, np.float64)
    np.testing.assert_array_equal(out, img / 255.0 - mean)
    assert rng.state() == state


def test_views_subtract_the_training_mean():
    train = make_synthetic(3, 10, seed=0)
    test = make_synthetic(3, 10, seed=0, sample_stream="test")
    assert not np.allclose(train.per_pixel_mean, test.per_pixel_mean)
    x, _ = full_view(test, "test", mean=train.per_pixel_mean).load(dtype=np.float64)
    np.testing.assert_allclose(x, test.images / 255.0 - train.per_pixel_mean)


def test_views_that_need_randomness_require_an_rng():
    ds = make_synthetic(3, 2)
    with pytest.raises(DataError):
        full_view(ds, "train").load()


# ----------------------------------------------------------------- splits

def test_split_ninety_ten():
    ds = make_synthetic(2, 50)
    tr, va = split_validation(ds, 0.1, SeededRng(0, "split"))
    assert (len(tr), len(va)) == (90, 10)
    assert sorted(np.concatenate([tr.indices, va.indices]).tolist()) == list(range(100))
    assert tr.cfg.mode == "train" and va.cfg.mode == "validation"


def test_split_minimal():
    ds = make_synthetic(2, 1)
    tr, va = split_validation(ds, 0.5, SeededRng(0, "split"))
    assert len(tr) == len(va) == 1
    assert {int(tr.indices[0]), int(va.indices[0])} == {0, 1}


def test_split_empty_side_rejected():
    ds = make_synthetic(2, 2)
    with pytest.raises(ConfigError):
        split_validation(ds, 0.01, SeededRng(0, "split"))
    with pytest.raises(ConfigError):
        split_validation(ds, 1.0, SeededRng(0, "split"))


def test_split_determinism_and_stream_sensitivity():
    ds = make_synthetic(2, 500)
    a = split_validation(ds, 0.1, SeededRng(3, "split"))[1].indices
    b = split_validation(ds, 0.1, SeededRng(3, "split"))[1].indices
    c = split_validation(ds, 0.1, SeededRng(3, "other"))[1].indices
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)


@given(n=st.integers(2, 60), frac=st.floats(0.05, 0.95), seed=st.integers(0, 1000))
def test_split_partitions_every_epoch(n, frac, seed):
    ds = ImageDataset(np.zeros((n, 1, 1, 1), np.uint8), np.zeros(n, np.int64), 2)
    k = int(np.floor(frac * n + 0.5))
    if k in (0, n):
        return
    rng = SeededRng(seed, "split")
    for _ in range(3):
        tr, va = split_validation(ds, frac, rng)
        assert not set(tr.indices.tolist()) & set(va.indices.tolist())
        assert len(tr) + len(va) == n
        assert len(va) == k


@given(items=st.lists(st.integers(), max_size=40), seed=st.integers(0, 2**32 - 1))
def test_seeded_shuffle_is_a_deterministic_permutation(items, seed):
    a = seeded_shuffle(items, SeededRng(seed, "s"))
    assert a == seeded_shuffle(items, SeededRng(seed, "s"))
    assert sorted(a) == sorted(items)


# -------------------------------------------------------------- synthetic

def _nearest_true_mean_accuracy(ds, means):
    x = ds.images.reshape(len(ds), -1).astype(np.float64)
    m = means.reshape(len(means), -1)
    pred = np.argmin(((x[:, None, :] - m[None]) ** 2).sum(-1), axis=1)
    return float((pred == ds.labels).mean())


def test_synthetic_blobs_are_separable():
    ds = make_synthetic(3, 20, (3, 8, 8), 5.0, seed=0)
    assert ds.labels.tolist() == [0] * 20 + [1] * 20 + [2] * 20
    assert _nearest_true_mean_accuracy(ds, synthetic_class_means(3, (3, 8, 8), 5.0, 0)) >= 0.95


def test_synthetic_zero_separation_is_chance():
    ds = make_synthetic(3, 300, (3, 8, 8), 0.0, seed=1)
    means = synthetic_class_means(3, (3, 8, 8), 0.0, 1)
    assert np.allclose(means[0], means[1])
    # all means coincide, so argmin picks class 0 for everything: exactly 1/3
    assert _nearest_true_mean_accuracy(ds, means) == pytest.approx(1 / 3)


def test_synthetic_mean_distance_tracks_separation():
    means = synthetic_class_means(4, (3, 8, 8), 5.0, 2).reshape(4, -1)
    d = np.linalg.norm(means[:, None] - means[None], axis=-1)
    off = d[~np.eye(4, dtype=bool)]
    np.testing.assert_allclose(off, 5.0 * 16.0)


def test_synthetic_is_deterministic():
    a, b = make_synthetic(3, 5, seed=9), make_synthetic(3, 5, seed=9)
    assert np.array_equal(a.images, b.images) and np.array_equal(a.labels, b.labels)
    c = make_synthetic(3, 5, seed=9, sample_stream="test")
    assert not np.array_equal(a.images, c.images)
