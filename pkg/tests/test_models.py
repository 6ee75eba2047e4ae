import numpy as np
import pytest

from pnn.errors import GeometryError, StructureError
from pnn.models import (REFERENCE_PARAM_COUNTS, SPECS, STEM_ORDER, ArchitectureSpec,
                        build_network, get_spec, param_count, stem_parameters)
from pnn.rng import SeededRng


@pytest.mark.parametrize("name", sorted(REFERENCE_PARAM_COUNTS))
def test_reference_param_counts(name):
    net = build_network(SPECS[name], SeededRng(0, "init"))
    assert param_count(net) == REFERENCE_PARAM_COUNTS[name]


@pytest.mark.parametrize("name,layers", [("resnet20", 20), ("wideresnet14", 14),
                                         ("resnet164", 164), ("wideresnet110", 110)])
def test_weighted_layer_counts(name, layers):
    spec = SPECS[name]
    assert spec.expected_weighted_layers() == layers
    assert build_network(spec, SeededRng(0, "init")).weighted_layers() == layers


def test_param_count_excludes_running_stats():
    net = build_network(SPECS["tiny"], SeededRng(0, "init"))
    everything = sum(t.size for t in net.tensors())
    stats = sum(t.size for t in net.tensors() if not t.trainable)
    assert param_count(net) == everything - stats > 0


@pytest.mark.parametrize("name", sorted(SPECS))
def test_forward_shape_and_finite_on_zeros(name):
    spec = SPECS[name]
    if spec.n > 3:
        pytest.skip("deep nets covered by the count test")
    net = build_network(spec, SeededRng(1, "init"))
    out = net.forward(np.zeros((2,) + spec.input_shape, np.float32))
    assert out.shape == (2, spec.num_classes)
    assert np.all(np.isfinite(out))


def test_build_is_deterministic():
    a = build_network(SPECS["tiny-deep"], SeededRng(5, "init")).state_dict()
    b = build_network(SPECS["tiny-deep"], SeededRng(5, "init")).state_dict()
    c = build_network(SPECS["tiny-deep"], SeededRng(6, "init")).state_dict()
    assert a.keys() == b.keys()
    assert all(np.array_equal(a[k], b[k]) for k in a)
    assert any(not np.array_equal(a[k], c[k]) for k in a if k.endswith("weight"))


@pytest.mark.parametrize("pair", [("resnet20", "wideresnet14"), ("resnet164", "wideresnet110"),
                                  ("tiny-deep", "tiny-wide")])
def test_pair_members_have_interchangeable_stems(pair):
    stems = [stem_parameters(build_network(SPECS[n], SeededRng(0, "init"))) for n in pair]
    assert [t.name for t in stems[0]] == [f"stem.{s}" for s in STEM_ORDER]
    assert [t.shape for t in stems[0]] == [t.shape for t in stems[1]]


def test_parameter_names_are_unique():
    net = build_network(SPECS["tiny-bottleneck"], SeededRng(0, "init"))
    names = [t.name for t in net.tensors()]
    assert len(names) == len(set(names))
    assert set(net.registry) == set(names)


def test_stem_parameters_missing_stem():
    net = build_network(SPECS["tiny"], SeededRng(0, "init"))
    del net.registry["stem.bn.beta"]
    with pytest.raises(StructureError):
        stem_parameters(net)


def test_spec_rejects_bad_geometry():
    with pytest.raises(GeometryError):
        ArchitectureSpec("basic-residual", 1, (8, 16), (8, 3), 3, (3, 8, 8), stem_width=8)


def test_get_spec_unknown_lists_names():
    with pytest.raises(KeyError, match="resnet20"):
        get_spec("resnet21")


def test_get_spec_retarget():
    spec = get_spec("resnet20", num_classes=100)
    assert spec.num_classes == 100
    # only the head changes: 64 * 90 extra weights and 90 extra biases
    net = build_network(spec, SeededRng(0, "init"))
    assert param_count(net) == 272_474 + 64 * 90 + 90
