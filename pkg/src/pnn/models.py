"""Residual architectures: the CIFAR-scale ResNet/WideResNet pairs and desk-scale miniatures.

One layout reproduces all four published parameter counts exactly:

* every model starts with a 16-filter StemBlock (3x3 conv + BN + relu), which
  is also what makes the stems of a ResNet/WideResNet pair exchangeable;
* residual blocks are post-activation (conv -> BN -> relu, sum, relu);
* where a block changes channel count or resolution, the shortcut is a
  1x1 strided convolution followed by BN, otherwise the identity;
* bottleneck blocks expand their 3x3 width by 4.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import GeometryError, StructureError
from .nn import (
    DEFAULT_DTYPE,
    BatchNorm2d,
    Conv2d,
    Dense,
    GlobalAvgPool,
    Layer,
    ParamTensor,
    ReLU,
    Residual,
    Sequential,
)
from .rng import SeededRng

FAMILIES = ("basic-residual", "bottleneck-residual", "wide-basic-residual")
BOTTLENECK_EXPANSION = 4
STEM_ORDER = ("conv.weight", "bn.gamma", "bn.beta", "bn.running_mean", "bn.running_var")


@dataclass(frozen=True)
class ArchitectureSpec:
    family: str
    n: int
    stage_widths: tuple[int, ...]
    stage_feature_sizes: tuple[int, ...]
    num_classes: int
    input_shape: tuple[int, int, int] = (3, 32, 32)
    stem_width: int = 16

    def __post_init__(self):
        object.__setattr__(self, "stage_widths", tuple(self.stage_widths))
        object.__setattr__(self, "stage_feature_sizes", tuple(self.stage_feature_sizes))
        object.__setattr__(self, "input_shape", tuple(self.input_shape))
        if self.family not in FAMILIES:
            raise ValueError(f"unknown family {self.family!r}; expected one of {FAMILIES}")
        if self.n < 1:
            raise ValueError("n must be >= 1")
        if self.num_classes < 2:
            raise ValueError("num_classes must be >= 2")
        if len(self.stage_widths) != len(self.stage_feature_sizes) or not self.stage_widths:
            raise ValueError("stage_widths and stage_feature_sizes must be non-empty and equal length")
        self.stage_strides()

    def stage_strides(self) -> list[int]:
        """Stride of each stage's first block, implied by the feature sizes."""
        strides = []
        size = self.input_shape[1]
        for target in self.stage_feature_sizes:
            if target == size:
                strides.append(1)
            elif target == (size + 1) // 2:
                strides.append(2)
            else:
                raise GeometryError(
                    f"stage feature size {target} is not reachable from {size} with stride 1 or 2")
            size = target
        return strides

    @property
    def convs_per_block(self) -> int:
        return 3 if self.family == "bottleneck-residual" else 2

    def expected_weighted_layers(self) -> int:
        """Stem conv + block convs + classifier: 6n+2, 4n+2, 9n+2, ..."""
        return self.convs_per_block * self.n * len(self.stage_widths) + 2


def _conv_bn(prefix: str, cin: int, cout: int, k: int, stride: int, rng, dtype, relu=True):
    layers: list[Layer] = [
        Conv2d(f"{prefix.replace('#', 'conv')}", cin, cout, k, stride, k // 2, rng, dtype),
        BatchNorm2d(f"{prefix.replace('#', 'bn')}", cout, dtype=dtype),
    ]
    if relu:
        layers.append(ReLU())
    return layers


def _shortcut(prefix: str, cin: int, cout: int, stride: int, rng, dtype):
    if cin == cout and stride == 1:
        return None
    return Sequential(_conv_bn(f"{prefix}.shortcut.#", cin, cout, 1, stride, rng, dtype, relu=False))


def basic_block(prefix, cin, cout, stride, rng, dtype) -> Residual:
    body = Sequential(
        _conv_bn(f"{prefix}.#1", cin, cout, 3, stride, rng, dtype)
        + _conv_bn(f"{prefix}.#2", cout, cout, 3, 1, rng, dtype, relu=False)
    )
    return Residual(body, _shortcut(prefix, cin, cout, stride, rng, dtype))


def bottleneck_block(prefix, cin, width, stride, rng, dtype) -> Residual:
    cout = width * BOTTLENECK_EXPANSION
    body = Sequential(
        _conv_bn(f"{prefix}.#1", cin, width, 1, 1, rng, dtype)
        + _conv_bn(f"{prefix}.#2", width, width, 3, stride, rng, dtype)
        + _conv_bn(f"{prefix}.#3", width, cout, 1, 1, rng, dtype, relu=False)
    )
    return Residual(body, _shortcut(prefix, cin, cout, stride, rng, dtype))


class Network(Layer):
    def __init__(self, spec: ArchitectureSpec, stem: Sequential, stages: list[Sequential],
                 head: Sequential):
        self.spec = spec
        self.stem = stem
        self.stages = stages
        self.head = head
        self.layers = [stem, *stages, head]
        self.registry: dict[str, ParamTensor] = {}
        for t in self.tensors():
            if t.name in self.registry:
                raise StructureError(f"duplicate parameter name {t.name}")
            self.registry[t.name] = t

    def forward(self, x, train=False):
        for layer in self.layers:
            x = layer.forward(x, train)
        return x

    def backward(self, dout):
        for layer in reversed(self.layers):
            dout = layer.backward(dout)
        return dout

    def tensors(self):
        return [t for layer in self.layers for t in layer.tensors()]

    def weighted_layers(self):
        return sum(layer.weighted_layers() for layer in self.layers)

    def zero_grad(self):
        for t in self.registry.values():
            t.zero_grad()

    def astype(self, dtype) -> "Network":
        for t in self.registry.values():
            t.astype(dtype)
        return self

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: t.value.copy() for name, t in self.registry.items()}


def build_network(spec: ArchitectureSpec, rng: SeededRng, dtype=DEFAULT_DTYPE) -> Network:
    """Build and He-initialise a network; init draws follow registration order."""
    strides = spec.stage_strides()
    in_ch = spec.input_shape[0]
    stem = Sequential(_conv_bn("stem.#", in_ch, spec.stem_width, 3, 1, rng, dtype))
    stages = []
    c = spec.stem_width
    for s, (width, stride) in enumerate(zip(spec.stage_widths, strides), start=1):
        blocks = []
        for b in range(spec.n):
            prefix = f"stage{s}.block{b}"
            st = stride if b == 0 else 1
            if spec.family == "bottleneck-residual":
                blocks.append(bottleneck_block(prefix, c, width, st, rng, dtype))
                c = width * BOTTLENECK_EXPANSION
            else:
                blocks.append(basic_block(prefix, c, width, st, rng, dtype))
                c = width
        stages.append(Sequential(blocks))
    head = Sequential([GlobalAvgPool(), Dense("fc", c, spec.num_classes, rng, dtype)])
    return Network(spec, stem, stages, head)


def param_count(net: Network) -> int:
    """Trainable element count; BN running statistics are excluded."""
    return sum(t.size for t in net.registry.values() if t.trainable)


def stem_parameters(net: Network) -> list[ParamTensor]:
    """The StemBlock tensors in canonical swap order."""
    try:
        return [net.registry[f"stem.{suffix}"] for suffix in STEM_ORDER]
    except KeyError as exc:
        raise StructureError(f"network has no StemBlock tensor {exc.args[0]}") from None


def _cifar(family, n, widths, sizes, classes):
    return ArchitectureSpec(family, n, widths, sizes, classes)


# Wide variants keep the first stage at full input resolution (stride 1) and
# halve it in the second, as the first two stages of ResNet20 do.
SPECS: dict[str, ArchitectureSpec] = {
    "resnet20": _cifar("basic-residual", 3, (16, 32, 64), (32, 16, 8), 10),
    "wideresnet14": _cifar("wide-basic-residual", 3, (32, 64), (32, 16), 10),
    "resnet164": _cifar("bottleneck-residual", 18, (16, 32, 64), (32, 16, 8), 100),
    "wideresnet110": _cifar("bottleneck-residual", 18, (32, 64), (32, 16), 100),
    "tiny": ArchitectureSpec("basic-residual", 1, (8,), (8,), 3, (3, 8, 8), stem_width=8),
    "tiny-deep": ArchitectureSpec("basic-residual", 1, (8, 16), (8, 4), 3, (3, 8, 8), stem_width=8),
    "tiny-wide": ArchitectureSpec("wide-basic-residual", 1, (16,), (8,), 3, (3, 8, 8), stem_width=8),
    "tiny-bottleneck": ArchitectureSpec("bottleneck-residual", 1, (4, 8), (8, 4), 3, (3, 8, 8),
                                        stem_width=8),
}

# Published trainable-parameter counts.
REFERENCE_PARAM_COUNTS = {
    "resnet20": 272_474,
    "wideresnet14": 258_458,
    "resnet164": 1_727_284,
    "wideresnet110": 1_637_428,
}


def get_spec(name: str, num_classes: int | None = None,
             input_shape: tuple[int, int, int] | None = None) -> ArchitectureSpec:
    """Look up a named spec, optionally re-targeted to another class count or input."""
    if name not in SPECS:
        raise KeyError(f"unknown model {name!r}; available: {', '.join(sorted(SPECS))}")
    spec = SPECS[name]
    if num_classes is None and input_shape is None:
        return spec
    return ArchitectureSpec(
        spec.family, spec.n, spec.stage_widths, spec.stage_feature_sizes,
        num_classes if num_classes is not None else spec.num_classes,
        input_shape if input_shape is not None else spec.input_shape,
        spec.stem_width,
    )
