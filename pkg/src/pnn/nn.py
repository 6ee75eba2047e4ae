"""Minimal layer library with hand-written backward passes.

Tensors are plain numpy arrays in NCHW layout. Training runs in float32 and
gradient verification in float64; every layer computes in the dtype of its
parameters and inputs, so switching precision is ``net.astype(np.float64)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateBatchError, DimensionError, GeometryError
from .rng import SeededRng

DEFAULT_DTYPE = np.float32


@dataclass(eq=False)
class ParamTensor:
    """A named array with its gradient and SGD momentum buffer.

    Batch-norm running statistics are also stored as ``ParamTensor`` objects
    with ``trainable=False`` so they can be addressed by name (the stem swap
    moves them) while being skipped by the optimizer and the parameter count.
    """

    name: str
    value: np.ndarray
    trainable: bool = True
    grad: np.ndarray = field(default=None, repr=False)
    momentum_buf: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.grad is None:
            self.grad = np.zeros_like(self.value)
        if self.momentum_buf is None:
            self.momentum_buf = np.zeros_like(self.value)

    @property
    def shape(self):
        return self.value.shape

    @property
    def size(self) -> int:
        return int(self.value.size)

    def zero_grad(self) -> None:
        self.grad[...] = 0

    def astype(self, dtype) -> None:
        self.value = self.value.astype(dtype)
        self.grad = self.grad.astype(dtype)
        self.momentum_buf = self.momentum_buf.astype(dtype)


def _he_normal(rng: SeededRng, shape, fan: int, dtype) -> np.ndarray:
    return rng.normal(size=shape, scale=math.sqrt(2.0 / fan)).astype(dtype)


def conv_output_size(size: int, k: int, stride: int, padding: int) -> int:
    out = (size + 2 * padding - k) // stride + 1
    if out <= 0:
        raise GeometryError(
            f"conv with k={k}, stride={stride}, padding={padding} on size {size} "
            "produces an empty output"
        )
    return out


def _windows(xp: np.ndarray, kh: int, kw: int, stride: int, ho: int, wo: int) -> np.ndarray:
    # (N, C, Ho, Wo, kh, kw) strided view into the padded input
    win = sliding_window_view(xp, (kh, kw), axis=(2, 3))
    return win[:, :, : stride * (ho - 1) + 1 : stride, : stride * (wo - 1) + 1 : stride]


def conv2d_forward(x: np.ndarray, weight: np.ndarray, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Bias-free 2-D cross-correlation.

    The output size is ``floor((H + 2p - k) / stride) + 1``, the convention
    every residual-network downsampling layer relies on.
    """
    if x.ndim != 4 or weight.ndim != 4:
        raise DimensionError(f"expected 4-d input and weight, got {x.shape} and {weight.shape}")
    n, c, h, w = x.shape
    f, cw, kh, kw = weight.shape
    if c != cw:
        raise DimensionError(f"input has {c} channels but weight expects {cw}")
    if padding < 0 or stride < 1:
        raise GeometryError(f"invalid stride={stride} / padding={padding}")
    ho = conv_output_size(h, kh, stride, padding)
    wo = conv_output_size(w, kw, stride, padding)
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    win = _windows(xp, kh, kw, stride, ho, wo)
    out = np.tensordot(win, weight, axes=([1, 4, 5], [1, 2, 3]))
    return np.ascontiguousarray(out.transpose(0, 3, 1, 2))


def conv2d_backward(x: np.ndarray, weight: np.ndarray, dout: np.ndarray,
                    stride: int = 1, padding: int = 0):
    """Return ``(dx, dweight)`` for :func:`conv2d_forward`."""
    n, c, h, w = x.shape
    f, _, kh, kw = weight.shape
    ho, wo = dout.shape[2], dout.shape[3]
    xp = np.pad(x, ((0, 0), (0, 0), (padding, padding), (padding, padding))) if padding else x
    win = _windows(xp, kh, kw, stride, ho, wo)
    dweight = np.tensordot(dout, win, axes=([0, 2, 3], [0, 2, 3]))
    dxp = np.zeros_like(xp)
    for i in range(kh):
        for j in range(kw):
            contrib = np.tensordot(dout, weight[:, :, i, j], axes=([1], [0]))
            dxp[:, :, i : i + stride * (ho - 1) + 1 : stride,
                j : j + stride * (wo - 1) + 1 : stride] += contrib.transpose(0, 3, 1, 2)
    if padding:
        dxp = dxp[:, :, padding : padding + h, padding : padding + w]
    return np.ascontiguousarray(dxp), dweight


class Layer:
    """Base layer. ``forward`` caches what ``backward`` needs."""

    def forward(self, x: np.ndarray, train: bool = False) -> np.ndarray:
        raise NotImplementedError

    def backward(self, dout: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def tensors(self) -> list[ParamTensor]:
        """All named tensors, trainable or not, in registration order."""
        return []

    def params(self) -> list[ParamTensor]:
        return [t for t in self.tensors() if t.trainable]

    def weighted_layers(self) -> int:
        return 0


class Conv2d(Layer):
    def __init__(self, name: str, in_ch: int, out_ch: int, k: int, stride: int = 1,
                 padding: int = 0, rng: SeededRng | None = None, dtype=DEFAULT_DTYPE):
        if k not in (1, 3):
            raise GeometryError(f"only 1x1 and 3x3 kernels are supported, got {k}")
        self.stride = stride
        self.padding = padding
        shape = (out_ch, in_ch, k, k)
        # He-normal, fan-out mode
        value = (_he_normal(rng, shape, out_ch * k * k, dtype) if rng is not None
                 else np.zeros(shape, dtype))
        self.weight = ParamTensor(f"{name}.weight", value)
        self._x = None

    def forward(self, x, train=False):
        self._x = x
        return conv2d_forward(x, self.weight.value, self.stride, self.padding)

    def backward(self, dout):
        dx, dw = conv2d_backward(self._x, self.weight.value, dout, self.stride, self.padding)
        self.weight.grad += dw
        return dx

    def tensors(self):
        return [self.weight]

    def weighted_layers(self):
        return 1


class BatchNorm2d(Layer):
    """Per-channel batch normalization (the ``BatchNormState`` of the design).

    Running variance is updated with the unbiased batch variance; the
    normalization itself uses the biased one.
    """

    def __init__(self, name: str, channels: int, eps: float = 1e-5, momentum: float = 0.1,
                 dtype=DEFAULT_DTYPE):
        self.eps = eps
        self.momentum = momentum
        self.gamma = ParamTensor(f"{name}.gamma", np.ones(channels, dtype))
        self.beta = ParamTensor(f"{name}.beta", np.zeros(channels, dtype))
        self.running_mean = ParamTensor(f"{name}.running_mean", np.zeros(channels, dtype),
                                        trainable=False)
        self.running_var = ParamTensor(f"{name}.running_var", np.ones(channels, dtype),
                                       trainable=False)
        self._cache = None

    def forward(self, x, train=False):
        if x.ndim != 4 or x.shape[1] != self.gamma.size:
            raise DimensionError(f"batch norm over {self.gamma.size} channels got {x.shape}")
        shape = (1, -1, 1, 1)
        if train:
            m = x.shape[0] * x.shape[2] * x.shape[3]
            if m < 2:
                raise DegenerateBatchError(
                    f"{self.gamma.name}: train-mode batch norm needs N*H*W >= 2, got {m}")
            mean = x.mean(axis=(0, 2, 3))
            var = x.var(axis=(0, 2, 3))
            mom = self.momentum
            self.running_mean.value[...] = (1 - mom) * self.running_mean.value + mom * mean
            self.running_var.value[...] = ((1 - mom) * self.running_var.value
                                           + mom * var * (m / (m - 1)))
        else:
            mean = self.running_mean.value
            var = self.running_var.value
        inv_std = 1.0 / np.sqrt(var + self.eps)
        xhat = (x - mean.reshape(shape)) * inv_std.reshape(shape)
        self._cache = (xhat, inv_std, train)
        return xhat * self.gamma.value.reshape(shape) + self.beta.value.reshape(shape)

    def backward(self, dout):
        xhat, inv_std, train = self._cache
        shape = (1, -1, 1, 1)
        self.gamma.grad += (dout * xhat).sum(axis=(0, 2, 3))
        self.beta.grad += dout.sum(axis=(0, 2, 3))
        dxhat = dout * self.gamma.value.reshape(shape)
        if not train:
            return dxhat * inv_std.reshape(shape)
        m = dout.shape[0] * dout.shape[2] * dout.shape[3]
        s1 = dxhat.sum(axis=(0, 2, 3), keepdims=True)
        s2 = (dxhat * xhat).sum(axis=(0, 2, 3), keepdims=True)
        return (inv_std.reshape(shape) / m) * (m * dxhat - s1 - xhat * s2)

    def tensors(self):
        return [self.gamma, self.beta, self.running_mean, self.running_var]


def batchnorm_apply(x: np.ndarray, state: BatchNorm2d, mode: str = "train") -> np.ndarray:
    if mode not in ("train", "eval"):
        raise ValueError(f"mode must be 'train' or 'eval', got {mode!r}")
    return state.forward(x, train=(mode == "train"))


class ReLU(Layer):
    def forward(self, x, train=False):
        self._mask = x > 0
        return x * self._mask

    def backward(self, dout):
        return dout * self._mask


class GlobalAvgPool(Layer):
    def forward(self, x, train=False):
        self._shape = x.shape
        return x.mean(axis=(2, 3))

    def backward(self, dout):
        n, c, h, w = self._shape
        return np.broadcast_to(dout[:, :, None, None] / (h * w), self._shape).copy()


class Dense(Layer):
    def __init__(self, name: str, in_features: int, out_features: int,
                 rng: SeededRng | None = None, dtype=DEFAULT_DTYPE):
        shape = (out_features, in_features)
        # He-normal, fan-in mode
        value = (_he_normal(rng, shape, in_features, dtype) if rng is not None
                 else np.zeros(shape, dtype))
        self.weight = ParamTensor(f"{name}.weight", value)
        self.bias = ParamTensor(f"{name}.bias", np.zeros(out_features, dtype))

    def forward(self, x, train=False):
        if x.ndim != 2 or x.shape[1] != self.weight.shape[1]:
            raise DimensionError(f"dense layer expects (N, {self.weight.shape[1]}), got {x.shape}")
        self._x = x
        return x @ self.weight.value.T + self.bias.value

    def backward(self, dout):
        self.weight.grad += dout.T @ self._x
        self.bias.grad += dout.sum(axis=0)
        return dout @ self.weight.value

    def tensors(self):
        return [self.weight, self.bias]

    def weighted_layers(self):
        return 1


class Sequential(Layer):
    def __init__(self, layers):
        self.layers = list(layers)

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


class Residual(Layer):
    """``relu(body(x) + shortcut(x))``; an empty shortcut is the identity.

    Only the body's convolutions count as weighted layers; projection
    shortcuts are excluded, matching how residual depths (20, 164, ...) are
    conventionally named.
    """

    def __init__(self, body: Sequential, shortcut: Sequential | None = None):
        self.body = body
        self.shortcut = shortcut
        self.relu = ReLU()

    def forward(self, x, train=False):
        skip = self.shortcut.forward(x, train) if self.shortcut is not None else x
        return self.relu.forward(self.body.forward(x, train) + skip, train)

    def backward(self, dout):
        d = self.relu.backward(dout)
        dx = self.body.backward(d)
        dx = dx + (self.shortcut.backward(d) if self.shortcut is not None else d)
        return dx

    def tensors(self):
        out = self.body.tensors()
        if self.shortcut is not None:
            out += self.shortcut.tensors()
        return out

    def weighted_layers(self):
        return self.body.weighted_layers()


def softmax_cross_entropy(logits: np.ndarray, labels) -> tuple[float, np.ndarray]:
    """Mean cross-entropy and softmax probabilities, max-subtracted for stability."""
    labels = np.asarray(labels, dtype=np.int64)
    n, k = logits.shape
    if labels.shape != (n,):
        raise DimensionError(f"expected {n} labels, got shape {labels.shape}")
    if labels.size and (labels.min() < 0 or labels.max() >= k):
        raise IndexError(f"labels must lie in [0, {k})")
    z = logits - logits.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1, keepdims=True))
    logp = z - lse
    probs = np.exp(logp)
    loss = float(-logp[np.arange(n), labels].mean())
    return loss, probs


def softmax_cross_entropy_grad(probs: np.ndarray, labels) -> np.ndarray:
    n = probs.shape[0]
    d = probs.copy()
    d[np.arange(n), np.asarray(labels, dtype=np.int64)] -= 1
    return d / n


def softmax(logits: np.ndarray) -> np.ndarray:
    z = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


class CrossEntropyLoss(Layer):
    """Loss as a layer with fixed labels, so the gradient checker can treat it uniformly."""

    def __init__(self, labels):
        self.labels = np.asarray(labels, dtype=np.int64)

    def forward(self, x, train=False):
        loss, self._probs = softmax_cross_entropy(x, self.labels)
        return np.asarray(loss, dtype=x.dtype)

    def backward(self, dout):
        return softmax_cross_entropy_grad(self._probs, self.labels) * dout

