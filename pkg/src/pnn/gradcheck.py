"""Central-difference verification of analytic backward passes."""

from __future__ import annotations

import numpy as np

from .errors import NumericalError


def _rel(a: np.ndarray, b: np.ndarray) -> float:
    denom = np.maximum(np.maximum(np.abs(a), np.abs(b)), 1e-8)
    return float(np.max(np.abs(a - b) / denom)) if a.size else 0.0


def gradient_check(layer, x: np.ndarray, eps: float = 1e-5, train: bool = True,
                   seed: int = 0) -> float:
    """Max relative error between analytic and numeric gradients.

    The scalar objective is ``sum(layer(x) * R)`` for a fixed random ``R``, so
    every output element contributes. Both the input and every trainable
    parameter of ``layer`` are checked. Requires float64 throughout.
    """
    if not 1e-6 <= eps <= 1e-3:
        raise ValueError(f"eps must lie in [1e-6, 1e-3], got {eps}")
    if x.dtype != np.float64 or any(p.value.dtype != np.float64 for p in layer.params()):
        raise TypeError("gradient_check requires float64 inputs and parameters")
    x = x.copy()
    out = layer.forward(x, train)
    proj = np.random.default_rng(seed).standard_normal(np.shape(out))

    def objective() -> float:
        return float(np.sum(layer.forward(x, train) * proj))

    base = objective()
    if not np.isfinite(base):
        raise NumericalError("non-finite forward output", name="output")

    for p in layer.params():
        p.zero_grad()
    layer.forward(x, train)
    dx = layer.backward(proj)

    targets = [("input", x, dx)] + [(p.name, p.value, p.grad.copy()) for p in layer.params()]
    worst = 0.0
    for name, arr, analytic in targets:
        if not np.all(np.isfinite(analytic)):
            raise NumericalError(f"non-finite analytic gradient for {name}", name=name)
        numeric = np.zeros_like(arr)
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + eps
            fp = objective()
            arr[idx] = orig - eps
            fm = objective()
            arr[idx] = orig
            if not (np.isfinite(fp) and np.isfinite(fm)):
                raise NumericalError(f"non-finite perturbed objective for {name}", name=name)
            numeric[idx] = (fp - fm) / (2 * eps)
        worst = max(worst, _rel(analytic, numeric))
    return worst
