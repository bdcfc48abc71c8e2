"""Differentiable building blocks with explicit forward/backward passes.

Every layer follows the same convention: `*_apply` returns (output, cache)
and the matching `*_backward` consumes the cache plus the upstream gradient
and returns parameter gradients and the input gradient. All math runs in
float64 so analytic gradients can be checked against central finite
differences to tight tolerances.

Modes: TRAIN uses batch statistics / stochastic masks, EVAL is fully
deterministic (batch norm reads its running stats, dropout is the
identity).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericsError, ShapeError, ValidationError

TRAIN = "train"
EVAL = "eval"


def _check_mode(mode: str):
    if mode not in (TRAIN, EVAL):
        raise ValidationError(f"mode must be {TRAIN!r} or {EVAL!r}, got {mode!r}")


# ---------------------------------------------------------------------------
# linear


@dataclass
class LinearLayer:
    weight: np.ndarray  # (out_dim, in_dim)
    bias: np.ndarray    # (out_dim,)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]


def linear_init(
    in_dim: int, out_dim: int, rng: np.random.Generator, zero: bool = False
) -> LinearLayer:
    """Uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) weights and biases.

    Nonzero biases keep ReLU-dead rows away from the exact zero vector,
    where cosine similarity is undefined. `zero` zeroes both tensors (used
    for the residual output head so the encoder starts as the identity).
    """
    if zero:
        return LinearLayer(np.zeros((out_dim, in_dim)), np.zeros(out_dim))
    bound = 1.0 / np.sqrt(in_dim)
    w = rng.uniform(-bound, bound, size=(out_dim, in_dim))
    b = rng.uniform(-bound, bound, size=out_dim)
    return LinearLayer(w, b)


def linear_apply(layer: LinearLayer, x: np.ndarray, mode: str = EVAL):
    """out = x @ W.T + b, rowwise over the batch."""
    _check_mode(mode)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != layer.in_dim:
        raise ShapeError(f"expected input (B, {layer.in_dim}), got {x.shape}")
    out = x @ layer.weight.T + layer.bias
    return out, (x, layer.weight)


def linear_backward(cache, dout: np.ndarray):
    x, weight = cache
    dout = np.asarray(dout, dtype=np.float64)
    if dout.shape != (x.shape[0], weight.shape[0]):
        raise ShapeError(f"upstream grad shape {dout.shape} does not match forward pass")
    dw = dout.T @ x
    db = dout.sum(axis=0)
    dx = dout @ weight
    return dw, db, dx


# ---------------------------------------------------------------------------
# batch normalization


@dataclass
class BatchNormLayer:
    gamma: np.ndarray
    beta: np.ndarray
    running_mean: np.ndarray
    running_var: np.ndarray
    eps: float = 1e-5
    momentum: float = 0.1  # new_running = (1 - momentum) * old + momentum * batch

    def __post_init__(self):
        if self.eps <= 0:
            raise ValidationError("eps must be > 0")
        if not (0.0 < self.momentum < 1.0):
            raise ValidationError("momentum must lie in (0,1)")
        if np.any(self.running_var < 0):
            raise ValidationError("running_var must be nonnegative")


def batchnorm_init(dim: int, eps: float = 1e-5, momentum: float = 0.1) -> BatchNormLayer:
    return BatchNormLayer(
        gamma=np.ones(dim),
        beta=np.zeros(dim),
        running_mean=np.zeros(dim),
        running_var=np.ones(dim),
        eps=eps,
        momentum=momentum,
    )


def batchnorm_apply(layer: BatchNormLayer, x: np.ndarray, mode: str = EVAL):
    """Normalize per column; TRAIN uses (biased) batch stats and updates running stats."""
    _check_mode(mode)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != layer.gamma.shape[0]:
        raise ShapeError(f"expected input (B, {layer.gamma.shape[0]}), got {x.shape}")
    if mode == TRAIN:
        if x.shape[0] < 2:
            raise ValidationError("batch norm in train mode needs a batch of >= 2 rows")
        mean = x.mean(axis=0)
        var = x.var(axis=0)  # biased (divide by B)
        inv_std = 1.0 / np.sqrt(var + layer.eps)
        xhat = (x - mean) * inv_std
        layer.running_mean = (1 - layer.momentum) * layer.running_mean + layer.momentum * mean
        layer.running_var = (1 - layer.momentum) * layer.running_var + layer.momentum * var
    else:
        inv_std = 1.0 / np.sqrt(layer.running_var + layer.eps)
        xhat = (x - layer.running_mean) * inv_std
    out = layer.gamma * xhat + layer.beta
    return out, (xhat, inv_std, layer.gamma, mode)


def batchnorm_backward(cache, dout: np.ndarray):
    xhat, inv_std, gamma, mode = cache
    dout = np.asarray(dout, dtype=np.float64)
    if dout.shape != xhat.shape:
        raise ShapeError(f"upstream grad shape {dout.shape} does not match forward pass")
    dgamma = (dout * xhat).sum(axis=0)
    dbeta = dout.sum(axis=0)
    dxhat = dout * gamma
    if mode == TRAIN:
        b = xhat.shape[0]
        # gradient through the batch mean/variance
        dx = (inv_std / b) * (
            b * dxhat - dxhat.sum(axis=0) - xhat * (dxhat * xhat).sum(axis=0)
        )
    else:
        dx = dxhat * inv_std
    return dgamma, dbeta, dx


# ---------------------------------------------------------------------------
# relu / dropout


def relu_apply(x: np.ndarray):
    x = np.asarray(x, dtype=np.float64)
    return np.maximum(x, 0.0), (x > 0)


def relu_backward(cache, dout: np.ndarray):
    # subgradient at 0 is taken as 0
    return np.asarray(dout, dtype=np.float64) * cache


@dataclass
class DropoutLayer:
    rate: float = 0.1

    def __post_init__(self):
        if not (0.0 <= self.rate < 1.0):
            raise ValidationError(f"dropout rate must lie in [0,1), got {self.rate}")


def dropout_apply(layer: DropoutLayer, x: np.ndarray, mode: str = EVAL,
                  rng: np.random.Generator | None = None):
    """Inverted dropout: survivors are scaled by 1/(1-rate); EVAL is the identity."""
    _check_mode(mode)
    x = np.asarray(x, dtype=np.float64)
    if mode == EVAL or layer.rate == 0.0:
        return x, None
    if rng is None:
        raise ValidationError("dropout in train mode needs an rng")
    scale = (rng.random(x.shape) >= layer.rate) / (1.0 - layer.rate)
    return x * scale, scale


def dropout_backward(cache, dout: np.ndarray):
    dout = np.asarray(dout, dtype=np.float64)
    return dout if cache is None else dout * cache


# ---------------------------------------------------------------------------
# finite-difference gradient checking


def grad_check(loss_fn, arrays: dict[str, np.ndarray], h: float = 1e-5) -> float:
    """Compare analytic gradients against central finite differences.

    `loss_fn()` must be deterministic, read the (mutable) arrays in
    `arrays`, and return (loss, grads) where grads maps each key in
    `arrays` to the analytic gradient of the loss w.r.t. that array.
    Returns the max relative error over every coordinate of every array.
    """
    loss, grads = loss_fn()
    if not np.isfinite(loss):
        raise NumericsError("loss is non-finite")
    max_rel = 0.0
    for name in sorted(arrays):
        arr = arrays[name]
        analytic = np.asarray(grads[name], dtype=np.float64)
        if analytic.shape != arr.shape:
            raise ShapeError(f"gradient for {name!r} has shape {analytic.shape}, "
                             f"expected {arr.shape}")
        if not np.all(np.isfinite(analytic)):
            raise NumericsError(f"analytic gradient for {name!r} is non-finite")
        for idx in np.ndindex(arr.shape):
            orig = arr[idx]
            arr[idx] = orig + h
            f_plus = loss_fn()[0]
            arr[idx] = orig - h
            f_minus = loss_fn()[0]
            arr[idx] = orig
            if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
                raise NumericsError(f"non-finite loss while perturbing {name!r}")
            numeric = (f_plus - f_minus) / (2.0 * h)
            denom = max(abs(analytic[idx]) + abs(numeric), 1e-8)
            max_rel = max(max_rel, abs(analytic[idx] - numeric) / denom)
    return max_rel
