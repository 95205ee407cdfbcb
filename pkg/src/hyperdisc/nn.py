"""Parameter tensors, diagonal AdaGrad, inverted dropout and a finite-difference checker.

All randomness goes through ``numpy.random.Generator`` backed by PCG64, so a
seed replays identically on every platform numpy supports.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np


class NumericError(FloatingPointError):
    """A non-finite value showed up where a finite one is required."""


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator; ``seed`` may be an int or a tuple of ints."""
    return np.random.Generator(np.random.PCG64(seed))


@dataclass
class ParamTensor:
    name: str
    values: np.ndarray
    grad: np.ndarray = field(repr=False)
    adagrad_acc: np.ndarray = field(repr=False)

    @classmethod
    def from_values(cls, name, values):
        values = np.ascontiguousarray(values, dtype=np.float64)
        return cls(name, values, np.zeros_like(values), np.zeros_like(values))

    @property
    def shape(self):
        return self.values.shape

    @property
    def size(self):
        return self.values.size

    def zero_grad(self):
        self.grad.fill(0.0)


@dataclass(frozen=True)
class OptimizerConfig:
    learning_rate: float = 1e-2
    epsilon: float = 1e-6

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")


def xavier_bound(shape: Sequence[int], fans: tuple[int, int] | None = None) -> float:
    """Glorot-uniform half-width sqrt(6 / (fan_in + fan_out))."""
    if fans is not None:
        fan_in, fan_out = fans
    elif len(shape) == 1:
        fan_in = fan_out = shape[0]
    else:
        # (out, in) matrices; extra axes such as a filter width count toward fan-in
        fan_out = shape[0]
        fan_in = int(np.prod(shape[1:]))
    return math.sqrt(6.0 / (fan_in + fan_out))


def init_params(shape, seed, scheme: str = "xavier_uniform", name: str = "param", fans=None) -> ParamTensor:
    """Create a ParamTensor with zeroed grad and accumulator.

    ``fans`` overrides the (fan_in, fan_out) pair derived from ``shape``;
    use it for stacks of matrices that should each get the matrix bound.
    """
    shape = tuple(int(s) for s in shape)
    if not shape:
        raise ValueError("shape must be non-empty")
    if any(s < 1 for s in shape):
        raise ValueError(f"zero-size dimension in shape {shape}")
    if scheme == "zeros":
        values = np.zeros(shape)
    elif scheme == "xavier_uniform":
        bound = xavier_bound(shape, fans)
        values = make_rng(seed).uniform(-bound, bound, size=shape)
    else:
        raise ValueError(f"unknown init scheme {scheme!r}")
    return ParamTensor.from_values(name, values)


def adagrad_step(p: ParamTensor, cfg: OptimizerConfig) -> ParamTensor:
    """acc += g**2; value -= lr * g / (sqrt(acc) + eps); grad is zeroed afterwards."""
    g = p.grad
    if not np.all(np.isfinite(g)):
        raise NumericError(f"non-finite gradient in tensor {p.name!r}")
    p.adagrad_acc += g * g
    denom = np.sqrt(p.adagrad_acc) + cfg.epsilon
    # untouched coordinates would give 0/0 when eps == 0
    step = np.divide(g, denom, out=np.zeros_like(g), where=g != 0)
    p.values -= cfg.learning_rate * step
    p.zero_grad()
    return p


def dropout(v: np.ndarray, p: float, rng: np.random.Generator, training: bool = True) -> np.ndarray:
    """Inverted dropout: zero each entry with probability ``p``, scale survivors by 1/(1-p)."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout probability must be in [0, 1), got {p}")
    if not training or p == 0.0:
        return v
    keep = rng.random(np.shape(v)) >= p
    return v * keep / (1.0 - p)


def grad_check(
    loss_fn: Callable[[], float],
    params: Iterable[ParamTensor],
    h: float = 1e-4,
) -> float:
    """Largest relative error between ``p.grad`` and central differences.

    ``loss_fn`` must read the current ``values`` of ``params`` and be
    deterministic.  The analytic gradient must already sit in each ``grad``.
    The per-element error is |a - n| / max(|a| + |n|, 1e-8).
    """
    worst = 0.0
    for p in params:
        flat = p.values.reshape(-1)
        analytic = p.grad.reshape(-1)
        for i in range(flat.size):
            orig = flat[i]
            flat[i] = orig + h
            plus = loss_fn()
            flat[i] = orig - h
            minus = loss_fn()
            flat[i] = orig
            if not (math.isfinite(plus) and math.isfinite(minus)):
                raise NumericError(f"non-finite loss while perturbing {p.name!r}[{i}]")
            numeric = (plus - minus) / (2.0 * h)
            a = analytic[i]
            err = abs(a - numeric) / max(abs(a) + abs(numeric), 1e-8)
            worst = max(worst, float(err))
    return worst
