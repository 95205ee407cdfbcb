"""Term encoders: TEA (embedding average), GRU, LSTM, CNN and RCNN.

Every encoder maps a :class:`~hyperdisc.embed.TermSequence` to one vector.
``forward`` returns the output together with a cache; ``encoder_backward``
consumes that cache, accumulates parameter gradients into each
``ParamTensor.grad`` and returns the gradient w.r.t. the input vectors.
"""
from __future__ import annotations

from dataclasses import dataclass, field, fields
from typing import Any

import numpy as np

from . import kernels
from .embed import TermSequence
from .nn import ParamTensor, init_params, make_rng

KINDS = ("TEA", "GRU", "LSTM", "CNN", "RCNN")


class EncoderMismatchError(ValueError):
    pass


@dataclass(frozen=True)
class EncoderConfig:
    kind: str = "GRU"
    input_dim: int = 300
    hidden_dim: int = 200
    cnn_filter_widths: tuple[int, ...] = (2,)
    rcnn_order: int = 2

    def __post_init__(self):
        kind = self.kind.upper()
        object.__setattr__(self, "kind", kind)
        object.__setattr__(self, "cnn_filter_widths", tuple(int(w) for w in self.cnn_filter_widths))
        if kind not in KINDS:
            raise ValueError(f"unknown encoder kind {self.kind!r}")
        if self.input_dim < 1 or self.hidden_dim < 1:
            raise ValueError("dimensions must be positive")
        if kind == "CNN":
            widths = self.cnn_filter_widths
            if not widths or any(w < 1 for w in widths):
                raise ValueError("CNN filter widths must be positive")
            if self.hidden_dim % len(widths):
                raise ValueError(
                    f"hidden_dim {self.hidden_dim} not divisible by {len(widths)} filter widths"
                )
        if kind == "RCNN" and self.rcnn_order < 1:
            raise ValueError("rcnn_order must be >= 1")

    @property
    def output_dim(self) -> int:
        return self.input_dim if self.kind == "TEA" else self.hidden_dim


class _Params:
    """Shared helpers for the parameter dataclasses."""

    def tensors(self) -> list[ParamTensor]:
        out = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, ParamTensor):
                out.append(v)
            elif isinstance(v, (list, tuple)):
                out.extend(x for x in v if isinstance(x, ParamTensor))
        return out

    def zero_grad(self):
        for p in self.tensors():
            p.zero_grad()


@dataclass
class TeaParams(_Params):
    pass


@dataclass
class GruParams(_Params):
    W_r: ParamTensor
    U_r: ParamTensor
    b_r: ParamTensor
    W_z: ParamTensor
    U_z: ParamTensor
    b_z: ParamTensor
    W_h: ParamTensor
    U_h: ParamTensor
    b_h: ParamTensor


@dataclass
class LstmParams(_Params):
    W_i: ParamTensor
    U_i: ParamTensor
    b_i: ParamTensor
    W_f: ParamTensor
    U_f: ParamTensor
    b_f: ParamTensor
    W_u: ParamTensor
    U_u: ParamTensor
    b_u: ParamTensor
    W_c: ParamTensor
    U_c: ParamTensor
    b_c: ParamTensor


@dataclass
class CnnParams(_Params):
    widths: tuple[int, ...]
    filters: list[ParamTensor]  # each (maps, width, input_dim)
    biases: list[ParamTensor]


@dataclass
class RcnnParams(_Params):
    W_lam: ParamTensor
    U_lam: ParamTensor
    b_lam: ParamTensor
    W_levels: ParamTensor  # (n, hidden, input)
    b: ParamTensor


_PARAM_TYPES = {"TEA": TeaParams, "GRU": GruParams, "LSTM": LstmParams, "CNN": CnnParams, "RCNN": RcnnParams}


def init_encoder(config: EncoderConfig, seed: int = 0):
    """Xavier-uniform weights and zero biases, each tensor on its own (seed, index) stream."""
    D, H = config.input_dim, config.hidden_dim
    counter = iter(range(10_000))

    def w(name, shape, fans=None):
        return init_params(shape, (seed, next(counter)), "xavier_uniform", name, fans)

    def zeros(name, shape):
        return init_params(shape, seed, "zeros", name)

    kind = config.kind
    if kind == "TEA":
        return TeaParams()
    if kind == "GRU":
        kw = {}
        for g in "rzh":
            kw[f"W_{g}"] = w(f"W_{g}", (H, D))
            kw[f"U_{g}"] = w(f"U_{g}", (H, H))
            kw[f"b_{g}"] = zeros(f"b_{g}", (H,))
        return GruParams(**kw)
    if kind == "LSTM":
        kw = {}
        for g in "ifuc":
            kw[f"W_{g}"] = w(f"W_{g}", (H, D))
            kw[f"U_{g}"] = w(f"U_{g}", (H, H))
            kw[f"b_{g}"] = zeros(f"b_{g}", (H,))
        return LstmParams(**kw)
    if kind == "CNN":
        maps = H // len(config.cnn_filter_widths)
        filters, biases = [], []
        for j, width in enumerate(config.cnn_filter_widths):
            filters.append(w(f"W_conv{j}", (maps, width, D)))
            biases.append(zeros(f"b_conv{j}", (maps,)))
        return CnnParams(config.cnn_filter_widths, filters, biases)
    n = config.rcnn_order
    return RcnnParams(
        W_lam=w("W_lam", (H, D)),
        U_lam=w("U_lam", (H, H)),
        b_lam=zeros("b_lam", (H,)),
        W_levels=w("W_levels", (n, H, D), fans=(D, H)),
        b=zeros("b", (H,)),
    )


def check_params(config: EncoderConfig, params) -> None:
    expected = _PARAM_TYPES[config.kind]
    if not isinstance(params, expected):
        raise EncoderMismatchError(
            f"{config.kind} encoder needs {expected.__name__}, got {type(params).__name__}"
        )
    D, H = config.input_dim, config.hidden_dim
    for p in params.tensors():
        shape = p.shape
        if p.name.startswith("W_conv"):
            ok = shape[0] * len(config.cnn_filter_widths) == H and shape[2] == D
        elif p.name == "W_levels":
            ok = shape == (config.rcnn_order, H, D)
        elif p.name.startswith("W"):
            ok = shape == (H, D)
        elif p.name.startswith("U"):
            ok = shape == (H, H)
        elif p.name.startswith("b_conv"):
            ok = shape[0] * len(config.cnn_filter_widths) == H
        else:
            ok = shape == (H,)
        if not ok:
            raise EncoderMismatchError(f"tensor {p.name} has shape {shape}")


def _inputs(seq: TermSequence, dim: int | None = None) -> np.ndarray:
    X = np.array(seq.vectors, dtype=np.float64)  # writable, contiguous copy
    if X.ndim != 2 or X.shape[0] < 1:
        raise ValueError("sequence must contain at least one vector")
    if dim is not None and X.shape[1] != dim:
        raise EncoderMismatchError(f"input vectors have dim {X.shape[1]}, encoder expects {dim}")
    return X


# -- single steps (reference-level API; encoders run whole sequences in the kernels) --

def gru_step(p: GruParams, x_t, h_prev) -> np.ndarray:
    X = np.atleast_2d(np.asarray(x_t, dtype=np.float64)).copy()
    h_prev = np.asarray(h_prev, dtype=np.float64)
    if X.shape[1] != p.W_r.shape[1] or h_prev.shape != (p.b_r.shape[0],):
        raise EncoderMismatchError("dimension mismatch in gru_step")
    hs, *_ = kernels.active.gru_forward(X, h_prev, *_gru_w(p))
    return hs[1]


def lstm_step(p: LstmParams, x_t, h_prev, c_prev) -> tuple[np.ndarray, np.ndarray]:
    X = np.atleast_2d(np.asarray(x_t, dtype=np.float64)).copy()
    h_prev = np.asarray(h_prev, dtype=np.float64)
    c_prev = np.asarray(c_prev, dtype=np.float64)
    H = p.b_i.shape[0]
    if X.shape[1] != p.W_i.shape[1] or h_prev.shape != (H,) or c_prev.shape != (H,):
        raise EncoderMismatchError("dimension mismatch in lstm_step")
    hs, cs, *_ = kernels.active.lstm_forward(X, h_prev, c_prev, *_lstm_w(p))
    return hs[1], cs[1]


def _gru_w(p):
    return (p.W_r.values, p.U_r.values, p.b_r.values,
            p.W_z.values, p.U_z.values, p.b_z.values,
            p.W_h.values, p.U_h.values, p.b_h.values)


def _lstm_w(p):
    return (p.W_i.values, p.U_i.values, p.b_i.values,
            p.W_f.values, p.U_f.values, p.b_f.values,
            p.W_u.values, p.U_u.values, p.b_u.values,
            p.W_c.values, p.U_c.values, p.b_c.values)


@dataclass
class EncoderCache:
    kind: str
    X: np.ndarray
    mask: np.ndarray
    saved: Any = field(repr=False, default=None)


def forward(config: EncoderConfig, params, seq: TermSequence) -> tuple[np.ndarray, EncoderCache]:
    """Encode ``seq``; returns (output vector, cache for :func:`encoder_backward`)."""
    check_params(config, params)
    X = _inputs(seq, config.input_dim)
    mask = np.asarray(seq.oov_mask, dtype=bool)
    kind = config.kind
    k = kernels.active
    if kind == "TEA":
        known = ~mask
        if not known.any():
            raise ValueError("cannot average a sequence with no in-vocabulary tokens")
        out = X[known].mean(axis=0)
        return out, EncoderCache(kind, X, mask)
    H = config.hidden_dim
    if kind == "GRU":
        saved = k.gru_forward(X, np.zeros(H), *_gru_w(params))
        return saved[0][-1].copy(), EncoderCache(kind, X, mask, saved)
    if kind == "LSTM":
        saved = k.lstm_forward(X, np.zeros(H), np.zeros(H), *_lstm_w(params))
        return saved[0][-1].copy(), EncoderCache(kind, X, mask, saved)
    if kind == "RCNN":
        saved = k.rcnn_forward(X, params.W_lam.values, params.U_lam.values, params.b_lam.values,
                               params.W_levels.values, params.b.values)
        return saved[0][-1].copy(), EncoderCache(kind, X, mask, saved)
    # CNN
    pooled, saved = [], []
    for width, W, b in zip(params.widths, params.filters, params.biases):
        Wf = W.values.reshape(W.shape[0], -1)
        s, arg, act = k.conv_forward(X, Wf, b.values, width)
        pooled.append(s)
        saved.append((arg, act))
    return np.concatenate(pooled), EncoderCache(kind, X, mask, saved)


def encoder_backward(config: EncoderConfig, params, cache: EncoderCache | None, upstream) -> np.ndarray:
    """Accumulate d(upstream . output)/d(theta) into the grads; return d/dX of shape (l, D)."""
    if cache is None:
        raise ValueError("encoder_backward needs the cache from a forward pass")
    if cache.kind != config.kind:
        raise EncoderMismatchError(f"cache from a {cache.kind} forward, config is {config.kind}")
    upstream = np.ascontiguousarray(upstream, dtype=np.float64)
    if upstream.shape != (config.output_dim,):
        raise EncoderMismatchError(f"upstream has shape {upstream.shape}")
    X = cache.X
    k = kernels.active
    kind = config.kind
    if kind == "TEA":
        known = ~cache.mask
        dX = np.zeros_like(X)
        dX[known] = upstream / known.sum()
        return dX
    p = params
    if kind == "GRU":
        hs, rs, zs, cand = cache.saved
        return k.gru_backward(
            X, p.W_r.values, p.U_r.values, p.W_z.values, p.U_z.values, p.W_h.values, p.U_h.values,
            hs, rs, zs, cand, upstream,
            p.W_r.grad, p.U_r.grad, p.b_r.grad, p.W_z.grad, p.U_z.grad, p.b_z.grad,
            p.W_h.grad, p.U_h.grad, p.b_h.grad,
        )
    if kind == "LSTM":
        hs, cs, gi, gf, gu, gc = cache.saved
        return k.lstm_backward(
            X, p.W_i.values, p.U_i.values, p.W_f.values, p.U_f.values,
            p.W_u.values, p.U_u.values, p.W_c.values, p.U_c.values,
            hs, cs, gi, gf, gu, gc, upstream,
            p.W_i.grad, p.U_i.grad, p.b_i.grad, p.W_f.grad, p.U_f.grad, p.b_f.grad,
            p.W_u.grad, p.U_u.grad, p.b_u.grad, p.W_c.grad, p.U_c.grad, p.b_c.grad,
        )
    if kind == "RCNN":
        hs, cs, lams = cache.saved
        return k.rcnn_backward(
            X, p.W_lam.values, p.U_lam.values, p.W_levels.values, hs, cs, lams, upstream,
            p.W_lam.grad, p.U_lam.grad, p.b_lam.grad, p.W_levels.grad, p.b.grad,
        )
    dX = np.zeros_like(X)
    offset = 0
    for width, W, b, (arg, act) in zip(p.widths, p.filters, p.biases, cache.saved):
        maps = W.shape[0]
        Wf = W.values.reshape(maps, -1)
        gWf = W.grad.reshape(maps, -1)
        dX += k.conv_backward(X, Wf, width, act, arg, upstream[offset:offset + maps], gWf, b.grad)
        offset += maps
    return dX


def encode(config: EncoderConfig, params, seq: TermSequence) -> np.ndarray:
    return forward(config, params, seq)[0]


def encode_tea(seq: TermSequence) -> np.ndarray:
    """Mean of the in-vocabulary token vectors."""
    known = ~np.asarray(seq.oov_mask, dtype=bool)
    if not known.any():
        raise ValueError("cannot average a sequence with no in-vocabulary tokens")
    return np.asarray(seq.vectors, dtype=np.float64)[known].mean(axis=0)


def _config_for(kind, params, seq):
    D = np.shape(seq.vectors)[1]
    if kind == "CNN":
        H = sum(W.shape[0] for W in params.filters)
        return EncoderConfig("CNN", D, H, cnn_filter_widths=params.widths)
    if kind == "RCNN":
        return EncoderConfig("RCNN", D, params.b.shape[0], rcnn_order=params.W_levels.shape[0])
    H = (params.b_r if kind == "GRU" else params.b_i).shape[0]
    return EncoderConfig(kind, D, H)


def encode_gru(p: GruParams, seq: TermSequence) -> np.ndarray:
    """Final hidden state h_l of the GRU run from h_0 = 0."""
    return encode(_config_for("GRU", p, seq), p, seq)


def encode_lstm(p: LstmParams, seq: TermSequence) -> np.ndarray:
    """Final hidden state h_l of the LSTM run from h_0 = c_0 = 0."""
    return encode(_config_for("LSTM", p, seq), p, seq)


def encode_cnn(p: CnnParams, seq: TermSequence) -> np.ndarray:
    """Concatenated one-max-pooled tanh feature maps, one block per filter width."""
    return encode(_config_for("CNN", p, seq), p, seq)


def encode_rcnn(p: RcnnParams, seq: TermSequence) -> np.ndarray:
    return encode(_config_for("RCNN", p, seq), p, seq)


def sequence_from_array(vectors, oov_mask=None) -> TermSequence:
    """Wrap a raw (l, D) array as a TermSequence, mostly for tests and toy data."""
    vectors = np.atleast_2d(np.asarray(vectors, dtype=np.float64))
    if oov_mask is None:
        oov_mask = np.zeros(len(vectors), dtype=bool)
    tokens = tuple(f"t{i}" for i in range(len(vectors)))
    return TermSequence(tokens, vectors, np.asarray(oov_mask, dtype=bool))


def random_params(config: EncoderConfig, seed: int, scale: float = 1.0):
    """Encoder with every tensor (biases included) drawn from U(-scale, scale)."""
    params = init_encoder(config, seed)
    rng = make_rng((seed, 7919))
    for p in params.tensors():
        p.values[...] = rng.uniform(-scale, scale, size=p.shape)
    return params
