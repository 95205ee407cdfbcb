"""Forward/backward kernels for the recurrent and convolutional encoders.

Each kernel is written once in numba-compatible numpy.  At import time the
active backend is chosen: numba ``@njit`` versions when numba imports and
``HYPERDISC_NUMBA`` is not ``0``; otherwise the same functions run as
plain numpy.  ``get_kernels("numpy")`` / ``get_kernels("numba")`` give
explicit access to either set (tests and benchmarks use both).

Conventions: inputs ``X`` are (l, D) C-contiguous float64; weight matrices
are (out, in); backward kernels accumulate into the ``g*`` arrays in place
and return the gradient w.r.t. ``X``.  Sigmoids are inlined because jitted
code cannot call plain Python helpers.
"""
from __future__ import annotations

import os
import types

import numpy as np


def gru_forward(X, h0, Wr, Ur, br, Wz, Uz, bz, Wh, Uh, bh):
    l = X.shape[0]
    H = br.shape[0]
    hs = np.zeros((l + 1, H))
    hs[0] = h0
    rs = np.empty((l, H))
    zs = np.empty((l, H))
    cand = np.empty((l, H))
    for t in range(l):
        x = X[t]
        hp = hs[t]
        r = 1.0 / (1.0 + np.exp(-(np.dot(Wr, x) + np.dot(Ur, hp) + br)))
        z = 1.0 / (1.0 + np.exp(-(np.dot(Wz, x) + np.dot(Uz, hp) + bz)))
        c = np.tanh(np.dot(Wh, x) + np.dot(Uh, r * hp) + bh)
        hs[t + 1] = (1.0 - z) * hp + z * c
        rs[t] = r
        zs[t] = z
        cand[t] = c
    return hs, rs, zs, cand


def gru_backward(X, Wr, Ur, Wz, Uz, Wh, Uh, hs, rs, zs, cand, dout,
                 gWr, gUr, gbr, gWz, gUz, gbz, gWh, gUh, gbh):
    l = X.shape[0]
    dX = np.zeros_like(X)
    dh = dout.copy()
    for t in range(l - 1, -1, -1):
        x = X[t]
        hp = hs[t]
        r = rs[t]
        z = zs[t]
        c = cand[t]
        dc = dh * z
        dz = dh * (c - hp)
        dhp = dh * (1.0 - z)

        dac = dc * (1.0 - c * c)
        gWh += np.outer(dac, x)
        gUh += np.outer(dac, r * hp)
        gbh += dac
        drh = np.dot(dac, Uh)
        dr = drh * hp
        dhp += drh * r

        daz = dz * z * (1.0 - z)
        gWz += np.outer(daz, x)
        gUz += np.outer(daz, hp)
        gbz += daz
        dhp += np.dot(daz, Uz)

        dar = dr * r * (1.0 - r)
        gWr += np.outer(dar, x)
        gUr += np.outer(dar, hp)
        gbr += dar
        dhp += np.dot(dar, Ur)

        dX[t] = np.dot(dar, Wr) + np.dot(daz, Wz) + np.dot(dac, Wh)
        dh = dhp
    return dX


def lstm_forward(X, h0, c0, Wi, Ui, bi, Wf, Uf, bf, Wu, Uu, bu, Wc, Uc, bc):
    l = X.shape[0]
    H = bi.shape[0]
    hs = np.zeros((l + 1, H))
    cs = np.zeros((l + 1, H))
    hs[0] = h0
    cs[0] = c0
    gi = np.empty((l, H))
    gf = np.empty((l, H))
    gu = np.empty((l, H))
    gc = np.empty((l, H))
    for t in range(l):
        x = X[t]
        hp = hs[t]
        i = 1.0 / (1.0 + np.exp(-(np.dot(Wi, x) + np.dot(Ui, hp) + bi)))
        f = 1.0 / (1.0 + np.exp(-(np.dot(Wf, x) + np.dot(Uf, hp) + bf)))
        u = 1.0 / (1.0 + np.exp(-(np.dot(Wu, x) + np.dot(Uu, hp) + bu)))
        g = np.tanh(np.dot(Wc, x) + np.dot(Uc, hp) + bc)
        c = f * cs[t] + i * g
        cs[t + 1] = c
        hs[t + 1] = np.tanh(c) * u
        gi[t] = i
        gf[t] = f
        gu[t] = u
        gc[t] = g
    return hs, cs, gi, gf, gu, gc


def lstm_backward(X, Wi, Ui, Wf, Uf, Wu, Uu, Wc, Uc, hs, cs, gi, gf, gu, gc, dout,
                  gWi, gUi, gbi, gWf, gUf, gbf, gWu, gUu, gbu, gWc, gUc, gbc):
    l = X.shape[0]
    dX = np.zeros_like(X)
    dh = dout.copy()
    dc_next = np.zeros_like(dout)
    for t in range(l - 1, -1, -1):
        x = X[t]
        hp = hs[t]
        i = gi[t]
        f = gf[t]
        u = gu[t]
        g = gc[t]
        tc = np.tanh(cs[t + 1])
        du = dh * tc
        dc = dc_next + dh * u * (1.0 - tc * tc)
        df = dc * cs[t]
        di = dc * g
        dg = dc * i
        dc_next = dc * f

        dai = di * i * (1.0 - i)
        daf = df * f * (1.0 - f)
        dau = du * u * (1.0 - u)
        dag = dg * (1.0 - g * g)
        gWi += np.outer(dai, x)
        gUi += np.outer(dai, hp)
        gbi += dai
        gWf += np.outer(daf, x)
        gUf += np.outer(daf, hp)
        gbf += daf
        gWu += np.outer(dau, x)
        gUu += np.outer(dau, hp)
        gbu += dau
        gWc += np.outer(dag, x)
        gUc += np.outer(dag, hp)
        gbc += dag

        dX[t] = np.dot(dai, Wi) + np.dot(daf, Wf) + np.dot(dau, Wu) + np.dot(dag, Wc)
        dh = np.dot(dai, Ui) + np.dot(daf, Uf) + np.dot(dau, Uu) + np.dot(dag, Uc)
    return dX


def rcnn_forward(X, Wl, Ul, bl, Wm, b):
    # Wm: (n, H, D) per-level input maps
    l = X.shape[0]
    n = Wm.shape[0]
    H = bl.shape[0]
    hs = np.zeros((l + 1, H))
    cs = np.zeros((l + 1, n, H))
    lams = np.empty((l, H))
    for t in range(l):
        x = X[t]
        lam = 1.0 / (1.0 + np.exp(-(np.dot(Wl, x) + np.dot(Ul, hs[t]) + bl)))
        for m in range(n):
            inp = np.dot(Wm[m], x)
            if m > 0:
                inp = inp + cs[t, m - 1]
            cs[t + 1, m] = lam * cs[t, m] + (1.0 - lam) * inp
        hs[t + 1] = np.tanh(cs[t + 1, n - 1] + b)
        lams[t] = lam
    return hs, cs, lams


def rcnn_backward(X, Wl, Ul, Wm, hs, cs, lams, dout, gWl, gUl, gbl, gWm, gb):
    l = X.shape[0]
    n = Wm.shape[0]
    H = gbl.shape[0]
    dX = np.zeros_like(X)
    dh = dout.copy()
    dcs = np.zeros((n, H))
    for t in range(l - 1, -1, -1):
        x = X[t]
        h = hs[t + 1]
        lam = lams[t]
        dah = dh * (1.0 - h * h)
        gb += dah
        dcs[n - 1] += dah
        dlam = np.zeros(H)
        dprev = np.zeros((n, H))
        for m in range(n - 1, -1, -1):
            dc = dcs[m]
            inp = np.dot(Wm[m], x)
            if m > 0:
                inp = inp + cs[t, m - 1]
            dlam += dc * (cs[t, m] - inp)
            dprev[m] += dc * lam
            dinp = dc * (1.0 - lam)
            gWm[m] += np.outer(dinp, x)
            dX[t] += np.dot(dinp, Wm[m])
            if m > 0:
                dprev[m - 1] += dinp
        dal = dlam * lam * (1.0 - lam)
        gWl += np.outer(dal, x)
        gUl += np.outer(dal, hs[t])
        gbl += dal
        dX[t] += np.dot(dal, Wl)
        dh = np.dot(dal, Ul)
        dcs = dprev
    return dX


def conv_forward(X, Wf, b, width):
    """Wide convolution + tanh + one-max pooling for one filter width.

    Wf is (maps, width * D); returns pooled (maps,), earliest argmax per map
    and the full activation map (l + width - 1, maps).
    """
    l, D = X.shape
    M = b.shape[0]
    P = np.zeros((l + 2 * (width - 1), D))
    P[width - 1:width - 1 + l] = X
    flat = P.reshape(-1)
    npos = l + width - 1
    act = np.empty((npos, M))
    for i in range(npos):
        act[i] = np.tanh(np.dot(Wf, flat[i * D:(i + width) * D]) + b)
    pooled = np.empty(M)
    arg = np.zeros(M, dtype=np.int64)
    for m in range(M):
        best = act[0, m]
        k = 0
        for i in range(1, npos):
            if act[i, m] > best:
                best = act[i, m]
                k = i
        pooled[m] = best
        arg[m] = k
    return pooled, arg, act


def conv_backward(X, Wf, width, act, arg, dout, gWf, gb):
    l, D = X.shape
    M = dout.shape[0]
    P = np.zeros((l + 2 * (width - 1), D))
    P[width - 1:width - 1 + l] = X
    flat = P.reshape(-1)
    dflat = np.zeros(flat.shape[0])
    for m in range(M):
        i = arg[m]
        a = act[i, m]
        da = dout[m] * (1.0 - a * a)
        lo = i * D
        hi = (i + width) * D
        gWf[m] += da * flat[lo:hi]
        gb[m] += da
        dflat[lo:hi] += da * Wf[m]
    dP = dflat.reshape(P.shape)
    return dP[width - 1:width - 1 + l].copy()


KERNEL_NAMES = (
    "gru_forward", "gru_backward",
    "lstm_forward", "lstm_backward",
    "rcnn_forward", "rcnn_backward",
    "conv_forward", "conv_backward",
)

_numpy_kernels = types.SimpleNamespace(**{k: globals()[k] for k in KERNEL_NAMES})
_numba_kernels = None


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def get_kernels(backend: str) -> types.SimpleNamespace:
    """Kernel namespace for ``"numpy"`` or ``"numba"``."""
    global _numba_kernels
    if backend == "numpy":
        return _numpy_kernels
    if backend != "numba":
        raise ValueError(f"unknown backend {backend!r}")
    if _numba_kernels is None:
        from numba import njit

        # fastmath stays off: gradient checks and bitwise determinism rely on IEEE semantics
        _numba_kernels = types.SimpleNamespace(
            **{k: njit(cache=True)(getattr(_numpy_kernels, k)) for k in KERNEL_NAMES}
        )
    return _numba_kernels


def _default_backend() -> str:
    flag = os.environ.get("HYPERDISC_NUMBA", "1").strip().lower()
    if flag in ("0", "false", "no", "off"):
        return "numpy"
    return "numba" if numba_available() else "numpy"


BACKEND = _default_backend()
active = get_kernels(BACKEND)
