# numerics/ops.py: OPERACJE RÓŻNICZKOWALNE
# ===========================================
# Każda operacja liczy forward na numpy i (gdy aktywna taśma) rejestruje regułę
# wsteczną zwracającą gradienty względem KAŻDEGO wejścia (None = brak gradientu).
#
# Broadcasting: tylko jawne rozszerzenie po osi wiodącej / końcowej (add_bias, mul_bias,
# broadcast_channels). Brak ogólnego broadcastingu numpy.
# ===========================================

from __future__ import annotations

from typing import Sequence, Tuple, Union

import numpy as np

from ..errors import ConfigError, NumericInputError, ShapeError
from .tensor import Tensor, make_output

Pad = Union[int, Tuple[int, int]]


def _same_shape(op: str, a: Tensor, b: Tensor) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: niezgodne kształty {a.shape} vs {b.shape}")


# ─────────────────────────────────────────────────────────────────────────────
# Elementarne
# ─────────────────────────────────────────────────────────────────────────────
def add(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("add", a, b)
    return make_output("add", a.data + b.data, (a, b), lambda g: (g, g))


def sub(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("sub", a, b)
    return make_output("sub", a.data - b.data, (a, b), lambda g: (g, -g))


def mul(a: Tensor, b: Tensor) -> Tensor:
    _same_shape("mul", a, b)
    av, bv = a.data, b.data
    return make_output("mul", av * bv, (a, b), lambda g: (g * bv, g * av))


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)
    return make_output("scale", a.data * c, (a,), lambda g: (g * c,))


def mul_const(a: Tensor, m: np.ndarray) -> Tensor:
    """Mnożenie przez stałą tablicę (np. maska): bez gradientu po stałej."""
    m = np.asarray(m, dtype=np.float64)
    if m.shape != a.shape:
        raise ShapeError(f"mul_const: maska {m.shape} vs {a.shape}")
    return make_output("mul_const", a.data * m, (a,), lambda g: (g * m,))


def sub_const(a: Tensor, c: np.ndarray) -> Tensor:
    c = np.asarray(c, dtype=np.float64)
    if c.shape != a.shape:
        raise ShapeError(f"sub_const: {c.shape} vs {a.shape}")
    return make_output("sub_const", a.data - c, (a,), lambda g: (g,))


def square(a: Tensor) -> Tensor:
    av = a.data
    return make_output("square", av * av, (a,), lambda g: (2.0 * av * g,))


def tanh(a: Tensor) -> Tensor:
    y = np.tanh(a.data)
    return make_output("tanh", y, (a,), lambda g: (g * (1.0 - y * y),))


def sum_all(a: Tensor) -> Tensor:
    shape = a.shape
    return make_output("sum", np.array(a.data.sum()), (a,), lambda g: (np.full(shape, float(g)),))


def mean_all(a: Tensor) -> Tensor:
    n = a.size
    shape = a.shape
    return make_output("mean", np.array(a.data.mean()), (a,), lambda g: (np.full(shape, float(g) / n),))


# ─────────────────────────────────────────────────────────────────────────────
# Kształt
# ─────────────────────────────────────────────────────────────────────────────
def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(int(s) for s in shape)
    if int(np.prod(shape)) != a.size:
        raise ShapeError(f"reshape: {a.shape} → {shape} (różna liczba elementów)")
    src = a.shape
    return make_output("reshape", a.data.reshape(shape), (a,), lambda g: (g.reshape(src),))


def transpose(a: Tensor) -> Tensor:
    if a.ndim != 2:
        raise ShapeError(f"transpose: wymagany rank 2, otrzymano {a.shape}")
    return make_output("transpose", a.data.T, (a,), lambda g: (g.T,))


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    if not tensors:
        raise ShapeError("concat: pusta lista")
    nd = tensors[0].ndim
    ax = axis % nd
    for t in tensors[1:]:
        if t.ndim != nd or any(t.shape[i] != tensors[0].shape[i] for i in range(nd) if i != ax):
            raise ShapeError(f"concat: niezgodne kształty {[x.shape for x in tensors]} (axis={axis})")
    sizes = [t.shape[ax] for t in tensors]
    bounds = np.cumsum([0] + sizes)

    def _bw(g: np.ndarray):
        return tuple(np.take(g, np.arange(bounds[i], bounds[i + 1]), axis=ax) for i in range(len(tensors)))

    return make_output("concat", np.concatenate([t.data for t in tensors], axis=ax), tuple(tensors), _bw)


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    ax = axis % a.ndim
    if not (0 <= start < stop <= a.shape[ax]):
        raise ShapeError(f"slice_axis: [{start}:{stop}] poza zakresem osi {ax} ({a.shape})")
    idx = [slice(None)] * a.ndim
    idx[ax] = slice(start, stop)
    idx_t = tuple(idx)
    src = a.shape

    def _bw(g: np.ndarray):
        out = np.zeros(src, dtype=np.float64)
        out[idx_t] = g
        return (out,)

    return make_output("slice", a.data[idx_t], (a,), _bw)


def _expand_axis(b: np.ndarray, ndim: int, axis: int) -> np.ndarray:
    shape = [1] * ndim
    shape[axis] = b.shape[0]
    return b.reshape(shape)


def add_bias(x: Tensor, b: Tensor, axis: int = 0) -> Tensor:
    """x + b rozszerzone po pozostałych osiach; b ma rank 1 i rozmiar x.shape[axis]."""
    ax = axis % x.ndim
    if b.ndim != 1 or b.shape[0] != x.shape[ax]:
        raise ShapeError(f"add_bias: bias {b.shape} vs oś {ax} tensora {x.shape}")
    other = tuple(i for i in range(x.ndim) if i != ax)
    be = _expand_axis(b.data, x.ndim, ax)
    return make_output("add_bias", x.data + be, (x, b), lambda g: (g, g.sum(axis=other)))


def mul_bias(x: Tensor, s: Tensor, axis: int = 0) -> Tensor:
    """x * s rozszerzone po pozostałych osiach (skala per kanał / per wiersz)."""
    ax = axis % x.ndim
    if s.ndim != 1 or s.shape[0] != x.shape[ax]:
        raise ShapeError(f"mul_bias: skala {s.shape} vs oś {ax} tensora {x.shape}")
    other = tuple(i for i in range(x.ndim) if i != ax)
    se = _expand_axis(s.data, x.ndim, ax)
    xv = x.data
    return make_output("mul_bias", xv * se, (x, s), lambda g: (g * se, (g * xv).sum(axis=other)))


def broadcast_channels(v: Tensor, h: int, w: int) -> Tensor:
    """Wektor [d] → [d, h, w] (ta sama wartość w każdej komórce)."""
    if v.ndim != 1:
        raise ShapeError(f"broadcast_channels: wymagany wektor, otrzymano {v.shape}")
    out = np.broadcast_to(v.data[:, None, None], (v.shape[0], h, w)).copy()
    return make_output("broadcast_channels", out, (v,), lambda g: (g.sum(axis=(1, 2)),))


def upsample_nearest(x: Tensor, factor: int) -> Tensor:
    """[C, H, W] → [C, H·f, W·f] (powielenie komórek)."""
    f = int(factor)
    if f == 1:
        return x
    if x.ndim != 3:
        raise ShapeError(f"upsample_nearest: wymagany rank 3, otrzymano {x.shape}")
    c, h, w = x.shape
    out = np.repeat(np.repeat(x.data, f, axis=1), f, axis=2)
    return make_output(
        "upsample", out, (x,),
        lambda g: (g.reshape(c, h, f, w, f).sum(axis=(2, 4)),),
    )


# ─────────────────────────────────────────────────────────────────────────────
# Algebra liniowa
# ─────────────────────────────────────────────────────────────────────────────
def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: niezgodne kształty {a.shape} x {b.shape}")
    av, bv = a.data, b.data
    return make_output("matmul", av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    ax = axis % x.ndim if x.ndim else 0
    if x.ndim and not (-x.ndim <= axis < x.ndim):
        raise ShapeError(f"softmax: oś {axis} poza zakresem dla {x.shape}")
    if not np.all(np.isfinite(x.data)):
        raise NumericInputError("softmax: wejście zawiera NaN/Inf")
    z = x.data - x.data.max(axis=ax, keepdims=True)
    e = np.exp(z)
    y = e / e.sum(axis=ax, keepdims=True)

    def _bw(g: np.ndarray):
        return (y * (g - (g * y).sum(axis=ax, keepdims=True)),)

    return make_output("softmax", y, (x,), _bw)


# ─────────────────────────────────────────────────────────────────────────────
# Konwolucja 2D (cross-correlation, zero-padding): im2col
# ─────────────────────────────────────────────────────────────────────────────
def _pads(pad: Pad) -> Tuple[int, int]:
    if isinstance(pad, (tuple, list)):
        lo, hi = int(pad[0]), int(pad[1])
    else:
        lo = hi = int(pad)
    if lo < 0 or hi < 0:
        raise ConfigError(f"conv2d: pad musi być >= 0, otrzymano {pad}")
    return lo, hi


def conv_out_extent(n: int, k: int, stride: int, pad: Pad) -> int:
    lo, hi = _pads(pad)
    span = n + lo + hi - k
    if span < 0 or span % stride != 0:
        raise ConfigError(
            f"conv2d: rozmiar wyjścia niecałkowity: (n={n} + pad={lo}+{hi} - k={k}) / stride={stride}"
        )
    return span // stride + 1


def conv2d(x: Tensor, w: Tensor, stride: int = 1, pad: Pad = 0) -> Tensor:
    if x.ndim != 3 or w.ndim != 4:
        raise ShapeError(f"conv2d: x {x.shape} (C,H,W), w {w.shape} (Co,Ci,k,k)")
    cin, h, wd = x.shape
    cout, cin_w, k, k2 = w.shape
    if cin != cin_w:
        raise ShapeError(f"conv2d: C_in obrazu {cin} != C_in jądra {cin_w}")
    if k != k2 or k % 2 == 0:
        raise ConfigError(f"conv2d: jądro musi być kwadratowe i nieparzyste, otrzymano {k}x{k2}")
    if stride < 1:
        raise ConfigError(f"conv2d: stride={stride} < 1")
    lo, hi = _pads(pad)
    ho = conv_out_extent(h, k, stride, pad)
    wo = conv_out_extent(wd, k, stride, pad)

    xp = np.pad(x.data, ((0, 0), (lo, hi), (lo, hi)))
    win = np.lib.stride_tricks.sliding_window_view(xp, (k, k), axis=(1, 2))
    win = win[:, : (ho - 1) * stride + 1 : stride, : (wo - 1) * stride + 1 : stride]  # [Ci,Ho,Wo,k,k]
    cols = np.ascontiguousarray(win.transpose(0, 3, 4, 1, 2)).reshape(cin * k * k, ho * wo)
    w2 = w.data.reshape(cout, cin * k * k)
    out = (w2 @ cols).reshape(cout, ho, wo)

    def _bw(g: np.ndarray):
        g2 = g.reshape(cout, ho * wo)
        gw = (g2 @ cols.T).reshape(w.shape)
        dcols = (w2.T @ g2).reshape(cin, k, k, ho, wo)
        dxp = np.zeros_like(xp)
        for i in range(k):
            for j in range(k):
                dxp[:, i : i + stride * ho : stride, j : j + stride * wo : stride] += dcols[:, i, j]
        gx = dxp[:, lo : lo + h, lo : lo + wd]
        return (gx, gw)

    return make_output("conv2d", out, (x, w), _bw)
