"""Dense float64 tensors with reverse-mode differentiation.

Every op returns a new :class:`Tensor` that remembers its parents and a
closure mapping the output gradient to one gradient per parent. Broadcasting
is limited to two cases: a scalar operand, or an operand whose shape equals
the trailing axes of the other. Anything else needs an explicit
``reshape``/``expand``.
"""

from __future__ import annotations

import contextlib
import math

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from ..errors import GraphError, NonFiniteError, ShapeError

_GRAD_ENABLED = True


@contextlib.contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev, _GRAD_ENABLED = _GRAD_ENABLED, False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "name", "_parents", "_backward", "_op", "_consumed")

    def __init__(self, data, requires_grad: bool = False, name: str | None = None):
        self.data = np.require(np.asarray(data, dtype=np.float64), requirements='C')
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.name = name
        self._parents: tuple = ()
        self._backward = None
        self._op = "leaf"
        self._consumed = False

    shape = property(lambda self: self.data.shape)
    ndim = property(lambda self: self.data.ndim)
    size = property(lambda self: self.data.size)

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data.reshape(-1)[0]) if self.data.size == 1 else _raise_item(self)

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self):
        tag = f" name={self.name}" if self.name else ""
        return f"Tensor(shape={self.shape}, op={self._op}{tag})"

    # operator sugar
    def __add__(self, o): return add(self, o)
    def __radd__(self, o): return add(o, self)
    def __sub__(self, o): return sub(self, o)
    def __rsub__(self, o): return sub(o, self)
    def __mul__(self, o): return mul(self, o)
    def __rmul__(self, o): return mul(o, self)
    def __truediv__(self, o): return div(self, o)
    def __neg__(self): return mul(self, -1.0)
    def __matmul__(self, o): return matmul(self, o)
    def __getitem__(self, idx): return getitem(self, idx)

    def reshape(self, *shape): return reshape(self, shape[0] if len(shape) == 1 and isinstance(shape[0], tuple) else shape)
    def transpose(self, *axes): return transpose(self, axes)
    def sum(self, axis=None, keepdims=False): return sum_(self, axis, keepdims)
    def mean(self, axis=None, keepdims=False): return mean(self, axis, keepdims)


def _raise_item(t):
    raise ShapeError(f"item() needs a single-element tensor, got shape {t.shape}")


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=np.float64))


def _make(data: np.ndarray, parents: tuple, backward, op: str) -> Tensor:
    if not np.isfinite(data).all():
        raise NonFiniteError(f"{op}: non-finite value in output")
    out = Tensor(data)
    out._op = op
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = parents
        out._backward = backward
    return out


# ---------------------------------------------------------------- backward

def backward(loss: Tensor) -> None:
    """Populate ``.grad`` on every leaf reachable from the scalar ``loss``.

    The graph is consumed: closures are dropped and intermediate gradients
    are not kept, so a second call on the same loss raises.
    """
    if loss.data.size != 1:
        raise GraphError(f"backward needs a scalar loss, got shape {loss.shape}")
    if loss._consumed:
        raise GraphError("graph already consumed by a previous backward(); rebuild the forward pass")
    if not loss.requires_grad:
        raise GraphError("loss is detached: no parameter requiring grad is reachable")

    order: list[Tensor] = []
    seen: set[int] = set()
    stack = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and id(p) not in seen:
                stack.append((p, False))

    grads: dict[int, np.ndarray] = {id(loss): np.ones_like(loss.data)}
    for node in reversed(order):
        g = grads.pop(id(node), None)
        if node._backward is None:
            if g is not None:
                node.grad = g.copy() if node.grad is None else node.grad + g
            continue
        if g is not None:
            pgrads = node._backward(g)
            for p, pg in zip(node._parents, pgrads):
                if pg is None or not p.requires_grad:
                    continue
                if pg.shape != p.data.shape:
                    raise ShapeError(f"{node._op}: gradient shape {pg.shape} != value shape {p.data.shape}")
                k = id(p)
                grads[k] = grads[k] + pg if k in grads else pg
        node._backward = None
        node._parents = ()
        node._consumed = True


# ------------------------------------------------------------ broadcasting

def _bshape(a: np.ndarray, b: np.ndarray, op: str) -> None:
    sa, sb = a.shape, b.shape
    if sa == sb or a.size == 1 and a.ndim <= 1 or b.size == 1 and b.ndim <= 1:
        return
    short, long_ = (sa, sb) if len(sa) < len(sb) else (sb, sa)
    if len(short) < len(long_) and long_[len(long_) - len(short):] == short:
        return
    raise ShapeError(f"{op}: shapes {sa} and {sb} are not compatible "
                     f"(only scalars or matching trailing axes broadcast)")


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    if g.shape == shape:
        return g
    if int(np.prod(shape)) == 1 and len(shape) <= 1:
        return g.sum().reshape(shape)
    lead = g.ndim - len(shape)
    return g.sum(axis=tuple(range(lead)))


# ---------------------------------------------------------- elementwise

def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _bshape(a.data, b.data, "add")
    sa, sb = a.shape, b.shape
    return _make(a.data + b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), _unbroadcast(g, sb)), "add")


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _bshape(a.data, b.data, "sub")
    sa, sb = a.shape, b.shape
    return _make(a.data - b.data, (a, b),
                 lambda g: (_unbroadcast(g, sa), -_unbroadcast(g, sb)), "sub")


def mul(a, b) -> Tensor:
    """Elementwise product; also covers scalar-broadcast multiply."""
    a, b = as_tensor(a), as_tensor(b)
    _bshape(a.data, b.data, "mul")
    ad, bd = a.data, b.data
    return _make(ad * bd, (a, b),
                 lambda g: (_unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)), "mul")


def div(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    _bshape(a.data, b.data, "div")
    ad, bd = a.data, b.data
    out = ad / bd

    def bw(g):
        return _unbroadcast(g / bd, ad.shape), _unbroadcast(-g * out / bd, bd.shape)
    return _make(out, (a, b), bw, "div")


def relu(x: Tensor) -> Tensor:
    mask = x.data > 0
    return _make(x.data * mask, (x,), lambda g: (g * mask,), "relu")


_P_MIN, _P_MAX = np.finfo(np.float64).tiny, np.nextafter(1.0, 0.0)


def sigmoid(x: Tensor) -> Tensor:
    d = x.data
    s = np.empty_like(d)
    pos = d >= 0
    s[pos] = 1.0 / (1.0 + np.exp(-d[pos]))
    e = np.exp(d[~pos])
    s[~pos] = e / (1.0 + e)
    # keep probabilities strictly inside (0, 1) even where float64 saturates
    np.clip(s, _P_MIN, _P_MAX, out=s)
    return _make(s, (x,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def exp(x: Tensor) -> Tensor:
    e = np.exp(x.data)
    return _make(e, (x,), lambda g: (g * e,), "exp")


def log(x: Tensor) -> Tensor:
    d = x.data
    return _make(np.log(d), (x,), lambda g: (g / d,), "log")


def abs_(x: Tensor) -> Tensor:
    s = np.sign(x.data)
    return _make(np.abs(x.data), (x,), lambda g: (g * s,), "abs")


def clip(x: Tensor, lo: float, hi: float) -> Tensor:
    """Clamp with zero gradient where the clamp is active."""
    d = x.data
    inside = (d >= lo) & (d <= hi)
    return _make(np.clip(d, lo, hi), (x,), lambda g: (g * inside,), "clip")


def arccos(x: Tensor, limit: float = 1.0 - 1e-7) -> Tensor:
    """arccos of ``x`` clipped to [-1, 1]; zero gradient once |x| >= ``limit``.

    Only the derivative is guarded, so the value stays exact at +-1.
    """
    d = x.data
    inside = np.abs(d) < limit
    c = np.clip(d, -limit, limit)
    dd = np.where(inside, -1.0 / np.sqrt(1.0 - c * c), 0.0)
    return _make(np.arccos(np.clip(d, -1.0, 1.0)), (x,), lambda g: (g * dd,), "arccos")


def sqrt(x: Tensor) -> Tensor:
    r = np.sqrt(x.data)
    return _make(r, (x,), lambda g: (np.where(r > 0, g / (2.0 * np.where(r > 0, r, 1.0)), 0.0),), "sqrt")


def norm(x: Tensor, axis: int = -1, keepdims: bool = False) -> Tensor:
    """Euclidean norm; the subgradient at the origin is taken as zero."""
    d = x.data
    n = np.sqrt((d * d).sum(axis=axis, keepdims=True))
    safe = np.where(n > 0, n, 1.0)

    def bw(g):
        gk = g if keepdims else np.expand_dims(g, axis)
        return (gk * d / safe * (n > 0),)
    return _make(n if keepdims else np.squeeze(n, axis), (x,), bw, "norm")


def cross(a: Tensor, b: Tensor) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    if a.shape[-1] != 3 or b.shape[-1] != 3:
        raise ShapeError(f"cross: last axis must be 3, got {a.shape} and {b.shape}")
    _bshape(a.data, b.data, "cross")
    ad, bd = a.data, b.data
    ad_b, bd_b = np.broadcast_arrays(ad, bd)

    def bw(g):
        return (_unbroadcast(np.cross(bd_b, g), ad.shape), _unbroadcast(np.cross(g, ad_b), bd.shape))
    return _make(np.cross(ad, bd), (a, b), bw, "cross")


# ---------------------------------------------------------- reductions

def _axes(axis, ndim):
    if axis is None:
        return tuple(range(ndim))
    if isinstance(axis, int):
        axis = (axis,)
    return tuple(a % ndim for a in axis)


def sum_(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _axes(axis, x.ndim)
    shape = x.shape

    def bw(g):
        gk = g if keepdims else np.expand_dims(g, axes)
        return (np.broadcast_to(gk, shape).copy(),)
    return _make(x.data.sum(axis=axes, keepdims=keepdims), (x,), bw, "sum")


def mean(x: Tensor, axis=None, keepdims: bool = False) -> Tensor:
    axes = _axes(axis, x.ndim)
    shape = x.shape
    cnt = float(np.prod([shape[a] for a in axes]))

    def bw(g):
        gk = g if keepdims else np.expand_dims(g, axes)
        return (np.broadcast_to(gk / cnt, shape).copy(),)
    return _make(x.data.mean(axis=axes, keepdims=keepdims), (x,), bw, "mean")


def max_over(x: Tensor, axis: int) -> Tensor:
    """Max along one axis (e.g. over points); gradient routes to the first argmax."""
    axis = axis % x.ndim
    idx = np.expand_dims(x.data.argmax(axis=axis), axis)
    out = np.take_along_axis(x.data, idx, axis=axis)
    shape = x.shape

    def bw(g):
        gx = np.zeros(shape)
        np.put_along_axis(gx, idx, np.expand_dims(g, axis), axis=axis)
        return (gx,)
    return _make(np.squeeze(out, axis), (x,), bw, "max_over")


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    d = x.data
    e = np.exp(d - d.max(axis=axis, keepdims=True))
    s = e / e.sum(axis=axis, keepdims=True)
    return _make(s, (x,), lambda g: (s * (g - (g * s).sum(axis=axis, keepdims=True)),), "softmax")


# -------------------------------------------------------------- shaping

def reshape(x: Tensor, shape) -> Tensor:
    old = x.shape
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: cannot view {old} as {tuple(shape)}") from exc
    return _make(out, (x,), lambda g: (g.reshape(old),), "reshape")


def transpose(x: Tensor, axes=None) -> Tensor:
    axes = tuple(axes) if axes else tuple(reversed(range(x.ndim)))
    inv = tuple(np.argsort(axes))
    return _make(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),), "transpose")


def getitem(x: Tensor, idx) -> Tensor:
    shape = x.shape

    parts = idx if isinstance(idx, tuple) else (idx,)
    basic = all(isinstance(i, (slice, int, type(None), type(Ellipsis))) for i in parts)

    def bw(g):
        gx = np.zeros(shape)
        if basic:
            gx[idx] = g  # basic indexing never repeats an element
        else:
            np.add.at(gx, idx, g)
        return (gx,)
    return _make(x.data[idx], (x,), bw, "getitem")


def concat(xs, axis: int = -1) -> Tensor:
    xs = [as_tensor(t) for t in xs]
    nd = xs[0].ndim
    axis = axis % nd
    for t in xs[1:]:
        if t.ndim != nd or any(t.shape[i] != xs[0].shape[i] for i in range(nd) if i != axis):
            raise ShapeError(f"concat: shapes {[t.shape for t in xs]} disagree off axis {axis}")
    splits = np.cumsum([t.shape[axis] for t in xs])[:-1]
    return _make(np.concatenate([t.data for t in xs], axis=axis), tuple(xs),
                 lambda g: tuple(np.split(g, splits, axis=axis)), "concat")


def expand(x: Tensor, axis: int, n: int) -> Tensor:
    """Repeat a size-1 axis ``n`` times."""
    axis = axis % x.ndim
    if x.shape[axis] != 1:
        raise ShapeError(f"expand: axis {axis} of {x.shape} must have size 1")
    return _make(np.repeat(x.data, n, axis=axis), (x,),
                 lambda g: (g.sum(axis=axis, keepdims=True),), "expand")


# ------------------------------------------------------------ linear algebra

def matmul(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    ad, bd = a.data, b.data
    if ad.ndim < 2 or bd.ndim < 2:
        raise ShapeError(f"matmul: operands must be at least 2-D, got {ad.shape} and {bd.shape}")
    if ad.shape[-1] != bd.shape[-2]:
        raise ShapeError(f"matmul: inner axes differ ({ad.shape[-1]} vs {bd.shape[-2]}) for {ad.shape} @ {bd.shape}")
    if bd.ndim > 2 and ad.shape[:-2] != bd.shape[:-2]:
        raise ShapeError(f"matmul: batch axes {ad.shape[:-2]} and {bd.shape[:-2]} differ")

    def bw(g):
        ga = g @ np.swapaxes(bd, -1, -2)
        if bd.ndim == 2 and ad.ndim > 2:
            gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
        else:
            gb = np.swapaxes(ad, -1, -2) @ g
        return ga, gb
    return _make(ad @ bd, (a, b), bw, "matmul")


# ----------------------------------------------------------- image ops

def conv2d(x: Tensor, w: Tensor, b: Tensor | None = None, stride: int = 1, padding: int | None = None) -> Tensor:
    """2-D convolution, NCHW input, OIkk weights; ``padding`` defaults to k//2."""
    xd, wd = x.data, w.data
    if xd.ndim != 4 or wd.ndim != 4:
        raise ShapeError(f"conv2d: expected 4-D input and weight, got {xd.shape} and {wd.shape}")
    B, C, H, W = xd.shape
    O, Cw, k, k2 = wd.shape
    if C != Cw or k != k2:
        raise ShapeError(f"conv2d: input channels {C} vs weight channels {Cw} (kernel {k}x{k2})")
    p = k // 2 if padding is None else padding
    s = stride
    Ho, Wo = (H + 2 * p - k) // s + 1, (W + 2 * p - k) // s + 1
    # im2col in channels-last order (k, k, C) so col2im adds contiguous slabs
    w2 = wd.transpose(0, 2, 3, 1).reshape(O, k * k * C)
    xh = xd.transpose(0, 2, 3, 1)
    if k == 1 and p == 0:
        cols = np.ascontiguousarray(xh[:, ::s, ::s]).reshape(-1, C)
    else:
        xp = np.pad(xh, ((0, 0), (p, p), (p, p), (0, 0))) if p else xh
        win = sliding_window_view(xp, (k, k), axis=(1, 2))[:, ::s, ::s][:, :Ho, :Wo]
        cols = win.transpose(0, 1, 2, 4, 5, 3).reshape(B * Ho * Wo, k * k * C)
    out = cols @ w2.T
    if b is not None:
        out += b.data
    out = out.reshape(B, Ho, Wo, O).transpose(0, 3, 1, 2)
    need_x = x.requires_grad

    def bw(g):
        g2 = g.transpose(0, 2, 3, 1).reshape(-1, O)
        gw = (g2.T @ cols).reshape(O, k, k, C).transpose(0, 3, 1, 2)
        gb = g2.sum(axis=0) if b is not None else None
        gx = None
        if need_x:
            gc = (g2 @ w2).reshape(B, Ho, Wo, k, k, C)
            gxp = np.zeros((B, H + 2 * p, W + 2 * p, C))
            for i in range(k):
                for j in range(k):
                    gxp[:, i:i + s * Ho:s, j:j + s * Wo:s, :] += gc[:, :, :, i, j, :]
            gx = np.ascontiguousarray(gxp[:, p:p + H, p:p + W, :].transpose(0, 3, 1, 2))
        return (gx, gw, gb) if b is not None else (gx, gw)
    parents = (x, w, b) if b is not None else (x, w)
    return _make(np.ascontiguousarray(out), parents, bw, "conv2d")


def max_pool2d(x: Tensor, size: int = 2) -> Tensor:
    d = x.data
    B, C, H, W = d.shape
    if H % size or W % size:
        raise ShapeError(f"max_pool2d: spatial dims {H}x{W} not divisible by {size}")
    Hp, Wp = H // size, W // size
    r = d.reshape(B, C, Hp, size, Wp, size).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, Hp, Wp, size * size)
    idx = r.argmax(axis=-1)[..., None]
    out = np.take_along_axis(r, idx, axis=-1)[..., 0]

    def bw(g):
        gr = np.zeros((B, C, Hp, Wp, size * size))
        np.put_along_axis(gr, idx, g[..., None], axis=-1)
        gx = gr.reshape(B, C, Hp, Wp, size, size).transpose(0, 1, 2, 4, 3, 5).reshape(B, C, H, W)
        return (gx,)
    return _make(out, (x,), bw, "max_pool2d")


def global_avg_pool(x: Tensor) -> Tensor:
    """(B, C, H, W) -> (B, C) mean over pixels."""
    if x.ndim != 4:
        raise ShapeError(f"global_avg_pool: expected (B, C, H, W), got {x.shape}")
    return mean(x, axis=(2, 3))


# -------------------------------------------------------- normalization

def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    d = x.data
    D = d.shape[-1]
    if gain.shape != (D,) or bias.shape != (D,):
        raise ShapeError(f"layer_norm: gain/bias must be ({D},), got {gain.shape}/{bias.shape}")
    mu = d.mean(axis=-1, keepdims=True)
    xc = d - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    gd = gain.data

    def bw(g):
        dxh = g * gd
        gx = inv / D * (D * dxh - dxh.sum(axis=-1, keepdims=True) - xhat * (dxh * xhat).sum(axis=-1, keepdims=True))
        lead = tuple(range(d.ndim - 1))
        return gx, (g * xhat).sum(axis=lead), g.sum(axis=lead)
    return _make(xhat * gd + bias.data, (x, gain, bias), bw, "layer_norm")


def batch_norm(x: Tensor, gain: Tensor, bias: Tensor, running_mean: np.ndarray, running_var: np.ndarray,
               use_batch_stats: bool, momentum: float = 0.9, eps: float = 1e-5) -> Tensor:
    """Per-channel normalization over every axis but 1.

    With ``use_batch_stats`` the running buffers are updated in place as
    ``r <- momentum * r + (1 - momentum) * batch``.
    """
    d = x.data
    C = d.shape[1]
    if gain.shape != (C,) or bias.shape != (C,):
        raise ShapeError(f"batch_norm: channel axis has {C} entries but gain/bias are {gain.shape}/{bias.shape}")
    axes = (0,) + tuple(range(2, d.ndim))
    bshape = (1, C) + (1,) * (d.ndim - 2)
    gd = gain.data.reshape(bshape)
    if use_batch_stats:
        M = d.size // C
        mu = d.mean(axis=axes, keepdims=True)
        xc = d - mu
        var = (xc * xc).mean(axis=axes, keepdims=True)
        inv = 1.0 / np.sqrt(var + eps)
        xhat = xc * inv
        running_mean *= momentum
        running_mean += (1 - momentum) * mu.reshape(C)
        running_var *= momentum
        running_var += (1 - momentum) * var.reshape(C) * (M / max(M - 1, 1))

        def bw(g):
            dxh = g * gd
            gx = inv / M * (M * dxh - dxh.sum(axis=axes, keepdims=True)
                            - xhat * (dxh * xhat).sum(axis=axes, keepdims=True))
            return gx, (g * xhat).sum(axis=axes), g.sum(axis=axes)
    else:
        inv = 1.0 / np.sqrt(running_var.reshape(bshape) + eps)
        xhat = (d - running_mean.reshape(bshape)) * inv

        def bw(g):
            return g * gd * inv, (g * xhat).sum(axis=axes), g.sum(axis=axes)
    return _make(xhat * gd + bias.data.reshape(bshape), (x, gain, bias), bw, "batch_norm")


# ------------------------------------------------------------ attention

def multi_head_attention(x: Tensor, wq, bq, wk, bk, wv, bv, wo, bo, heads: int) -> Tensor:
    """Scaled dot-product self-attention over tokens of ``x`` (B, T, D)."""
    B, T, D = x.shape
    if D % heads:
        raise ShapeError(f"multi_head_attention: width {D} not divisible by {heads} heads")
    dh = D // heads

    def split(t):
        return transpose(reshape(t, (B, T, heads, dh)), (0, 2, 1, 3))

    q = split(x @ wq + bq) * (1.0 / math.sqrt(dh))
    k = split(x @ wk + bk)
    v = split(x @ wv + bv)
    att = softmax(matmul(q, transpose(k, (0, 1, 3, 2))), axis=-1)
    o = reshape(transpose(matmul(att, v), (0, 2, 1, 3)), (B, T, D))
    return o @ wo + bo
