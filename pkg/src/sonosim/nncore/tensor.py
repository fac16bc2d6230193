"""Small float32 tensor type with reverse-mode automatic differentiation.

The op set is exactly what the layers in this package need: elementwise
arithmetic, matmul (2-D and batched 3-D), reductions, shape ops, sin/cos,
sigmoid/silu, softmax, clamp, a strided 3x3 convolution, and a B-spline
basis op. Gradients accumulate into ``.grad`` buffers on ``backward()``.
"""

from __future__ import annotations

import numpy as np

__all__ = ["Tensor", "concat"]


def _unbroadcast(grad: np.ndarray, shape: tuple) -> np.ndarray:
    """Reduce a broadcasted gradient back to the operand's shape."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=np.float32)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = ()
        self._backward = None

    # ------------------------------------------------------------------
    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def detach(self) -> "Tensor":
        return Tensor(self.data.copy())

    def _accumulate(self, grad: np.ndarray):
        if self.grad is None:
            self.grad = grad.astype(np.float32, copy=True)
        else:
            self.grad += grad

    @staticmethod
    def _make(data, parents, backward) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = tuple(parents)
            out._backward = backward
        return out

    def backward(self):
        if not self.requires_grad or self._parents == () and self._backward is None:
            raise RuntimeError("backward() on a tensor with no recorded graph")
        if self.data.size != 1:
            raise RuntimeError("backward() requires a scalar loss")
        topo, visited, stack = [], set(), [(self, False)]
        while stack:
            node, processed = stack.pop()
            if processed:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # -- elementwise ----------------------------------------------------
    def __add__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        a, b = self, other

        def bwd(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g, b.shape))

        return Tensor._make(a.data + b.data, (a, b), bwd)

    __radd__ = __add__

    def __neg__(self):
        a = self

        def bwd(g):
            a._accumulate(-g)

        return Tensor._make(-a.data, (a,), bwd)

    def __sub__(self, other):
        other = other if isinstance(other, Tensor) else Tensor(other)
        return self + (-other)

    def __rsub__(self, other):
        return Tensor(other) + (-self)

    def __mul__(self, other):
        if isinstance(other, (int, float, np.floating)):
            a, c = self, np.float32(other)

            def bwd_scalar(g):
                a._accumulate(g * c)

            return Tensor._make(a.data * c, (a,), bwd_scalar)
        a, b = self, other

        def bwd(g):
            if a.requires_grad:
                a._accumulate(_unbroadcast(g * b.data, a.shape))
            if b.requires_grad:
                b._accumulate(_unbroadcast(g * a.data, b.shape))

        return Tensor._make(a.data * b.data, (a, b), bwd)

    __rmul__ = __mul__

    def __matmul__(self, other):
        a, b = self, other
        if a.ndim not in (2, 3) or b.ndim not in (2, 3):
            raise ValueError("matmul supports 2-D and 3-D operands only")
        out = a.data @ b.data

        def bwd(g):
            if a.requires_grad:
                ga = g @ b.data.swapaxes(-1, -2)
                a._accumulate(_unbroadcast(ga, a.shape))
            if b.requires_grad:
                gb = a.data.swapaxes(-1, -2) @ g
                b._accumulate(_unbroadcast(gb, b.shape))

        return Tensor._make(out, (a, b), bwd)

    # -- unary ----------------------------------------------------------
    def sin(self):
        a = self

        def bwd(g):
            a._accumulate(g * np.cos(a.data))

        return Tensor._make(np.sin(a.data), (a,), bwd)

    def cos(self):
        a = self

        def bwd(g):
            a._accumulate(-g * np.sin(a.data))

        return Tensor._make(np.cos(a.data), (a,), bwd)

    def sigmoid(self):
        a = self
        out_data = 1.0 / (1.0 + np.exp(-a.data))

        def bwd(g):
            a._accumulate(g * out_data * (1.0 - out_data))

        return Tensor._make(out_data, (a,), bwd)

    def silu(self):
        a = self
        sig = 1.0 / (1.0 + np.exp(-a.data))
        out_data = a.data * sig

        def bwd(g):
            a._accumulate(g * sig * (1.0 + a.data * (1.0 - sig)))

        return Tensor._make(out_data, (a,), bwd)

    def clamp(self, lo: float, hi: float):
        a = self
        out_data = np.clip(a.data, lo, hi)
        mask = ((a.data >= lo) & (a.data <= hi)).astype(np.float32)

        def bwd(g):
            a._accumulate(g * mask)

        return Tensor._make(out_data, (a,), bwd)

    # -- reductions -----------------------------------------------------
    def sum(self, axis=None, keepdims=False):
        a = self
        out = a.data.sum(axis=axis, keepdims=keepdims)

        def bwd(g):
            g = np.asarray(g)
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            a._accumulate(np.broadcast_to(g, a.shape).astype(np.float32))

        return Tensor._make(out, (a,), bwd)

    def mean(self, axis=None, keepdims=False):
        n = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / n)

    def softmax(self, axis: int = -1):
        a = self
        shifted = a.data - a.data.max(axis=axis, keepdims=True)
        e = np.exp(shifted)
        out_data = e / e.sum(axis=axis, keepdims=True)

        def bwd(g):
            dot = (g * out_data).sum(axis=axis, keepdims=True)
            a._accumulate(out_data * (g - dot))

        return Tensor._make(out_data, (a,), bwd)

    # -- shape ----------------------------------------------------------
    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        a = self
        old = a.shape

        def bwd(g):
            a._accumulate(g.reshape(old))

        return Tensor._make(a.data.reshape(shape), (a,), bwd)

    def swapaxes(self, ax1: int, ax2: int):
        a = self

        def bwd(g):
            a._accumulate(g.swapaxes(ax1, ax2))

        return Tensor._make(a.data.swapaxes(ax1, ax2), (a,), bwd)

    def gather(self, index: np.ndarray):
        """Select rows along axis 1 with a per-batch index: (B,T,...)[b, index[b]]."""
        a = self
        index = np.asarray(index)
        batch = np.arange(a.shape[0])[:, None]
        out = a.data[batch, index]

        def bwd(g):
            acc = np.zeros_like(a.data)
            np.add.at(acc, (batch, index), g)
            a._accumulate(acc)

        return Tensor._make(out, (a,), bwd)

    def take0(self, index: np.ndarray):
        """Select rows along axis 0; rows may repeat (gradients accumulate)."""
        a = self
        index = np.asarray(index)
        out = a.data[index]

        def bwd(g):
            acc = np.zeros_like(a.data)
            np.add.at(acc, index, g)
            a._accumulate(acc)

        return Tensor._make(out, (a,), bwd)

    # -- structured ops --------------------------------------------------
    def conv2d(self, weight: "Tensor", bias: "Tensor", stride: int = 2):
        """3x3 convolution, pad 1, NHWC layout: (N,H,W,C) -> (N,H/s,W/s,C_out)."""
        a, w, b = self, weight, bias
        n, h, wd, c = a.shape
        c9, c_out = w.shape
        k = 3
        oh, ow = (h + 2 - k) // stride + 1, (wd + 2 - k) // stride + 1
        xp = np.pad(a.data, ((0, 0), (1, 1), (1, 1), (0, 0)))
        s0, s1, s2, s3 = xp.strides
        win = np.lib.stride_tricks.as_strided(
            xp,
            shape=(n, oh, ow, k, k, c),
            strides=(s0, s1 * stride, s2 * stride, s1, s2, s3),
        )
        col = win.reshape(n * oh * ow, k * k * c)
        out = (col @ w.data) + b.data
        out = out.reshape(n, oh, ow, c_out)

        def bwd(g):
            gf = g.reshape(n * oh * ow, c_out)
            if b.requires_grad:
                b._accumulate(gf.sum(axis=0))
            if w.requires_grad:
                w._accumulate(col.T @ gf)
            if a.requires_grad:
                dcol = (gf @ w.data.T).reshape(n, oh, ow, k, k, c)
                dxp = np.zeros_like(xp)
                for ki in range(k):
                    he = ki + stride * oh
                    for kj in range(k):
                        we = kj + stride * ow
                        dxp[:, ki:he:stride, kj:we:stride, :] += dcol[:, :, :, ki, kj, :]
                a._accumulate(dxp[:, 1 : h + 1, 1 : wd + 1, :])

        return Tensor._make(out, (a, w, b), bwd)

    def spline_basis(self, knots: np.ndarray, order: int):
        """Cox-de Boor B-spline basis: (..., n) -> (..., n, n_basis).

        ``knots`` is the full (order-extended) knot vector; inputs are assumed
        already clamped into [knots[order], knots[-order-1]].
        """
        a = self
        basis, deriv = _bspline_basis_and_derivative(a.data, knots, order)

        def bwd(g):
            a._accumulate((g * deriv).sum(axis=-1))

        return Tensor._make(basis, (a,), bwd)


def _bspline_basis_and_derivative(x: np.ndarray, knots: np.ndarray, order: int):
    t = knots.astype(np.float32)
    xe = x[..., None]
    lo, hi = t[order], t[-order - 1]
    # Zeroth order: indicator of the knot span, right-closed at the domain edge.
    b = ((xe >= t[:-1]) & (xe < t[1:])).astype(np.float32)
    at_hi = x >= hi
    if at_hi.any():
        last = len(t) - order - 2
        b[at_hi, :] = 0.0
        b[at_hi, last] = 1.0
    prev = None
    for p in range(1, order + 1):
        prev = b
        left_den = t[p:-1] - t[:-p - 1]
        right_den = t[p + 1:] - t[1:-p]
        left = (xe - t[: -p - 1]) / left_den * b[..., :-1]
        right = (t[p + 1:] - xe) / right_den * b[..., 1:]
        b = left + right
    # Derivative of the order-p basis from the order-(p-1) bases.
    p = order
    left_den = t[p:-1] - t[:-p - 1]
    right_den = t[p + 1:] - t[1:-p]
    deriv = p * (prev[..., :-1] / left_den - prev[..., 1:] / right_den)
    return b, deriv


def concat(tensors, axis: int = -1) -> Tensor:
    datas = [t.data for t in tensors]
    out = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, start, stop in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                sl = [slice(None)] * g.ndim
                sl[axis] = slice(start, stop)
                t._accumulate(g[tuple(sl)])

    return Tensor._make(out, tuple(tensors), bwd)
