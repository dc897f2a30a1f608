"""Reverse-mode automatic differentiation over numpy arrays.

A `Tensor` wraps a float64 ndarray and records the operations that
produced it. Calling `backward()` on a scalar result walks the recorded
graph in reverse topological order and accumulates gradients into every
tensor created with `requires_grad=True`.

Design constraints that matter here:
  - all arithmetic supports numpy broadcasting; gradients are reduced
    back to each operand's shape (`_unbroadcast`);
  - softmax / log-softmax subtract a detached max, so they stay exact
    while avoiding overflow;
  - everything is float64 so analytic gradients survive the central
    finite-difference checks the test suite runs against them.
"""

from __future__ import annotations

import numpy as np

Array = np.ndarray


def _unbroadcast(grad: Array, shape: tuple[int, ...]) -> Array:
    """Sum `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == shape:
        return grad
    # Remove leading axes that broadcasting added.
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    # Sum over axes that were stretched from size 1.
    for axis, dim in enumerate(shape):
        if dim == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


class Tensor:
    """A node in the autodiff graph."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: Array | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- graph construction helpers ------------------------------------

    @staticmethod
    def _lift(x) -> "Tensor":
        return x if isinstance(x, Tensor) else Tensor(x)

    @staticmethod
    def _make(data: Array, parents: tuple["Tensor", ...], backward) -> "Tensor":
        out = Tensor(data)
        if any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._backward = backward
        return out

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    def detach(self) -> "Tensor":
        return Tensor(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    # -- arithmetic -----------------------------------------------------

    def __add__(self, other) -> "Tensor":
        other = Tensor._lift(other)
        out_data = self.data + other.data

        def backward(grad: Array):
            return (
                _unbroadcast(grad, self.shape),
                _unbroadcast(grad, other.shape),
            )

        return Tensor._make(out_data, (self, other), backward)

    __radd__ = __add__

    def __neg__(self) -> "Tensor":
        def backward(grad: Array):
            return (-grad,)

        return Tensor._make(-self.data, (self,), backward)

    def __sub__(self, other) -> "Tensor":
        other = Tensor._lift(other)
        out_data = self.data - other.data

        def backward(grad: Array):
            return (
                _unbroadcast(grad, self.shape),
                _unbroadcast(-grad, other.shape),
            )

        return Tensor._make(out_data, (self, other), backward)

    def __rsub__(self, other) -> "Tensor":
        return Tensor._lift(other) - self

    def __mul__(self, other) -> "Tensor":
        other = Tensor._lift(other)
        out_data = self.data * other.data

        def backward(grad: Array):
            return (
                _unbroadcast(grad * other.data, self.shape),
                _unbroadcast(grad * self.data, other.shape),
            )

        return Tensor._make(out_data, (self, other), backward)

    __rmul__ = __mul__

    def __truediv__(self, other) -> "Tensor":
        other = Tensor._lift(other)
        out_data = self.data / other.data

        def backward(grad: Array):
            return (
                _unbroadcast(grad / other.data, self.shape),
                _unbroadcast(-grad * self.data / (other.data**2), other.shape),
            )

        return Tensor._make(out_data, (self, other), backward)

    def __rtruediv__(self, other) -> "Tensor":
        return Tensor._lift(other) / self

    def __pow__(self, exponent) -> "Tensor":
        if not isinstance(exponent, (int, float)):
            raise TypeError("only scalar exponents are supported")
        # np.power with a scalar float64 exponent has no fast path; the
        # common small powers are worth special-casing.
        if exponent == 2:
            out_data = np.square(self.data)
        elif exponent == 3:
            out_data = self.data * self.data * self.data
        else:
            out_data = self.data**exponent

        def backward(grad: Array):
            if exponent == 2:
                return (grad * 2.0 * self.data,)
            if exponent == 3:
                return (grad * 3.0 * np.square(self.data),)
            return (grad * exponent * self.data ** (exponent - 1),)

        return Tensor._make(out_data, (self,), backward)

    def __matmul__(self, other) -> "Tensor":
        other = Tensor._lift(other)
        out_data = np.matmul(self.data, other.data)

        def backward(grad: Array):
            a, b = self.data, other.data
            grad_a = np.matmul(grad, np.swapaxes(b, -1, -2))
            grad_b = np.matmul(np.swapaxes(a, -1, -2), grad)
            return (
                _unbroadcast(grad_a, self.shape),
                _unbroadcast(grad_b, other.shape),
            )

        return Tensor._make(out_data, (self, other), backward)

    # -- elementwise functions -------------------------------------------

    def exp(self) -> "Tensor":
        out_data = np.exp(self.data)

        def backward(grad: Array):
            return (grad * out_data,)

        return Tensor._make(out_data, (self,), backward)

    def log(self, eps: float = 1e-12) -> "Tensor":
        # Clamp keeps log finite if a caller feeds in an exact zero.
        clamped = np.maximum(self.data, eps)
        out_data = np.log(clamped)

        def backward(grad: Array):
            return (grad / clamped,)

        return Tensor._make(out_data, (self,), backward)

    def sqrt(self) -> "Tensor":
        out_data = np.sqrt(self.data)

        def backward(grad: Array):
            return (grad * 0.5 / out_data,)

        return Tensor._make(out_data, (self,), backward)

    def tanh(self) -> "Tensor":
        out_data = np.tanh(self.data)

        def backward(grad: Array):
            return (grad * (1.0 - out_data**2),)

        return Tensor._make(out_data, (self,), backward)

    # -- reductions -------------------------------------------------------

    def sum(self, axis=None, keepdims: bool = False) -> "Tensor":
        out_data = self.data.sum(axis=axis, keepdims=keepdims)
        in_shape = self.shape

        def backward(grad: Array):
            g = grad
            if axis is not None and not keepdims:
                g = np.expand_dims(g, axis)
            return (np.broadcast_to(g, in_shape).copy(),)

        return Tensor._make(out_data, (self,), backward)

    def mean(self, axis=None, keepdims: bool = False) -> "Tensor":
        count = self.data.size if axis is None else self.data.shape[axis]
        return self.sum(axis=axis, keepdims=keepdims) * (1.0 / count)

    # -- shape manipulation ------------------------------------------------

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        in_shape = self.shape
        out_data = self.data.reshape(shape)

        def backward(grad: Array):
            return (grad.reshape(in_shape),)

        return Tensor._make(out_data, (self,), backward)

    def transpose(self, axes: tuple[int, ...]) -> "Tensor":
        out_data = self.data.transpose(axes)
        inverse = tuple(np.argsort(axes))

        def backward(grad: Array):
            return (grad.transpose(inverse),)

        return Tensor._make(out_data, (self,), backward)

    def __getitem__(self, idx) -> "Tensor":
        out_data = self.data[idx]
        in_shape = self.shape

        def backward(grad: Array):
            g = np.zeros(in_shape, dtype=np.float64)
            np.add.at(g, idx, grad)
            return (g,)

        return Tensor._make(out_data, (self,), backward)

    # -- backward pass -----------------------------------------------------

    def backward(self, grad: Array | None = None) -> None:
        """Accumulate gradients of this tensor into the graph's leaves."""
        if not self.requires_grad:
            raise RuntimeError("backward() on a tensor that requires no grad")
        if grad is None:
            if self.data.size != 1:
                raise RuntimeError("backward() without a gradient needs a scalar")
            grad = np.ones_like(self.data)

        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for parent in node._parents:
                if parent.requires_grad and id(parent) not in visited:
                    stack.append((parent, False))

        grads: dict[int, Array] = {id(self): np.asarray(grad, dtype=np.float64)}
        for node in reversed(topo):
            node_grad = grads.pop(id(node), None)
            if node_grad is None:
                continue
            if node._backward is None:
                # Leaf: expose the accumulated gradient.
                node.grad = node_grad if node.grad is None else node.grad + node_grad
                continue
            parent_grads = node._backward(node_grad)
            for parent, pgrad in zip(node._parents, parent_grads):
                if not parent.requires_grad:
                    continue
                if id(parent) in grads:
                    grads[id(parent)] = grads[id(parent)] + pgrad
                else:
                    grads[id(parent)] = pgrad


# -- composite operations ----------------------------------------------------


def concat(tensors: list[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along `axis`; gradient splits back to the parents."""
    parents = tuple(Tensor._lift(t) for t in tensors)
    out_data = np.concatenate([t.data for t in parents], axis=axis)
    sizes = [t.data.shape[axis] for t in parents]
    offsets = np.cumsum([0] + sizes)

    def backward(grad: Array):
        pieces = []
        for i in range(len(parents)):
            index = [slice(None)] * grad.ndim
            index[axis] = slice(offsets[i], offsets[i + 1])
            pieces.append(grad[tuple(index)])
        return tuple(pieces)

    return Tensor._make(out_data, parents, backward)


def softmax(x: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax, fused with its analytic Jacobian."""
    shifted = x.data - np.max(x.data, axis=axis, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(grad: Array):
        inner = (grad * s).sum(axis=axis, keepdims=True)
        return (s * (grad - inner),)

    return Tensor._make(s, (x,), backward)

def log_softmax(x: Tensor, axis: int = -1) -> Tensor:
    shift = Tensor(np.max(x.data, axis=axis, keepdims=True))
    shifted = x - shift
    lse = shifted.exp().sum(axis=axis, keepdims=True).log() + shift
    return x - lse


def gelu(x: Tensor) -> Tensor:
    """Smooth tanh-form GELU; keeps finite-difference checks well behaved.

    Implemented as one fused primitive (it sits on the hot path of every
    feed-forward block) with the analytic derivative spelled out.
    """
    c = np.sqrt(2.0 / np.pi)
    d = x.data
    inner = c * (d + 0.044715 * d * d * d)
    t = np.tanh(inner)
    out_data = 0.5 * d * (1.0 + t)

    def backward(grad: Array):
        factor = 1.0 - t * t
        factor *= c * (1.0 + 0.134145 * d * d)  # sech^2 * d(inner)/dx
        factor *= d
        factor += 1.0 + t
        factor *= 0.5
        return (grad * factor,)

    return Tensor._make(out_data, (x,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift.

    Fused primitive: it runs twice per encoder layer, so the standard
    closed-form backward is used instead of composing a dozen ops.
    """
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = np.square(centered).mean(axis=-1, keepdims=True)
    inv_sigma = 1.0 / np.sqrt(var + eps)
    x_hat = centered * inv_sigma
    out_data = x_hat * gamma.data + beta.data

    def backward(grad: Array):
        lead_axes = tuple(range(grad.ndim - 1))
        grad_gamma = _unbroadcast((grad * x_hat).sum(axis=lead_axes), gamma.shape)
        grad_beta = _unbroadcast(grad.sum(axis=lead_axes), beta.shape)
        g = grad * gamma.data
        g_mean = g.mean(axis=-1, keepdims=True)
        gx_mean = (g * x_hat).mean(axis=-1, keepdims=True)
        grad_x = inv_sigma * (g - g_mean - x_hat * gx_mean)
        return (grad_x, grad_gamma, grad_beta)

    return Tensor._make(out_data, (x, gamma, beta), backward)


def linear(x: Tensor, weight: Tensor, bias: Tensor) -> Tensor:
    """x @ weight + bias as one node; `weight` is 2D, bias broadcasts
    over the leading axes of `x`."""
    in_dim, out_dim = weight.shape
    out_data = np.matmul(x.data, weight.data) + bias.data

    def backward(grad: Array):
        grad_x = np.matmul(grad, weight.data.T)
        # One big GEMM instead of a stack of small batched ones.
        grad_w = x.data.reshape(-1, in_dim).T @ grad.reshape(-1, out_dim)
        grad_b = _unbroadcast(grad, bias.shape)
        return (grad_x, grad_w, grad_b)

    return Tensor._make(out_data, (x, weight, bias), backward)
