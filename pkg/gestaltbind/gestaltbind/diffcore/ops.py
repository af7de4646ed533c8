"""
Primitive ops for the computation graph, registered in OP_MAPPING by name, plus the
functional helpers (`tanh(x)`, `affine(x, W, b)`, ...) used to build graphs.

The set is what the perception pipeline and the VAEs need: affine maps, tanh / logistic /
softplus, elementwise exp / log / sqrt / sin / cos, sums, squared-error and binary
cross-entropy reductions, Gaussian densities, matrix products and Euclidean norms.
"""

import numpy as np
from scipy.special import expit

from ..errors import ShapeMismatchError
from .graph import Op, apply, register_op


def _unbroadcast(grad, shape):
    """Sums `grad` down to `shape`, undoing numpy broadcasting."""
    if grad.shape == tuple(shape):
        return grad
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad.reshape(shape)


class _Elementwise(Op):
    def check(self, node):
        a, b = node.parents
        try:
            np.broadcast_shapes(a.value.shape, b.value.shape)
        except ValueError:
            raise ShapeMismatchError(a.name, b.name, f"{a.value.shape} vs {b.value.shape}")


@register_op
class Add(_Elementwise):
    name = "add"

    def forward(self, a, b):
        return a + b

    def backward(self, grad, out, a, b):
        return _unbroadcast(grad, a.shape), _unbroadcast(grad, b.shape)


@register_op
class Sub(_Elementwise):
    name = "sub"

    def forward(self, a, b):
        return a - b

    def backward(self, grad, out, a, b):
        return _unbroadcast(grad, a.shape), _unbroadcast(-grad, b.shape)


@register_op
class Mul(_Elementwise):
    name = "mul"

    def forward(self, a, b):
        return a * b

    def backward(self, grad, out, a, b):
        return _unbroadcast(grad * b, a.shape), _unbroadcast(grad * a, b.shape)


@register_op
class Div(_Elementwise):
    name = "div"

    def forward(self, a, b):
        return a / b

    def backward(self, grad, out, a, b):
        return _unbroadcast(grad / b, a.shape), _unbroadcast(-grad * a / (b * b), b.shape)


@register_op
class Neg(Op):
    name = "neg"

    def forward(self, a):
        return -a

    def backward(self, grad, out, a):
        return (-grad,)


@register_op
class Pow(Op):
    name = "pow"

    def forward(self, a, exponent):
        return np.power(a, exponent)

    def backward(self, grad, out, a, exponent):
        return (grad * exponent * np.power(a, exponent - 1.0),)


@register_op
class MatMul(Op):
    """Matrix-matrix, matrix-vector, vector-matrix and vector-vector products."""

    name = "matmul"

    def check(self, node):
        a, b = node.parents
        if a.value.ndim not in (1, 2) or b.value.ndim not in (1, 2):
            raise ShapeMismatchError(a.name, b.name, "matmul needs 1D or 2D operands")
        if a.value.shape[-1] != b.value.shape[0]:
            raise ShapeMismatchError(a.name, b.name, f"{a.value.shape} @ {b.value.shape}")

    def forward(self, a, b):
        return a @ b

    def backward(self, grad, out, a, b):
        a2 = a if a.ndim == 2 else a[None, :]
        b2 = b if b.ndim == 2 else b[:, None]
        g2 = np.reshape(grad, (a2.shape[0], b2.shape[1]))
        return (g2 @ b2.T).reshape(a.shape), (a2.T @ g2).reshape(b.shape)


@register_op
class Affine(Op):
    """x @ W.T + b for a single input vector (n,) or a batch (B, n)."""

    name = "affine"

    def check(self, node):
        x, w, b = node.parents
        if w.value.ndim != 2 or x.value.shape[-1] != w.value.shape[1]:
            raise ShapeMismatchError(x.name, w.name, f"{x.value.shape} vs {w.value.shape}")
        if b.value.shape != (w.value.shape[0],):
            raise ShapeMismatchError(w.name, b.name, f"{w.value.shape} vs {b.value.shape}")

    def forward(self, x, w, b):
        return x @ w.T + b

    def backward(self, grad, out, x, w, b):
        if x.ndim == 1:
            return grad @ w, np.outer(grad, x), grad
        return grad @ w, grad.T @ x, grad.sum(axis=0)


@register_op
class Transpose(Op):
    name = "transpose"

    def forward(self, a):
        return a.T

    def backward(self, grad, out, a):
        return (grad.T,)


@register_op
class Reshape(Op):
    name = "reshape"

    def forward(self, a, shape):
        return np.reshape(a, shape)

    def backward(self, grad, out, a, shape):
        return (np.reshape(grad, a.shape),)


@register_op
class GetItem(Op):
    name = "getitem"

    def forward(self, a, index):
        return a[index]

    def backward(self, grad, out, a, index):
        full = np.zeros_like(a)
        np.add.at(full, index, grad)
        return (full,)


@register_op
class Concat(Op):
    name = "concat"

    def check(self, node):
        axis = node.attrs["axis"]
        first = node.parents[0]
        for other in node.parents[1:]:
            a_shape = np.delete(np.array(first.value.shape), axis)
            b_shape = np.delete(np.array(other.value.shape), axis)
            if first.value.ndim != other.value.ndim or not np.array_equal(a_shape, b_shape):
                raise ShapeMismatchError(
                    first.name, other.name, f"{first.value.shape} vs {other.value.shape}"
                )

    def forward(self, *values, axis):
        return np.concatenate(values, axis=axis)

    def backward(self, grad, out, *values, axis):
        sizes = np.cumsum([v.shape[axis] for v in values])[:-1]
        return tuple(np.split(grad, sizes, axis=axis))


@register_op
class Stack(Op):
    name = "stack"

    def check(self, node):
        first = node.parents[0]
        for other in node.parents[1:]:
            if other.value.shape != first.value.shape:
                raise ShapeMismatchError(
                    first.name, other.name, f"{first.value.shape} vs {other.value.shape}"
                )

    def forward(self, *values, axis):
        return np.stack(values, axis=axis)

    def backward(self, grad, out, *values, axis):
        return tuple(np.moveaxis(grad, axis, 0))


@register_op
class Sum(Op):
    name = "sum"

    def forward(self, a, axis=None):
        return np.sum(a, axis=axis)

    def backward(self, grad, out, a, axis=None):
        if axis is not None:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad, a.shape).copy(),)


@register_op
class Mean(Op):
    name = "mean"

    def forward(self, a, axis=None):
        return np.mean(a, axis=axis)

    def backward(self, grad, out, a, axis=None):
        count = a.size if axis is None else int(np.prod([a.shape[i] for i in np.atleast_1d(axis)]))
        if axis is not None:
            grad = np.expand_dims(grad, axis)
        return (np.broadcast_to(grad / count, a.shape).copy(),)


@register_op
class Exp(Op):
    name = "exp"

    def forward(self, a):
        return np.exp(a)

    def backward(self, grad, out, a):
        return (grad * out,)


@register_op
class Log(Op):
    name = "log"

    def forward(self, a):
        return np.log(a)

    def backward(self, grad, out, a):
        return (grad / a,)


@register_op
class Sqrt(Op):
    name = "sqrt"

    def forward(self, a):
        return np.sqrt(a)

    def backward(self, grad, out, a):
        return (grad * 0.5 / out,)


@register_op
class Square(Op):
    name = "square"

    def forward(self, a):
        return a * a

    def backward(self, grad, out, a):
        return (2.0 * a * grad,)


@register_op
class Sin(Op):
    name = "sin"

    def forward(self, a):
        return np.sin(a)

    def backward(self, grad, out, a):
        return (grad * np.cos(a),)


@register_op
class Cos(Op):
    name = "cos"

    def forward(self, a):
        return np.cos(a)

    def backward(self, grad, out, a):
        return (-grad * np.sin(a),)


@register_op
class Tanh(Op):
    name = "tanh"

    def forward(self, a):
        return np.tanh(a)

    def backward(self, grad, out, a):
        return (grad * (1.0 - out * out),)


@register_op
class Sigmoid(Op):
    name = "sigmoid"

    def forward(self, a):
        return expit(a)

    def backward(self, grad, out, a):
        return (grad * out * (1.0 - out),)


@register_op
class Softplus(Op):
    name = "softplus"

    def forward(self, a):
        return np.logaddexp(0.0, a)

    def backward(self, grad, out, a):
        return (grad * expit(a),)


@register_op
class Norm(Op):
    """Euclidean norm along the last axis. The gradient at the zero vector is taken as 0."""

    name = "norm"

    def forward(self, a):
        return np.sqrt(np.sum(a * a, axis=-1))

    def backward(self, grad, out, a):
        safe = np.where(out > 0.0, out, 1.0)
        scale = np.where(out > 0.0, grad / safe, 0.0)
        return (np.expand_dims(scale, -1) * a,)


class _Reduction(Op):
    def check(self, node):
        a, b = node.parents
        if a.value.shape != b.value.shape:
            raise ShapeMismatchError(a.name, b.name, f"{a.value.shape} vs {b.value.shape}")


@register_op
class SquaredError(_Reduction):
    """Sum of squared differences between a prediction and a target."""

    name = "squared_error"

    def forward(self, pred, target):
        diff = pred - target
        return np.sum(diff * diff)

    def backward(self, grad, out, pred, target):
        diff = 2.0 * (pred - target) * grad
        return diff, -diff


@register_op
class BinaryCrossEntropy(_Reduction):
    """
    Summed binary cross-entropy of sigmoid(logits) against a target, computed from logits
    as softplus(z) - t * z for numerical stability.
    """

    name = "bce_with_logits"

    def forward(self, logits, target):
        return np.sum(np.logaddexp(0.0, logits) - target * logits)

    def backward(self, grad, out, logits, target):
        return grad * (expit(logits) - target), -grad * logits


@register_op
class GaussianDensity(Op):
    """
    Isotropic Gaussian densities N(x; c_k, sigma * I) of inputs x (..., D) for every center
    c_k of `centers` (K, D). Output shape is (..., K).
    """

    name = "gaussian_density"

    def check(self, node):
        x, centers = node.parents
        if centers.value.ndim != 2 or x.value.shape[-1] != centers.value.shape[1]:
            raise ShapeMismatchError(
                x.name, centers.name, f"{x.value.shape} vs {centers.value.shape}"
            )

    def forward(self, x, centers, sigma):
        dims = centers.shape[1]
        diff = x[..., None, :] - centers
        sq = np.sum(diff * diff, axis=-1)
        return (2.0 * np.pi * sigma) ** (-dims / 2.0) * np.exp(-sq / (2.0 * sigma))

    def backward(self, grad, out, x, centers, sigma):
        diff = x[..., None, :] - centers
        weighted = (grad * out)[..., None] * diff / sigma
        grad_x = -np.sum(weighted, axis=-2)
        grad_c = np.sum(weighted.reshape(-1, *centers.shape), axis=0)
        return grad_x, grad_c


def add(a, b):
    return apply("add", a, b)


def matmul(a, b):
    return apply("matmul", a, b)


def affine(x, w, b):
    return apply("affine", x, w, b)


def transpose(a):
    return apply("transpose", a)


def reshape(a, shape):
    return apply("reshape", a, shape=tuple(shape))


def concat(nodes, axis=0):
    return apply("concat", *nodes, axis=axis)


def stack(nodes, axis=0):
    return apply("stack", *nodes, axis=axis)


def sum(a, axis=None):
    return apply("sum", a, axis=axis)


def mean(a, axis=None):
    return apply("mean", a, axis=axis)


def exp(a):
    return apply("exp", a)


def log(a):
    return apply("log", a)


def sqrt(a):
    return apply("sqrt", a)


def square(a):
    return apply("square", a)


def sin(a):
    return apply("sin", a)


def cos(a):
    return apply("cos", a)


def tanh(a):
    return apply("tanh", a)


def sigmoid(a):
    return apply("sigmoid", a)


def softplus(a):
    return apply("softplus", a)


def norm(a):
    return apply("norm", a)


def squared_error(pred, target):
    return apply("squared_error", pred, target)


def bce_with_logits(logits, target):
    return apply("bce_with_logits", logits, target)


def gaussian_density(x, centers, sigma):
    return apply("gaussian_density", x, centers, sigma=float(sigma))


ACTIVATIONS = {
    None: lambda x: x,
    "linear": lambda x: x,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "softplus": softplus,
}
