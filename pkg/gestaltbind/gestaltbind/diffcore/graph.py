"""
Define-then-run computation graphs over float64 numpy arrays.

Graphs are built once from leaves (Variable / Constant) and ops, then evaluated with
`forward(root)` as often as leaf values change. `backward(root)` walks the cached
topological order in reverse and returns d(root)/d(leaf) for the requested leaves.

Example usage:

    x = Variable(3.0, name="x")
    y = x * x
    forward(y)          # -> 9.0
    backward(y)[x]      # -> 6.0

A graph instance is single-writer: build/forward/backward must not interleave across
threads. Distinct graphs share no mutable state.
"""

import itertools
import logging

import numpy as np

from ..errors import GraphStateError, NonFiniteError, ShapeMismatchError

logger = logging.getLogger(__name__)


OP_MAPPING = {}


def register_op(target_class):
    """Class decorator that adds an op to the registry under its `name`."""
    assert target_class.name is not None, "ops must declare a name"
    OP_MAPPING[target_class.name] = target_class()
    return target_class


def get_op(op_name):
    return OP_MAPPING[op_name]


class Op:
    """
    Base class for graph primitives.

    Subclasses implement `forward(*values, **attrs)` and
    `backward(grad, out, *values, **attrs)`, the latter returning one gradient per parent
    (None for parents that carry no gradient). `check(node)` raises ShapeMismatchError when
    the parents of `node` cannot be combined.
    """

    name = None

    def check(self, node):
        pass

    def forward(self, *values, **attrs):
        raise NotImplementedError

    def backward(self, grad, out, *values, **attrs):
        raise NotImplementedError


class Node:
    _ids = itertools.count()

    def __init__(self, op=None, parents=(), attrs=None, value=None, name=None, requires_grad=False):
        self.id = next(Node._ids)
        self.op = op
        self.parents = tuple(parents)
        self.attrs = attrs or {}
        self.requires_grad = requires_grad
        self.name = name or f"{op.name if op is not None else 'leaf'}#{self.id}"
        self.value = None if value is None else np.array(value, dtype=np.float64)
        self.grad = None if self.value is None else np.zeros_like(self.value)
        self._version = 0
        # filled by forward() on root nodes
        self._topo = None
        self._evaluated = None

    def __repr__(self):
        shape = None if self.value is None else self.value.shape
        return f"{self.name}{list(shape) if shape is not None else ''}"

    @property
    def is_leaf(self):
        return self.op is None

    @property
    def shape(self):
        return None if self.value is None else self.value.shape

    def assign(self, value):
        """Sets the value of a leaf. Shape changes are allowed only before the first assignment."""
        if not self.is_leaf:
            raise GraphStateError(f"cannot assign to non-leaf node {self.name}")
        value = np.array(value, dtype=np.float64)
        if self.value is not None and value.shape != self.value.shape:
            raise ShapeMismatchError(
                self.name, "assigned value", f"{self.value.shape} vs {value.shape}"
            )
        self.value = value
        self.grad = np.zeros_like(value)
        self._version += 1
        return self

    def zero_grad(self):
        if self.value is not None:
            self.grad = np.zeros_like(self.value)

    def __add__(self, other):
        return apply("add", self, other)

    def __radd__(self, other):
        return apply("add", other, self)

    def __sub__(self, other):
        return apply("sub", self, other)

    def __rsub__(self, other):
        return apply("sub", other, self)

    def __mul__(self, other):
        return apply("mul", self, other)

    def __rmul__(self, other):
        return apply("mul", other, self)

    def __truediv__(self, other):
        return apply("div", self, other)

    def __rtruediv__(self, other):
        return apply("div", other, self)

    def __neg__(self):
        return apply("neg", self)

    def __pow__(self, exponent):
        assert isinstance(exponent, (int, float)), "only constant exponents are supported"
        return apply("pow", self, exponent=float(exponent))

    def __matmul__(self, other):
        return apply("matmul", self, other)

    def __rmatmul__(self, other):
        return apply("matmul", other, self)

    def __getitem__(self, index):
        return apply("getitem", self, index=index)

    @property
    def T(self):
        return apply("transpose", self)


class Variable(Node):
    """A leaf whose gradient is tracked (trainable weight or parametric bias)."""

    def __init__(self, value, name=None):
        super().__init__(value=value, name=name, requires_grad=True)


class Constant(Node):
    """A leaf that never receives a gradient (data, masks, fixed scales)."""

    def __init__(self, value, name=None):
        super().__init__(value=value, name=name, requires_grad=False)


def as_node(value):
    if isinstance(value, Node):
        return value
    return Constant(value)


def apply(op_name, *parents, **attrs):
    """Creates a new graph node applying a registered op to `parents`."""
    op = get_op(op_name)
    parents = [as_node(p) for p in parents]
    return Node(op=op, parents=parents, attrs=attrs)


def _topological_order(root):
    order = []
    visited = set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if node.id in visited:
            continue
        visited.add(node.id)
        stack.append((node, True))
        for parent in reversed(node.parents):
            if parent.id not in visited:
                stack.append((parent, False))
    return order


def leaves(root):
    if root._topo is None:
        root._topo = _topological_order(root)
    return [node for node in root._topo if node.is_leaf]


def forward(root):
    """
    Evaluates every node reachable from `root` using the current leaf values and caches the
    intermediate values for a subsequent backward pass.

    Returns:
        np.ndarray: the value at the root
    """
    if root._topo is None:
        root._topo = _topological_order(root)
    for node in root._topo:
        if node.is_leaf:
            if node.value is None:
                raise GraphStateError(f"leaf {node.name} has no value assigned")
            continue
        node.op.check(node)
        node.value = np.asarray(
            node.op.forward(*[p.value for p in node.parents], **node.attrs), dtype=np.float64
        )
        node.grad = np.zeros_like(node.value)
    root._evaluated = {node.id: node._version for node in root._topo if node.is_leaf}
    return root.value


def backward(root, wrt=None):
    """
    Reverse-mode differentiation of `root` with respect to leaves.

    Args:
        root (Node): node evaluated by `forward`; non-scalar roots are seeded with ones
        wrt (list of Node): leaves to differentiate against. Defaults to every Variable
            reachable from root.

    Returns:
        dict: maps each requested leaf to d(root)/d(leaf), with the leaf's shape. The same
            arrays are stored on `leaf.grad`; non-requested leaves are left untouched.
    """
    if root._evaluated is None:
        raise GraphStateError(f"backward called on {root.name} before forward")
    for node in root._topo:
        if node.is_leaf and root._evaluated.get(node.id) != node._version:
            raise GraphStateError(
                f"leaf {node.name} changed since the last forward pass of {root.name}"
            )

    if wrt is None:
        wrt = [node for node in root._topo if node.is_leaf and node.requires_grad]
    requested = {leaf.id for leaf in wrt}

    # only propagate through nodes that lead to a requested leaf
    needs_grad = {}
    for node in root._topo:
        if node.is_leaf:
            needs_grad[node.id] = node.id in requested
        else:
            needs_grad[node.id] = any(needs_grad[p.id] for p in node.parents)

    grads = {root.id: np.ones_like(root.value)}
    for node in reversed(root._topo):
        grad = grads.pop(node.id, None)
        if grad is None:
            continue
        if not np.all(np.isfinite(grad)):
            raise NonFiniteError(node.name, "gradient")
        if node.is_leaf:
            if node.id in requested:
                grads[("leaf", node.id)] = grad
            continue
        parent_grads = node.op.backward(
            grad, node.value, *[p.value for p in node.parents], **node.attrs
        )
        for parent, parent_grad in zip(node.parents, parent_grads):
            if parent_grad is None or not needs_grad[parent.id]:
                continue
            if parent.id in grads:
                grads[parent.id] = grads[parent.id] + parent_grad
            else:
                grads[parent.id] = parent_grad

    result = {}
    for leaf in wrt:
        grad = grads.get(("leaf", leaf.id))
        if grad is None:
            grad = np.zeros_like(leaf.value)
        leaf.grad = np.array(grad, dtype=np.float64).reshape(leaf.value.shape)
        result[leaf] = leaf.grad
    return result
