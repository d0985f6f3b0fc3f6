"""
Reverse-mode differentiation over a fixed set of tensor operations.

Every op builds a Node holding its value, its parents and a closure mapping the
upstream gradient to one gradient per parent. Matrix ops act on the last two
axes (rows x channels) and broadcast over any leading batch axis, so a batch
graph is a stack of per-window graphs.
"""

import functools
import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse

from ..utils.validators import PERIOD, ConfigurationError, ShapeError, UsageError

logger = logging.getLogger(__name__)

LEAF_PARAM = "leaf-param"
LEAF_CONST = "leaf-const"


class Node:
    """A value in the computation graph."""

    __slots__ = ("value", "op", "parents", "grad", "name", "requires_grad", "_backward", "cache")

    def __init__(self, value, op, parents=(), backward=None, name=None):
        self.value = value
        self.op = op
        self.parents = tuple(parents)
        self.grad = None
        self.name = name
        self.requires_grad = op == LEAF_PARAM or any(p.requires_grad for p in self.parents)
        self._backward = backward
        self.cache = None

    @property
    def shape(self):
        return self.value.shape

    def __repr__(self):
        label = f" '{self.name}'" if self.name else ""
        return f"Node({self.op}{label}, shape={self.value.shape})"


def param(value, name):
    """Trainable leaf. The array is owned by the node and updated in place."""
    return Node(np.array(value, dtype=np.float64), LEAF_PARAM, name=name)


def const(value):
    """Non-trainable leaf."""
    return Node(np.asarray(value, dtype=np.float64), LEAF_CONST)


def as_node(x):
    return x if isinstance(x, Node) else const(x)


def _unbroadcast(grad, shape):
    """Sum a broadcast gradient back down to ``shape``."""
    while grad.ndim > len(shape):
        grad = grad.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and grad.shape[axis] != 1:
            grad = grad.sum(axis=axis, keepdims=True)
    return grad


def _broadcast_shape(a, b, op):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} do not broadcast") from None


def matmul(a, b):
    """Matrix product over the last two axes, batch axes broadcast."""
    a, b = as_node(a), as_node(b)
    if a.value.ndim < 2 or b.value.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError(f"matmul: batch shapes {a.shape} and {b.shape} do not broadcast") from None

    def backward(g):
        ga = _unbroadcast(g @ np.swapaxes(b.value, -1, -2), a.shape)
        gb = _unbroadcast(np.swapaxes(a.value, -1, -2) @ g, b.shape)
        return ga, gb

    return Node(a.value @ b.value, "matmul", (a, b), backward)


def add(a, b):
    a, b = as_node(a), as_node(b)
    _broadcast_shape(a, b, "add")

    def backward(g):
        return _unbroadcast(g, a.shape), _unbroadcast(g, b.shape)

    return Node(a.value + b.value, "add", (a, b), backward)


def elementwise_mul(a, b):
    a, b = as_node(a), as_node(b)
    _broadcast_shape(a, b, "elementwise-mul")

    def backward(g):
        return _unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)

    return Node(a.value * b.value, "elementwise-mul", (a, b), backward)


def scale_add(a, s1, b, s2):
    """s1 * a + s2 * b for scalar s1, s2. A zero coefficient sends no gradient."""
    a, b = as_node(a), as_node(b)
    _broadcast_shape(a, b, "scale-add")
    s1, s2 = float(s1), float(s2)

    def backward(g):
        ga = _unbroadcast(s1 * g, a.shape) if s1 != 0.0 else None
        gb = _unbroadcast(s2 * g, b.shape) if s2 != 0.0 else None
        return ga, gb

    return Node(s1 * a.value + s2 * b.value, "scale-add", (a, b), backward)


def affine(x, W, b=None):
    """
    Row-space linear map applied to every channel.

    Shared weights: W (M, N), b (M,) -> out[..., :, j] = W @ x[..., :, j] + b.
    Per-channel weights: W (c, M, N), b (c, M).

    Args:
        x: Node (..., N, c)
        W: Weight node
        b: Optional bias node
    """
    x, W = as_node(x), as_node(W)
    b = None if b is None else as_node(b)
    n, c = x.shape[-2], x.shape[-1]

    if W.value.ndim == 2:
        if W.shape[1] != n:
            raise ShapeError(f"affine: weight {W.shape} does not accept {n} input rows")
        m = W.shape[0]
        value = W.value @ x.value
    elif W.value.ndim == 3:
        if W.shape[0] != c or W.shape[2] != n:
            raise ShapeError(f"affine: per-channel weight {W.shape} does not fit input {x.shape}")
        m = W.shape[1]
        value = np.einsum("cmn,...nc->...mc", W.value, x.value)
    else:
        raise ShapeError(f"affine: weight must be 2-D or 3-D, got {W.shape}")

    if b is not None:
        expected = (m,) if W.value.ndim == 2 else (c, m)
        if b.shape != expected:
            raise ShapeError(f"affine: bias {b.shape}, expected {expected}")
        value = value + (b.value[:, None] if W.value.ndim == 2 else b.value.T)

    def backward(g):
        if W.value.ndim == 2:
            gx = np.swapaxes(W.value, 0, 1) @ g
            gW = _unbroadcast(g @ np.swapaxes(x.value, -1, -2), W.shape)
            gb = g.reshape(-1, m, c).sum(axis=(0, 2)) if b is not None else None
        else:
            gx = np.einsum("cmn,...mc->...nc", W.value, g)
            gW = np.einsum("...mc,...nc->cmn", g, x.value)
            gb = g.reshape(-1, m, c).sum(axis=0).T if b is not None else None
        return (gx, gW) if b is None else (gx, gW, gb)

    parents = (x, W) if b is None else (x, W, b)
    return Node(value, "affine", parents, backward)


@functools.lru_cache(maxsize=32)
def moving_average_operator(length, kernel):
    """
    Sparse (length x length) averaging matrix with edge-replicated padding.

    Row i averages rows clip(i - p .. i + p) with p = (kernel - 1) / 2.
    """
    if kernel < 1 or kernel % 2 == 0:
        raise ConfigurationError(f"moving-average kernel must be odd and positive, got {kernel}")
    pad = (kernel - 1) // 2
    rows = np.repeat(np.arange(length), kernel)
    offsets = np.tile(np.arange(-pad, pad + 1), length)
    cols = np.clip(rows + offsets, 0, length - 1)
    data = np.full(rows.shape, 1.0 / kernel)
    # Duplicate (row, col) pairs at the edges are summed
    return sparse.coo_matrix((data, (rows, cols)), shape=(length, length)).tocsr()


def _apply_rows(op, x):
    # Apply a (R x R) operator along axis -2 of (..., R, c)
    moved = np.moveaxis(x, -2, 0)
    flat = moved.reshape(moved.shape[0], -1)
    out = np.asarray(op @ flat).reshape(moved.shape)
    return np.moveaxis(out, 0, -2)


def moving_average(x, kernel=25):
    """Centered moving average over rows; output length equals input length."""
    x = as_node(x)
    if x.value.ndim < 2:
        raise ShapeError(f"moving-average: expected (..., rows, channels), got {x.shape}")
    A = moving_average_operator(x.shape[-2], kernel)

    def backward(g):
        return (_apply_rows(A.T, g),)

    return Node(_apply_rows(A, x.value), "moving-average", (x,), backward)


def maxpool_time(y, window=PERIOD):
    """
    Non-overlapping max over blocks of ``window`` rows (kernel = stride = window).

    The earliest index wins ties; argmaxes are kept on ``node.cache``.
    """
    y = as_node(y)
    rows, c = y.shape[-2], y.shape[-1]
    if rows % window != 0:
        raise ShapeError(f"maxpool-time: {rows} rows is not a multiple of {window}")
    lead = y.shape[:-2]
    blocks = y.value.reshape(lead + (rows // window, window, c))
    argmax = np.argmax(blocks, axis=-2)
    value = np.take_along_axis(blocks, argmax[..., None, :], axis=-2)[..., 0, :]

    def backward(g):
        gy = np.zeros(blocks.shape)
        np.put_along_axis(gy, argmax[..., None, :], g[..., None, :], axis=-2)
        return (gy.reshape(y.shape),)

    node = Node(value, "maxpool-time", (y,), backward)
    node.cache = argmax
    return node


def mse(a, b):
    """Mean squared error over all entries; scalar node."""
    a, b = as_node(a), as_node(b)
    if a.shape != b.shape:
        raise ShapeError(f"mse: shapes {a.shape} and {b.shape} differ")
    diff = a.value - b.value
    count = diff.size

    def backward(g):
        ga = (2.0 / count) * g * diff
        return ga, -ga

    return Node(np.asarray(np.mean(diff * diff)), "mse", (a, b), backward)


def tanh(x):
    x = as_node(x)
    value = np.tanh(x.value)

    def backward(g):
        return (g * (1.0 - value * value),)

    return Node(value, "tanh", (x,), backward)


def clamp_min(x, floor):
    """max(x, floor); entries at or below the floor get zero gradient."""
    x = as_node(x)
    passed = x.value > floor

    def backward(g):
        return (g * passed,)

    return Node(np.maximum(x.value, floor), "clamp-min", (x,), backward)


def gather_rows(x, index):
    """
    Select rows along axis -2.

    Args:
        x: Node (T, c) or (B, T, c)
        index: Integer array (R,) or (B, R)

    Returns:
        Node (R, c), (B, R, c) as the shapes combine
    """
    x = as_node(x)
    index = np.asarray(index, dtype=np.int64)
    if index.size and (index.min() < 0 or index.max() >= x.shape[-2]):
        raise ShapeError(f"gather-rows: index out of range for {x.shape[-2]} rows")

    if x.value.ndim == 2:
        where = (index,)
    elif index.ndim == 1:
        where = (slice(None), index)
    else:
        if index.shape[0] != x.shape[0]:
            raise ShapeError(f"gather-rows: batch {index.shape[0]} vs {x.shape[0]}")
        where = (np.arange(index.shape[0])[:, None], index)

    def backward(g):
        gx = np.zeros(x.shape)
        np.add.at(gx, where, g)
        return (gx,)

    return Node(x.value[where], "gather-rows", (x,), backward)


def _topological_order(root):
    order, visited = [], set()
    stack = [(root, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            order.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node.parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    return order


def backward(loss):
    """
    Reverse-mode pass from a scalar loss.

    Gradient accumulators of every node in the graph are zeroed first, then each
    node is visited once in reverse topological order.

    Args:
        loss: Scalar Node

    Returns:
        Dict mapping parameter name -> gradient array, in graph order
    """
    if loss.value.size != 1:
        raise UsageError(f"backward needs a scalar loss, got shape {loss.shape}")

    order = _topological_order(loss)
    for node in order:
        node.grad = np.zeros(node.value.shape)
    loss.grad = np.ones(loss.value.shape)

    for node in reversed(order):
        if node._backward is None or not node.requires_grad:
            continue
        for parent, g in zip(node.parents, node._backward(node.grad)):
            if g is not None and parent.requires_grad:
                parent.grad += g

    return {node.name: node.grad for node in order if node.op == LEAF_PARAM}


def maxpool_nodes(root):
    return [n for n in _topological_order(root) if n.op == "maxpool-time"]


@dataclass
class GradCheckReport:
    """Outcome of a finite-difference comparison."""

    max_rel_error: float = 0.0
    n_checked: int = 0
    failures: list = field(default_factory=list)
    excluded: list = field(default_factory=list)
    tol: float = 1e-4

    @property
    def passed(self):
        return not self.failures

    def to_dict(self):
        return {
            "passed": self.passed,
            "max_rel_error": self.max_rel_error,
            "n_checked": self.n_checked,
            "tol": self.tol,
            "failures": [list(f) for f in self.failures],
            "excluded": [list(e) for e in self.excluded],
        }


def finite_diff_check(build, params, h=1e-5, tol=1e-4, abs_floor=1e-6,
                      coords_per_param=None, seed=0):
    """
    Compare analytic gradients with central differences (f(p+h) - f(p-h)) / 2h.

    Coordinates whose perturbation flips any maxpool argmax lie within h of a
    tie boundary; they are excluded and listed separately.

    Args:
        build: Zero-argument callable returning the scalar loss Node
        params: Sequence of parameter Nodes read by ``build``
        h: Step size
        tol: Relative tolerance
        abs_floor: Denominator floor for near-zero gradients
        coords_per_param: Check a seeded random subset of this many coordinates
            per parameter (None checks all)
        seed: Seed for the coordinate subset

    Returns:
        GradCheckReport; failures are (name, index, analytic, numeric, rel_error)
    """
    report = GradCheckReport(tol=tol)
    if not params:
        return report

    loss = build()
    grads = backward(loss)
    base_argmax = [n.cache.copy() for n in maxpool_nodes(loss)]
    rng = np.random.default_rng(seed)

    def evaluate_perturbed():
        node = build()
        flips = any(
            not np.array_equal(n.cache, ref) for n, ref in zip(maxpool_nodes(node), base_argmax)
        )
        return float(node.value), flips

    for p in params:
        analytic = grads.get(p.name, np.zeros(p.shape))
        coords = np.arange(p.value.size)
        if coords_per_param is not None and coords.size > coords_per_param:
            coords = np.sort(rng.choice(coords, size=coords_per_param, replace=False))

        flat = p.value.reshape(-1)
        for k in coords:
            original = flat[k]
            flat[k] = original + h
            f_plus, flip_plus = evaluate_perturbed()
            flat[k] = original - h
            f_minus, flip_minus = evaluate_perturbed()
            flat[k] = original

            index = tuple(int(i) for i in np.unravel_index(k, p.shape))
            if flip_plus or flip_minus:
                report.excluded.append((p.name, index))
                continue

            numeric = (f_plus - f_minus) / (2 * h)
            a = float(analytic.reshape(-1)[k])
            rel = abs(a - numeric) / max(abs(a), abs(numeric), abs_floor)
            report.n_checked += 1
            report.max_rel_error = max(report.max_rel_error, rel)
            if rel >= tol:
                report.failures.append((p.name, index, a, numeric, rel))

    logger.debug(
        "Gradient check: %d coordinates, max rel error %.3g, %d excluded",
        report.n_checked, report.max_rel_error, len(report.excluded)
    )
    return report
