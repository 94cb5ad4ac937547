"""Reverse-mode automatic differentiation over 2-D float64 numpy arrays.

The engine is deliberately small: a ``Tape`` records a fixed set of primitive
operations (dense linear algebra, the activations the denoiser uses, and the
reductions the constraint losses need) and replays them backwards to produce
vector-Jacobian products. Every array is a C-contiguous float64 matrix; all
computation is deterministic, so repeated runs are bit-identical.

Subgradient conventions, frozen by the test-suite: ``relu'(0) = 0``,
``d|x|/dx = 0`` at ``x = 0``, and ``d sqrt(x)/dx := 0`` at ``x = 0``.
"""

from __future__ import annotations

from typing import Callable, Sequence

import numpy as np

from .errors import ShapeError, UsageError

Array = np.ndarray


def as_matrix(value, name: str = "value") -> Array:
    """Coerce to a 2-D C-contiguous float64 array, or raise ShapeError."""
    arr = np.ascontiguousarray(value, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise ShapeError(f"{name}: expected a 2-D matrix, got ndim={arr.ndim}")
    return arr


def stable_sigmoid(x: Array) -> Array:
    """Overflow-free logistic function, used by swish on and off the tape."""
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


class Node:
    """A value recorded on a tape together with its backward edges."""

    __slots__ = ("value", "tape", "requires_grad", "_edges")

    def __init__(self, value: Array, tape: "Tape", requires_grad: bool,
                 edges: tuple = ()):
        self.value = value
        self.tape = tape
        self.requires_grad = requires_grad
        self._edges = edges

    @property
    def shape(self) -> tuple[int, int]:
        return self.value.shape


class Gradients:
    """Read-only view of the adjoints produced by one backward pass."""

    def __init__(self, tape: "Tape", adjoints: dict):
        self._tape = tape
        self._adjoints = adjoints

    def of(self, node: Node) -> Array:
        if node.tape is not self._tape:
            raise UsageError("gradient requested for a node from another tape")
        got = self._adjoints.get(id(node))
        if got is None:
            return np.zeros_like(node.value)
        return got


class Tape:
    """Records primitive operations; consumed by a single backward pass."""

    def __init__(self):
        self._nodes: list[Node] = []
        self._consumed = False

    # -- node constructors ------------------------------------------------

    def leaf(self, value, requires_grad: bool = True, name: str = "leaf") -> Node:
        node = Node(as_matrix(value, name), self, requires_grad)
        self._nodes.append(node)
        return node

    def constant(self, value, name: str = "constant") -> Node:
        return self.leaf(value, requires_grad=False, name=name)

    def _record(self, value: Array, edges: Sequence[tuple]) -> Node:
        kept = tuple((p, vjp) for p, vjp in edges if p.requires_grad)
        node = Node(value, self, bool(kept), kept)
        self._nodes.append(node)
        return node

    # -- backward ----------------------------------------------------------

    def backward(self, output: Node, seed: Array | None = None) -> Gradients:
        """Propagate adjoints from ``output`` back to every leaf.

        ``seed`` defaults to ones and must match the output shape. The tape
        is consumed: a second call raises UsageError.
        """
        if self._consumed:
            raise UsageError("backward: tape already consumed; record a new tape")
        self._consumed = True
        if output.tape is not self:
            raise UsageError("backward: output node belongs to another tape")
        if seed is None:
            seed_arr = np.ones_like(output.value)
        else:
            seed_arr = as_matrix(seed, "seed")
            if seed_arr.shape != output.value.shape:
                raise ShapeError(
                    f"backward: seed shape {seed_arr.shape} != output shape "
                    f"{output.value.shape}")
        adjoints: dict[int, Array] = {id(output): seed_arr}
        for node in reversed(self._nodes):
            grad = adjoints.get(id(node))
            if grad is None or not node._edges:
                continue
            for parent, vjp in node._edges:
                contrib = vjp(grad)
                pid = id(parent)
                if pid in adjoints:
                    adjoints[pid] = adjoints[pid] + contrib
                else:
                    adjoints[pid] = contrib
        return Gradients(self, adjoints)


# -- shape helpers ---------------------------------------------------------

def _same_tape(op: str, *nodes: Node) -> Tape:
    tape = nodes[0].tape
    for n in nodes[1:]:
        if n.tape is not tape:
            raise UsageError(f"{op}: operands recorded on different tapes")
    return tape


def _require_same_shape(op: str, a: Node, b: Node) -> None:
    if a.shape != b.shape:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")


# -- primitives ------------------------------------------------------------

def matmul(a: Node, b: Node) -> Node:
    tape = _same_tape("matmul", a, b)
    if a.shape[1] != b.shape[0]:
        raise ShapeError(
            f"matmul: inner dims disagree, {a.shape} @ {b.shape}")
    av, bv = a.value, b.value
    return tape._record(av @ bv, [
        (a, lambda g: g @ bv.T),
        (b, lambda g: av.T @ g),
    ])


def _add_like(op: str, a: Node, b: Node, sign: float) -> Node:
    """Shared body for add/sub; ``b`` may be a (1, m) row broadcast."""
    tape = _same_tape(op, a, b)
    if a.shape == b.shape:
        b_vjp = (lambda g: sign * g)
    elif b.shape == (1, a.shape[1]):
        b_vjp = (lambda g: sign * g.sum(axis=0, keepdims=True))
    else:
        raise ShapeError(f"{op}: shapes {a.shape} and {b.shape} differ")
    value = a.value + b.value if sign > 0 else a.value - b.value
    return tape._record(value, [(a, lambda g: g), (b, b_vjp)])


def add(a: Node, b: Node) -> Node:
    return _add_like("add", a, b, 1.0)


def sub(a: Node, b: Node) -> Node:
    return _add_like("sub", a, b, -1.0)


def mul(a: Node, b: Node) -> Node:
    """Elementwise product; one operand may be a (1, 1) scalar."""
    tape = _same_tape("mul", a, b)
    if a.shape != b.shape and a.shape != (1, 1) and b.shape != (1, 1):
        raise ShapeError(f"mul: shapes {a.shape} and {b.shape} differ")
    av, bv = a.value, b.value

    def _unbroadcast(g: Array, shape: tuple[int, int]) -> Array:
        if g.shape == shape:
            return g
        return g.sum().reshape(1, 1)

    return tape._record(av * bv, [
        (a, lambda g: _unbroadcast(g * bv, av.shape)),
        (b, lambda g: _unbroadcast(g * av, bv.shape)),
    ])


def scale(a: Node, c: float) -> Node:
    c = float(c)
    return a.tape._record(a.value * c, [(a, lambda g: g * c)])


def swish(x: Node) -> Node:
    s = stable_sigmoid(x.value)
    value = x.value * s
    return x.tape._record(value, [
        (x, lambda g: g * (s + x.value * s * (1.0 - s))),
    ])


def relu(x: Node) -> Node:
    keep = (x.value > 0.0).astype(np.float64)
    return x.tape._record(x.value * keep, [(x, lambda g: g * keep)])


def absolute(x: Node) -> Node:
    sgn = np.sign(x.value)
    return x.tape._record(np.abs(x.value), [(x, lambda g: g * sgn)])


def sqrt(x: Node) -> Node:
    root = np.sqrt(x.value)
    safe = np.where(root > 0.0, root, np.inf)  # zero-subgradient at 0
    return x.tape._record(root, [(x, lambda g: g * (0.5 / safe))])


def sum_all(x: Node) -> Node:
    value = np.array([[x.value.sum()]])
    return x.tape._record(value, [
        (x, lambda g: np.full_like(x.value, g[0, 0])),
    ])


def mean_all(x: Node) -> Node:
    n = x.value.size
    value = np.array([[x.value.sum() / n]])
    return x.tape._record(value, [
        (x, lambda g: np.full_like(x.value, g[0, 0] / n)),
    ])


def row_sum(x: Node) -> Node:
    value = x.value.sum(axis=1, keepdims=True)
    return x.tape._record(value, [
        (x, lambda g: np.broadcast_to(g, x.value.shape).copy()),
    ])


def row_max(x: Node) -> Node:
    """Row-wise max; gradient flows to the lowest-index argmax of each row."""
    idx = np.argmax(x.value, axis=1)
    value = x.value[np.arange(x.value.shape[0]), idx].reshape(-1, 1)

    def _vjp(g: Array) -> Array:
        out = np.zeros_like(x.value)
        out[np.arange(out.shape[0]), idx] = g[:, 0]
        return out

    return x.tape._record(value, [(x, _vjp)])


def concat_cols(a: Node, b: Node) -> Node:
    tape = _same_tape("concat_cols", a, b)
    if a.shape[0] != b.shape[0]:
        raise ShapeError(
            f"concat_cols: row counts differ, {a.shape} vs {b.shape}")
    na = a.shape[1]
    value = np.concatenate([a.value, b.value], axis=1)
    return tape._record(value, [
        (a, lambda g: g[:, :na]),
        (b, lambda g: g[:, na:]),
    ])


def slice_cols(x: Node, start: int, stop: int) -> Node:
    if not (0 <= start < stop <= x.shape[1]):
        raise ShapeError(
            f"slice_cols: range [{start}, {stop}) invalid for shape {x.shape}")

    def _vjp(g: Array) -> Array:
        out = np.zeros_like(x.value)
        out[:, start:stop] = g
        return out

    return x.tape._record(np.ascontiguousarray(x.value[:, start:stop]),
                          [(x, _vjp)])


def cross_entropy_logits(logits: Node, targets: Array) -> Node:
    """Per-row softmax cross-entropy against (soft) one-hot targets.

    Returns an (n, 1) node of ``logsumexp(row) - <targets, row>`` values.
    """
    t = as_matrix(targets, "targets")
    if t.shape != logits.shape:
        raise ShapeError(
            f"cross_entropy_logits: targets shape {t.shape} != logits "
            f"shape {logits.shape}")
    z = logits.value
    m = z.max(axis=1, keepdims=True)
    ez = np.exp(z - m)
    sez = ez.sum(axis=1, keepdims=True)
    lse = m + np.log(sez)
    value = lse - (t * z).sum(axis=1, keepdims=True)
    softmax = ez / sez
    return logits.tape._record(value, [
        (logits, lambda g: g * (softmax - t)),
    ])


# -- gradient checking -----------------------------------------------------

def value_and_grad(fn: Callable[..., Node], *arrays: Array):
    """Evaluate ``fn`` on fresh leaves and return (value, [grads])."""
    tape = Tape()
    leaves = [tape.leaf(a) for a in arrays]
    out = fn(*leaves)
    grads = tape.backward(out)
    return out.value, [grads.of(leaf) for leaf in leaves]


def finite_difference_gradient(fn: Callable[..., Node], arrays: list[Array],
                               which: int, step: float = 1e-5) -> Array:
    """Central finite differences of a scalar-output graph w.r.t. one input."""

    def evaluate(values: list[Array]) -> float:
        tape = Tape()
        leaves = [tape.leaf(v) for v in values]
        out = fn(*leaves)
        if out.value.shape != (1, 1):
            raise UsageError(
                "finite_difference_gradient: graph output must be scalar")
        return float(out.value[0, 0])

    base = [np.array(a, dtype=np.float64) for a in arrays]
    grad = np.zeros_like(base[which])
    flat = grad.reshape(-1)
    target = base[which].reshape(-1)
    for i in range(target.size):
        orig = target[i]
        target[i] = orig + step
        hi = evaluate(base)
        target[i] = orig - step
        lo = evaluate(base)
        target[i] = orig
        flat[i] = (hi - lo) / (2.0 * step)
    return grad


def gradient_check(fn: Callable[..., Node], arrays: list[Array],
                   step: float = 1e-5) -> float:
    """Max relative error between analytic and central-FD gradients.

    The per-component error is |a - f| / max(1, |a|, |f|); the maximum over
    all inputs and components is returned.
    """
    _, analytic = value_and_grad(fn, *arrays)
    worst = 0.0
    for k in range(len(arrays)):
        numeric = finite_difference_gradient(fn, list(arrays), k, step)
        denom = np.maximum(1.0, np.maximum(np.abs(analytic[k]),
                                           np.abs(numeric)))
        err = np.abs(analytic[k] - numeric) / denom
        if err.size:
            worst = max(worst, float(err.max()))
    return worst
