"""Minimal reverse-mode differentiation engine.

A :class:`Graph` is an append-only tape of nodes; every operation records
its inputs by index, so parents always precede children and the reverse
sweep is a single backwards pass over the node list. Values are stored as
:class:`Tensor` (dense float64, validated finite on construction), which
keeps numeric blowups loud instead of silently propagating NaN.

The engine differentiates with respect to both parameter leaves (training)
and data leaves (input-gradient attacks). It is deliberately small: dense
rank-≤2 tensors, first-order gradients only, no broadcasting beyond the
row-vector bias case.
"""

from typing import NamedTuple

import numpy as np

from .errors import ContractError, DimensionError, NonFiniteError


class Tensor:
    """Dense n-dimensional array of float64 with validated contents.

    Invariants: the flat data length equals the product of the shape, and
    every entry is finite. Construction from any array-like copies into a
    C-contiguous float64 buffer.
    """

    __slots__ = ("data",)

    def __init__(self, data):
        arr = np.array(data, dtype=np.float64, order="C")  # owned, keeps 0-d scalars 0-d
        if not np.all(np.isfinite(arr)):
            raise NonFiniteError(f"tensor with shape {arr.shape} contains NaN or Inf")
        self.data = arr

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        return f"Tensor(shape={self.data.shape})"


class Node(NamedTuple):
    """Handle to one tape entry; hashable so gradient maps can key on it."""

    graph: "Graph"
    index: int

    @property
    def value(self):
        """The cached output array of this node."""
        return self.graph._values[self.index].data

    @property
    def shape(self):
        return self.graph._values[self.index].data.shape

    def __matmul__(self, other):
        return self.graph.matmul(self, other)

    def __add__(self, other):
        return self.graph.add(self, other)

    def __mul__(self, c):
        return self.graph.scale(self, c)

    __rmul__ = __mul__


def _as_array(value):
    if isinstance(value, Tensor):
        return value.data
    return Tensor(value).data


class Graph:
    """Append-only computation tape over Tensor values.

    Single-threaded during construction and backward; independent graphs
    are unrelated and may live on different threads.
    """

    def __init__(self):
        self._kinds = []    # operation name per node
        self._parents = []  # tuple of parent indices per node
        self._values = []   # cached output Tensor per node
        self._extras = []   # op payload (scale constant, labels, take index)
        self._leaves = []   # indices of leaf nodes, in creation order
        self._param = []    # parallel to _leaves: True if parameter leaf

    # -- construction ------------------------------------------------------

    def _append(self, kind, parents, value, extra=None):
        self._kinds.append(kind)
        self._parents.append(parents)
        self._values.append(value if isinstance(value, Tensor) else Tensor(value))
        self._extras.append(extra)
        return Node(self, len(self._kinds) - 1)

    def leaf(self, value, parameter=False):
        """Record an input tensor; ``parameter`` marks trainable leaves."""
        node = self._append("leaf", (), value if isinstance(value, Tensor) else Tensor(value))
        self._leaves.append(node.index)
        self._param.append(bool(parameter))
        return node

    @property
    def leaves(self):
        return [Node(self, i) for i in self._leaves]

    def matmul(self, a, b):
        """Matrix product of two rank-2 nodes."""
        av, bv = a.value, b.value
        if av.ndim != 2 or bv.ndim != 2 or av.shape[1] != bv.shape[0]:
            raise DimensionError(f"matmul shapes incompatible: {av.shape} x {bv.shape}")
        return self._append("matmul", (a.index, b.index), av @ bv)

    def add(self, a, b):
        """Elementwise sum; shapes must match exactly."""
        av, bv = a.value, b.value
        if av.shape != bv.shape:
            raise DimensionError(f"add shapes differ: {av.shape} vs {bv.shape}")
        return self._append("add", (a.index, b.index), av + bv)

    def add_bias(self, a, b):
        """Add a (1, k) row vector to every row of an (n, k) node."""
        av, bv = a.value, b.value
        if av.ndim != 2 or bv.shape != (1, av.shape[1]):
            raise DimensionError(f"add_bias shapes incompatible: {av.shape} + {bv.shape}")
        return self._append("add_bias", (a.index, b.index), av + bv)

    def relu(self, a):
        """Elementwise max(x, 0); subgradient at 0 is 0."""
        return self._append("relu", (a.index,), np.maximum(a.value, 0.0))

    def scale(self, a, c):
        """Multiply by a real constant."""
        c = float(c)
        return self._append("scale", (a.index,), a.value * c, extra=c)

    def sum_sq(self, a):
        """Scalar sum of squared entries."""
        return self._append("sum_sq", (a.index,), np.float64(np.sum(a.value * a.value)))

    def take(self, a, pos):
        """Scalar entry at multi-index ``pos`` (plumbing for per-logit grads)."""
        value = a.value[pos]
        return self._append("take", (a.index,), np.float64(value), extra=pos)

    def cross_entropy(self, logits, labels):
        """Mean negative log softmax probability of the given class ids.

        Numerically stabilized by per-row max subtraction; labels is a
        sequence of ints, one per row of the (batch, classes) logits.
        """
        lv = logits.value
        if lv.ndim != 2:
            raise DimensionError(f"cross_entropy expects rank-2 logits, got shape {lv.shape}")
        labels = np.asarray(labels, dtype=np.int64)
        if labels.ndim != 1 or labels.shape[0] != lv.shape[0]:
            raise DimensionError(
                f"labels length {labels.shape} does not match batch {lv.shape[0]}")
        if labels.size and (labels.min() < 0 or labels.max() >= lv.shape[1]):
            raise IndexError(
                f"label out of range for {lv.shape[1]} classes: {labels.min()}..{labels.max()}")
        shifted = lv - lv.max(axis=1, keepdims=True)
        logsumexp = np.log(np.exp(shifted).sum(axis=1))
        picked = shifted[np.arange(lv.shape[0]), labels]
        value = np.float64(np.mean(logsumexp - picked))
        return self._append("cross_entropy", (logits.index,), value, extra=labels)

    # -- reverse sweep -----------------------------------------------------

    def backward(self, output):
        """Gradients of a scalar output with respect to every leaf.

        Returns a dict mapping each leaf Node to a gradient Tensor; leaves
        the output does not depend on get zero gradients of matching shape.
        """
        out_val = self._values[output.index].data
        if np.ndim(out_val) != 0:
            raise ContractError(f"backward requires a scalar output, got shape {np.shape(out_val)}")
        grads = [None] * len(self._kinds)
        grads[output.index] = np.float64(1.0)

        for i in range(output.index, -1, -1):
            g = grads[i]
            if g is None:
                continue
            kind = self._kinds[i]
            parents = self._parents[i]
            if kind == "leaf":
                continue
            if kind == "matmul":
                a, b = parents
                self._accum(grads, a, g @ self._values[b].data.T)
                self._accum(grads, b, self._values[a].data.T @ g)
            elif kind == "add":
                self._accum(grads, parents[0], g)
                self._accum(grads, parents[1], g)
            elif kind == "add_bias":
                self._accum(grads, parents[0], g)
                self._accum(grads, parents[1], g.sum(axis=0, keepdims=True))
            elif kind == "relu":
                a = parents[0]
                self._accum(grads, a, g * (self._values[a].data > 0.0))
            elif kind == "scale":
                self._accum(grads, parents[0], g * self._extras[i])
            elif kind == "sum_sq":
                a = parents[0]
                self._accum(grads, a, (2.0 * g) * self._values[a].data)
            elif kind == "take":
                a = parents[0]
                ga = np.zeros_like(self._values[a].data)
                ga[self._extras[i]] = g
                self._accum(grads, a, ga)
            elif kind == "cross_entropy":
                a = parents[0]
                lv = self._values[a].data
                labels = self._extras[i]
                shifted = lv - lv.max(axis=1, keepdims=True)
                expz = np.exp(shifted)
                soft = expz / expz.sum(axis=1, keepdims=True)
                soft[np.arange(lv.shape[0]), labels] -= 1.0
                self._accum(grads, a, (g / lv.shape[0]) * soft)
            else:  # pragma: no cover - would indicate a new op missing a rule
                raise NotImplementedError(f"no backward rule for {kind}")

        result = {}
        for idx in self._leaves:
            g = grads[idx]
            if g is None:
                g = np.zeros_like(self._values[idx].data)
            result[Node(self, idx)] = Tensor(np.asarray(g, dtype=np.float64))
        return result

    @staticmethod
    def _accum(grads, index, value):
        if grads[index] is None:
            grads[index] = np.array(value, dtype=np.float64)
        else:
            grads[index] = grads[index] + value

    def relu_pattern(self):
        """Activation sign pattern of all relu inputs, for kink detection."""
        bits = []
        for i, kind in enumerate(self._kinds):
            if kind == "relu":
                bits.append(self._values[self._parents[i][0]].data > 0.0)
        if not bits:
            return np.zeros(0, dtype=bool)
        return np.concatenate([b.ravel() for b in bits])


def grad_check(build, x, step):
    """Max relative error between backward and central finite differences.

    ``build(graph, x_node) -> scalar node`` constructs the function under
    test. Coordinates whose ±step evaluations land on different sides of a
    ReLU kink (the activation pattern changes) are excluded, since the
    central difference is meaningless across the kink.
    """
    if step <= 0:
        raise ContractError(f"step must be positive, got {step}")
    x = x if isinstance(x, Tensor) else Tensor(x)

    g = Graph()
    xn = g.leaf(x)
    out = build(g, xn)
    analytic = g.backward(out)[xn].data

    base = x.data
    flat_err = 0.0
    it = np.ndindex(base.shape)
    for pos in it:
        bumped = base.copy()
        bumped[pos] += step
        g_plus = Graph()
        out_plus = build(g_plus, g_plus.leaf(Tensor(bumped)))
        bumped[pos] -= 2.0 * step
        g_minus = Graph()
        out_minus = build(g_minus, g_minus.leaf(Tensor(bumped)))
        if not np.array_equal(g_plus.relu_pattern(), g_minus.relu_pattern()):
            continue  # kink-adjacent coordinate: flagged and skipped
        numeric = (float(out_plus.value) - float(out_minus.value)) / (2.0 * step)
        a = float(analytic[pos])
        err = abs(a - numeric) / max(1.0, abs(a))
        flat_err = max(flat_err, err)
    return flat_err
