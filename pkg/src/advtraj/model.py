"""Residual classifier with trajectory recording and transport cost.

The network applies M residual blocks x_{m+1} = x_m + h * r_m(x_m) to a
d-vector and classifies the final point with an affine head. Each block is
affine -> ReLU -> affine mapping R^d -> R^d through a hidden width w. A
forward pass records the full trajectory (embeddings and residues), which
downstream modules turn into detection features and per-sample transport
cost (the sum of squared residue norms).

The post-skip-activation variant x_{m+1} = relu(x_m + h*r_m(x_m)) used by
some grouped-convolution architectures is intentionally not implemented.
"""

from dataclasses import dataclass, field

import numpy as np

from . import jsonio
from .autodiff import Graph
from .errors import ContractError, DimensionError, FormatError

CHECKPOINT_VERSION = 1


@dataclass
class ResidualBlock:
    """Two affine maps with a ReLU between: r(x) = relu(x@w1 + b1)@w2 + b2."""

    w1: np.ndarray  # (d, w)
    b1: np.ndarray  # (1, w)
    w2: np.ndarray  # (w, d)
    b2: np.ndarray  # (1, d)

    def __post_init__(self):
        d, w = self.w1.shape
        if self.b1.shape != (1, w) or self.w2.shape != (w, d) or self.b2.shape != (1, d):
            raise DimensionError(
                f"block shapes inconsistent: w1 {self.w1.shape}, b1 {self.b1.shape}, "
                f"w2 {self.w2.shape}, b2 {self.b2.shape}")

    @property
    def dim(self):
        return self.w1.shape[0]

    def residue(self, x):
        """r(x) for a batch x of shape (n, d)."""
        return np.maximum(x @ self.w1 + self.b1, 0.0) @ self.w2 + self.b2


@dataclass
class ResidualNet:
    """Stack of residual blocks plus an affine classification head."""

    blocks: list
    head_w: np.ndarray  # (d, K)
    head_b: np.ndarray  # (1, K)
    h: float = 1.0

    def __post_init__(self):
        if len(self.blocks) < 1:
            raise ContractError("a residual net needs at least one block")
        if self.h <= 0:
            raise ContractError(f"step size must be positive, got {self.h}")
        d = self.blocks[0].dim
        for i, blk in enumerate(self.blocks):
            if blk.dim != d:
                raise DimensionError(f"block {i} has dimension {blk.dim}, expected {d}")
        if self.head_w.shape[0] != d or self.head_b.shape != (1, self.head_w.shape[1]):
            raise DimensionError(
                f"head shapes {self.head_w.shape}/{self.head_b.shape} do not fit dimension {d}")
        if self.num_classes < 2:
            raise ContractError(f"need at least 2 classes, got {self.num_classes}")

    @property
    def dim(self):
        return self.blocks[0].dim

    @property
    def width(self):
        return self.blocks[0].w1.shape[1]

    @property
    def depth(self):
        return len(self.blocks)

    @property
    def num_classes(self):
        return self.head_w.shape[1]


@dataclass
class Trajectory:
    """Per-block record of one input's path through the network."""

    embeddings: np.ndarray  # (M+1, d): x_0 .. x_M
    residues: np.ndarray    # (M, d):   r_0(x_0) .. r_{M-1}(x_{M-1})
    logits: np.ndarray      # (K,)
    predicted: int
    h: float = field(default=1.0, repr=False)


def _orthogonal(rng, rows, cols, gain):
    """Orthogonal(-ish) matrix scaled by gain, via QR of a Gaussian draw."""
    a = rng.standard_normal((max(rows, cols), min(rows, cols)))
    q, r = np.linalg.qr(a)
    q = q * np.sign(np.diag(r))  # make the factorization unique
    if rows < cols:
        q = q.T
    return gain * q[:rows, :cols]


def init_net(dim, width, depth, classes, h=1.0, seed=0, gain=0.05, head_gain=1.0):
    """Fresh ResidualNet with orthogonal-scaled weights and zero biases.

    The small block gain keeps initial residues (and therefore initial
    transport cost) near zero, so training starts close to the identity
    map; the head keeps unit scale so classification gradients flow from
    the first step.
    """
    rng = np.random.default_rng(seed)
    blocks = []
    for _ in range(depth):
        blocks.append(ResidualBlock(
            w1=_orthogonal(rng, dim, width, gain),
            b1=np.zeros((1, width)),
            w2=_orthogonal(rng, width, dim, gain),
            b2=np.zeros((1, dim)),
        ))
    head_w = _orthogonal(rng, dim, classes, head_gain)
    head_b = np.zeros((1, classes))
    return ResidualNet(blocks=blocks, head_w=head_w, head_b=head_b, h=float(h))


def forward(net, x):
    """Run one d-vector through the net, recording its trajectory.

    The stored arrays satisfy embeddings[m+1] == embeddings[m] +
    h*residues[m] exactly (same floating-point ops as the forward pass).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.dim,):
        raise DimensionError(f"input shape {x.shape} does not match net dimension ({net.dim},)")
    ids, trajs = predict_batch(net, x[None, :])
    return trajs[0]


def predict_batch(net, xs):
    """Forward a batch of d-vectors; returns (class ids, trajectories)."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or (xs.shape[0] > 0 and xs.shape[1] != net.dim):
        raise DimensionError(f"batch shape {xs.shape} does not match net dimension {net.dim}")
    n = xs.shape[0]
    if n == 0:
        return np.zeros(0, dtype=np.int64), []

    m = net.depth
    embeddings = np.empty((m + 1, n, net.dim))
    residues = np.empty((m, n, net.dim))
    cur = xs
    embeddings[0] = cur
    for i, blk in enumerate(net.blocks):
        r = blk.residue(cur)
        residues[i] = r
        cur = cur + net.h * r
        embeddings[i + 1] = cur
    logits = cur @ net.head_w + net.head_b
    ids = np.argmax(logits, axis=1).astype(np.int64)  # argmax ties -> lowest class id

    trajs = [
        Trajectory(embeddings=embeddings[:, i, :].copy(), residues=residues[:, i, :].copy(),
                   logits=logits[i].copy(), predicted=int(ids[i]), h=net.h)
        for i in range(n)
    ]
    return ids, trajs


def predict_classes(net, xs):
    """Class ids only (no trajectory bookkeeping)."""
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or (xs.shape[0] > 0 and xs.shape[1] != net.dim):
        raise DimensionError(f"batch shape {xs.shape} does not match net dimension {net.dim}")
    cur = xs
    for blk in net.blocks:
        cur = cur + net.h * blk.residue(cur)
    logits = cur @ net.head_w + net.head_b
    return np.argmax(logits, axis=1).astype(np.int64)


def transport_cost(traj):
    """Sum over blocks of squared residue 2-norms (always >= 0)."""
    return float(np.sum(traj.residues * traj.residues))


def batch_costs(trajs):
    """Transport cost of each trajectory in a list, as an array."""
    return np.array([transport_cost(t) for t in trajs], dtype=np.float64)


def build_graph(net, xs, labels=None):
    """Record the batched forward pass on a fresh tape.

    Returns (graph, handles) where handles carries the data leaf, the
    parameter leaves in a stable order, the logits node, the mean
    cross-entropy node (None when labels is None) and the mean per-sample
    transport-cost node. Used by the trainer (parameter gradients) and the
    attacks (input gradients).
    """
    xs = np.asarray(xs, dtype=np.float64)
    if xs.ndim != 2 or xs.shape[1] != net.dim:
        raise DimensionError(f"batch shape {xs.shape} does not match net dimension {net.dim}")
    n = xs.shape[0]
    if n == 0:
        raise ContractError("cannot build a graph over an empty batch")

    g = Graph()
    x_node = g.leaf(xs)
    params = []
    cur = x_node
    cost_node = None
    for blk in net.blocks:
        w1 = g.leaf(blk.w1, parameter=True)
        b1 = g.leaf(blk.b1, parameter=True)
        w2 = g.leaf(blk.w2, parameter=True)
        b2 = g.leaf(blk.b2, parameter=True)
        params.extend([w1, b1, w2, b2])
        hidden = g.relu(g.add_bias(g.matmul(cur, w1), b1))
        res = g.add_bias(g.matmul(hidden, w2), b2)
        sq = g.sum_sq(res)
        cost_node = sq if cost_node is None else g.add(cost_node, sq)
        cur = g.add(cur, g.scale(res, net.h))
    head_w = g.leaf(net.head_w, parameter=True)
    head_b = g.leaf(net.head_b, parameter=True)
    params.extend([head_w, head_b])
    logits = g.add_bias(g.matmul(cur, head_w), head_b)
    loss = g.cross_entropy(logits, labels) if labels is not None else None
    cost = g.scale(cost_node, 1.0 / n)

    handles = {"x": x_node, "params": params, "logits": logits, "loss": loss, "cost": cost}
    return g, handles


def set_params(net, values):
    """Write back parameter arrays in build_graph order (in-place update)."""
    expected = 4 * net.depth + 2
    if len(values) != expected:
        raise ContractError(f"expected {expected} parameter arrays, got {len(values)}")
    it = iter(values)
    for blk in net.blocks:
        blk.w1 = next(it)
        blk.b1 = next(it)
        blk.w2 = next(it)
        blk.b2 = next(it)
    net.head_w = next(it)
    net.head_b = next(it)


def get_params(net):
    """Parameter arrays in build_graph order."""
    out = []
    for blk in net.blocks:
        out.extend([blk.w1, blk.b1, blk.w2, blk.b2])
    out.extend([net.head_w, net.head_b])
    return out


def save_checkpoint(net, path):
    """Write the net as a JSON checkpoint (reals at 17 significant digits)."""
    doc = {
        "format_version": CHECKPOINT_VERSION,
        "d": net.dim,
        "w": net.width,
        "M": net.depth,
        "K": net.num_classes,
        "h": net.h,
        "blocks": [
            {"w1": blk.w1, "b1": blk.b1, "w2": blk.w2, "b2": blk.b2}
            for blk in net.blocks
        ],
        "head": {"w": net.head_w, "b": net.head_b},
    }
    jsonio.dump(doc, path)


def load_checkpoint(path):
    """Read a checkpoint, validating every shape invariant."""
    doc = jsonio.load(path)
    required = {"format_version", "d", "w", "M", "K", "h", "blocks", "head"}
    missing = required - set(doc)
    if missing:
        raise FormatError(f"{path}: checkpoint missing fields {sorted(missing)}")
    if doc["format_version"] != CHECKPOINT_VERSION:
        raise FormatError(f"{path}: unsupported format_version {doc['format_version']}")
    d, w, m, k = int(doc["d"]), int(doc["w"]), int(doc["M"]), int(doc["K"])
    if len(doc["blocks"]) != m:
        raise FormatError(f"{path}: expected {m} blocks, found {len(doc['blocks'])}")

    def arr(value, shape, what):
        a = np.asarray(value, dtype=np.float64)
        if a.shape != shape:
            raise FormatError(f"{path}: {what} has shape {a.shape}, expected {shape}")
        return a

    blocks = [
        ResidualBlock(
            w1=arr(b["w1"], (d, w), f"blocks[{i}].w1"),
            b1=arr(b["b1"], (1, w), f"blocks[{i}].b1"),
            w2=arr(b["w2"], (w, d), f"blocks[{i}].w2"),
            b2=arr(b["b2"], (1, d), f"blocks[{i}].b2"),
        )
        for i, b in enumerate(doc["blocks"])
    ]
    head_w = arr(doc["head"]["w"], (d, k), "head.w")
    head_b = arr(doc["head"]["b"], (1, k), "head.b")
    return ResidualNet(blocks=blocks, head_w=head_w, head_b=head_b, h=float(doc["h"]))
