"""Gradient-based evasion attacks under L-infinity and L2 budgets.

Implements the four untargeted white-box attacks used by the evaluation
harness: the single-step gradient method (fgm), its iterated/projected
variants (bim, pgd — pgd adds a uniform random start inside the budget
ball), and the boundary-linearization minimal-perturbation attack
(deepfool), which ignores the budget and instead walks to the nearest
linearized decision boundary.

All perturbed points are clipped to the dataset bounding box when one is
provided; fgm/bim/pgd results always satisfy the epsilon budget in the
configured norm within 1e-12.
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import jsonio, model
from .errors import ContractError, DimensionError

KINDS = ("fgm", "bim", "pgd", "deepfool")
NORMS = ("linf", "l2")
BUDGET_SLACK = 1e-12


@dataclass
class AttackConfig:
    """Attack hyperparameters.

    steps and step_size default per kind (1 and epsilon for fgm; 10 and
    epsilon/4 for bim/pgd; 100 steps for deepfool). deepfool ignores
    epsilon/norm for its search and uses overshoot instead; random_start
    only affects pgd.
    """

    kind: str
    epsilon: float = 0.0
    norm: str = "linf"
    steps: int = 0
    step_size: float = 0.0
    random_start: bool = True
    overshoot: float = 0.02
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractError(f"unknown attack kind {self.kind!r}; expected one of {KINDS}")
        if self.norm not in NORMS:
            raise ContractError(f"unknown norm {self.norm!r}; expected one of {NORMS}")
        if self.kind != "deepfool" and self.epsilon <= 0:
            raise ContractError(f"{self.kind} requires a positive epsilon, got {self.epsilon}")
        if self.overshoot < 0:
            raise ContractError(f"overshoot must be >= 0, got {self.overshoot}")
        if self.steps == 0:
            self.steps = {"fgm": 1, "bim": 10, "pgd": 10, "deepfool": 100}[self.kind]
        if self.steps < 1:
            raise ContractError(f"steps must be >= 1, got {self.steps}")
        if self.step_size == 0.0 and self.kind in ("bim", "pgd"):
            self.step_size = self.epsilon / 4.0
        if self.kind in ("bim", "pgd") and self.step_size <= 0:
            raise ContractError(f"step_size must be positive, got {self.step_size}")

    def to_dict(self):
        return {
            "kind": self.kind, "epsilon": self.epsilon, "norm": self.norm,
            "steps": self.steps, "step_size": self.step_size,
            "random_start": self.random_start, "overshoot": self.overshoot,
            "seed": self.seed,
        }


@dataclass
class AttackResult:
    """One attacked sample: the point found, whether it changed the
    prediction, its perturbation norm, and the forward/backward evaluation
    count spent finding it."""

    adversarial: np.ndarray
    success: bool
    perturbation_norm: float
    queries: int


def _norm(delta, norm):
    if norm == "linf":
        return float(np.max(np.abs(delta))) if delta.size else 0.0
    return float(np.sqrt(np.sum(delta * delta)))


def project(delta, epsilon, norm):
    """Project a perturbation onto the epsilon-ball of the given norm.

    linf: componentwise clamp to [-epsilon, epsilon]; l2: radial rescale
    when the norm exceeds epsilon.
    """
    if norm == "linf":
        return np.clip(delta, -epsilon, epsilon)
    length = math.sqrt(float(np.sum(delta * delta)))
    if length > epsilon:
        return delta * (epsilon / length)
    return delta


def _clip_box(x, box):
    if box is None:
        return x
    lo, hi = box
    return np.clip(x, lo, hi)


def _loss_grad(net, x, y):
    """Gradient of the cross-entropy at (x, y) with respect to x.

    Returns (grad (d,), queries): one forward plus one backward pass.
    """
    g, h = model.build_graph(net, x[None, :], [int(y)])
    grads = g.backward(h["loss"])
    return grads[h["x"]].data[0], 2


def _check_input(net, x):
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (net.dim,):
        raise DimensionError(f"input shape {x.shape} does not match net dimension ({net.dim},)")
    return x


def _finish(net, x_clean, x_adv, cfg, queries):
    pred_clean = int(model.predict_classes(net, x_clean[None, :])[0])
    pred_adv = int(model.predict_classes(net, x_adv[None, :])[0])
    return AttackResult(
        adversarial=x_adv,
        success=pred_adv != pred_clean,
        perturbation_norm=_norm(x_adv - x_clean, cfg.norm),
        queries=queries + 2,
    )


def fgm(net, x, y, cfg, box=None):
    """One gradient step of size epsilon in the loss-increasing direction.

    linf moves epsilon*sign(grad) per coordinate; l2 moves epsilon along
    the normalized gradient. A zero gradient leaves the input unchanged.
    """
    x = _check_input(net, x)
    grad, queries = _loss_grad(net, x, y)
    if not np.all(np.isfinite(grad)):
        raise ArithmeticError("non-finite loss gradient")
    if cfg.norm == "linf":
        step = cfg.epsilon * np.sign(grad)
    else:
        length = math.sqrt(float(np.sum(grad * grad)))
        step = (cfg.epsilon / length) * grad if length > 0 else np.zeros_like(grad)
    adv = _clip_box(x + step, box)
    return _finish(net, x, adv, cfg, queries)


def _iterated(net, x, y, cfg, box, x0):
    cur = x0
    queries = 0
    for _ in range(cfg.steps):
        grad, q = _loss_grad(net, cur, y)
        queries += q
        if not np.all(np.isfinite(grad)):
            raise ArithmeticError("non-finite loss gradient")
        if cfg.norm == "linf":
            direction = np.sign(grad)
        else:
            length = math.sqrt(float(np.sum(grad * grad)))
            direction = grad / length if length > 0 else np.zeros_like(grad)
        cur = cur + cfg.step_size * direction
        cur = x + project(cur - x, cfg.epsilon, cfg.norm)
        cur = _clip_box(cur, box)
    return _finish(net, x, cur, cfg, queries)


def bim(net, x, y, cfg, box=None):
    """Iterated fgm with projection onto the epsilon-ball after each step."""
    x = _check_input(net, x)
    return _iterated(net, x, y, cfg, box, x)


def _ball_start(rng, x, cfg):
    if cfg.norm == "linf":
        return x + rng.uniform(-cfg.epsilon, cfg.epsilon, size=x.shape)
    direction = rng.standard_normal(x.shape)
    length = math.sqrt(float(np.sum(direction * direction)))
    if length == 0:
        return x.copy()
    radius = cfg.epsilon * rng.uniform(0.0, 1.0) ** (1.0 / x.size)
    return x + (radius / length) * direction


def pgd(net, x, y, cfg, box=None):
    """bim started from a uniform random point inside the budget ball."""
    x = _check_input(net, x)
    if cfg.random_start:
        rng = np.random.default_rng(cfg.seed)
        x0 = _clip_box(_ball_start(rng, x, cfg), box)
    else:
        x0 = x
    return _iterated(net, x, y, cfg, box, x0)


def _logit_grads(net, x):
    """Logits and the gradient of every logit at x: ((K,), (K, d), queries)."""
    g, h = model.build_graph(net, x[None, :])
    logits = h["logits"].value[0].copy()
    grads = np.empty((logits.size, x.size))
    for k in range(logits.size):
        out = g.take(h["logits"], (0, k))
        grads[k] = g.backward(out)[h["x"]].data[0]
    return logits, grads, 1 + logits.size


def deepfool(net, x, cfg, box=None, y=None):
    """Minimal perturbation via iterative linearization of the boundary.

    At each step, among the non-predicted classes pick the one whose
    linearized boundary is nearest (smallest |logit gap| / ||grad gap||),
    step onto it, and test the accumulated perturbation scaled by
    (1 + overshoot). Stops on a class change or after cfg.steps.

    With an explicit label y, an input the net already misclassifies is
    returned unchanged with success False.
    """
    x = _check_input(net, x)
    pred0 = int(model.predict_classes(net, x[None, :])[0])
    queries = 1
    if y is not None and pred0 != int(y):
        return AttackResult(adversarial=x.copy(), success=False,
                            perturbation_norm=0.0, queries=queries)

    total = np.zeros_like(x)
    cur = x.copy()
    for _ in range(cfg.steps):
        pred_cur = int(model.predict_classes(net, cur[None, :])[0])
        queries += 1
        if pred_cur != pred0:
            break
        logits, grads, q = _logit_grads(net, cur)
        queries += q
        best = None
        for k in range(logits.size):
            if k == pred0:
                continue
            w = grads[k] - grads[pred0]
            wn = math.sqrt(float(np.sum(w * w)))
            if wn == 0.0:
                continue
            gap = abs(float(logits[k] - logits[pred0]))
            if best is None or gap / wn < best[0]:
                best = (gap / wn, gap, w, wn)
        if best is None:
            # every candidate boundary has a zero gradient difference
            return AttackResult(adversarial=x.copy(), success=False,
                                perturbation_norm=0.0, queries=queries)
        _, gap, w, wn = best
        total = total + ((gap + 1e-9) / (wn * wn)) * w
        cur = x + (1.0 + cfg.overshoot) * total

    adv = _clip_box(x + (1.0 + cfg.overshoot) * total, box)
    return _finish(net, x, adv, cfg, queries)


def run_attack(net, x, y, cfg, box=None):
    """Dispatch one sample to the configured attack."""
    if cfg.kind == "fgm":
        return fgm(net, x, y, cfg, box)
    if cfg.kind == "bim":
        return bim(net, x, y, cfg, box)
    if cfg.kind == "pgd":
        return pgd(net, x, y, cfg, box)
    return deepfool(net, x, cfg, box, y=y)


def attack_batch(net, xs, ys, cfg, box=None, threads=1):
    """Attack each sample with a seed derived as cfg.seed XOR index.

    Derived seeds make every per-sample result independent of execution
    order, so serial and threaded runs return identical outputs.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.int64)
    if xs.shape[0] != ys.shape[0]:
        raise ContractError(f"batch lengths differ: {xs.shape[0]} inputs, {ys.shape[0]} labels")

    def one(i):
        sample_cfg = replace(cfg, seed=cfg.seed ^ i)
        return run_attack(net, xs[i], int(ys[i]), sample_cfg, box)

    indices = range(xs.shape[0])
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(one, indices))
    return [one(i) for i in indices]


def write_manifest(path, cfg, results):
    """Attack run manifest: config echo plus per-sample outcome columns."""
    jsonio.dump({
        "config": cfg.to_dict(),
        "n": len(results),
        "success": [bool(r.success) for r in results],
        "perturbation_norm": [r.perturbation_norm for r in results],
        "queries": [r.queries for r in results],
    }, path)
