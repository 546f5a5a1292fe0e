"""Cross-entropy and transport-regularized training.

Two modes share one SGD loop. ``vanilla`` minimizes mean cross-entropy.
``lap`` (least-action training) treats the classification loss as a
constraint and minimizes the mean per-sample transport cost through a
method of multipliers: run a fixed number of SGD steps on

    cost(theta) + multiplier_i * loss(theta)

then grow the multiplier by growth_factor times the current batch's
cross-entropy evaluated at the updated parameters. The inner minimization
has no adaptive stopping rule; it is exactly ``steps_per_update`` batches.
"""

from dataclasses import dataclass, field

import numpy as np

from . import model
from .errors import ContractError, DivergenceError, NonFiniteError

LOSS_CEILING = 1e6  # divergence guard: abort when the batch loss passes this


@dataclass
class TrainConfig:
    """Hyperparameters for one training run.

    growth_factor, steps_per_update and initial_multiplier only matter in
    ``lap`` mode; their defaults (1, 1, 1) follow the reference setting of
    one multiplier update per batch.
    """

    mode: str = "vanilla"
    learning_rate: float = 0.1
    epochs: int = 50
    batch_size: int = 64
    growth_factor: float = 1.0
    steps_per_update: int = 1
    initial_multiplier: float = 1.0
    clip_norm: float | None = None  # global gradient-norm cap; None disables
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("vanilla", "lap"):
            raise ContractError(f"mode must be 'vanilla' or 'lap', got {self.mode!r}")
        if self.learning_rate <= 0:
            raise ContractError(f"learning_rate must be positive, got {self.learning_rate}")
        if self.epochs < 0:
            raise ContractError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ContractError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.growth_factor <= 0:
            raise ContractError(f"growth_factor must be positive, got {self.growth_factor}")
        if self.steps_per_update < 1:
            raise ContractError(f"steps_per_update must be >= 1, got {self.steps_per_update}")
        if self.initial_multiplier <= 0:
            raise ContractError(
                f"initial_multiplier must be positive, got {self.initial_multiplier}")
        if self.clip_norm is not None and self.clip_norm <= 0:
            raise ContractError(f"clip_norm must be positive, got {self.clip_norm}")


@dataclass
class TrainReport:
    """Histories of one run.

    multiplier_trace records the loss multiplier before and after every
    update, and multiplier_losses the batch losses used, so the recurrence
    trace[i+1] == trace[i] + growth_factor * losses[i] holds exactly as
    recorded. The trace is non-decreasing because losses are >= 0.
    """

    loss_history: list = field(default_factory=list)
    cost_history: list = field(default_factory=list)
    multiplier_trace: list = field(default_factory=list)
    multiplier_losses: list = field(default_factory=list)
    final_train_accuracy: float = 0.0

    def to_dict(self):
        return {
            "loss_history": self.loss_history,
            "cost_history": self.cost_history,
            "multiplier_trace": self.multiplier_trace,
            "multiplier_losses": self.multiplier_losses,
            "final_train_accuracy": self.final_train_accuracy,
        }


def objective(net, xs, ys, multiplier):
    """Evaluate (total, loss, cost) on one batch without touching the net.

    total == cost + multiplier * loss exactly (assembled from the two
    evaluated terms); loss is mean cross-entropy, cost the batch mean of
    per-sample transport cost.
    """
    if multiplier < 0:
        raise ContractError(f"multiplier must be >= 0, got {multiplier}")
    g, h = model.build_graph(net, xs, ys)
    loss = float(h["loss"].value)
    cost = float(h["cost"].value)
    return cost + multiplier * loss, loss, cost


def _check_finite(loss, epoch):
    if not np.isfinite(loss) or loss > LOSS_CEILING:
        raise DivergenceError(f"training diverged at epoch {epoch}: batch loss {loss}")


def train(net, xs, ys, cfg):
    """SGD training, in place; returns the TrainReport.

    Shuffling is seeded and reproducible: identical (net, data, config)
    give identical reports and final weights.
    """
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.int64)
    if xs.ndim != 2 or xs.shape[0] == 0:
        raise ContractError(f"training data must be a non-empty (n, d) array, got {xs.shape}")
    if ys.shape != (xs.shape[0],):
        raise ContractError(f"labels shape {ys.shape} does not match data {xs.shape}")
    if ys.min() < 0 or ys.max() >= net.num_classes:
        raise ContractError(
            f"labels must lie in [0, {net.num_classes}), got {ys.min()}..{ys.max()}")

    rng = np.random.default_rng(cfg.seed)
    report = TrainReport()
    lap = cfg.mode == "lap"
    multiplier = cfg.initial_multiplier
    if lap:
        report.multiplier_trace.append(multiplier)
    steps_since_update = 0
    n = xs.shape[0]

    for epoch in range(cfg.epochs):
        perm = rng.permutation(n)
        loss_sum = 0.0
        cost_sum = 0.0
        for start in range(0, n, cfg.batch_size):
            idx = perm[start:start + cfg.batch_size]
            xb, yb = xs[idx], ys[idx]
            try:
                g, h = model.build_graph(net, xb, yb)
            except NonFiniteError as exc:
                raise DivergenceError(f"training diverged at epoch {epoch}: {exc}") from exc
            loss = float(h["loss"].value)
            cost = float(h["cost"].value)
            _check_finite(loss, epoch)
            loss_sum += loss * idx.size
            cost_sum += cost * idx.size

            total = g.add(h["cost"], g.scale(h["loss"], multiplier)) if lap else h["loss"]
            grads = g.backward(total)
            grad_arrays = [grads[p].data for p in h["params"]]
            if cfg.clip_norm is not None:
                norm = np.sqrt(sum(float(np.sum(a * a)) for a in grad_arrays))
                if norm > cfg.clip_norm:
                    factor = cfg.clip_norm / norm
                    grad_arrays = [a * factor for a in grad_arrays]
            updated = [
                p.value - cfg.learning_rate * a
                for p, a in zip(h["params"], grad_arrays)
            ]
            model.set_params(net, updated)

            if lap:
                steps_since_update += 1
                if steps_since_update == cfg.steps_per_update:
                    steps_since_update = 0
                    _, post_loss, _ = objective(net, xb, yb, 0.0)
                    _check_finite(post_loss, epoch)
                    multiplier = multiplier + cfg.growth_factor * post_loss
                    report.multiplier_trace.append(multiplier)
                    report.multiplier_losses.append(post_loss)

        report.loss_history.append(loss_sum / n)
        report.cost_history.append(cost_sum / n)

    preds = model.predict_classes(net, xs)
    report.final_train_accuracy = float(np.mean(preds == ys))
    return report
