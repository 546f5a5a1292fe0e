"""Detection-dataset construction.

The classifier's test set is split 0.9/0.1 into clean train/test halves.
Every clean sample gets an adversarial counterpart — kept whether or not
the attack succeeded, which is the harder detection setting and also
catches failed interference attempts. Optionally each clean sample also
gets a noise-perturbed copy (uniform in the attack's epsilon-ball) that
counts as clean during detector training.
"""

from dataclasses import dataclass, field

import numpy as np

from .. import attacks, model
from ..errors import ContractError


@dataclass
class DetectionBundle:
    """Point sets for one attack's detection experiment.

    clean_* hold the split classifier test data, adv_* their attacked
    counterparts (|adv_x| == |clean_x| by construction), noisy_* the
    optional perturbed-but-clean copies. Bookkeeping arrays record the true
    class labels, whether each attack changed the prediction, and whether
    each clean sample was correctly classified (both needed for the
    successful-adversarial detection rate).
    """

    clean_train: np.ndarray
    clean_test: np.ndarray
    adv_train: np.ndarray
    adv_test: np.ndarray
    y_train: np.ndarray
    y_test: np.ndarray
    adv_train_success: np.ndarray
    adv_test_success: np.ndarray
    clean_train_correct: np.ndarray
    clean_test_correct: np.ndarray
    classifier_accuracy: float
    attack_kind: str
    epsilon: float
    norm: str
    noisy_train: np.ndarray | None = None
    noisy_test: np.ndarray | None = None
    train_indices: np.ndarray = field(default=None, repr=False)
    test_indices: np.ndarray = field(default=None, repr=False)


def _noise_in_ball(rng, x, epsilon, norm):
    if norm == "linf":
        return x + rng.uniform(-epsilon, epsilon, size=x.shape)
    direction = rng.standard_normal(x.shape)
    lengths = np.sqrt(np.sum(direction * direction, axis=1, keepdims=True))
    lengths[lengths == 0] = 1.0
    radii = epsilon * rng.uniform(0.0, 1.0, size=(x.shape[0], 1)) ** (1.0 / x.shape[1])
    return x + direction / lengths * radii


def build_bundle(net, data, attack_cfg, split_seed, with_noise=False, threads=1):
    """Split, attack, and assemble one DetectionBundle.

    The split is seeded and disjoint by construction. Attack failures are
    never errors: the (possibly unsuccessful) perturbed point is kept with
    its success flag.
    """
    n = data.n
    if n < 10:
        raise ContractError(f"need at least 10 samples to split 0.9/0.1, got {n}")
    rng = np.random.default_rng(split_seed)
    perm = rng.permutation(n)
    n_train = int(round(0.9 * n))
    train_idx, test_idx = perm[:n_train], perm[n_train:]

    preds = model.predict_classes(net, data.x)
    correct = preds == data.y
    classifier_accuracy = float(np.mean(correct))

    results_train = attacks.attack_batch(net, data.x[train_idx], data.y[train_idx],
                                         attack_cfg, box=data.box, threads=threads)
    results_test = attacks.attack_batch(net, data.x[test_idx], data.y[test_idx],
                                        attack_cfg, box=data.box, threads=threads)

    bundle = DetectionBundle(
        clean_train=data.x[train_idx].copy(),
        clean_test=data.x[test_idx].copy(),
        adv_train=np.stack([r.adversarial for r in results_train]),
        adv_test=np.stack([r.adversarial for r in results_test]),
        y_train=data.y[train_idx].copy(),
        y_test=data.y[test_idx].copy(),
        adv_train_success=np.array([r.success for r in results_train], dtype=bool),
        adv_test_success=np.array([r.success for r in results_test], dtype=bool),
        clean_train_correct=correct[train_idx].copy(),
        clean_test_correct=correct[test_idx].copy(),
        classifier_accuracy=classifier_accuracy,
        attack_kind=attack_cfg.kind,
        epsilon=attack_cfg.epsilon,
        norm=attack_cfg.norm,
        train_indices=train_idx,
        test_indices=test_idx,
    )
    if with_noise:
        eps = attack_cfg.epsilon if attack_cfg.epsilon > 0 else 0.1
        noise_rng = np.random.default_rng(np.random.SeedSequence((split_seed, 1)))
        lo, hi = data.box
        bundle.noisy_train = np.clip(
            _noise_in_ball(noise_rng, bundle.clean_train, eps, attack_cfg.norm), lo, hi)
        bundle.noisy_test = np.clip(
            _noise_in_ball(noise_rng, bundle.clean_test, eps, attack_cfg.norm), lo, hi)
    _check_bundle(bundle)
    return bundle


def _check_bundle(bundle):
    if bundle.adv_train.shape != bundle.clean_train.shape:
        raise ContractError("adversarial train set does not mirror the clean train set")
    if bundle.adv_test.shape != bundle.clean_test.shape:
        raise ContractError("adversarial test set does not mirror the clean test set")
    if bundle.train_indices is not None and bundle.test_indices is not None:
        overlap = np.intersect1d(bundle.train_indices, bundle.test_indices)
        if overlap.size:
            raise ContractError(f"train/test splits overlap at indices {overlap[:5]}")
