"""Detection experiments over bundles, plus out-of-distribution detection.

Every report row carries the forest-ensemble metrics (accuracy, detection
rate of successful adversarials, false-positive rate, class-agnostic
AUROC) next to the quantile-detector metrics, the attack success rate, and
the classifier's clean accuracy, so one run answers both how well the
learned detector does and how far the no-training cost thresholds get.
"""

import csv
from dataclasses import dataclass, field

import numpy as np

from .. import jsonio, model
from ..detect import (
    features_batch,
    fit_ensemble,
    fit_quantile_detector,
    predict_ensemble_batch,
    predict_quantile,
)
from ..detect.forest import ForestConfig
from ..detect.metrics import auroc
from ..errors import ContractError

REPORT_COLUMNS = [
    "attack", "detection_accuracy", "tpr_all", "tpr_successful", "fpr", "auroc",
    "attack_success_rate", "classifier_accuracy",
    "quantile_accuracy", "quantile_tpr", "quantile_fpr",
    "n_train", "n_test",
]


@dataclass
class DetectorSettings:
    forest: ForestConfig = field(default_factory=ForestConfig)
    min_class_samples: int = 20
    seed: int = 0

    def to_dict(self):
        return {"forest": self.forest.to_dict(),
                "min_class_samples": self.min_class_samples, "seed": self.seed}


@dataclass
class ExperimentReport:
    rows: list = field(default_factory=list)
    config: dict = field(default_factory=dict)
    seeds: dict = field(default_factory=dict)

    def to_dict(self):
        return {"rows": self.rows, "config": self.config, "seeds": self.seeds}

    def write(self, json_path, csv_path=None):
        """Report as JSON, plus an optional flat CSV of the rows."""
        jsonio.dump(self.to_dict(), json_path)
        if csv_path is None:
            return
        with open(csv_path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh)
            writer.writerow(REPORT_COLUMNS)
            for row in self.rows:
                out = []
                for key in REPORT_COLUMNS:
                    value = row.get(key)
                    if isinstance(value, float):
                        out.append(jsonio.format_real(value))
                    elif value is None:
                        out.append("")
                    else:
                        out.append(value)
                writer.writerow(out)


def _featurize(net, points):
    """Features, net predictions, and transport costs for a point set."""
    if points is None or len(points) == 0:
        empty = np.zeros(0)
        return np.zeros((0, 2 * net.depth)), empty.astype(np.int64), empty
    preds, trajs = model.predict_batch(net, points)
    return features_batch(trajs), preds, model.batch_costs(trajs)


def _training_table(net, bundle):
    """Stacked detection-training rows: clean (0), noisy (0), adversarial (1)."""
    feats_c, preds_c, costs_c = _featurize(net, bundle.clean_train)
    feats_n, preds_n, _ = _featurize(net, bundle.noisy_train)
    feats_a, preds_a, _ = _featurize(net, bundle.adv_train)
    feats = np.concatenate([feats_c, feats_n, feats_a])
    preds = np.concatenate([preds_c, preds_n, preds_a])
    labels = np.concatenate([
        np.zeros(len(feats_c) + len(feats_n), dtype=np.int64),
        np.ones(len(feats_a), dtype=np.int64),
    ])
    return feats, labels, preds, costs_c


def fit_bundle_detector(net, bundle, settings, threads=1):
    """Ensemble + quantile detectors from a bundle's training half."""
    feats, labels, preds, clean_costs = _training_table(net, bundle)
    detector = fit_ensemble(feats, labels, preds, cfg=settings.forest, seed=settings.seed,
                            min_class_samples=settings.min_class_samples, threads=threads)
    quantile = fit_quantile_detector(clean_costs)
    return detector, quantile


def _evaluate(net, detector, quantile, bundle):
    """All metrics of one bundle's test half."""
    feats_c, preds_c, costs_c = _featurize(net, bundle.clean_test)
    feats_n, preds_n, costs_n = _featurize(net, bundle.noisy_test)
    feats_a, preds_a, costs_a = _featurize(net, bundle.adv_test)
    feats = np.concatenate([feats_c, feats_n, feats_a])
    preds = np.concatenate([preds_c, preds_n, preds_a])
    truth = np.concatenate([
        np.zeros(len(feats_c) + len(feats_n), dtype=np.int64),
        np.ones(len(feats_a), dtype=np.int64),
    ])
    if truth.size == 0 or truth.min() == truth.max():
        raise ContractError("degenerate bundle: test half needs clean and adversarial samples")

    flagged, _, general_scores = predict_ensemble_batch(detector, feats, preds)
    general_flagged = general_scores >= 0.5
    if np.any(general_flagged & (flagged == 0)):
        raise RuntimeError("ensemble OR rule violated: general detections must be kept")

    n_clean = len(feats_c) + len(feats_n)
    clean_flagged = flagged[:n_clean]
    adv_flagged = flagged[n_clean:]

    successful = bundle.adv_test_success & bundle.clean_test_correct
    tpr_successful = float(np.mean(adv_flagged[successful])) if successful.any() else None

    accuracy = float(np.mean(flagged == truth))
    tpr_all = float(np.mean(adv_flagged == 1))
    fpr = float(np.mean(clean_flagged == 1))
    if len(feats_n) == 0 and len(feats_c) == len(feats_a):
        # balanced test set without noisy copies: accuracy decomposes exactly
        if abs(accuracy - (tpr_all + (1.0 - fpr)) / 2.0) > 1e-9:
            raise RuntimeError("balanced-accuracy identity violated in evaluation")

    costs = np.concatenate([costs_c, costs_n, costs_a])
    q_flagged = predict_quantile(quantile, costs)

    success_all = np.concatenate([bundle.adv_train_success, bundle.adv_test_success])
    return {
        "attack": bundle.attack_kind,
        "detection_accuracy": accuracy,
        "tpr_all": tpr_all,
        "tpr_successful": tpr_successful,
        "fpr": fpr,
        "auroc": float(auroc(general_scores, truth)),
        "attack_success_rate": float(np.mean(success_all)),
        "classifier_accuracy": bundle.classifier_accuracy,
        "quantile_accuracy": float(np.mean(q_flagged == truth)),
        "quantile_tpr": float(np.mean(q_flagged[n_clean:] == 1)),
        "quantile_fpr": float(np.mean(q_flagged[:n_clean] == 1)),
        "n_train": int(len(bundle.clean_train) + len(bundle.adv_train)
                       + (len(bundle.noisy_train) if bundle.noisy_train is not None else 0)),
        "n_test": int(truth.size),
    }


def run_seen(net, bundle, settings, threads=1):
    """Fit on the bundle's training half, evaluate on its test half."""
    detector, quantile = fit_bundle_detector(net, bundle, settings, threads=threads)
    report = ExperimentReport(seeds={"detector": settings.seed})
    report.config = {"mode": "seen", "detector": settings.to_dict(),
                     "attack": bundle.attack_kind, "epsilon": bundle.epsilon,
                     "norm": bundle.norm}
    report.rows.append(_evaluate(net, detector, quantile, bundle))
    return report


def run_unseen(net, train_bundle, test_bundles, settings, threads=1):
    """One detector fit on the training attack, evaluated per unseen attack."""
    if train_bundle.attack_kind != "fgm":
        raise ContractError(
            f"unseen-attack training bundle must come from fgm, got {train_bundle.attack_kind}")
    detector, quantile = fit_bundle_detector(net, train_bundle, settings, threads=threads)
    report = ExperimentReport(seeds={"detector": settings.seed})
    report.config = {"mode": "unseen", "detector": settings.to_dict(),
                     "train_attack": train_bundle.attack_kind,
                     "test_attacks": list(test_bundles)}
    for _, bundle in test_bundles.items():
        report.rows.append(_evaluate(net, detector, quantile, bundle))
    return report


def run_ood(net, first, second, third, settings, threads=1):
    """Fit first-vs-second, evaluate first-vs-third.

    In-distribution samples are labeled 0 throughout, the others 1. The
    first distribution's samples are reused between fit and evaluation, so
    passing third == second reduces to a training-style evaluation.
    """
    for name, ds in (("second", second), ("third", third)):
        if ds.dim != first.dim:
            raise ContractError(
                f"{name} distribution has dimension {ds.dim}, expected {first.dim}")

    feats_1, preds_1, costs_1 = _featurize(net, first.x)
    feats_2, preds_2, _ = _featurize(net, second.x)
    feats_3, preds_3, _ = _featurize(net, third.x)

    fit_feats = np.concatenate([feats_1, feats_2])
    fit_preds = np.concatenate([preds_1, preds_2])
    fit_labels = np.concatenate([np.zeros(len(feats_1), dtype=np.int64),
                                 np.ones(len(feats_2), dtype=np.int64)])
    detector = fit_ensemble(fit_feats, fit_labels, fit_preds, cfg=settings.forest,
                            seed=settings.seed, min_class_samples=settings.min_class_samples,
                            threads=threads)
    quantile = fit_quantile_detector(costs_1)

    eval_feats = np.concatenate([feats_1, feats_3])
    eval_preds = np.concatenate([preds_1, preds_3])
    truth = np.concatenate([np.zeros(len(feats_1), dtype=np.int64),
                            np.ones(len(feats_3), dtype=np.int64)])
    flagged, _, general_scores = predict_ensemble_batch(detector, eval_feats, eval_preds)

    _, trajs_3 = model.predict_batch(net, third.x)
    eval_costs = np.concatenate([costs_1, model.batch_costs(trajs_3)])
    q_flagged = predict_quantile(quantile, eval_costs)
    n_first = len(feats_1)

    classifier_accuracy = float(np.mean(model.predict_classes(net, first.x) == first.y))
    ood_tpr = float(np.mean(flagged[n_first:] == 1))
    row = {
        "attack": "ood",
        "detection_accuracy": float(np.mean(flagged == truth)),
        "tpr_all": ood_tpr,
        "tpr_successful": None,
        "ood_tpr": ood_tpr,
        "fpr": float(np.mean(flagged[:n_first] == 1)),
        "auroc": float(auroc(general_scores, truth)),
        "attack_success_rate": None,
        "classifier_accuracy": classifier_accuracy,
        "quantile_accuracy": float(np.mean(q_flagged == truth)),
        "quantile_tpr": float(np.mean(q_flagged[n_first:] == 1)),
        "quantile_fpr": float(np.mean(q_flagged[:n_first] == 1)),
        "n_train": int(fit_labels.size),
        "n_test": int(truth.size),
    }
    report = ExperimentReport(rows=[row], seeds={"detector": settings.seed})
    report.config = {"mode": "ood", "detector": settings.to_dict()}
    return report
