"""Class-conditional forest ensemble with an OR combination rule.

One general forest is fit on all samples; one extra forest per predicted
class is fit on that class's samples when enough of them exist. A sample
is flagged when the general forest or its class's forest votes 1, so the
ensemble's detected set always contains the general forest's.
"""

from dataclasses import dataclass, field

import numpy as np

from ..errors import ContractError
from .forest import ForestConfig, RandomForest, fit_forest_arrays


@dataclass
class EnsembleDetector:
    general: RandomForest
    per_class: dict = field(default_factory=dict)
    min_class_samples: int = 20

    def to_dict(self):
        return {
            "general": self.general.to_dict(),
            "per_class": {str(k): f.to_dict() for k, f in self.per_class.items()},
            "min_class_samples": self.min_class_samples,
        }

    @classmethod
    def from_dict(cls, doc):
        return cls(
            general=RandomForest.from_dict(doc["general"]),
            per_class={int(k): RandomForest.from_dict(v)
                       for k, v in doc["per_class"].items()},
            min_class_samples=int(doc["min_class_samples"]),
        )


def fit_ensemble(features, labels, predicted, cfg=None, seed=0, min_class_samples=20,
                 threads=1):
    """Fit the general forest plus one forest per well-populated class.

    Classes with fewer than min_class_samples training samples get no
    forest and fall back to the general one at prediction time. Per-class
    seeds derive from (seed, class id), so which classes are present does
    not perturb the others.
    """
    features = np.asarray(features, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    predicted = np.asarray(predicted, dtype=np.int64)
    if features.shape[0] == 0:
        raise ContractError("cannot fit a detector on zero samples")
    if not (features.shape[0] == labels.shape[0] == predicted.shape[0]):
        raise ContractError("features, labels and predicted classes must align")
    cfg = cfg or ForestConfig()

    general = fit_forest_arrays(features, labels, cfg, seed, threads=threads)
    per_class = {}
    for cls_id in np.unique(predicted):
        mask = predicted == cls_id
        if int(mask.sum()) < min_class_samples:
            continue
        cls_seed = int(np.random.SeedSequence((seed, int(cls_id))).generate_state(1)[0])
        per_class[int(cls_id)] = fit_forest_arrays(
            features[mask], labels[mask], cfg, cls_seed, threads=threads)
    return EnsembleDetector(general=general, per_class=per_class,
                            min_class_samples=min_class_samples)


def predict_ensemble(det, features, predicted_class):
    """(label, score) for one sample: OR of votes, max of scores.

    A vote fraction of exactly 0.5 counts as a detection (flag as attack).
    """
    features = np.asarray(features, dtype=np.float64)
    score_g = det.general.score(features)
    forest = det.per_class.get(int(predicted_class))
    if forest is None:
        score = score_g
        label = 1 if score_g >= 0.5 else 0
    else:
        score_c = forest.score(features)
        score = max(score_g, score_c)
        label = 1 if (score_g >= 0.5 or score_c >= 0.5) else 0
    return label, score


def predict_ensemble_batch(det, features, predicted):
    """Vectorized predict_ensemble: (labels, ensemble scores, general scores)."""
    features = np.asarray(features, dtype=np.float64)
    labels = np.empty(features.shape[0], dtype=np.int64)
    scores = np.empty(features.shape[0])
    general_scores = np.empty(features.shape[0])
    for i, (row, cls_id) in enumerate(zip(features, predicted)):
        labels[i], scores[i] = predict_ensemble(det, row, cls_id)
        general_scores[i] = det.general.score(row)
    return labels, scores, general_scores
