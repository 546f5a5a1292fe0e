"""Per-block trajectory features for detection.

Each residual block contributes two numbers describing where its residue
vector sits in space: the squared 2-norm averaged over the dimension, and
the cosine similarity to the all-ones vector. A trajectory through M
blocks therefore yields 2M features, ordered (norm_0, cos_0, norm_1,
cos_1, ...). A zero residue has undefined cosine; it is defined as 0 here.
"""

import csv
from dataclasses import dataclass

import numpy as np

from .. import jsonio
from ..errors import ContractError, FormatError


@dataclass
class DetectionSample:
    """One row of a detection dataset: features, 0/1 label (1 means
    adversarial), and the class the network predicted for the input."""

    features: np.ndarray
    label: int
    predicted_class: int

    def __post_init__(self):
        if self.label not in (0, 1):
            raise ContractError(f"detection label must be 0 or 1, got {self.label}")


def extract_features(traj):
    """Feature vector of length 2M for one trajectory."""
    residues = traj.residues
    m, d = residues.shape
    sq = np.sum(residues * residues, axis=1)
    norms = sq / d
    lengths = np.sqrt(sq)
    ones_dot = residues.sum(axis=1)
    with np.errstate(invalid="ignore", divide="ignore"):
        cosines = np.where(lengths > 0.0, ones_dot / (lengths * np.sqrt(d)), 0.0)
    out = np.empty(2 * m)
    out[0::2] = norms
    out[1::2] = cosines
    return out


def features_batch(trajs):
    """Stack extract_features over a list of trajectories into (n, 2M)."""
    if not trajs:
        return np.zeros((0, 0))
    return np.stack([extract_features(t) for t in trajs])


def feature_names(num_blocks):
    names = []
    for i in range(num_blocks):
        names.extend([f"block_{i}_norm", f"block_{i}_cos"])
    return names


def write_feature_csv(path, features, labels, predicted):
    """Feature table with header block_0_norm,block_0_cos,...,label,predicted_class."""
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] % 2 != 0:
        raise ContractError(f"features must be (n, 2M), got {features.shape}")
    header = feature_names(features.shape[1] // 2) + ["label", "predicted_class"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for row, label, pred in zip(features, labels, predicted):
            writer.writerow([jsonio.format_real(v) for v in row] + [int(label), int(pred)])


def read_feature_csv(path):
    """Inverse of write_feature_csv: (features, labels, predicted_class)."""
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(f"{path}: empty feature file") from None
        if len(header) < 4 or header[-2:] != ["label", "predicted_class"]:
            raise FormatError(f"{path}: unexpected feature header {header!r}")
        width = len(header) - 2
        feats, labels, preds = [], [], []
        for lineno, row in enumerate(reader, start=2):
            if len(row) != len(header):
                raise FormatError(f"{path}: line {lineno}: expected {len(header)} fields")
            feats.append([float(v) for v in row[:width]])
            labels.append(int(row[width]))
            preds.append(int(row[width + 1]))
    return np.asarray(feats, dtype=np.float64), np.asarray(labels, dtype=np.int64), np.asarray(
        preds, dtype=np.int64)
