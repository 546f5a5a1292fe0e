"""Strict run-configuration documents.

One JSON document holds per-command sections (data, model, train, attack,
detect, experiment) plus the master seed and output directory. Parsing is
strict: any unknown top-level or section key is fatal, so a typo cannot
silently fall back to a default and corrupt an experiment.
"""

import numpy as np

from . import jsonio
from .attacks import AttackConfig
from .detect.forest import ForestConfig
from .errors import ConfigError
from .harness.data import SyntheticSpec
from .harness.experiments import DetectorSettings
from .trainer import TrainConfig

# section -> key -> (expected types, default)
SCHEMAS = {
    "data": {
        "kind": (str, "circles"),
        "n": (int, 2000),
        "noise": ((int, float), 0.08),
        "shift": (list, None),
        "path": (str, None),
    },
    "model": {
        "width": (int, 16),
        "blocks": (int, 9),
        "classes": (int, 2),
        "h": ((int, float), 1.0),
        "gain": ((int, float), 0.5),
        "head_gain": ((int, float), 1.0),
        "checkpoint": (str, None),
    },
    "train": {
        "mode": (str, "vanilla"),
        "learning_rate": ((int, float), 0.2),
        "epochs": (int, 60),
        "batch_size": (int, 64),
        "growth_factor": ((int, float), 1.0),
        "steps_per_update": (int, 1),
        "initial_multiplier": ((int, float), 1.0),
        "clip_norm": ((int, float), 5.0),
    },
    "attack": {
        "kind": (str, "fgm"),
        "epsilon": ((int, float), 0.3),
        "norm": (str, "linf"),
        "steps": (int, 0),
        "step_size": ((int, float), 0.0),
        "random_start": (bool, True),
        "overshoot": ((int, float), 0.02),
        "checkpoint": (str, None),
        "dataset": (str, None),
    },
    "detect": {
        "n_trees": (int, 100),
        "max_depth": (int, 12),
        "min_leaf": (int, 2),
        "features_per_split": (int, None),
        "min_class_samples": (int, 20),
        "with_noise": (bool, False),
        "checkpoint": (str, None),
        "dataset": (str, None),
        "train_features": (str, None),
        "test_features": (str, None),
    },
    "experiment": {
        "test_n": (int, 1000),
        "test_attacks": (list, None),
        "second": (dict, None),
        "third": (dict, None),
        "ood_n": (int, 200),
    },
}
TOP_LEVEL = {"seed", "out"} | set(SCHEMAS)


def validate(doc, path="config"):
    """Reject unknown keys and badly typed values anywhere in the document."""
    if not isinstance(doc, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    for key in doc:
        if key not in TOP_LEVEL:
            raise ConfigError(f"{path}: unknown top-level key {key!r}")
    if "seed" in doc and not isinstance(doc["seed"], int):
        raise ConfigError(f"{path}: seed must be an integer")
    if "out" in doc and not isinstance(doc["out"], str):
        raise ConfigError(f"{path}: out must be a string")
    for section, schema in SCHEMAS.items():
        if section not in doc:
            continue
        body = doc[section]
        if not isinstance(body, dict):
            raise ConfigError(f"{path}: section {section!r} must be an object")
        _validate_section(body, schema, f"{path}:{section}")
    return doc


def _validate_section(body, schema, where):
    for key, value in body.items():
        if key not in schema:
            raise ConfigError(f"{where}: unknown key {key!r}")
        types, _ = schema[key]
        if value is None:
            continue
        ok = isinstance(value, types)
        if ok and types is not bool and isinstance(value, bool):
            ok = False  # bools are ints in Python; don't accept them for numbers
        if not ok:
            names = types.__name__ if isinstance(types, type) else "/".join(
                t.__name__ for t in types)
            raise ConfigError(
                f"{where}: key {key!r} expects {names}, got {type(value).__name__}")


def load_config(path):
    """Read and validate a config document."""
    return validate(jsonio.load(path), path=str(path))


def section(doc, name):
    """The named section merged over schema defaults."""
    schema = SCHEMAS[name]
    merged = {key: default for key, (_, default) in schema.items()}
    merged.update(doc.get(name, {}))
    return merged


def derive_seed(master, purpose):
    """Stable per-purpose seed stream from the master seed."""
    return int(np.random.SeedSequence((int(master), int(purpose))).generate_state(1)[0])


# purposes for derive_seed; spacing leaves room for per-attack offsets
SEED_DATA = 0
SEED_TEST_DATA = 1
SEED_INIT = 2
SEED_TRAIN = 3
SEED_SPLIT = 4
SEED_ATTACK = 5
SEED_DETECTOR = 6
SEED_SECOND = 7
SEED_THIRD = 8
SEED_OOD_POINTS = 9


def data_spec(doc, seed):
    """SyntheticSpec from the data section."""
    body = section(doc, "data")
    shift = tuple(body["shift"]) if body["shift"] else (0.0, 0.0)
    return SyntheticSpec(kind=body["kind"], n=body["n"], noise=float(body["noise"]),
                         seed=seed, shift=shift)


def spec_from_dict(body, seed):
    """SyntheticSpec from an inline dict (validated against the data schema)."""
    _validate_section(body, SCHEMAS["data"], "config:experiment")
    merged = {key: default for key, (_, default) in SCHEMAS["data"].items()}
    merged.update(body)
    shift = tuple(merged["shift"]) if merged["shift"] else (0.0, 0.0)
    return SyntheticSpec(kind=merged["kind"], n=merged["n"], noise=float(merged["noise"]),
                         seed=seed, shift=shift)


def train_config(doc, seed, mode=None):
    body = section(doc, "train")
    return TrainConfig(
        mode=mode or body["mode"],
        learning_rate=float(body["learning_rate"]),
        epochs=body["epochs"],
        batch_size=body["batch_size"],
        growth_factor=float(body["growth_factor"]),
        steps_per_update=body["steps_per_update"],
        initial_multiplier=float(body["initial_multiplier"]),
        clip_norm=float(body["clip_norm"]) if body["clip_norm"] else None,
        seed=seed,
    )


def attack_config(doc, seed, kind=None):
    body = section(doc, "attack")
    return AttackConfig(
        kind=kind or body["kind"],
        epsilon=float(body["epsilon"]),
        norm=body["norm"],
        steps=body["steps"],
        step_size=float(body["step_size"]),
        random_start=body["random_start"],
        overshoot=float(body["overshoot"]),
        seed=seed,
    )


def detector_settings(doc, seed):
    body = section(doc, "detect")
    forest = ForestConfig(n_trees=body["n_trees"], max_depth=body["max_depth"],
                          min_leaf=body["min_leaf"],
                          features_per_split=body["features_per_split"])
    return DetectorSettings(forest=forest, min_class_samples=body["min_class_samples"],
                            seed=seed)
