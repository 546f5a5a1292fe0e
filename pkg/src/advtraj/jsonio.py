"""JSON reading/writing with reproducible float formatting.

Every real is emitted as decimal with 17 significant digits, which
round-trips float64 exactly, so rerunning a pipeline with the same seed
produces byte-identical files. The reader is plain ``json.loads``.
"""

import json
import math

import numpy as np

from .errors import FormatError


def format_real(x):
    """Render a float with 17 significant digits (exact float64 round-trip)."""
    if not math.isfinite(x):
        raise ValueError(f"refusing to serialize non-finite real {x!r}")
    return format(float(x), ".17g")


def _encode(obj, parts):
    if isinstance(obj, dict):
        parts.append("{")
        for i, (key, val) in enumerate(obj.items()):
            if not isinstance(key, str):
                raise TypeError(f"JSON object keys must be str, got {type(key).__name__}")
            if i:
                parts.append(", ")
            parts.append(json.dumps(key))
            parts.append(": ")
            _encode(val, parts)
        parts.append("}")
    elif isinstance(obj, (list, tuple)):
        parts.append("[")
        for i, val in enumerate(obj):
            if i:
                parts.append(", ")
            _encode(val, parts)
        parts.append("]")
    elif isinstance(obj, np.ndarray):
        _encode(obj.tolist(), parts)
    elif isinstance(obj, (bool, np.bool_)):
        parts.append("true" if obj else "false")
    elif isinstance(obj, (int, np.integer)):
        parts.append(str(int(obj)))
    elif isinstance(obj, (float, np.floating)):
        parts.append(format_real(float(obj)))
    elif isinstance(obj, str):
        parts.append(json.dumps(obj))
    elif obj is None:
        parts.append("null")
    else:
        raise TypeError(f"cannot serialize {type(obj).__name__}")


def dumps(obj):
    """Serialize to a JSON string with deterministic real formatting."""
    parts = []
    _encode(obj, parts)
    return "".join(parts)


def dump(obj, path):
    """Write ``obj`` as JSON to ``path`` (trailing newline included)."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps(obj))
        fh.write("\n")


def load(path):
    """Parse a JSON document, raising FormatError with line/column context."""
    with open(path, "r", encoding="utf-8") as fh:
        text = fh.read()
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
