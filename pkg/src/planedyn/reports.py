"""Deterministic JSON output and config hashing."""
from __future__ import annotations

import hashlib
import json
import math
from pathlib import Path

import numpy as np


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"))


def config_hash(config: dict) -> str:
    return hashlib.sha256(canonical_json(config).encode()).hexdigest()


def _plain(obj):
    """Convert numpy scalars/arrays and tuples to JSON types; NaN/inf become None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        v = float(obj)
        return v if math.isfinite(v) else None
    return obj


def dumps(report: dict) -> str:
    return json.dumps(_plain(report), indent=2, sort_keys=True) + "\n"


def write_json(path, report: dict, chash: str | None = None) -> str:
    if chash is not None:
        report = dict(report, config_hash=chash)
    text = dumps(report)
    Path(path).write_text(text)
    return text
