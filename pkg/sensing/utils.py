"""
Utility functions for the sensing app
"""
import hashlib
import json
import math
from pathlib import Path
from typing import Any, Iterable

import numpy as np
import pandas as pd

# keys that change how a run executes but not what it computes
VOLATILE_KEYS = ('workers', 'output_dir')


def to_jsonable(value: Any) -> Any:
    """
    Convert numpy scalars and arrays to plain Python and non-finite floats to None.

    Args:
        value: Any nested structure of dicts, lists, tuples, numbers and arrays

    Returns:
        The same structure made of JSON-safe values
    """
    if isinstance(value, dict):
        return {str(k): to_jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [to_jsonable(v) for v in value]
    if isinstance(value, np.ndarray):
        return to_jsonable(value.tolist())
    if isinstance(value, (np.bool_, bool)):
        return bool(value)
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, (np.floating, float)):
        value = float(value)
        return value if math.isfinite(value) else None
    return value


def canonical_json(value: Any) -> str:
    """Sorted-key compact JSON, stable across runs"""
    return json.dumps(to_jsonable(value), sort_keys=True, separators=(',', ':'))


def config_hash(config: dict) -> str:
    """
    Content hash of a resolved experiment config.

    Args:
        config: Resolved config

    Returns:
        md5 hex digest of the canonical JSON without the volatile keys
    """
    stable = {k: v for k, v in config.items() if k not in VOLATILE_KEYS}
    return hashlib.md5(canonical_json(stable).encode()).hexdigest()


def write_json(path: Path, value: Any) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(value), indent=2, sort_keys=True) + '\n', encoding='utf-8')
    return path


def read_json(path: Path) -> Any:
    return json.loads(Path(path).read_text(encoding='utf-8'))


def write_frame(path: Path, frame: pd.DataFrame) -> Path:
    """Write a CSV with a header row and full float precision"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    frame.to_csv(path, index=False, float_format='%.12g')
    return path


def dotted_get(config: dict, path: Iterable[str]) -> Any:
    node = config
    for key in path:
        node = node[key]
    return node


def dotted_set(config: dict, path: Iterable[str], value: Any) -> None:
    keys = list(path)
    node = config
    for key in keys[:-1]:
        if node.get(key) is None:
            node[key] = {}
        node = node[key]
    node[keys[-1]] = value
