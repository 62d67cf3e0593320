"""File writers with lossless float formatting and run manifests."""

from __future__ import annotations

import csv
import json
import math
import platform
from pathlib import Path

import numpy as np

__all__ = ["fmt", "write_csv", "write_json", "to_jsonable", "chain_rows", "manifest"]

CHAIN_FIELDS = ("generation", "vertex", "parent")
TRAJECTORY_FIELDS = ("t", "x", "U")
SHOCK_FIELDS = ("s0", "s1", "x", "jump")
PATH_FIELDS = ("replica", "t", "k", "value")


def fmt(v):
    """Shortest round-trip text for reals; integers and strings unchanged."""
    if isinstance(v, (bool, np.bool_)):
        return int(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path, fields, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(fields)
        for r in rows:
            if isinstance(r, dict):
                r = [r[f] for f in fields]
            w.writerow([fmt(v) for v in r])
    return path


def to_jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return to_jsonable(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else str(x)
    return obj


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n")
    return path


def chain_rows(chain):
    """``(generation, vertex, parent)`` with 1-based indices; the initial column has parent 0."""
    for v in range(chain.initial_size):
        yield 0, v + 1, 0
    for m, counts in enumerate(chain.counts, start=1):
        parents = np.repeat(np.arange(1, len(counts) + 1), counts)
        for v, p in enumerate(parents, start=1):
            yield m, v, int(p)


def manifest(command: str, config, outputs, extra=None) -> dict:
    import scipy

    from . import __version__

    return {
        "command": command,
        "config_sha256": config.digest(),
        "config": config.to_dict(),
        "seed": config.seed,
        "outputs": sorted(str(Path(o).name) for o in outputs),
        "versions": {
            "treeflow": __version__,
            "numpy": np.__version__,
            "scipy": scipy.__version__,
            "python": platform.python_version(),
        },
        **(extra or {}),
    }
