"""Deterministic CSV/JSON writers and run manifests."""
from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import __version__


def fmt(x) -> str:
    """17 significant digits for floats; locale independent."""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, str):
        return x
    x = float(x)
    if math.isnan(x):
        return "nan"
    return format(x, ".17g")


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="ascii") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def _jsonable(o):
    if isinstance(o, dict):
        return {str(k): _jsonable(v) for k, v in o.items()}
    if isinstance(o, (list, tuple)):
        return [_jsonable(v) for v in o]
    if isinstance(o, np.ndarray):
        return [_jsonable(v) for v in o.tolist()]
    if isinstance(o, (np.bool_,)):
        return bool(o)
    if isinstance(o, (np.integer,)):
        return int(o)
    if isinstance(o, (float, np.floating)):
        o = float(o)
        return o if math.isfinite(o) else None
    return o


def dumps(obj) -> str:
    return json.dumps(_jsonable(obj), indent=2, sort_keys=True)


def write_json(path, obj):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(obj) + "\n")
    return path


@dataclass
class RunManifest:
    subcommand: str
    params: dict
    code_version: str = __version__
    cache_hits: int = 0
    wall_time: float = 0.0
    outputs: list = field(default_factory=list)
    _t0: float = field(default_factory=time.perf_counter, repr=False)

    def finish(self):
        self.wall_time = time.perf_counter() - self._t0
        return self

    def to_dict(self):
        return {"subcommand": self.subcommand, "params": self.params, "code_version": self.code_version,
                "cache_hits": self.cache_hits, "wall_time_s": self.wall_time, "outputs": self.outputs}


def sidecar_path(path) -> Path:
    path = Path(path)
    return path.with_name(path.name + ".json")
