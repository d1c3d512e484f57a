"""JSON with round-trip float precision, CSV tables and run manifests."""

from __future__ import annotations

import csv
import hashlib
import json
import math
import os
import platform
import sys
import time
from pathlib import Path

import numpy as np


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _fmt(x: float) -> str:
    if math.isnan(x):
        return "NaN"
    if math.isinf(x):
        return "Infinity" if x > 0 else "-Infinity"
    s = f"{x:.17g}"
    if "e" not in s and "." not in s and "n" not in s:
        s += ".0"
    return s


class _Encoder(json.JSONEncoder):
    def iterencode(self, o, _one_shot=False):
        # route floats through 17 significant digits
        return json.encoder._make_iterencode(
            {}, self.default, json.encoder.py_encode_basestring_ascii, self.indent, _fmt,
            self.key_separator, self.item_separator, self.sort_keys, self.skipkeys, _one_shot,
        )(o, 0)


def dumps(obj, indent: int | None = 2) -> str:
    return json.dumps(_clean(obj), cls=_Encoder, indent=indent, sort_keys=False)


def write_json(path, obj) -> str:
    text = dumps(obj)
    Path(path).write_text(text + "\n")
    return text


def write_csv(path, header, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 16), b""):
            h.update(chunk)
    return h.hexdigest()


def write_manifest(outdir, command: str, config: dict, seed, extra: dict | None = None) -> dict:
    """Record inputs, environment and hashes of every file in ``outdir``."""
    from . import __version__
    from .pbnorm import BACKEND

    outdir = Path(outdir)
    files = {p.name: sha256_file(p) for p in sorted(outdir.iterdir()) if p.is_file() and p.name != "manifest.json"}
    man = {
        "command": command,
        "config": config,
        "seed": seed,
        "version": __version__,
        "backend": BACKEND,
        "python": sys.version.split()[0],
        "numpy": np.__version__,
        "platform": platform.platform(),
        "created": time.strftime("%Y-%m-%dT%H:%M:%S"),
        "files": files,
    }
    if extra:
        man.update(extra)
    write_json(outdir / "manifest.json", man)
    return man


def dump_partition(partition, outdir) -> dict:
    """Per-slice CSV stacks (x, y, value) plus a JSON index."""
    outdir = Path(outdir)
    os.makedirs(outdir, exist_ok=True)
    s = partition.surface
    X, Y = s.coords()
    names = []
    for k in range(partition.n):
        name = f"slice_{int(partition.t_index[k]):05d}.csv"
        write_csv(outdir / name, ["x", "y", "value"],
                  zip(X.ravel(), Y.ravel(), partition.fields[k].ravel()))
        names.append(name)
    index = {"kind": partition.kind, "n_t": int(partition.n_t), "t_index": partition.t_index,
             "weights": partition.weights, "surface": s.describe(), "files": names}
    write_json(outdir / "partition.json", index)
    return index
