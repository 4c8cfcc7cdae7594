"""Trace persistence: one CSV per metric, optional JSON snapshots, summaries."""

from __future__ import annotations

import csv
import hashlib
import json
from pathlib import Path

import numpy as np

from .errors import MissingInputError


def fmt(x) -> str:
    return format(float(x), ".17g")


def write_csv(path, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\r\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([fmt(v) if isinstance(v, (float, np.floating)) else v for v in row])


def read_csv(path):
    path = Path(path)
    if not path.exists():
        raise MissingInputError(f"missing trace file: {path}", path=str(path))
    with path.open(newline="") as fh:
        return list(csv.DictReader(fh))


def trace_dir(root, seed: int, variant: str) -> Path:
    return Path(root) / "traces" / f"seed_{seed:06d}" / variant


def write_trace(root, trace, metrics=None, snapshots: bool = False) -> Path:
    out = trace_dir(root, trace.seed, trace.variant)
    out.mkdir(parents=True, exist_ok=True)
    for name, values in trace.metrics.items():
        if metrics is not None and name not in metrics:
            continue
        rows = ((r, a, values[r, a]) for r in range(values.shape[0]) for a in range(values.shape[1]))
        write_csv(out / f"{name}.csv", ["round", "agent", "value"], rows)
    if snapshots:
        write_snapshots(out / "snapshots.json", trace)
    return out


def write_snapshots(path, trace):
    if trace.engine == "finite" and trace.private is not None:
        payload = {"engine": "finite", "parameters": [str(x) for x in trace.labels],
                   "public": trace.public.tolist(), "private": trace.private.tolist()}
    elif trace.precisions is not None:
        payload = {"engine": "gaussian", "mean": trace.means.tolist(), "precision": trace.precisions.tolist()}
    else:
        payload = {"engine": trace.engine, "mean": None if trace.means is None else trace.means.tolist()}
    Path(path).write_text(json.dumps(payload))


def read_metric(root, seed: int, variant: str, name: str) -> np.ndarray:
    """Load a metric CSV back into a (rounds + 1, agents) array."""
    rows = read_csv(trace_dir(root, seed, variant) / f"{name}.csv")
    n_rounds = max(int(r["round"]) for r in rows) + 1
    n_agents = max(int(r["agent"]) for r in rows) + 1
    out = np.empty((n_rounds, n_agents))
    for r in rows:
        out[int(r["round"]), int(r["agent"])] = float(r["value"])
    return out


def config_hash(obj) -> str:
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def dump_json(path, obj):
    Path(path).write_text(json.dumps(obj, indent=2, sort_keys=True, allow_nan=False) + "\n")
