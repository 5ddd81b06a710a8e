"""Deterministic JSON/CSV artifact writing with schema versions and content hashes."""

from __future__ import annotations

import csv
import hashlib
import json
import math
from pathlib import Path

import numpy as np

SCHEMA_VERSION = 1


def _plain(obj):
    """JSON-safe copy: numpy scalars/arrays to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, complex):
        return [_plain(obj.real), _plain(obj.imag)]
    return obj


def canonical_json(obj) -> str:
    return json.dumps(_plain(obj), sort_keys=True, separators=(",", ":"), allow_nan=False)


def content_hash(obj) -> str:
    return hashlib.sha256(canonical_json(obj).encode("utf-8")).hexdigest()[:16]


def file_hash(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()[:16]


def write_json(path, payload: dict, kind: str, config_hash: str | None = None, inputs_hash: str | None = None) -> None:
    doc = {"schema_version": SCHEMA_VERSION, "kind": kind, "config_hash": config_hash,
           "inputs_hash": inputs_hash, **_plain(payload)}
    text = json.dumps(doc, sort_keys=True, indent=2, allow_nan=False)
    ensure_parent(path)
    Path(path).write_text(text + "\n", encoding="utf-8")


def read_json(path, kind: str | None = None) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    if doc.get("schema_version") != SCHEMA_VERSION:
        raise ValueError(f"{path}: unsupported schema_version {doc.get('schema_version')!r}")
    if kind is not None and doc.get("kind") != kind:
        raise ValueError(f"{path}: expected a {kind} document, found {doc.get('kind')!r}")
    return doc


def sidecar(path) -> Path:
    """Metadata file that accompanies a CSV artifact."""
    p = Path(path)
    return p.with_name(p.stem + ".meta.json")


def ensure_parent(path) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)


def write_matrix_csv(path, A: np.ndarray) -> None:
    A = np.asarray(A, dtype=float)
    ensure_parent(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow([f"c{j}" for j in range(A.shape[1])])
        for row in A:
            wr.writerow([repr(float(x)) for x in row])


def read_matrix_csv(path) -> np.ndarray:
    with open(path, newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    return np.array([[float(x) for x in r] for r in rows[1:]])


def write_rows_csv(path, header: list[str], rows) -> None:
    ensure_parent(path)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(header)
        for r in rows:
            wr.writerow([repr(x) if isinstance(x, float) else x for x in r])
