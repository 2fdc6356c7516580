"""Model checkpoint files: a JSON document with a versioned header and the
flat float64 parameter vector encoded base64 little-endian, so round-trips
are bit-exact and re-runs diff cleanly."""
from __future__ import annotations

import base64
import json

import numpy as np

FORMAT = "purelab-checkpoint"
VERSION = 1


def _encode(flat: np.ndarray) -> str:
    return base64.b64encode(np.ascontiguousarray(flat, dtype="<f8").tobytes()).decode("ascii")


def _decode(blob: str, n: int) -> np.ndarray:
    raw = base64.b64decode(blob.encode("ascii"))
    flat = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    if flat.size != n:
        raise ValueError(f"checkpoint holds {flat.size} parameters, header says {n}")
    return flat


def save_checkpoint(path: str, model_type: str, arch: list[dict], flat_params: np.ndarray,
                    meta: dict | None = None) -> None:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "type": model_type,
        "arch": arch,
        "n_params": int(flat_params.size),
        "meta": meta or {},
        "params": _encode(flat_params),
    }
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        json.dump(doc, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path: str, expect_type: str | None = None) -> dict:
    """Returns the decoded document with 'params' as a float64 array."""
    with open(path, "r", encoding="ascii") as fh:
        doc = json.load(fh)
    if doc.get("format") != FORMAT:
        raise ValueError(f"{path} is not a {FORMAT} file")
    if doc.get("version") != VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')}")
    if expect_type is not None and doc.get("type") != expect_type:
        raise ValueError(f"expected a {expect_type} checkpoint, found {doc.get('type')!r}")
    doc["params"] = _decode(doc["params"], doc["n_params"])
    return doc
