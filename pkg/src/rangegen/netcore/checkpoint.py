"""Versioned JSON checkpoints.

Arrays are stored as shape plus row-major values. Python's JSON encoder
emits floats with shortest round-trip repr, so save/load is lossless at
64-bit precision.
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from rangegen.errors import ConfigurationError

FORMAT_VERSION = 1


def array_to_doc(a: np.ndarray) -> dict:
    a = np.asarray(a, dtype=float)
    return {"shape": list(a.shape), "data": a.ravel(order="C").tolist()}


def array_from_doc(doc: dict) -> np.ndarray:
    shape = tuple(int(s) for s in doc["shape"])
    data = np.asarray(doc["data"], dtype=float)
    if data.size != int(np.prod(shape, dtype=int)):
        raise ConfigurationError(
            f"array document has {data.size} values for shape {shape}")
    return data.reshape(shape, order="C")


def save_document(path: str | Path, payload: dict) -> None:
    doc = {"format_version": FORMAT_VERSION, **payload}
    text = json.dumps(doc, sort_keys=True, indent=1)
    Path(path).write_text(text + "\n", encoding="utf-8")


def load_document(path: str | Path) -> dict:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    version = doc.get("format_version")
    if version != FORMAT_VERSION:
        raise ConfigurationError(
            f"unsupported checkpoint format_version {version!r} in {path}")
    return doc
