"""JSON persistence for trained models.

Every model document carries a ``format`` tag ("lstm/1", "arima/1",
"forest/1") and stores weight tensors as nested arrays with an explicit
``shape`` field; loaders reject shape mismatches instead of silently
broadcasting.
"""

from __future__ import annotations

import json

import numpy as np

from .errors import DataFormatError, MissingInputError


def encode_array(arr: np.ndarray) -> dict:
    arr = np.asarray(arr, dtype=float)
    return {"shape": list(arr.shape), "data": arr.tolist()}


def decode_array(obj, name: str) -> np.ndarray:
    if not isinstance(obj, dict) or "shape" not in obj or "data" not in obj:
        raise DataFormatError(f"tensor {name!r} must be an object with shape and data")
    arr = np.asarray(obj["data"], dtype=float)
    expected = tuple(int(d) for d in obj["shape"])
    if arr.shape != expected:
        raise DataFormatError(
            f"tensor {name!r}: declared shape {expected} but data has {arr.shape}"
        )
    if not np.all(np.isfinite(arr)):
        raise DataFormatError(f"tensor {name!r} contains non-finite entries")
    return arr


def write_document(doc: dict, path) -> None:
    with open(path, "w") as fh:
        json.dump(doc, fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_document(path, expected_format: str) -> dict:
    try:
        with open(path) as fh:
            doc = json.load(fh)
    except FileNotFoundError:
        raise MissingInputError(f"model file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"{path}: not valid JSON ({exc})") from None
    if doc.get("format") != expected_format:
        raise DataFormatError(
            f"{path}: format is {doc.get('format')!r}, expected {expected_format!r}"
        )
    return doc
