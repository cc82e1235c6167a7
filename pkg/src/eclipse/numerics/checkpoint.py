"""Flat, versioned JSON checkpoints: parameter path -> shape + values.

Python's repr-based float serialization round-trips IEEE doubles
exactly, so save -> load is bit-exact.
"""
from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .tensor import Array, DimensionError, Tensor

FORMAT_NAME = "eclipse-checkpoint"
FORMAT_VERSION = 1


def atomic_write_text(path: str, text: str) -> None:
    """Write via temp file + rename so readers never see partial output."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix="~")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def save_params(path: str, params: dict[str, Tensor],
                meta: dict | None = None) -> None:
    payload = {
        "format": FORMAT_NAME,
        "version": FORMAT_VERSION,
        "meta": meta or {},
        "params": {
            name: {"shape": list(t.shape), "data": t.data.ravel().tolist()}
            for name, t in params.items()
        },
    }
    atomic_write_text(path, json.dumps(payload))


def load_params(path: str) -> tuple[dict[str, Array], dict]:
    with open(path) as fh:
        payload = json.load(fh)
    if payload.get("format") != FORMAT_NAME:
        raise ValueError(f"{path}: not a {FORMAT_NAME} file")
    if payload.get("version") != FORMAT_VERSION:
        raise ValueError(f"{path}: unsupported version {payload.get('version')}")
    arrays = {
        name: np.asarray(entry["data"], dtype=np.float64).reshape(entry["shape"])
        for name, entry in payload["params"].items()
    }
    return arrays, payload.get("meta", {})


def apply_params(params: dict[str, Tensor], arrays: dict[str, Array]) -> None:
    """Load checkpoint arrays into an existing parameter dict, in place."""
    missing = set(params) - set(arrays)
    extra = set(arrays) - set(params)
    if missing or extra:
        raise KeyError(
            f"checkpoint mismatch: missing={sorted(missing)} extra={sorted(extra)}"
        )
    for name, t in params.items():
        arr = arrays[name]
        if arr.shape != t.data.shape:
            raise DimensionError(
                f"checkpoint param {name!r}: shape {arr.shape} != {t.data.shape}"
            )
        t.data = arr.copy()
