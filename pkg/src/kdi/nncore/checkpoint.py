"""Versioned parameter container: named float64 arrays plus string metadata.

Backed by numpy's npz format.  Array entries are namespaced ``a::<name>``
and metadata entries ``m::<key>`` inside the archive; a ``format_version``
entry guards compatibility.  Writes are atomic (temp file, then rename).
"""

from __future__ import annotations

import os
import tempfile
import zipfile
from pathlib import Path

import numpy as np

__all__ = ["CheckpointError", "FORMAT_VERSION", "save_arrays", "load_arrays"]

FORMAT_VERSION = 1


class CheckpointError(Exception):
    pass


def save_arrays(
    path: str | Path,
    arrays: dict[str, np.ndarray],
    meta: dict[str, str] | None = None,
) -> None:
    path = Path(path)
    payload: dict[str, np.ndarray] = {"format_version": np.array(FORMAT_VERSION, dtype=np.int64)}
    for name, arr in arrays.items():
        payload[f"a::{name}"] = np.asarray(arr)
    for key, value in (meta or {}).items():
        payload[f"m::{key}"] = np.array(str(value))

    fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "wb") as fh:
            np.savez(fh, **payload)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def load_arrays(path: str | Path) -> tuple[dict[str, np.ndarray], dict[str, str]]:
    path = Path(path)
    if not path.is_file():
        raise CheckpointError(f"no checkpoint at {path}")
    try:
        with np.load(path, allow_pickle=False) as data:
            names = list(data.files)
            if "format_version" not in names:
                raise CheckpointError(f"{path} is not a recognized checkpoint")
            version = int(data["format_version"])
            if version != FORMAT_VERSION:
                raise CheckpointError(
                    f"{path}: format version {version} unsupported (expected {FORMAT_VERSION})"
                )
            arrays = {n[3:]: data[n] for n in names if n.startswith("a::")}
            meta = {n[3:]: str(data[n]) for n in names if n.startswith("m::")}
    except (zipfile.BadZipFile, OSError, ValueError, KeyError) as exc:
        raise CheckpointError(f"corrupt checkpoint {path}: {exc}") from exc
    return arrays, meta
