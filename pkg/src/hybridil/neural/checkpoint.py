"""Named-tensor checkpoint archive.

Layout: a single ``.npz`` holding every parameter array by name plus a
``__meta__`` entry containing a JSON header::

    {"format_version": 1, "config": {...}}

The config block is whatever architecture description the caller supplies;
it is returned verbatim on load.
"""

from __future__ import annotations

import json
import os

import numpy as np

from ..errors import PersistenceError, ValidationError

FORMAT_VERSION = 1


def save_checkpoint(path: str, arrays: dict[str, np.ndarray], config: dict) -> None:
    meta = json.dumps({"format_version": FORMAT_VERSION, "config": config})
    try:
        os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
        tmp = path + ".tmp"
        np.savez(tmp, __meta__=np.array(meta), **arrays)
        # numpy appends .npz to the temp name
        os.replace(tmp + ".npz" if not tmp.endswith(".npz") else tmp, path)
    except OSError as e:
        raise PersistenceError(f"failed to write checkpoint {path}: {e}") from e


def load_checkpoint(path: str) -> tuple[dict[str, np.ndarray], dict]:
    try:
        with np.load(path, allow_pickle=False) as archive:
            meta = json.loads(str(archive["__meta__"]))
            if meta.get("format_version") != FORMAT_VERSION:
                raise ValidationError(
                    f"unsupported checkpoint format {meta.get('format_version')}")
            arrays = {k: archive[k] for k in archive.files if k != "__meta__"}
    except FileNotFoundError as e:
        raise PersistenceError(f"missing checkpoint {path}") from e
    return arrays, meta["config"]
