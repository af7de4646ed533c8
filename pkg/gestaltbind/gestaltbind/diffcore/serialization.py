"""
Parameter snapshots as a JSON manifest plus a flat little-endian float64 payload.

Layout of `<prefix>.json`:

    {
        "format": "gestaltbind-arrays/1",
        "byteorder": "little",
        "dtype": "float64",
        "entries": [{"name": ..., "shape": [...], "offset": <float index>, "count": n}, ...],
        "digest": <sha256 of the arrays, see utils.hash_arrays>,
        "extra": {...}
    }

`<prefix>.bin` holds the entries back to back in manifest order.
"""

import json
import os

import numpy as np

from ..errors import GestaltError
from ..utils import hash_arrays

FORMAT = "gestaltbind-arrays/1"


def save_arrays(prefix, arrays, extra=None):
    """
    Writes named arrays to `<prefix>.json` / `<prefix>.bin`.

    Args:
        prefix (str): path without extension
        arrays (dict): name -> array-like, written in insertion order
        extra (dict): JSON-serializable metadata stored next to the entries

    Returns:
        tuple: (manifest path, payload path)
    """
    entries = []
    chunks = []
    offset = 0
    for name, value in arrays.items():
        value = np.ascontiguousarray(value, dtype="<f8")
        entries.append(
            dict(name=name, shape=list(value.shape), offset=offset, count=int(value.size))
        )
        chunks.append(value.ravel())
        offset += value.size
    manifest = dict(
        format=FORMAT,
        byteorder="little",
        dtype="float64",
        entries=entries,
        digest=hash_arrays(*arrays.values()),
        extra=extra or {},
    )

    dirname = os.path.dirname(os.path.abspath(prefix))
    os.makedirs(dirname, exist_ok=True)
    json_path, bin_path = prefix + ".json", prefix + ".bin"
    payload = np.concatenate(chunks) if chunks else np.zeros(0, dtype="<f8")
    payload.astype("<f8").tofile(bin_path)
    with open(json_path, "w") as f:
        json.dump(manifest, f, indent=2)
    return json_path, bin_path


def load_arrays(prefix):
    """
    Reads a snapshot written by `save_arrays`.

    Returns:
        tuple: (dict name -> np.ndarray, extra dict)
    """
    json_path, bin_path = prefix + ".json", prefix + ".bin"
    with open(json_path, "r") as f:
        manifest = json.load(f)
    if manifest.get("format") != FORMAT:
        raise GestaltError(f"{json_path} is not a {FORMAT} manifest")
    payload = np.fromfile(bin_path, dtype="<f8")
    expected = sum(e["count"] for e in manifest["entries"])
    if payload.size != expected:
        raise GestaltError(
            f"{bin_path} holds {payload.size} floats, manifest declares {expected}"
        )
    arrays = {}
    for entry in manifest["entries"]:
        chunk = payload[entry["offset"] : entry["offset"] + entry["count"]]
        arrays[entry["name"]] = chunk.astype(np.float64).reshape(entry["shape"])
    digest = hash_arrays(*arrays.values())
    if digest != manifest.get("digest"):
        raise GestaltError(f"{bin_path} does not match the digest recorded in {json_path}")
    return arrays, manifest["extra"]
