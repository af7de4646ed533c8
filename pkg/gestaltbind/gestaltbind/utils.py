import hashlib
import json
import os

import numpy as np

from .errors import SequenceError


def nested_dict_update(curr_dict, update_dict):
    """Recursively merges `update_dict` into `curr_dict` in place and returns it."""
    for k, v in update_dict.items():
        if k in curr_dict and isinstance(v, dict) and isinstance(curr_dict[k], dict):
            curr_dict[k] = nested_dict_update(curr_dict[k], v)
        else:
            curr_dict[k] = v
    return curr_dict


def to_jsonable(obj):
    """Converts numpy scalars / arrays and tuples inside `obj` into plain JSON types."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


def hash_json(obj):
    """sha256 of the canonical (sorted-key, compact) JSON encoding of `obj`."""
    text = json.dumps(to_jsonable(obj), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def hash_arrays(*arrays):
    """sha256 over the little-endian float64 bytes and shapes of `arrays`."""
    h = hashlib.sha256()
    for arr in arrays:
        arr = np.ascontiguousarray(arr, dtype="<f8")
        h.update(str(arr.shape).encode("utf-8"))
        h.update(arr.tobytes())
    return h.hexdigest()


def dump_json(obj, path):
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    with open(path, "w") as f:
        json.dump(to_jsonable(obj), f, indent=4, sort_keys=True)
    return path


def load_json(path):
    with open(path, "r") as f:
        return json.load(f)


def check_permutation(permutation, n):
    """Returns `permutation` as an int array after checking it reorders 0..n-1."""
    perm = np.asarray(permutation)
    if perm.shape != (n,) or not np.array_equal(np.sort(perm), np.arange(n)):
        raise SequenceError(f"{list(permutation)} is not a permutation of 0..{n - 1}")
    return perm.astype(int)
