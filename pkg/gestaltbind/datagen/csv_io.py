"""
CSV ingestion and export of feature sequences.

Layout: header row `t,<label>_x,<label>_y[,<label>_z]...`, one row per frame, float64
text written with 17 significant digits so a round trip is bit-exact. Metadata (dt,
labels, units) goes into a JSON sidecar next to the CSV (`walk.csv` -> `walk.json`).
"""

import json
import logging
import os
import re
from dataclasses import dataclass

import numpy as np
import pandas as pd

from gestaltbind.gestaltbind.errors import CsvParseError, SequenceError

from .sequence import FeatureSequence

logger = logging.getLogger(__name__)

AXES = ("x", "y", "z")


@dataclass(frozen=True)
class CsvLayout:
    """
    Declared layout of a sequence CSV.

    Attributes:
        num_features (int): N, or None to infer from the header
        dims (int): D, or None to infer from the header / sidecar
        has_time (bool): whether the first column is time
        dt (float): seconds per frame; overrides the sidecar and the time column when given
    """

    num_features: int = None
    dims: int = None
    has_time: bool = True
    dt: float = None


def sidecar_path(path):
    return os.path.splitext(path)[0] + ".json"


def save_csv(seq, path):
    """Writes `seq` to `path` plus its JSON sidecar and returns the CSV path."""
    os.makedirs(os.path.dirname(os.path.abspath(path)), exist_ok=True)
    axes = AXES[: seq.dims]
    columns = [f"{label}_{a}" for label in seq.labels for a in axes]
    data = seq.frames.reshape(seq.num_frames, -1)
    df = pd.DataFrame(data, columns=columns)
    df.insert(0, "t", np.arange(seq.num_frames) * seq.dt)
    df.to_csv(path, index=False, float_format="%.17g")
    with open(sidecar_path(path), "w") as f:
        json.dump(seq.metadata(), f, indent=4)
    return path


def _labels_from_header(columns, dims):
    labels = []
    for i in range(0, len(columns), dims):
        name = columns[i]
        labels.append(re.sub(r"_[xyz]$", "", name))
    return tuple(labels)


def load_csv(path, layout=None):
    """
    Parses a sequence CSV.

    Args:
        path (str): CSV file
        layout (CsvLayout): declared layout; missing fields are taken from the sidecar and
            the header

    Returns:
        FeatureSequence

    Raises:
        CsvParseError: ragged rows, non-numeric cells, or a column count that is not N*D.
            Line numbers are 1-based file lines (the header is line 1).
    """
    layout = layout or CsvLayout()
    if not os.path.exists(path):
        raise SequenceError(f"no such sequence file: {path}")
    meta = {}
    if os.path.exists(sidecar_path(path)):
        with open(sidecar_path(path), "r") as f:
            meta = json.load(f)

    try:
        df = pd.read_csv(path, dtype=str, keep_default_na=False, skip_blank_lines=True)
    except pd.errors.ParserError as e:
        match = re.search(r"line (\d+)", str(e))
        line = int(match.group(1)) if match else -1
        raise CsvParseError(path, line, f"ragged row ({e})")
    except pd.errors.EmptyDataError:
        raise CsvParseError(path, 1, "file is empty")

    # rows that are too short come back with empty trailing cells
    for row_idx, row in enumerate(df.itertuples(index=False)):
        if any(not isinstance(cell, str) or cell == "" for cell in row):
            raise CsvParseError(path, row_idx + 2, "ragged row (missing cells)")

    columns = list(df.columns)
    if layout.has_time:
        columns = columns[1:]
    dims = layout.dims or meta.get("dims")
    if dims is None:
        dims = 3 if any(c.endswith("_z") for c in columns) else 2
    if layout.num_features is not None and layout.num_features * dims != len(columns):
        raise CsvParseError(
            path, 1,
            f"expected {layout.num_features} features x {dims} dims = "
            f"{layout.num_features * dims} columns, found {len(columns)}",
        )
    if len(columns) % dims != 0:
        raise CsvParseError(path, 1, f"{len(columns)} columns is not a multiple of D={dims}")

    values = np.empty(df.shape, dtype=np.float64)
    for row_idx, row in enumerate(df.itertuples(index=False)):
        for col_idx, cell in enumerate(row):
            try:
                values[row_idx, col_idx] = float(cell)
            except ValueError:
                raise CsvParseError(
                    path, row_idx + 2, f"non-numeric cell {cell!r} in column {df.columns[col_idx]!r}"
                )

    times = values[:, 0] if layout.has_time else None
    data = values[:, 1:] if layout.has_time else values
    num_features = data.shape[1] // dims
    frames = data.reshape(data.shape[0], num_features, dims)

    dt = layout.dt
    if dt is None and meta.get("dt") is not None:
        dt = meta["dt"]
        valid = isinstance(dt, (int, float)) and not isinstance(dt, bool)
        if not (valid and np.isfinite(dt) and dt > 0):
            raise SequenceError(f"{sidecar_path(path)}: dt must be a positive number, got {dt!r}")
    if dt is None and times is not None and len(times) > 1:
        dt = float(np.median(np.diff(times)))
    if dt is None:
        raise SequenceError(f"{path}: dt is not given by sidecar, layout or time column")
    labels = tuple(meta.get("labels") or _labels_from_header(columns, dims))
    logger.debug("loaded %s: %d frames, %d features, D=%d", path, *frames.shape)
    return FeatureSequence(frames=frames, dt=dt, labels=labels, units=meta.get("units", "m"))
