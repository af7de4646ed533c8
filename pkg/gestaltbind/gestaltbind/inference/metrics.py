"""
Evaluation metrics (binding error, orientation / translation difference) and the per-step
metric log of an inference run.
"""

import numpy as np
import pandas as pd

import gestaltbind.gestaltbind.macros as macros
from gestaltbind.gestaltbind.errors import GestaltError, RotationError

AXES = ("x", "y", "z")


def check_orthonormal(R, name="rotation"):
    R = np.asarray(R, dtype=np.float64)
    err = np.linalg.norm(R.T @ R - np.eye(R.shape[0]))
    if err > macros.ORTHONORMAL_TOL:
        raise RotationError(f"{name} is not orthonormal (||R^T R - I|| = {err:.3g})")
    return R


def od(R_model, R_data, literal=False):
    """
    Orientation difference in degrees: the geodesic angle between two rotations,
    acos((tr(R_model^T R_data) - 1) / 2) for 3x3 matrices and acos(tr / 2) for 2x2.

    With `literal=True` radians are scaled by 180 / (2 pi) instead of 180 / pi.
    """
    R_model = check_orthonormal(R_model, "R_model")
    R_data = check_orthonormal(R_data, "R_data")
    trace = np.trace(R_model.T @ R_data)
    cos = (trace - 1.0) / 2.0 if R_model.shape[0] == 3 else trace / 2.0
    angle = np.arccos(np.clip(cos, -1.0, 1.0))
    return float(angle * (180.0 / (2.0 * np.pi) if literal else 180.0 / np.pi))


def td(b_model, b_data):
    """Translation difference ||b_data - b_model|| in scene units."""
    b_model = np.asarray(b_model, dtype=np.float64)
    b_data = np.asarray(b_data, dtype=np.float64)
    assert b_model.shape == b_data.shape, f"{b_model.shape} vs {b_data.shape}"
    return float(np.linalg.norm(b_data - b_model))


def metric_columns(dims):
    angles = ["alpha_z"] if dims == 2 else [f"alpha_{a}" for a in AXES]
    offsets = [f"b_{a}" for a in AXES[:dims]]
    return [
        "step", "loss", "loss_posture", "loss_direction", "loss_magnitude",
        "fbe", "od", "td", "td_cm",
    ] + angles + offsets


class MetricLog:
    """One row per processed frame, in processing order."""

    def __init__(self, dims=3):
        self.dims = dims
        self.columns = metric_columns(dims)
        self.rows = []

    def __len__(self):
        return len(self.rows)

    def append(self, **row):
        missing = set(self.columns) - set(row)
        assert not missing, f"metric row is missing {sorted(missing)}"
        values = [row[c] for c in self.columns]
        if not np.all(np.isfinite(values[1:])):
            raise GestaltError(f"non-finite metric at step {row['step']}: {row}")
        self.rows.append(values)

    def to_frame(self):
        return pd.DataFrame(self.rows, columns=self.columns)

    def pose_trajectory(self):
        """step, angles, translation, od, td per step."""
        keep = ["step"] + [c for c in self.columns if c.startswith(("alpha_", "b_"))] + ["od", "td"]
        return self.to_frame()[keep]

    def to_csv(self, path):
        self.to_frame().to_csv(path, index=False, float_format="%.17g")
        return path

    def last(self, column):
        return self.rows[-1][self.columns.index(column)]

    def first(self, column):
        return self.rows[0][self.columns.index(column)]


def summarize_logs(frames, columns=None):
    """
    Mean and standard deviation per step over runs.

    Args:
        frames (list of pd.DataFrame): metric logs of independent runs, identical steps

    Returns:
        pd.DataFrame: step, runs, <metric>_mean, <metric>_std
    """
    if not frames:
        raise GestaltError("nothing to summarize")
    stacked = pd.concat(frames, keys=range(len(frames)), names=["run", "row"])
    columns = columns or [c for c in frames[0].columns if c != "step"]
    grouped = stacked.groupby("step")
    summary = grouped[columns].agg(["mean", "std"])
    summary.columns = [f"{c}_{stat}" for c, stat in summary.columns]
    # a single run has zero spread
    summary = summary.fillna(0.0)
    summary.insert(0, "runs", grouped.size())
    return summary.reset_index()
