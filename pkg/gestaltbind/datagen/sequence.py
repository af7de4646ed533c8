"""
FeatureSequence container and the sequence-level transforms shared by every data source.
"""

from dataclasses import dataclass, field, replace

import numpy as np

from gestaltbind.gestaltbind.errors import SequenceError
from gestaltbind.gestaltbind.utils import check_permutation


@dataclass(frozen=True)
class FeatureSequence:
    """
    Time-indexed feature positions.

    Attributes:
        frames (np.ndarray): (T, N, D) float64 positions, D in {2, 3}
        dt (float): seconds per frame
        labels (tuple): N feature names
        units (str): scene units of the positions
    """

    frames: np.ndarray
    dt: float
    labels: tuple = field(default=())
    units: str = "m"

    def __post_init__(self):
        frames = np.asarray(self.frames, dtype=np.float64)
        if frames.ndim != 3:
            raise SequenceError(f"frames must be (T, N, D), got shape {frames.shape}")
        if frames.shape[2] not in (2, 3):
            raise SequenceError(f"feature dimension must be 2 or 3, got {frames.shape[2]}")
        if frames.shape[0] < 2:
            raise SequenceError(f"need at least 2 frames, got {frames.shape[0]}")
        if not self.dt > 0:
            raise SequenceError(f"dt must be positive, got {self.dt}")
        if not np.all(np.isfinite(frames)):
            raise SequenceError("frames contain non-finite values")
        labels = tuple(self.labels) if self.labels else tuple(
            f"f{i}" for i in range(frames.shape[1])
        )
        if len(labels) != frames.shape[1]:
            raise SequenceError(f"{len(labels)} labels for {frames.shape[1]} features")
        object.__setattr__(self, "frames", frames)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "dt", float(self.dt))

    @property
    def num_frames(self):
        return self.frames.shape[0]

    @property
    def num_features(self):
        return self.frames.shape[1]

    @property
    def dims(self):
        return self.frames.shape[2]

    def with_frames(self, frames):
        return replace(self, frames=frames)

    def metadata(self):
        return dict(dt=self.dt, labels=list(self.labels), units=self.units, dims=self.dims)


def velocities(seq):
    """
    Per-frame velocities V(t) = X(t) - X(t-1) for t >= 1.

    Returns:
        np.ndarray: (T-1, N, D); row t-1 is the velocity of frame t. Frame 0 has none.
    """
    frames = seq.frames if isinstance(seq, FeatureSequence) else np.asarray(seq, dtype=np.float64)
    if frames.shape[0] < 2:
        raise SequenceError("velocities need at least 2 frames")
    return np.diff(frames, axis=0)


def permute_features(seq, permutation):
    """Reorders features so that new feature k is old feature permutation[k]."""
    perm = check_permutation(permutation, seq.num_features)
    return replace(
        seq, frames=seq.frames[:, perm, :], labels=tuple(seq.labels[p] for p in perm)
    )


def crossfade_cycle(seq, k=20):
    """
    Turns a roughly periodic recording into a continuous cycle. The last k frames are
    blended into the first k and then dropped, so looping the result end-to-start has no
    jump.

    Returns:
        FeatureSequence: T - k frames
    """
    T = seq.num_frames
    if k < 1:
        return seq
    if T <= 2 * k:
        raise SequenceError(f"crossfade of {k} frames needs more than {2 * k} frames, got {T}")
    weights = (np.arange(1, k + 1) / (k + 1.0))[:, None, None]
    head = (1.0 - weights) * seq.frames[T - k :] + weights * seq.frames[:k]
    frames = np.concatenate([head, seq.frames[k : T - k]], axis=0)
    return replace(seq, frames=frames)


def loop_frames(seq, num_steps, start=1):
    """
    Yields (step, frame, velocity) for `num_steps` steps, cycling through a cyclic sequence.
    The velocity at the wrap uses the last frame as predecessor of the first.
    """
    T = seq.num_frames
    for step in range(num_steps):
        t = (start + step) % T
        frame = seq.frames[t]
        yield step, frame, frame - seq.frames[(t - 1) % T]
