"""
Constant rigid-transform disturbances applied to test sequences: X' = R_d X + b_d.
"""

from dataclasses import dataclass, replace

import numpy as np

from gestaltbind.gestaltbind.errors import SequenceError
from gestaltbind.gestaltbind.perception.perspective import num_angles, rotation_from_euler


@dataclass(frozen=True)
class DisturbanceSpec:
    """
    Attributes:
        angles_deg (tuple): rotation offsets about x, y, z in degrees (one in-plane angle
            for 2D sequences)
        translation (tuple): offset applied after the rotation, in scene units
    """

    angles_deg: tuple = (0.0, 0.0, 0.0)
    translation: tuple = (0.0, 0.0, 0.0)

    @classmethod
    def identity(cls, dims=3):
        return cls(angles_deg=(0.0,) * num_angles(dims), translation=(0.0,) * dims)

    @property
    def dims(self):
        return len(self.translation)

    @property
    def rotation(self):
        return rotation_from_euler(np.deg2rad(np.asarray(self.angles_deg, dtype=np.float64)))

    def check(self, dims):
        if len(self.translation) != dims or len(self.angles_deg) != num_angles(dims):
            raise SequenceError(
                f"disturbance with {len(self.angles_deg)} angles and {len(self.translation)}D "
                f"translation does not fit {dims}D data"
            )

    def inverse(self):
        """
        The model pose that undoes this disturbance.

        Returns:
            tuple: (R_target, b_target) with R_target = R_d^T and b_target = -R_d^T b_d
        """
        R = self.rotation
        return R.T, -R.T @ np.asarray(self.translation, dtype=np.float64)

    def to_dict(self):
        return dict(angles_deg=list(self.angles_deg), translation=list(self.translation))


def apply_disturbance(seq, spec):
    spec.check(seq.dims)
    frames = seq.frames @ spec.rotation.T + np.asarray(spec.translation, dtype=np.float64)
    return replace(seq, frames=frames)


def random_disturbance(rng, max_angle_deg=45.0, max_offset=4.0, dims=3):
    """Uniformly drawn rotation offsets in [-max_angle, max_angle] and offsets in [-max_offset, max_offset]."""
    angles = rng.uniform(-max_angle_deg, max_angle_deg, size=num_angles(dims))
    offset = rng.uniform(-max_offset, max_offset, size=dims)
    return DisturbanceSpec(angles_deg=tuple(angles.tolist()), translation=tuple(offset.tolist()))
