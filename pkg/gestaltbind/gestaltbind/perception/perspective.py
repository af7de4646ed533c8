"""
Rigid-transform front end. A Pose (Euler angles + translation) maps observed feature
positions into the model's frame, P = R X + b, and sub-modal features are derived from
positions and velocities.

Rotation convention: right-handed axes, counterclockwise positive angles, and
R = Rx(ax) @ Ry(ay) @ Rz(az) (transforms3d axes="rxyz"). Planar (2D) poses carry a single
angle about the out-of-plane axis.
"""

from dataclasses import dataclass, field, replace

import numpy as np
from transforms3d import euler

import gestaltbind.gestaltbind.macros as macros
from gestaltbind.gestaltbind.diffcore import Constant, Op, Variable, apply, register_op
from gestaltbind.gestaltbind.diffcore.optim import momentum_step
from gestaltbind.gestaltbind.errors import NonFiniteError


def _axis_rotations(angles):
    """(Rx, Ry, Rz) and their derivatives for three angles."""
    mats, derivs = [], []
    for axis, a in enumerate(angles):
        c, s = np.cos(a), np.sin(a)
        i, j = [k for k in range(3) if k != axis]
        # Ry is laid out in (z, x) order
        if axis == 1:
            i, j = j, i
        m = np.eye(3)
        d = np.zeros((3, 3))
        m[i, i] = m[j, j] = c
        m[i, j], m[j, i] = -s, s
        d[i, i] = d[j, j] = -s
        d[i, j], d[j, i] = -c, c
        mats.append(m)
        derivs.append(d)
    return mats, derivs


def planar_rotation(angle):
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s], [s, c]])


def rotation_from_euler(angles):
    """
    Rotation matrix for Euler angles (radians).

    Args:
        angles: (ax, ay, az) for 3D, or a single in-plane angle for 2D

    Returns:
        np.ndarray: 3x3 or 2x2 orthonormal matrix with determinant +1
    """
    angles = np.atleast_1d(np.asarray(angles, dtype=np.float64))
    if angles.shape == (1,):
        return planar_rotation(angles[0])
    assert angles.shape == (3,), f"expected 1 or 3 angles, got {angles.shape}"
    return euler.euler2mat(angles[0], angles[1], angles[2], axes="rxyz")


@register_op
class EulerRotation(Op):
    """Angles (3,) -> R (3, 3), or a single angle (1,) -> R (2, 2)."""

    name = "euler_rotation"

    def forward(self, angles):
        return rotation_from_euler(angles)

    def backward(self, grad, out, angles):
        if angles.shape == (1,):
            c, s = np.cos(angles[0]), np.sin(angles[0])
            return (np.array([np.sum(grad * np.array([[-s, -c], [c, -s]]))]),)
        (rx, ry, rz), (dx, dy, dz) = _axis_rotations(angles)
        partials = (dx @ ry @ rz, rx @ dy @ rz, rx @ ry @ dz)
        return (np.array([np.sum(grad * p) for p in partials]),)


def euler_rotation(angles):
    return apply("euler_rotation", angles)


def num_angles(dims):
    return 1 if dims == 2 else 3


@dataclass(frozen=True)
class Pose:
    """
    Euler angles (radians) and translation bias, plus the last two post-update values of
    each for the momentum term.
    """

    angles: np.ndarray
    translation: np.ndarray
    angle_history: tuple = field(default=())
    translation_history: tuple = field(default=())

    @classmethod
    def identity(cls, dims=3):
        return cls(angles=np.zeros(num_angles(dims)), translation=np.zeros(dims))

    @property
    def dims(self):
        return self.translation.shape[0]

    @property
    def rotation(self):
        return rotation_from_euler(self.angles)

    def to_dict(self):
        return dict(angles=self.angles.tolist(), translation=self.translation.tolist())

    @classmethod
    def from_dict(cls, d):
        return cls(
            angles=np.asarray(d["angles"], dtype=np.float64),
            translation=np.asarray(d["translation"], dtype=np.float64),
        )


@dataclass(frozen=True)
class SubmodalFrame:
    """
    Sub-modal features of one frame.

    Attributes:
        positions (np.ndarray): (N, D) relative positions R X + b
        directions (np.ndarray): (N, D) unit motion directions, zero rows where absent
        present (np.ndarray): (N,) bool, False where the feature did not move
        magnitudes (np.ndarray): (N,) motion magnitudes
    """

    positions: np.ndarray
    directions: np.ndarray
    present: np.ndarray
    magnitudes: np.ndarray


def motion_terms(velocity):
    """Magnitudes ||V_i|| and the masked inverse magnitudes (0 where the direction is absent)."""
    velocity = np.asarray(velocity, dtype=np.float64)
    magnitudes = np.linalg.norm(velocity, axis=-1)
    present = magnitudes > macros.DIRECTION_EPS
    inv = np.where(present, 1.0 / np.where(present, magnitudes, 1.0), 0.0)
    return magnitudes, inv, present


def extract_submodal(frame, velocity, pose):
    frame = np.asarray(frame, dtype=np.float64)
    velocity = np.asarray(velocity, dtype=np.float64)
    assert frame.shape == velocity.shape, f"frame {frame.shape} vs velocity {velocity.shape}"
    R = pose.rotation
    magnitudes, inv, present = motion_terms(velocity)
    return SubmodalFrame(
        positions=frame @ R.T + pose.translation,
        directions=(velocity @ R.T) * inv[:, None],
        present=present,
        magnitudes=magnitudes,
    )


class SubmodalGraph:
    """
    Graph nodes for the sub-modal extraction of one frame under adaptable pose parameters.
    Frame data enter as Constants that are reassigned per step; the pose enters as two
    Variables.

    The magnitude node is ||V|| and the direction scale is the constant 1/||V||, so the
    magnitude carries no gradient to the pose and neither direction nor magnitude depend on
    the translation.
    """

    def __init__(self, num_features, dims, pose=None):
        pose = pose or Pose.identity(dims)
        self.angles = Variable(pose.angles, name="pose.angles")
        self.translation = Variable(pose.translation, name="pose.translation")
        self.frame = Constant(np.zeros((num_features, dims)), name="frame")
        self.velocity = Constant(np.zeros((num_features, dims)), name="velocity")
        self.inv_magnitude = Constant(np.zeros((num_features, 1)), name="inv_magnitude")
        self.magnitude = Constant(np.zeros((num_features, 1)), name="magnitude")
        self.present = Constant(np.zeros((num_features, 1)), name="present")

        rotation_t = euler_rotation(self.angles).T
        self.positions = self.frame @ rotation_t + self.translation
        self.directions = (self.velocity @ rotation_t) * self.inv_magnitude
        self.magnitudes = self.magnitude

    def set_frame(self, frame, velocity):
        magnitudes, inv, present = motion_terms(velocity)
        self.frame.assign(frame)
        self.velocity.assign(velocity)
        self.inv_magnitude.assign(inv[:, None])
        self.magnitude.assign(magnitudes[:, None])
        self.present.assign(present[:, None].astype(np.float64))

    def set_pose(self, pose):
        self.angles.assign(pose.angles)
        self.translation.assign(pose.translation)


def adapt_pose(
    pose,
    grad_angles,
    grad_translation,
    lr_rotation,
    momentum_rotation,
    lr_translation,
    momentum_translation,
    rotation=True,
    translation=True,
):
    """
    Momentum update of the enabled pose groups. A disabled group is returned untouched.

    Raises:
        NonFiniteError: a gradient of an enabled group is not finite; the pose is unchanged
    """
    if rotation and not np.all(np.isfinite(grad_angles)):
        raise NonFiniteError("pose.angles", "gradient")
    if translation and not np.all(np.isfinite(grad_translation)):
        raise NonFiniteError("pose.translation", "gradient")
    updates = {}
    if rotation:
        updates["angles"], updates["angle_history"] = momentum_step(
            pose.angles, grad_angles, lr_rotation, momentum_rotation, pose.angle_history,
            name="pose.angles",
        )
    if translation:
        updates["translation"], updates["translation_history"] = momentum_step(
            pose.translation, grad_translation, lr_translation, momentum_translation,
            pose.translation_history, name="pose.translation",
        )
    return replace(pose, **updates)
