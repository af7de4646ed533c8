"""
Synthetic treadmill walker: a 15-feature kinematic skeleton driven by periodic joint angles.

Frame convention: pelvis near the origin, facing +x, z up, y to the walker's left. The gait
phase of frame t is 2*pi*(t mod P)/P, so any frame count is an exact periodic extension of
one cycle. The right side runs half a cycle behind the left.
"""

from dataclasses import dataclass, replace

import numpy as np

from gestaltbind.gestaltbind.errors import SequenceError

from .sequence import FeatureSequence

WALKER_LABELS = (
    "head",
    "neck",
    "pelvis",
    "l_shoulder",
    "l_elbow",
    "l_wrist",
    "r_shoulder",
    "r_elbow",
    "r_wrist",
    "l_hip",
    "l_knee",
    "l_ankle",
    "r_hip",
    "r_knee",
    "r_ankle",
)

LENGTH_FIELDS = (
    "torso", "head", "shoulder_half_width", "upper_arm", "forearm",
    "hip_half_width", "thigh", "shin",
)
AMPLITUDE_FIELDS = (
    "hip_swing", "knee_flex", "arm_swing", "elbow_flex", "pelvis_sway", "pelvis_bob",
)


@dataclass(frozen=True)
class WalkerParams:
    """
    Walker skeleton and gait. Lengths in meters, swing/flex amplitudes in radians,
    sway/bob amplitudes in meters.

    `subject_variation` > 0 jitters every length and amplitude by a factor drawn uniformly
    from [1 - v, 1 + v] with `seed`, giving distinct subjects with the same gait.
    """

    period: int = 148
    num_frames: int = 1036
    dt: float = 1.0 / 120.0
    torso: float = 0.5
    head: float = 0.2
    shoulder_half_width: float = 0.18
    upper_arm: float = 0.3
    forearm: float = 0.27
    hip_half_width: float = 0.1
    thigh: float = 0.45
    shin: float = 0.43
    hip_swing: float = 0.45
    knee_flex: float = 1.0
    arm_swing: float = 0.35
    elbow_flex: float = 0.3
    pelvis_sway: float = 0.03
    pelvis_bob: float = 0.02
    subject_variation: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.period < 2:
            raise SequenceError(f"gait period must be at least 2 frames, got {self.period}")
        if self.num_frames < 2:
            raise SequenceError(f"need at least 2 frames, got {self.num_frames}")
        if not self.dt > 0:
            raise SequenceError(f"dt must be positive, got {self.dt}")
        for name in LENGTH_FIELDS:
            if not getattr(self, name) > 0:
                raise SequenceError(f"limb length {name} must be positive")
        if not 0.0 <= self.subject_variation < 1.0:
            raise SequenceError("subject_variation must lie in [0, 1)")

    def static(self):
        """Same skeleton with every amplitude set to 0."""
        return replace(self, **{name: 0.0 for name in AMPLITUDE_FIELDS})

    def varied(self):
        """Applies the subject jitter and returns params with subject_variation = 0."""
        if self.subject_variation == 0.0:
            return self
        rng = np.random.default_rng(self.seed)
        names = LENGTH_FIELDS + AMPLITUDE_FIELDS
        scales = rng.uniform(1.0 - self.subject_variation, 1.0 + self.subject_variation, len(names))
        updates = {name: getattr(self, name) * s for name, s in zip(names, scales)}
        return replace(self, subject_variation=0.0, **updates)


def _segment(origin, length, angle):
    """Point `length` away from origin along the sagittal direction `angle` from straight down."""
    return origin + length * np.stack([np.sin(angle), np.zeros_like(angle), -np.cos(angle)], -1)


def _leg(p, hip, phase):
    swing = p.hip_swing * np.sin(phase)
    flex = p.knee_flex * 0.5 * (1.0 - np.cos(phase))
    knee = _segment(hip, p.thigh, swing)
    ankle = _segment(knee, p.shin, swing - flex)
    return knee, ankle


def _arm(p, shoulder, phase):
    # arms swing against the leg on the same side
    swing = -p.arm_swing * np.sin(phase)
    flex = p.elbow_flex * 0.5 * (1.0 - np.cos(phase))
    elbow = _segment(shoulder, p.upper_arm, swing)
    wrist = _segment(elbow, p.forearm, swing + flex)
    return elbow, wrist


def generate_walker(params=None):
    """
    Returns:
        FeatureSequence: (num_frames, 15, 3) positions labelled by WALKER_LABELS
    """
    p = (params or WalkerParams()).varied()
    t = np.arange(p.num_frames)
    phase_l = 2.0 * np.pi * (t % p.period) / p.period
    phase_r = phase_l + np.pi

    zeros = np.zeros_like(phase_l)
    pelvis = np.stack(
        [zeros, p.pelvis_sway * np.sin(phase_l), p.pelvis_bob * np.cos(2.0 * phase_l)], -1
    )
    up = np.array([0.0, 0.0, 1.0])
    left = np.array([0.0, 1.0, 0.0])
    neck = pelvis + p.torso * up
    head = neck + p.head * up
    l_shoulder = neck + p.shoulder_half_width * left
    r_shoulder = neck - p.shoulder_half_width * left
    l_hip = pelvis + p.hip_half_width * left
    r_hip = pelvis - p.hip_half_width * left

    l_elbow, l_wrist = _arm(p, l_shoulder, phase_l)
    r_elbow, r_wrist = _arm(p, r_shoulder, phase_r)
    l_knee, l_ankle = _leg(p, l_hip, phase_l)
    r_knee, r_ankle = _leg(p, r_hip, phase_r)

    frames = np.stack(
        [
            head, neck, pelvis,
            l_shoulder, l_elbow, l_wrist,
            r_shoulder, r_elbow, r_wrist,
            l_hip, l_knee, l_ankle,
            r_hip, r_knee, r_ankle,
        ],
        axis=1,
    )
    return FeatureSequence(frames=frames, dt=p.dt, labels=WALKER_LABELS)
