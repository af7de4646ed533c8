"""
Gaussian-tuned population codes for the three sub-modalities.

A neuron with center c on a lattice of spacing r and tuning factor zeta responds to a
stimulus s with r**D * N(s; c, sigma * I), sigma = zeta * r**2. Activations divided by the
peak value r**D * (2 pi sigma)**(-D/2) lie in [0, 1]; that normalized form is what the VAEs
see.

Lattice layouts:
    posture     regular k**D grid over a box
    direction   evenly spaced unit circle (2D) or Fibonacci unit sphere (3D)
    magnitude   evenly spaced points on a segment
"""

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from gestaltbind.gestaltbind.diffcore import gaussian_density
from gestaltbind.gestaltbind.errors import LatticeError, ShapeMismatchError
from gestaltbind.gestaltbind.utils import hash_json

KINDS = ("posture", "direction", "magnitude")

POSTURE_MARGIN = 0.2
MAGNITUDE_HEADROOM = 1.5


@dataclass(frozen=True, eq=False)
class Lattice:
    kind: str
    centers: np.ndarray
    spacing: float
    zeta: float

    def __post_init__(self):
        assert self.kind in KINDS, f"unknown lattice kind {self.kind}"
        centers = np.asarray(self.centers, dtype=np.float64)
        if centers.ndim == 1:
            centers = centers[:, None]
        object.__setattr__(self, "centers", centers)
        if not 0.0 < self.zeta <= 1.0:
            raise LatticeError(f"tuning factor zeta must lie in (0, 1], got {self.zeta}")
        if not self.spacing > 0:
            raise LatticeError(f"lattice spacing must be positive, got {self.spacing}")

    @property
    def count(self):
        return self.centers.shape[0]

    @property
    def dims(self):
        return self.centers.shape[1]

    @property
    def sigma(self):
        return self.zeta * self.spacing**2

    @property
    def scale(self):
        return self.spacing**self.dims

    @property
    def peak(self):
        """Largest possible activation, reached at a center."""
        return self.scale * (2.0 * np.pi * self.sigma) ** (-self.dims / 2.0)

    def to_json(self):
        return dict(
            kind=self.kind,
            count=self.count,
            dims=self.dims,
            zeta=float(self.zeta),
            spacing=float(self.spacing),
            centers=self.centers.tolist(),
        )

    @classmethod
    def from_json(cls, d):
        return cls(
            kind=d["kind"], centers=np.asarray(d["centers"]), spacing=d["spacing"], zeta=d["zeta"]
        )

    def hash(self):
        return hash_json(self.to_json())

    def __eq__(self, other):
        return isinstance(other, Lattice) and self.to_json() == other.to_json()


def admissible_counts(kind, dims, limit=100):
    if kind == "posture":
        return [k**dims for k in range(2, limit) if k**dims <= limit]
    if kind == "direction":
        return list(range(3 if dims == 2 else 4, limit + 1))
    return list(range(2, limit + 1))


def _grid_side(count, dims):
    side = int(round(count ** (1.0 / dims)))
    for k in (side - 1, side, side + 1):
        if k >= 2 and k**dims == count:
            return k
    return None


def fibonacci_sphere(count):
    i = np.arange(count)
    z = 1.0 - (2.0 * i + 1.0) / count
    radius = np.sqrt(1.0 - z * z)
    phi = i * np.pi * (3.0 - np.sqrt(5.0))
    return np.stack([radius * np.cos(phi), radius * np.sin(phi), z], axis=-1)


def nearest_neighbor_spacing(centers):
    """Median over centers of the distance to the closest other center."""
    dist = cdist(centers, centers)
    np.fill_diagonal(dist, np.inf)
    return float(np.median(dist.min(axis=1)))


def build_lattice(kind, count, stimulus_range=None, zeta=0.85, dims=3):
    """
    Lays out `count` neurons for a sub-modality.

    Args:
        kind (str): "posture", "direction" or "magnitude"
        count (int): number of neurons
        stimulus_range: posture: (low, high) D-vectors of the box; magnitude: (low, high)
            scalars; ignored for direction
        zeta (float): tuning factor in (0, 1]
        dims (int): stimulus dimension for posture / direction (magnitude is always 1D)

    Raises:
        LatticeError: `count` has no layout for this kind
    """
    if kind not in KINDS:
        raise LatticeError(f"unknown lattice kind {kind}; expected one of {KINDS}")
    if kind == "magnitude":
        dims = 1
    if dims not in (1, 2, 3):
        raise LatticeError(f"unsupported stimulus dimension {dims}")

    if kind == "posture":
        side = _grid_side(count, dims)
        if side is None:
            raise LatticeError(
                f"{count} posture neurons do not form a {dims}D grid; "
                f"admissible counts: {admissible_counts(kind, dims)}"
            )
        low, high = (np.broadcast_to(np.asarray(v, dtype=np.float64), (dims,)) for v in stimulus_range)
        axes = [np.linspace(low[d], high[d], side) for d in range(dims)]
        mesh = np.meshgrid(*axes, indexing="ij")
        centers = np.stack([m.ravel() for m in mesh], axis=-1)
    elif kind == "direction":
        minimum = 3 if dims == 2 else 4
        if count < minimum or dims == 1:
            raise LatticeError(
                f"{count} direction neurons cannot cover the {dims}D unit sphere; "
                f"admissible counts: {minimum} and above"
            )
        if dims == 2:
            angles = 2.0 * np.pi * np.arange(count) / count
            centers = np.stack([np.cos(angles), np.sin(angles)], axis=-1)
        else:
            centers = fibonacci_sphere(count)
    else:
        if count < 2:
            raise LatticeError(f"{count} magnitude neurons; admissible counts: 2 and above")
        low, high = (float(v) for v in stimulus_range)
        centers = np.linspace(low, high, count)[:, None]

    spacing = nearest_neighbor_spacing(centers)
    return Lattice(kind=kind, centers=centers, spacing=spacing, zeta=zeta)


def _as_stimulus(lattice, stimulus):
    stimulus = np.asarray(stimulus, dtype=np.float64)
    if lattice.dims == 1 and (stimulus.ndim == 0 or stimulus.shape[-1] != 1):
        stimulus = stimulus[..., None]
    if stimulus.shape[-1] != lattice.dims:
        raise ShapeMismatchError(
            "stimulus", f"{lattice.kind} lattice", f"{stimulus.shape} vs D={lattice.dims}"
        )
    return stimulus


def encode(lattice, stimulus, normalize=False, present=True):
    """
    Population activations for one stimulus or a stack of stimuli.

    Args:
        stimulus: (..., D) array (or scalar / (...,) for magnitude lattices)
        normalize (bool): divide by the lattice peak so activations lie in [0, 1]
        present: bool or (...,) mask; absent stimuli encode to all zeros

    Returns:
        np.ndarray: (..., count)
    """
    stimulus = _as_stimulus(lattice, stimulus)
    sq = np.sum((stimulus[..., None, :] - lattice.centers) ** 2, axis=-1)
    density = (2.0 * np.pi * lattice.sigma) ** (-lattice.dims / 2.0) * np.exp(
        -sq / (2.0 * lattice.sigma)
    )
    activation = lattice.scale * density
    if normalize:
        activation = activation / lattice.peak
    return activation * np.asarray(present, dtype=np.float64)[..., None]


def encode_node(lattice, stimulus, normalize=True, present=None):
    """Graph counterpart of `encode` for a (N, D) stimulus node; returns a (N, count) node."""
    factor = lattice.scale / lattice.peak if normalize else lattice.scale
    activation = gaussian_density(stimulus, lattice.centers, lattice.sigma) * factor
    if present is not None:
        activation = activation * present
    return activation


def encode_frame(lattices, submodal, normalize=True, raw=False):
    """
    Encodes every feature of a SubmodalFrame.

    Args:
        lattices (dict): kind -> Lattice
        submodal (SubmodalFrame): sub-modal features of one frame
        raw (bool): skip population coding and return the sub-modal values themselves

    Returns:
        dict: kind -> (N, K) activations, feature-major and neuron-minor when flattened.
            In raw mode K is D for posture / direction and 1 for magnitude.
    """
    if raw:
        return dict(
            posture=submodal.positions,
            direction=submodal.directions,
            magnitude=submodal.magnitudes[:, None],
        )
    return dict(
        posture=encode(lattices["posture"], submodal.positions, normalize),
        direction=encode(
            lattices["direction"], submodal.directions, normalize, present=submodal.present
        ),
        magnitude=encode(lattices["magnitude"], submodal.magnitudes[:, None], normalize),
    )


def lattices_for_sequence(seq, counts=(64, 32, 4), zetas=(0.85, 0.85, 0.95), reach=0.0):
    """
    Lattices covering a training sequence: posture grid over the bounding box widened by
    20% per axis, magnitude line over [0, 1.5 * max speed], direction on the unit sphere.

    `reach` (scene units) extends the posture box on every side so that inputs shifted by up
    to that much still excite the population. Without it a far displaced scene encodes to
    all but zero and carries no translation gradient.
    """
    if reach < 0:
        raise LatticeError(f"posture reach must be >= 0, got {reach}")
    frames = seq.frames
    low, high = frames.reshape(-1, seq.dims).min(axis=0), frames.reshape(-1, seq.dims).max(axis=0)
    width = np.maximum(high - low, 1e-3)
    pad = 0.5 * POSTURE_MARGIN * width + reach
    speeds = np.linalg.norm(np.diff(frames, axis=0), axis=-1)
    max_speed = max(float(speeds.max()), 1e-6)
    return dict(
        posture=build_lattice("posture", counts[0], (low - pad, high + pad), zetas[0], seq.dims),
        direction=build_lattice("direction", counts[1], None, zetas[1], seq.dims),
        magnitude=build_lattice(
            "magnitude", counts[2], (0.0, MAGNITUDE_HEADROOM * max_speed), zetas[2]
        ),
    )
