import numpy as np
import pytest

from gestaltbind.gestaltbind.diffcore import Constant, forward
from gestaltbind.gestaltbind.errors import LatticeError
from gestaltbind.gestaltbind.perception import (
    Lattice,
    Pose,
    build_lattice,
    encode,
    encode_frame,
    encode_node,
    extract_submodal,
    lattices_for_sequence,
)
from gestaltbind.gestaltbind.perception.popcode import admissible_counts, fibonacci_sphere


def test_posture_grid_layout():
    lattice = build_lattice("posture", 64, (np.zeros(3), np.ones(3)), dims=3)
    assert lattice.count == 64
    assert lattice.spacing == pytest.approx(1.0 / 3.0)
    assert lattice.sigma == pytest.approx(0.85 / 9.0)


def test_inadmissible_posture_count_lists_alternatives():
    with pytest.raises(LatticeError) as info:
        build_lattice("posture", 50, (np.zeros(3), np.ones(3)), dims=3)
    assert "27" in str(info.value) and "64" in str(info.value)


def test_direction_counts():
    with pytest.raises(LatticeError):
        build_lattice("direction", 3, dims=3)
    with pytest.raises(LatticeError):
        build_lattice("direction", 2, dims=2)
    circle = build_lattice("direction", 8, dims=2)
    np.testing.assert_allclose(np.linalg.norm(circle.centers, axis=-1), 1.0)
    assert circle.spacing == pytest.approx(2.0 * np.sin(np.pi / 8))


def test_fibonacci_sphere_is_spread_out():
    centers = fibonacci_sphere(32)
    np.testing.assert_allclose(np.linalg.norm(centers, axis=-1), 1.0)
    cos = np.clip(centers @ centers.T, -1.0, 1.0)
    np.fill_diagonal(cos, -1.0)
    min_angle = np.arccos(cos.max())
    assert min_angle > 0.8 * np.sqrt(4.0 * np.pi / 32)


def test_magnitude_needs_two_neurons():
    with pytest.raises(LatticeError):
        build_lattice("magnitude", 1, (0.0, 1.0))
    lattice = build_lattice("magnitude", 4, (0.0, 3.0))
    np.testing.assert_allclose(lattice.centers[:, 0], [0.0, 1.0, 2.0, 3.0])
    assert admissible_counts("magnitude", 1)[0] == 2


def test_bad_zeta():
    with pytest.raises(LatticeError):
        build_lattice("magnitude", 4, (0.0, 1.0), zeta=0.0)


def test_stimulus_on_center_peaks_at_one():
    lattice = build_lattice("posture", 27, (np.zeros(3), np.ones(3)), dims=3)
    activation = encode(lattice, lattice.centers[13], normalize=True)
    assert activation[13] == pytest.approx(1.0)
    assert np.argmax(activation) == 13
    assert np.all(activation <= 1.0 + 1e-12)


def test_unnormalized_activation_formula():
    lattice = build_lattice("magnitude", 3, (0.0, 2.0), zeta=0.5)
    s = 0.3
    expected = lattice.spacing * np.exp(-((s - lattice.centers[:, 0]) ** 2) / (2 * lattice.sigma)) / np.sqrt(
        2 * np.pi * lattice.sigma
    )
    np.testing.assert_allclose(encode(lattice, s), expected)


def test_absent_direction_encodes_to_zero():
    lattice = build_lattice("direction", 6, dims=2)
    stimuli = np.array([[1.0, 0.0], [0.0, 0.0]])
    activation = encode(lattice, stimuli, normalize=True, present=np.array([True, False]))
    assert activation[0].max() == pytest.approx(1.0)
    np.testing.assert_array_equal(activation[1], 0.0)


def test_encode_node_matches_encode(rng):
    lattice = build_lattice("posture", 16, (-np.ones(2), np.ones(2)), dims=2)
    stimuli = rng.uniform(-1, 1, size=(5, 2))
    node = encode_node(lattice, Constant(stimuli))
    np.testing.assert_allclose(forward(node), encode(lattice, stimuli, normalize=True))


def test_lattice_json_and_hash():
    lattice = build_lattice("direction", 12, dims=3)
    again = Lattice.from_json(lattice.to_json())
    assert again == lattice
    assert again.hash() == lattice.hash()
    other = build_lattice("direction", 12, dims=3, zeta=0.5)
    assert other.hash() != lattice.hash()


def test_lattices_cover_the_sequence(walker_seq):
    lattices = lattices_for_sequence(walker_seq, (27, 12, 4))
    frames = walker_seq.frames.reshape(-1, 3)
    centers = lattices["posture"].centers
    assert np.all(centers.min(axis=0) < frames.min(axis=0))
    assert np.all(centers.max(axis=0) > frames.max(axis=0))
    speeds = np.linalg.norm(np.diff(walker_seq.frames, axis=0), axis=-1)
    assert lattices["magnitude"].centers.max() == pytest.approx(1.5 * speeds.max())


def test_reach_widens_the_posture_box(walker_seq):
    narrow = lattices_for_sequence(walker_seq, (27, 12, 4))["posture"].centers
    wide = lattices_for_sequence(walker_seq, (27, 12, 4), reach=2.0)["posture"].centers
    np.testing.assert_allclose(wide.min(axis=0), narrow.min(axis=0) - 2.0)
    np.testing.assert_allclose(wide.max(axis=0), narrow.max(axis=0) + 2.0)
    with pytest.raises(LatticeError, match="reach"):
        lattices_for_sequence(walker_seq, (27, 12, 4), reach=-0.5)


def test_encode_frame_shapes(walker_seq):
    lattices = lattices_for_sequence(walker_seq, (27, 12, 4))
    sub = extract_submodal(walker_seq.frames[1], walker_seq.frames[1] - walker_seq.frames[0], Pose.identity(3))
    encoded = encode_frame(lattices, sub)
    assert encoded["posture"].shape == (15, 27)
    assert encoded["direction"].shape == (15, 12)
    assert encoded["magnitude"].shape == (15, 4)
    raw = encode_frame(lattices, sub, raw=True)
    assert raw["posture"].shape == (15, 3) and raw["magnitude"].shape == (15, 1)
