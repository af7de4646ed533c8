import numpy as np
import pytest
from transforms3d import euler

from gestaltbind.gestaltbind.diffcore import Variable, backward, forward, reduce_sum
from gestaltbind.gestaltbind.errors import NonFiniteError
from gestaltbind.gestaltbind.perception import (
    Pose,
    SubmodalGraph,
    adapt_pose,
    euler_rotation,
    extract_submodal,
    rotation_from_euler,
)
from gestaltbind.gestaltbind.perception.perspective import motion_terms

from .test_diffcore import assert_grads_match


def test_identity_pose():
    R = rotation_from_euler(np.zeros(3))
    np.testing.assert_array_equal(R, np.eye(3))
    np.testing.assert_array_equal(rotation_from_euler([0.0]), np.eye(2))


def test_rotation_is_x_then_y_then_z_product():
    ax, ay, az = 0.3, -0.7, 1.1
    rx = euler.euler2mat(ax, 0, 0, axes="rxyz")
    ry = euler.euler2mat(0, ay, 0, axes="rxyz")
    rz = euler.euler2mat(0, 0, az, axes="rxyz")
    np.testing.assert_allclose(rotation_from_euler([ax, ay, az]), rx @ ry @ rz, atol=1e-12)


def test_rotations_are_proper(rng):
    for _ in range(10):
        R = rotation_from_euler(rng.uniform(-np.pi, np.pi, 3))
        np.testing.assert_allclose(R.T @ R, np.eye(3), atol=1e-12)
        assert np.linalg.det(R) == pytest.approx(1.0)


def test_quarter_turn_about_z():
    R = rotation_from_euler([0.0, 0.0, np.pi / 2])
    np.testing.assert_allclose(R @ [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], atol=1e-12)


@pytest.mark.parametrize("angles", [[0.2, -0.4, 0.9], [1.3]])
def test_euler_rotation_gradient(rng, angles):
    a = Variable(np.array(angles))
    R = euler_rotation(a)
    forward(R)
    weights = rng.normal(size=R.value.shape)
    loss = reduce_sum(R * weights)
    assert_grads_match(loss, [a])


def test_extract_submodal_identity(rng):
    frame = rng.normal(size=(4, 3))
    velocity = rng.normal(size=(4, 3))
    velocity[2] = 0.0
    sub = extract_submodal(frame, velocity, Pose.identity(3))
    np.testing.assert_allclose(sub.positions, frame)
    np.testing.assert_allclose(np.linalg.norm(sub.directions[[0, 1, 3]], axis=-1), 1.0)
    np.testing.assert_array_equal(sub.directions[2], 0.0)
    assert list(sub.present) == [True, True, False, True]
    np.testing.assert_allclose(sub.magnitudes, np.linalg.norm(velocity, axis=-1))


def test_magnitude_is_rotation_invariant(rng):
    frame = rng.normal(size=(3, 3))
    velocity = rng.normal(size=(3, 3))
    pose = Pose(angles=np.array([0.4, 0.2, -1.0]), translation=np.array([1.0, 2.0, 3.0]))
    a = extract_submodal(frame, velocity, Pose.identity(3))
    b = extract_submodal(frame, velocity, pose)
    np.testing.assert_allclose(a.magnitudes, b.magnitudes)
    np.testing.assert_allclose(b.positions, frame @ pose.rotation.T + pose.translation)


def test_submodal_graph_matches_numeric(rng):
    frame = rng.normal(size=(3, 2))
    velocity = rng.normal(size=(3, 2))
    pose = Pose(angles=np.array([0.7]), translation=np.array([0.1, -0.2]))
    graph = SubmodalGraph(3, 2, pose)
    graph.set_frame(frame, velocity)
    expected = extract_submodal(frame, velocity, pose)
    np.testing.assert_allclose(forward(graph.positions), expected.positions)
    np.testing.assert_allclose(forward(graph.directions), expected.directions)
    np.testing.assert_allclose(forward(graph.magnitudes)[:, 0], expected.magnitudes)


def test_submodal_gradient_isolation(rng):
    graph = SubmodalGraph(4, 3)
    graph.set_frame(rng.normal(size=(4, 3)), rng.normal(size=(4, 3)))
    wrt = [graph.angles, graph.translation]

    direction_loss = reduce_sum(graph.directions * graph.directions * 0.5 + graph.directions)
    forward(direction_loss)
    grads = backward(direction_loss, wrt=wrt)
    np.testing.assert_array_equal(grads[graph.translation], 0.0)
    assert np.any(grads[graph.angles] != 0.0)

    magnitude_loss = reduce_sum(graph.magnitudes * graph.magnitudes)
    forward(magnitude_loss)
    grads = backward(magnitude_loss, wrt=wrt)
    np.testing.assert_array_equal(grads[graph.angles], 0.0)
    np.testing.assert_array_equal(grads[graph.translation], 0.0)


def test_motion_terms_mask_stationary_features():
    magnitudes, inv, present = motion_terms(np.array([[3.0, 4.0], [0.0, 0.0]]))
    np.testing.assert_array_equal(magnitudes, [5.0, 0.0])
    np.testing.assert_array_equal(inv, [0.2, 0.0])
    np.testing.assert_array_equal(present, [True, False])


def test_adapt_pose_updates_only_enabled_groups():
    pose = Pose.identity(3)
    new = adapt_pose(pose, np.ones(3), np.ones(3), 0.1, 0.9, 0.2, 0.9, rotation=True, translation=False)
    np.testing.assert_allclose(new.angles, -0.1)
    np.testing.assert_array_equal(new.translation, 0.0)
    assert new.translation_history == ()


def test_adapt_pose_nan_leaves_pose_unchanged():
    pose = Pose.identity(2)
    with pytest.raises(NonFiniteError):
        adapt_pose(pose, np.array([np.nan]), np.zeros(2), 0.1, 0.9, 0.1, 0.9)
    # disabled groups may carry anything
    new = adapt_pose(pose, np.array([np.nan]), np.ones(2), 0.1, 0.9, 0.1, 0.9, rotation=False)
    np.testing.assert_array_equal(new.angles, pose.angles)


def test_pose_dict_round_trip():
    pose = Pose(angles=np.array([0.1, 0.2, 0.3]), translation=np.array([1.0, 0.0, -1.0]))
    again = Pose.from_dict(pose.to_dict())
    np.testing.assert_array_equal(again.angles, pose.angles)
    np.testing.assert_array_equal(again.translation, pose.translation)
