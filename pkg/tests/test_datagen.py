import json

import numpy as np
import pytest

from gestaltbind.datagen import (
    CsvLayout,
    DisturbanceSpec,
    FeatureSequence,
    PendulumParams,
    WalkerParams,
    apply_disturbance,
    crossfade_cycle,
    generate_walker,
    load_csv,
    loop_frames,
    pendulum_energy,
    pendulum_states,
    permute_features,
    random_disturbance,
    save_csv,
    simulate_pendulum,
    velocities,
)
from gestaltbind.datagen.walker import WALKER_LABELS
from gestaltbind.gestaltbind.errors import CsvParseError, SequenceError


def test_default_pendulum_shape():
    seq = simulate_pendulum()
    assert (seq.num_frames, seq.num_features, seq.dims) == (1000, 2, 2)
    assert seq.dt == 0.01
    assert seq.labels == ("elbow", "tip")


def test_pendulum_starts_at_initial_angles():
    p = PendulumParams()
    seq = simulate_pendulum(p)
    np.testing.assert_allclose(seq.frames[0, 0], [p.l1 * np.sin(p.theta1), -p.l1 * np.cos(p.theta1)])
    np.testing.assert_allclose(np.linalg.norm(seq.frames[:, 0], axis=-1), p.l1)
    np.testing.assert_allclose(np.linalg.norm(seq.frames[:, 1] - seq.frames[:, 0], axis=-1), p.l2)


def test_pendulum_conserves_energy():
    p = PendulumParams()
    energy = pendulum_energy(pendulum_states(p), p)
    assert np.max(np.abs(energy - energy[0])) < 1e-3 * abs(energy[0])


def test_small_angle_period_with_light_second_arm():
    p = PendulumParams(m2=1e-6, theta1=np.deg2rad(5.0), theta2=np.deg2rad(5.0), steps=1000)
    theta1 = pendulum_states(p)[:, 0]
    idx = np.nonzero(np.sign(theta1[:-1]) != np.sign(theta1[1:]))[0]
    # linear interpolation of the zero crossings; consecutive crossings are half a period apart
    crossings = (idx - theta1[idx] / (theta1[idx + 1] - theta1[idx])) * p.dt
    assert len(crossings) >= 4
    period = 2.0 * np.mean(np.diff(crossings))
    assert period == pytest.approx(2.0 * np.pi * np.sqrt(p.l1 / p.g), rel=0.02)


def test_velocities_match_angular_speeds():
    p = PendulumParams()
    states = pendulum_states(p)
    th1, w1, th2, w2 = states.T
    elbow = p.l1 * np.abs(w1)
    tip = np.linalg.norm(
        np.stack([p.l1 * w1 * np.cos(th1) + p.l2 * w2 * np.cos(th2),
                  p.l1 * w1 * np.sin(th1) + p.l2 * w2 * np.sin(th2)], axis=-1),
        axis=-1,
    )
    steps = np.linalg.norm(velocities(simulate_pendulum(p)), axis=-1)
    for k, speed in enumerate((elbow, tip)):
        expected = p.dt * 0.5 * (speed[:-1] + speed[1:])
        moving = expected > 0.2 * expected.max()
        np.testing.assert_allclose(steps[moving, k], expected[moving], rtol=0.05)


def test_pendulum_at_rest_stays_at_rest():
    p = PendulumParams(theta1=0.0, theta2=0.0, steps=50)
    np.testing.assert_allclose(simulate_pendulum(p).frames[-1], [[0.0, -p.l1], [0.0, -p.l1 - p.l2]], atol=1e-12)


def test_pendulum_rejects_bad_params():
    with pytest.raises(SequenceError):
        PendulumParams(dt=0.0)
    with pytest.raises(SequenceError):
        PendulumParams(l1=-1.0)


def test_walker_shape_and_period():
    seq = generate_walker()
    assert (seq.num_frames, seq.num_features, seq.dims) == (1036, 15, 3)
    assert seq.labels == WALKER_LABELS
    np.testing.assert_allclose(seq.frames[148:296], seq.frames[:148])


def test_walker_limb_lengths_are_constant():
    p = WalkerParams()
    seq = generate_walker(p)
    idx = {name: i for i, name in enumerate(WALKER_LABELS)}
    thigh = np.linalg.norm(seq.frames[:, idx["l_knee"]] - seq.frames[:, idx["l_hip"]], axis=-1)
    shin = np.linalg.norm(seq.frames[:, idx["r_ankle"]] - seq.frames[:, idx["r_knee"]], axis=-1)
    np.testing.assert_allclose(thigh, p.thigh)
    np.testing.assert_allclose(shin, p.shin)


def test_walker_sides_are_half_a_cycle_apart():
    seq = generate_walker(WalkerParams(period=40, num_frames=80))
    idx = {name: i for i, name in enumerate(WALKER_LABELS)}
    left = seq.frames[:, idx["l_ankle"], 0]
    right = seq.frames[:, idx["r_ankle"], 0]
    np.testing.assert_allclose(left[:20], right[20:40], atol=1e-12)


def test_walker_subjects_differ():
    a = generate_walker(WalkerParams(subject_variation=0.05, seed=1))
    b = generate_walker(WalkerParams(subject_variation=0.05, seed=2))
    assert not np.allclose(a.frames, b.frames)
    again = generate_walker(WalkerParams(subject_variation=0.05, seed=1))
    np.testing.assert_array_equal(a.frames, again.frames)


def test_static_walker_does_not_move():
    seq = generate_walker(WalkerParams().static())
    np.testing.assert_allclose(velocities(seq), 0.0, atol=1e-15)


def test_sequence_validation():
    with pytest.raises(SequenceError):
        FeatureSequence(frames=np.zeros((5, 2, 4)), dt=0.1)
    with pytest.raises(SequenceError):
        FeatureSequence(frames=np.zeros((1, 2, 3)), dt=0.1)
    with pytest.raises(SequenceError):
        FeatureSequence(frames=np.zeros((3, 2, 3)), dt=-1.0)
    seq = FeatureSequence(frames=np.zeros((3, 2, 3)), dt=0.1)
    assert seq.labels == ("f0", "f1")


def test_permute_features(walker_seq):
    perm = list(range(walker_seq.num_features))[::-1]
    permuted = permute_features(walker_seq, perm)
    np.testing.assert_array_equal(permuted.frames[:, 0], walker_seq.frames[:, -1])
    assert permuted.labels[0] == walker_seq.labels[-1]
    with pytest.raises(SequenceError):
        permute_features(walker_seq, [0] * walker_seq.num_features)


def test_crossfade_closes_the_cycle():
    t = np.arange(300) * 0.05
    # slightly off-period sine so start and end do not meet
    frames = np.stack([np.sin(t), np.cos(1.03 * t)], axis=-1)[:, None, :]
    seq = FeatureSequence(frames=frames, dt=0.05)
    cycled = crossfade_cycle(seq, k=20)
    assert cycled.num_frames == 280
    jump = np.linalg.norm(cycled.frames[0] - cycled.frames[-1])
    typical = np.median(np.linalg.norm(np.diff(cycled.frames, axis=0), axis=-1))
    assert jump < 3.0 * typical
    with pytest.raises(SequenceError):
        crossfade_cycle(FeatureSequence(frames=frames[:30], dt=0.05), k=20)


def test_loop_frames_wraps_with_last_frame_as_predecessor():
    frames = np.arange(12.0).reshape(4, 1, 3)
    seq = FeatureSequence(frames=frames, dt=1.0)
    steps = list(loop_frames(seq, 6))
    assert [s for s, _, _ in steps] == list(range(6))
    _, frame, velocity = steps[3]
    np.testing.assert_array_equal(frame, frames[0])
    np.testing.assert_array_equal(velocity, frames[0] - frames[3])


def test_csv_round_trip_is_exact(tmp_path, walker_seq):
    path = str(tmp_path / "walk.csv")
    save_csv(walker_seq, path)
    loaded = load_csv(path)
    np.testing.assert_array_equal(loaded.frames, walker_seq.frames)
    assert loaded.labels == walker_seq.labels
    assert loaded.dt == walker_seq.dt


def test_csv_without_sidecar_infers_dt(tmp_path):
    path = tmp_path / "two.csv"
    path.write_text("t,a_x,a_y\n0.0,1,2\n0.5,1.5,2\n1.0,2,2\n")
    seq = load_csv(str(path))
    assert seq.dt == 0.5
    assert seq.dims == 2 and seq.labels == ("a",)


def test_csv_layout_dt_overrides_sidecar(tmp_path, walker_seq):
    path = str(tmp_path / "walk.csv")
    save_csv(walker_seq, path)
    assert load_csv(path, CsvLayout(dt=0.25)).dt == 0.25


@pytest.mark.parametrize("dt", [0, -0.1, "fast"])
def test_csv_sidecar_dt_must_be_positive(tmp_path, walker_seq, dt):
    path = str(tmp_path / "walk.csv")
    save_csv(walker_seq, path)
    sidecar = tmp_path / "walk.json"
    meta = json.loads(sidecar.read_text())
    meta["dt"] = dt
    sidecar.write_text(json.dumps(meta))
    with pytest.raises(SequenceError, match="walk.json"):
        load_csv(path)


def test_csv_ragged_row_reports_line(tmp_path):
    path = tmp_path / "ragged.csv"
    path.write_text("t,a_x,a_y\n0.0,1,2\n0.5,1.5\n1.0,2,2\n")
    with pytest.raises(CsvParseError) as info:
        load_csv(str(path))
    assert info.value.line == 3


def test_csv_non_numeric_cell(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("t,a_x,a_y\n0.0,1,2\n0.5,oops,2\n")
    with pytest.raises(CsvParseError) as info:
        load_csv(str(path))
    assert info.value.line == 3


def test_csv_column_count_mismatch(tmp_path):
    path = tmp_path / "cols.csv"
    path.write_text("t,a_x,a_y,b_x,b_y\n0.0,1,2,3,4\n0.5,1,2,3,4\n")
    with pytest.raises(CsvParseError) as info:
        load_csv(str(path), CsvLayout(num_features=3))
    assert info.value.line == 1


def test_disturbance_inverse_recovers_data(walker_seq):
    spec = DisturbanceSpec(angles_deg=(25.0, 35.0, 45.0), translation=(-2.0, 2.5, -4.0))
    disturbed = apply_disturbance(walker_seq, spec)
    R, b = spec.inverse()
    np.testing.assert_allclose(disturbed.frames @ R.T + b, walker_seq.frames, atol=1e-12)


def test_disturbance_checks_dimensions(pendulum_seq):
    with pytest.raises(SequenceError):
        apply_disturbance(pendulum_seq, DisturbanceSpec())
    planar = DisturbanceSpec(angles_deg=(90.0,), translation=(0.0, 0.0))
    rotated = apply_disturbance(pendulum_seq, planar)
    np.testing.assert_allclose(rotated.frames[..., 0], -pendulum_seq.frames[..., 1], atol=1e-12)


def test_random_disturbance_is_bounded(rng):
    for _ in range(20):
        spec = random_disturbance(rng, max_angle_deg=30.0, max_offset=1.0)
        assert np.all(np.abs(spec.angles_deg) <= 30.0)
        assert np.all(np.abs(spec.translation) <= 1.0)
