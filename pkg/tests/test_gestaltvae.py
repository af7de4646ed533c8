import numpy as np
import pytest

from gestaltbind.gestaltbind.diffcore import Constant, forward
from gestaltbind.gestaltbind.errors import ConfigError, ModelMismatchError, ShapeMismatchError
from gestaltbind.gestaltbind.models import (
    SUBMODALITIES,
    GestaltModel,
    Vae,
    VaeConfig,
    build_gestalt_dataset,
    combine_losses,
    losses,
    submodal_losses,
    train_gestalt_model,
    train_vae,
)
from gestaltbind.gestaltbind.models.training import kl_schedule
from gestaltbind.gestaltbind.perception import lattices_for_sequence

from .conftest import PENDULUM_COUNTS, tiny_configs


def test_config_validation():
    with pytest.raises(ConfigError):
        VaeConfig(input_size=10, hidden_size=4, latent_size=8)
    with pytest.raises(ConfigError):
        VaeConfig(input_size=10, lr=0.0)
    with pytest.raises(ConfigError):
        VaeConfig(input_size=10, output="linear", loss="bce")
    with pytest.raises(ConfigError, match="loss"):
        VaeConfig(input_size=10, output="linear", loss="mse")
    assert VaeConfig(input_size=10, output="linear", loss="sse").loss == "sse"


def test_vae_shapes_and_determinism(rng):
    config = VaeConfig(input_size=12, hidden_size=6, latent_size=2, seed=3)
    x = rng.uniform(size=(5, 12))
    recon, mean, logvar = Vae(config).forward(x)
    assert recon.shape == (5, 12) and mean.shape == (5, 2) and logvar.shape == (5, 2)
    assert np.all((recon > 0.0) & (recon < 1.0))
    again, _, _ = Vae(config).forward(x)
    np.testing.assert_array_equal(recon, again)


def test_sampling_changes_the_reconstruction(rng):
    vae = Vae(VaeConfig(input_size=4, hidden_size=4, latent_size=2))
    x = rng.uniform(size=4)
    mean_recon, _, _ = vae.forward(x)
    sampled, _, _ = vae.forward(x, sample=True, rng=np.random.default_rng(1))
    assert not np.allclose(mean_recon, sampled)


def test_input_size_mismatch():
    vae = Vae(VaeConfig(input_size=4, hidden_size=4, latent_size=2))
    with pytest.raises(ShapeMismatchError):
        vae.build(Constant(np.zeros(5)))


def test_sse_loss_is_zero_at_perfect_reconstruction(rng):
    vae = Vae(VaeConfig(input_size=3, hidden_size=3, latent_size=1, output="linear", loss="sse"))
    x = Constant(rng.normal(size=3))
    out = vae.build(x)
    forward(out.reconstruction)
    assert float(forward(vae.reconstruction_loss(out, Constant(out.reconstruction.value)))) == pytest.approx(0.0)


def test_retrospective_signals(rng):
    vae = Vae(VaeConfig(input_size=6, hidden_size=4, latent_size=2))
    x = rng.uniform(size=6)
    out = vae.build(Constant(x))
    recon = forward(out.reconstruction)
    mse = float(forward(vae.retrospective_loss(out, Constant(x), "mse")))
    assert mse == pytest.approx(np.sum((recon - x) ** 2) / 6.0)
    training = float(forward(vae.retrospective_loss(out, Constant(x))))
    assert training == pytest.approx(float(forward(vae.reconstruction_loss(out, Constant(x)))))
    with pytest.raises(ConfigError):
        vae.retrospective_loss(out, Constant(x), "bce")


def test_kl_is_zero_for_standard_posterior():
    vae = Vae(VaeConfig(input_size=3, hidden_size=3, latent_size=2))
    for layer in (vae.mean_head, vae.logvar_head):
        layer.W.assign(np.zeros_like(layer.W.value))
    out = vae.build(Constant(np.ones(3)))
    assert float(forward(Vae.kl_divergence(out))) == pytest.approx(0.0)


def test_kl_warmup_schedule():
    config = VaeConfig(input_size=2, hidden_size=2, latent_size=1, epochs=20, kl_warmup=0.1)
    assert [kl_schedule(config, e) for e in range(3)] == [0.5, 1.0, 1.0]
    no_warmup = VaeConfig(input_size=2, hidden_size=2, latent_size=1, kl_warmup=0.0)
    assert kl_schedule(no_warmup, 0) == 1.0


def test_gestalt_dataset_shapes(pendulum_seq, pendulum_lattices):
    dataset = build_gestalt_dataset(pendulum_seq, pendulum_lattices)
    T = pendulum_seq.num_frames - 1
    assert dataset["posture"].shape == (T, 2 * 16)
    assert dataset["direction"].shape == (T, 2 * 8)
    assert dataset["magnitude"].shape == (T, 2 * 4)
    assert np.all((dataset["posture"] >= 0.0) & (dataset["posture"] <= 1.0))
    raw = build_gestalt_dataset(pendulum_seq, encoding="raw")
    np.testing.assert_allclose(raw["posture"], pendulum_seq.frames[1:].reshape(T, -1))


def test_training_reduces_loss(pendulum_seq, pendulum_lattices):
    data = build_gestalt_dataset(pendulum_seq, pendulum_lattices)["posture"]
    config = VaeConfig(input_size=data.shape[1], hidden_size=16, latent_size=4, lr=1e-2, epochs=15, batch_size=16)
    _, curve = train_vae(config, data, "posture")
    assert len(curve) == 15
    assert curve[-1]["loss"] < curve[0]["loss"]


def test_training_is_seeded(pendulum_seq, pendulum_lattices):
    data = build_gestalt_dataset(pendulum_seq, pendulum_lattices)["magnitude"]
    config = VaeConfig(input_size=data.shape[1], hidden_size=4, latent_size=2, epochs=2, seed=7)
    a, _ = train_vae(config, data, "magnitude")
    b, _ = train_vae(config, data, "magnitude")
    for name, value in a.to_arrays().items():
        np.testing.assert_array_equal(value, b.to_arrays()[name])


def test_model_save_load(tmp_path, pendulum_model, pendulum_seq):
    prefix = str(tmp_path / "model")
    pendulum_model.save(prefix)
    loaded = GestaltModel.load(prefix)
    assert loaded.encoding == "popcode" and loaded.num_slots == 2 and loaded.dims == 2
    dataset = build_gestalt_dataset(pendulum_seq, pendulum_model.lattices)
    g = {kind: dataset[kind][5] for kind in SUBMODALITIES}
    assert submodal_losses(loaded, g) == pytest.approx(submodal_losses(pendulum_model, g))


def test_lattice_mismatch_is_detected(pendulum_model, pendulum_seq):
    pendulum_model.check_lattices(lattices_for_sequence(pendulum_seq, PENDULUM_COUNTS))
    with pytest.raises(ModelMismatchError):
        pendulum_model.check_lattices(lattices_for_sequence(pendulum_seq, (25, 8, 4)))


def test_betas_weight_the_combined_loss(pendulum_model, pendulum_seq):
    dataset = build_gestalt_dataset(pendulum_seq, pendulum_model.lattices)
    g = [dataset[kind][3] for kind in SUBMODALITIES]
    lp, ld, lm, total = losses(pendulum_model, *g, betas=dict(posture=2.0, direction=0.0, magnitude=0.5))
    assert total == pytest.approx(2.0 * lp + 0.5 * lm)
    assert combine_losses(dict(posture=1.0, direction=1.0, magnitude=1.0), lp, ld, lm) == pytest.approx(lp + ld + lm)


def test_parallel_training_matches_serial(pendulum_seq, pendulum_lattices):
    dataset = build_gestalt_dataset(pendulum_seq, pendulum_lattices)
    configs = tiny_configs(dataset, epochs=1)
    args = (dataset, configs, pendulum_lattices, "popcode", {}, 2, 2)
    serial, curves = train_gestalt_model(*args)
    parallel, _ = train_gestalt_model(*args, num_workers=3)
    assert list(curves.columns[:2]) == ["epoch", "loss_posture"]
    for kind in SUBMODALITIES:
        for name, value in serial.vaes[kind].to_arrays().items():
            np.testing.assert_array_equal(value, parallel.vaes[kind].to_arrays()[name])
