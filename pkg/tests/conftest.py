import numpy as np
import pytest

import gestaltbind.gestaltbind.macros as macros
from gestaltbind.datagen import PendulumParams, WalkerParams, generate_walker, simulate_pendulum
from gestaltbind.gestaltbind.models import VaeConfig, build_gestalt_dataset, train_gestalt_model
from gestaltbind.gestaltbind.perception import lattices_for_sequence

PENDULUM_COUNTS = (16, 8, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(0)


@pytest.fixture(scope="session")
def pendulum_seq():
    return simulate_pendulum(PendulumParams(steps=120))


@pytest.fixture(scope="session")
def walker_seq():
    return generate_walker(WalkerParams(period=24, num_frames=48))


@pytest.fixture(scope="session")
def pendulum_lattices(pendulum_seq):
    return lattices_for_sequence(pendulum_seq, PENDULUM_COUNTS)


def tiny_configs(dataset, epochs=3, output="sigmoid", loss="bce"):
    return {
        kind: VaeConfig(
            input_size=data.shape[1],
            hidden_size=8,
            latent_size=3,
            lr=1e-2,
            epochs=epochs,
            batch_size=16,
            output=output,
            loss=loss,
        )
        for kind, data in dataset.items()
    }


@pytest.fixture(scope="session")
def pendulum_model(pendulum_seq, pendulum_lattices):
    """Popcode Gestalt model trained for a few epochs; good enough to have gradients."""
    dataset = build_gestalt_dataset(pendulum_seq, pendulum_lattices)
    model, _ = train_gestalt_model(
        dataset,
        tiny_configs(dataset),
        pendulum_lattices,
        "popcode",
        dict(posture=1.0, direction=1.0, magnitude=1.0),
        num_slots=pendulum_seq.num_features,
        dims=pendulum_seq.dims,
    )
    return model


@pytest.fixture(scope="session")
def pendulum_raw_model(pendulum_seq):
    dataset = build_gestalt_dataset(pendulum_seq, encoding="raw")
    model, _ = train_gestalt_model(
        dataset,
        tiny_configs(dataset, output="linear", loss="sse"),
        {},
        "raw",
        dict(posture=1.0, direction=1.0, magnitude=1.0),
        num_slots=pendulum_seq.num_features,
        dims=pendulum_seq.dims,
    )
    return model


@pytest.fixture
def output_root(tmp_path, monkeypatch):
    root = tmp_path / "runs"
    monkeypatch.setattr(macros, "GESTALTBIND_OUTPUT_ROOT", str(root))
    return root
