"""
One-hidden-layer variational autoencoder on the computation graph.

    encoder   x -> tanh hidden -> (mean, logvar)
    decoder   z -> tanh hidden -> logits -> sigmoid (or identity for raw sub-modal values)

Training samples z = mean + exp(logvar / 2) * eps; inference always decodes the mean.
"""

from collections import namedtuple
from dataclasses import asdict, dataclass

import numpy as np

from gestaltbind.gestaltbind.diffcore import (
    Constant,
    Dense,
    bce_with_logits,
    exp,
    forward,
    reduce_sum,
    sigmoid,
    square,
    squared_error,
)
from gestaltbind.gestaltbind.errors import ConfigError, ShapeMismatchError

VaeOutput = namedtuple("VaeOutput", ["logits", "reconstruction", "mean", "logvar", "z"])

OUTPUTS = ("sigmoid", "linear")
LOSSES = ("bce", "sse")
# signals driving retrospective inference: the training loss itself, or squared error
# averaged over Gestalt units
SIGNALS = ("training", "mse")


@dataclass(frozen=True)
class VaeConfig:
    input_size: int
    hidden_size: int = 45
    latent_size: int = 25
    lr: float = 1e-3
    beta: float = 1.0
    kl_weight: float = 1.0
    kl_warmup: float = 0.1
    epochs: int = 100
    batch_size: int = 32
    seed: int = 0
    output: str = "sigmoid"
    loss: str = "bce"

    def __post_init__(self):
        if self.input_size < 1:
            raise ConfigError("input_size", f"must be positive, got {self.input_size}")
        if not self.hidden_size >= self.latent_size >= 1:
            raise ConfigError(
                "hidden_size", f"need hidden >= latent >= 1, got {self.hidden_size}/{self.latent_size}"
            )
        if not self.lr > 0:
            raise ConfigError("lr", f"learning rate must be positive, got {self.lr}")
        if self.epochs < 0 or self.batch_size < 1:
            raise ConfigError("epochs", "epochs must be >= 0 and batch_size >= 1")
        if self.output not in OUTPUTS:
            raise ConfigError("output", f"expected one of {OUTPUTS}, got {self.output}")
        if self.loss not in LOSSES:
            raise ConfigError("loss", f"expected one of {LOSSES}, got {self.loss}")
        if self.loss == "bce" and self.output != "sigmoid":
            raise ConfigError("loss", "binary cross-entropy needs the sigmoid output")

    def to_dict(self):
        return asdict(self)


class Vae:
    def __init__(self, config, rng=None, name="vae"):
        self.config = config
        self.name = name
        rng = rng if rng is not None else np.random.default_rng(config.seed)
        c = config
        self.encoder = Dense(c.input_size, c.hidden_size, "tanh", rng, f"{name}.encoder")
        self.mean_head = Dense(c.hidden_size, c.latent_size, None, rng, f"{name}.mean")
        self.logvar_head = Dense(c.hidden_size, c.latent_size, None, rng, f"{name}.logvar")
        self.decoder = Dense(c.latent_size, c.hidden_size, "tanh", rng, f"{name}.decoder")
        self.output = Dense(c.hidden_size, c.input_size, None, rng, f"{name}.output")

    @property
    def layers(self):
        return dict(
            encoder=self.encoder,
            mean=self.mean_head,
            logvar=self.logvar_head,
            decoder=self.decoder,
            output=self.output,
        )

    def parameters(self):
        return [p for layer in self.layers.values() for p in layer.parameters()]

    def build(self, x, noise=None):
        """
        Wires the VAE onto input node `x` of shape (input_size,) or (B, input_size).

        Args:
            noise (Node): standard normal draws shaped like the latent mean; None decodes
                the posterior mean

        Returns:
            VaeOutput of graph nodes
        """
        if x.shape is not None and x.shape[-1] != self.config.input_size:
            raise ShapeMismatchError(
                x.name, self.encoder.W.name, f"input {x.shape} vs size {self.config.input_size}"
            )
        hidden = self.encoder(x)
        mean = self.mean_head(hidden)
        logvar = self.logvar_head(hidden)
        z = mean if noise is None else mean + exp(logvar * 0.5) * noise
        logits = self.output(self.decoder(z))
        reconstruction = sigmoid(logits) if self.config.output == "sigmoid" else logits
        return VaeOutput(logits, reconstruction, mean, logvar, z)

    def reconstruction_loss(self, out, target):
        """Summed reconstruction loss node of a VaeOutput against `target`."""
        if self.config.loss == "bce":
            return bce_with_logits(out.logits, target)
        return squared_error(out.reconstruction, target)

    def retrospective_loss(self, out, target, signal="training"):
        """
        Loss node that drives retrospective inference.

        "training" reuses the summed training loss. "mse" averages the squared error over
        the Gestalt units; it is zero only at perfect reconstruction, whereas BCE is linear in
        its target and keeps falling as population codes fall silent.
        """
        if signal not in SIGNALS:
            raise ConfigError("signal", f"expected one of {SIGNALS}, got {signal}")
        if signal == "mse":
            return squared_error(out.reconstruction, target) * (1.0 / self.config.input_size)
        return self.reconstruction_loss(out, target)

    @staticmethod
    def kl_divergence(out):
        """Summed KL(q(z|x) || N(0, I)) node."""
        return reduce_sum(1.0 + out.logvar - square(out.mean) - exp(out.logvar)) * -0.5

    def forward(self, x, sample=False, rng=None):
        """
        Numeric forward pass.

        Returns:
            tuple: (reconstruction, mean, logvar) arrays
        """
        x = Constant(np.asarray(x, dtype=np.float64), name=f"{self.name}.input")
        noise = None
        if sample:
            rng = rng if rng is not None else np.random.default_rng(self.config.seed)
            shape = x.shape[:-1] + (self.config.latent_size,)
            noise = Constant(rng.standard_normal(shape), name=f"{self.name}.noise")
        out = self.build(x, noise)
        forward(out.reconstruction)
        return out.reconstruction.value, out.mean.value, out.logvar.value

    def to_arrays(self):
        arrays = {}
        for layer_name, layer in self.layers.items():
            arrays[f"{self.name}.{layer_name}.W"] = layer.W.value
            arrays[f"{self.name}.{layer_name}.b"] = layer.b.value
        return arrays

    def load_arrays(self, arrays):
        for layer_name, layer in self.layers.items():
            layer.W.assign(arrays[f"{self.name}.{layer_name}.W"])
            layer.b.assign(arrays[f"{self.name}.{layer_name}.b"])
        return self


def vae_forward(vae, g, sample=False, rng=None):
    return vae.forward(g, sample=sample, rng=rng)
