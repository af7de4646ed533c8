import numpy as np

from .graph import Variable
from .ops import ACTIVATIONS, affine


class Dense:
    """
    Fully connected layer y = act(x @ W.T + b) with Glorot-uniform weights and zero bias.

    Args:
        in_size (int): input width
        out_size (int): output width
        activation (str or None): key into ACTIVATIONS; None / "linear" for identity
        rng (np.random.Generator): source of the initial weights
        name (str): prefix for the parameter node names
    """

    def __init__(self, in_size, out_size, activation=None, rng=None, name="dense"):
        assert in_size > 0 and out_size > 0, "layer sizes must be positive"
        assert activation in ACTIVATIONS, f"unknown activation {activation}"
        rng = rng if rng is not None else np.random.default_rng(0)
        limit = np.sqrt(6.0 / (in_size + out_size))
        self.in_size = in_size
        self.out_size = out_size
        self.activation = activation
        self.name = name
        self.W = Variable(rng.uniform(-limit, limit, size=(out_size, in_size)), name=f"{name}.W")
        self.b = Variable(np.zeros(out_size), name=f"{name}.b")

    def __call__(self, x):
        return ACTIVATIONS[self.activation](affine(x, self.W, self.b))

    def parameters(self):
        return [self.W, self.b]
