"""
Gated N x M binding matrix that routes observed features i to body slots j.

Weights are w = expit(w_b) of the bias activations w_b. Slot j receives
sum_i w_ij * x_i of the encoded features, and a sub-modal Gestalt vector is the
concatenation of the slot blocks (slot-major, neuron-minor).
"""

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy.optimize import linear_sum_assignment
from scipy.special import expit

from gestaltbind.gestaltbind.diffcore import Variable, reshape, sigmoid
from gestaltbind.gestaltbind.diffcore.optim import momentum_step
from gestaltbind.gestaltbind.errors import ConfigError, ShapeMismatchError
from gestaltbind.gestaltbind.utils import check_permutation

logger = logging.getLogger(__name__)

TRAINING_BIAS = 1000.0
INFERENCE_BIAS = -5.0


@dataclass(frozen=True)
class BindingState:
    """
    Attributes:
        biases (np.ndarray): (N, M) bias activations
        frozen (bool): adaptation disabled (training-mode binding)
        history (tuple): last two post-update bias matrices
    """

    biases: np.ndarray
    frozen: bool = False
    history: tuple = field(default=())

    @property
    def shape(self):
        return self.biases.shape

    @property
    def weights(self):
        return expit(self.biases)


def weights(state):
    return state.weights


def init_binding(mode, num_features, num_slots=None, init_bias=INFERENCE_BIAS):
    """
    Args:
        mode (str): "training" for the frozen +-1000 diagonal, "inference" for a uniform
            adaptable start at `init_bias`
    """
    num_slots = num_slots or num_features
    assert num_features > 0 and num_slots > 0, "binding needs at least one feature and slot"
    if mode == "training":
        biases = np.full((num_features, num_slots), -TRAINING_BIAS)
        np.fill_diagonal(biases, TRAINING_BIAS)
        return BindingState(biases=biases, frozen=True)
    if mode == "inference":
        return BindingState(biases=np.full((num_features, num_slots), float(init_bias)))
    raise ConfigError("binding.mode", f"expected \"training\" or \"inference\", got {mode}")


def bind(state_or_weights, encoded):
    """
    Routes encoded features into slots.

    Args:
        state_or_weights: BindingState or an (N, M) weight matrix
        encoded (dict or np.ndarray): kind -> (N, K) activations, or a single (N, K) array

    Returns:
        Gestalt vector(s) of length M * K, matching the type of `encoded`
    """
    w = state_or_weights.weights if isinstance(state_or_weights, BindingState) else state_or_weights
    if isinstance(encoded, dict):
        return {kind: bind(w, x) for kind, x in encoded.items()}
    x = np.asarray(encoded, dtype=np.float64)
    if x.shape[0] != w.shape[0]:
        raise ShapeMismatchError("binding weights", "encoded features", f"{w.shape} vs {x.shape}")
    return (w.T @ x).reshape(-1)


class BindingGraph:
    """Graph nodes for the binding biases; `bind(node)` builds the Gestalt vector of one sub-modality."""

    def __init__(self, state):
        self.biases = Variable(state.biases, name="binding.biases")
        self.weights = sigmoid(self.biases)

    def bind(self, activation, num_units):
        num_slots = self.biases.shape[1]
        return reshape(self.weights.T @ activation, (num_slots * num_units,))

    def set_state(self, state):
        self.biases.assign(state.biases)


def adapt_binding(state, grad, lr, momentum):
    """
    Momentum step on the bias activations. Frozen states come back unchanged.

    Raises:
        NonFiniteError: non-finite gradient; nothing is updated
    """
    if state.frozen:
        logger.debug("binding is frozen, skipping update")
        return state
    biases, history = momentum_step(
        state.biases, grad, lr, momentum, state.history, name="binding.biases"
    )
    return replace(state, biases=biases, history=history)


def target_assignment(permutation, num_slots=None):
    """
    Correct routing for a feature order produced by `permute_features(seq, permutation)`:
    observed feature k belongs to slot permutation[k].
    """
    perm = check_permutation(permutation, len(permutation))
    num_slots = num_slots or len(perm)
    target = np.zeros((len(perm), num_slots))
    target[np.arange(len(perm)), perm] = 1.0
    return target


def _weights_of(state):
    return state.weights if isinstance(state, BindingState) else np.asarray(state, dtype=np.float64)


def fbe(state, target=None, literal=False):
    """
    Feature binding error: sum over slots j of the Euclidean distance between column j of
    the weights and column j of the target assignment (identity by default).

    With `literal=True` the off-target terms of slot j are the diagonal entries w_ii, i != j,
    which requires a square matrix and ignores `target`.
    """
    w = _weights_of(state)
    if literal:
        assert w.shape[0] == w.shape[1], "the literal variant needs a square binding matrix"
        diag = np.diag(w)
        off = np.sum(diag**2) - diag**2
        return float(np.sum(np.sqrt((diag - 1.0) ** 2 + off)))
    if target is None:
        assert w.shape[0] == w.shape[1], "a non-square binding matrix needs an explicit target"
        target = np.eye(w.shape[0])
    return float(np.sum(np.sqrt(np.sum((w - target) ** 2, axis=0))))


def argmax_accuracy(state, target=None):
    """Number of slots whose strongest incoming feature is the target feature."""
    w = _weights_of(state)
    target = np.eye(w.shape[0]) if target is None else target
    return int(np.sum(np.argmax(w, axis=0) == np.argmax(target, axis=0)))


def hungarian_accuracy(state, target=None):
    """
    Number of slots matched correctly by the maximum-weight one-to-one assignment. Offline
    evaluation only; inference never uses it.
    """
    w = _weights_of(state)
    target = np.eye(w.shape[0]) if target is None else target
    rows, cols = linear_sum_assignment(w, maximize=True)
    return int(np.sum(target[rows, cols] == 1.0))
