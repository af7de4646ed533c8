"""
Optimizers: Adam for VAE training and the momentum rule used to adapt parametric biases.
"""

from dataclasses import dataclass, replace

import numpy as np

from ..errors import NonFiniteError


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    step: int = 0
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8

    @classmethod
    def zeros_like(cls, param, **hyper):
        param = np.asarray(param, dtype=np.float64)
        return cls(m=np.zeros_like(param), v=np.zeros_like(param), **hyper)


def adam_step(param, grad, state, name="param"):
    """
    One bias-corrected Adam update.

    Returns:
        tuple: (new_param, new_state). Inputs are never mutated, so a raised
            NonFiniteError leaves the caller's state as it was.
    """
    param = np.asarray(param, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    assert state.lr > 0, "learning rate must be positive"
    assert grad.shape == param.shape == state.m.shape, (
        f"shape mismatch: param {param.shape}, grad {grad.shape}, moments {state.m.shape}"
    )
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError(name, "gradient")

    step = state.step + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * grad
    v = state.beta2 * state.v + (1.0 - state.beta2) * grad * grad
    m_hat = m / (1.0 - state.beta1**step)
    v_hat = v / (1.0 - state.beta2**step)
    new_param = param - state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
    return new_param, replace(state, m=m, v=v, step=step)


class Adam:
    """Adam over a list of graph Variables, reading `Variable.grad` after a backward pass."""

    def __init__(self, params, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.params = list(params)
        self.states = [
            AdamState.zeros_like(p.value, lr=lr, beta1=beta1, beta2=beta2, eps=eps)
            for p in self.params
        ]

    def step(self, grads=None):
        grads = grads if grads is not None else {p: p.grad for p in self.params}
        # check everything before touching anything
        for p in self.params:
            if not np.all(np.isfinite(grads[p])):
                raise NonFiniteError(p.name, "gradient")
        for i, p in enumerate(self.params):
            new_value, self.states[i] = adam_step(p.value, grads[p], self.states[i], name=p.name)
            p.assign(new_value)


def momentum_step(value, grad, lr, momentum, history, name="bias"):
    """
    Gradient step with momentum on the last two values:

        delta = -lr * grad + momentum * (history[-1] - history[-2])

    The momentum term is 0 until two updates have been recorded.

    Args:
        value (np.ndarray): current parameter value
        grad (np.ndarray): dL/d(value)
        lr (float): learning rate
        momentum (float): momentum factor
        history (tuple): up to two previous post-update values, oldest first

    Returns:
        tuple: (new_value, new_history) with new_history holding the last two values
    """
    value = np.asarray(value, dtype=np.float64)
    grad = np.asarray(grad, dtype=np.float64)
    if not np.all(np.isfinite(grad)):
        raise NonFiniteError(name, "gradient")
    delta = -lr * grad
    if len(history) == 2:
        delta = delta + momentum * (history[1] - history[0])
    new_value = value + delta
    new_history = (tuple(history) + (new_value.copy(),))[-2:]
    return new_value, new_history
