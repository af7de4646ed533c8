"""
Planar double pendulum integrated with classic 4th-order Runge-Kutta.

Angles are measured from the downward vertical; the pivot sits at the origin and y points up.
"""

from dataclasses import dataclass

import numpy as np

from gestaltbind.gestaltbind.errors import SequenceError

from .sequence import FeatureSequence

PENDULUM_LABELS = ("elbow", "tip")


@dataclass(frozen=True)
class PendulumParams:
    l1: float = 0.8
    l2: float = 0.6
    m1: float = 1.25
    m2: float = 1.0
    g: float = 9.81
    theta1: float = np.deg2rad(60.0)
    theta2: float = np.deg2rad(60.0)
    omega1: float = 0.0
    omega2: float = 0.0
    dt: float = 0.01
    steps: int = 1000

    def __post_init__(self):
        if not (self.l1 > 0 and self.l2 > 0):
            raise SequenceError(f"pendulum lengths must be positive, got {self.l1}, {self.l2}")
        if not (self.m1 > 0 and self.m2 > 0):
            raise SequenceError(f"pendulum masses must be positive, got {self.m1}, {self.m2}")
        if not self.dt > 0:
            raise SequenceError(f"dt must be positive, got {self.dt}")
        if self.steps < 2:
            raise SequenceError(f"need at least 2 steps, got {self.steps}")


def _deriv(u, p):
    """d/dt of the state (theta1, omega1, theta2, omega2)."""
    th1, w1, th2, w2 = u
    delta = th2 - th1
    den1 = (p.m1 + p.m2) * p.l1 - p.m2 * p.l1 * np.cos(delta) ** 2
    den2 = (p.l2 / p.l1) * den1
    dw1 = (
        p.m2 * p.l1 * w1 * w1 * np.sin(delta) * np.cos(delta)
        + p.m2 * p.g * np.sin(th2) * np.cos(delta)
        + p.m2 * p.l2 * w2 * w2 * np.sin(delta)
        - (p.m1 + p.m2) * p.g * np.sin(th1)
    ) / den1
    dw2 = (
        -p.m2 * p.l2 * w2 * w2 * np.sin(delta) * np.cos(delta)
        + (p.m1 + p.m2) * p.g * np.sin(th1) * np.cos(delta)
        - (p.m1 + p.m2) * p.l1 * w1 * w1 * np.sin(delta)
        - (p.m1 + p.m2) * p.g * np.sin(th2)
    ) / den2
    return np.array([w1, dw1, w2, dw2])


def pendulum_states(params):
    """
    Integrated state trajectory.

    Returns:
        np.ndarray: (steps, 4) rows of (theta1, omega1, theta2, omega2); row 0 is the
            initial condition
    """
    h = params.dt
    states = np.empty((params.steps, 4))
    u = np.array([params.theta1, params.omega1, params.theta2, params.omega2], dtype=np.float64)
    states[0] = u
    for i in range(1, params.steps):
        k1 = _deriv(u, params)
        k2 = _deriv(u + 0.5 * h * k1, params)
        k3 = _deriv(u + 0.5 * h * k2, params)
        k4 = _deriv(u + h * k3, params)
        u = u + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        states[i] = u
    return states


def pendulum_positions(states, params):
    th1, th2 = states[:, 0], states[:, 2]
    x1 = params.l1 * np.sin(th1)
    y1 = -params.l1 * np.cos(th1)
    x2 = x1 + params.l2 * np.sin(th2)
    y2 = y1 - params.l2 * np.cos(th2)
    return np.stack([np.stack([x1, y1], axis=-1), np.stack([x2, y2], axis=-1)], axis=1)


def pendulum_energy(states, params):
    """Total mechanical energy per state row (zero potential at the pivot height)."""
    th1, w1, th2, w2 = states.T
    p = params
    kinetic = 0.5 * p.m1 * (p.l1 * w1) ** 2 + 0.5 * p.m2 * (
        (p.l1 * w1) ** 2 + (p.l2 * w2) ** 2 + 2.0 * p.l1 * p.l2 * w1 * w2 * np.cos(th1 - th2)
    )
    potential = -(p.m1 + p.m2) * p.g * p.l1 * np.cos(th1) - p.m2 * p.g * p.l2 * np.cos(th2)
    return kinetic + potential


def simulate_pendulum(params=None):
    """Positions of both joint endpoints per frame: N=2 (elbow, tip), D=2."""
    params = params or PendulumParams()
    states = pendulum_states(params)
    return FeatureSequence(
        frames=pendulum_positions(states, params), dt=params.dt, labels=PENDULUM_LABELS
    )
