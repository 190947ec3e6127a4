"""Angle helpers for the unit circle parameterized by [0, 2*pi)."""

import numpy as np

TWO_PI = 2.0 * np.pi


def wrap_angle(x):
    """Map angles (scalar or array) into [0, 2*pi)."""
    return np.mod(x, TWO_PI)


def angle_delta(x, y):
    """Signed circular difference x - y mapped into (-pi, pi]."""
    return np.mod(np.asarray(x) - np.asarray(y) + np.pi, TWO_PI) - np.pi


def angle_dist(x, y):
    """Unsigned circular distance between angles."""
    return np.abs(angle_delta(x, y))
