#
# density/kernels.py
#
"""
The eight smoothing kernels. Every one is a product f(s, t) = g(s) g(t) of a
1-D profile, evaluated at s/h, t/h with h = (bandwidth + 1) / 2 so the border
ring of the window keeps a nonzero weight, then rescaled to unit sum.
"""
from __future__ import annotations

import math

import numpy as np

from .models import KernelMatrix, KernelSpec


def _inside(w: np.ndarray) -> np.ndarray:
    return np.abs(w) <= 1.0


def _uniform(w):
    return np.where(_inside(w), 0.5, 0.0)


def _triangular(w):
    return np.where(_inside(w), 1.0 - np.abs(w), 0.0)


def _epanechnikov(w):
    return np.where(_inside(w), 0.75 * (1.0 - w * w), 0.0)


def _quartic(w):
    return np.where(_inside(w), (15.0 / 16.0) * (1.0 - w * w) ** 2, 0.0)


def _triweight(w):
    return np.where(_inside(w), (35.0 / 32.0) * (1.0 - w * w) ** 3, 0.0)


def _tricube(w):
    return np.where(_inside(w), (70.0 / 81.0) * (1.0 - np.abs(w) ** 3) ** 3, 0.0)


def _gaussian(w):
    return np.exp(-0.5 * w * w) / math.sqrt(2.0 * math.pi)


def _cosine(w):
    return np.where(_inside(w), (math.pi / 4.0) * np.cos(0.5 * math.pi * w), 0.0)


PROFILES = {
    "uniform": _uniform,
    "triangular": _triangular,
    "epanechnikov": _epanechnikov,
    "quartic": _quartic,
    "triweight": _triweight,
    "tricube": _tricube,
    "gaussian": _gaussian,
    "cosine": _cosine,
}


def kernel_offsets(spec: KernelSpec) -> np.ndarray:
    a = spec.half_width
    return np.arange(-a, a + 1, dtype=np.float64)


def raw_kernel(spec: KernelSpec) -> np.ndarray:
    """f(s/h, t/h) on the integer window, before normalization."""
    h = (spec.bandwidth + 1) / 2.0
    g = PROFILES[spec.family](kernel_offsets(spec) / h)
    return np.outer(g, g)


def build_kernel(spec: KernelSpec) -> KernelMatrix:
    raw = raw_kernel(spec)
    return KernelMatrix(spec=spec, weights=raw / raw.sum())
