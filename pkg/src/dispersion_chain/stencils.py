"""Finite-difference stencils: second order in the interior and at the ends."""

from __future__ import annotations

from typing import Sequence

import numpy as np

from .core import AxisGrid, axis_dims, axis_for


def gradient(values: np.ndarray, axes: Sequence[AxisGrid], order: int, component: int = 0) -> np.ndarray:
    """First derivative along one component of ``order``."""
    dim = axis_dims(axes, order)[component]
    h = axis_for(axes, order).spacing[component]
    return np.gradient(values, h, axis=dim, edge_order=2)


def second_difference(values: np.ndarray, dim: int, h: float) -> np.ndarray:
    """Second derivative along array dimension ``dim`` (three-point interior, four-point ends)."""
    v = np.moveaxis(np.asarray(values, dtype=np.float64), dim, -1)
    out = np.empty_like(v)
    out[..., 1:-1] = (v[..., 2:] - 2.0 * v[..., 1:-1] + v[..., :-2]) / h**2
    if v.shape[-1] >= 4:
        out[..., 0] = (2.0 * v[..., 0] - 5.0 * v[..., 1] + 4.0 * v[..., 2] - v[..., 3]) / h**2
        out[..., -1] = (2.0 * v[..., -1] - 5.0 * v[..., -2] + 4.0 * v[..., -3] - v[..., -4]) / h**2
    else:
        out[..., 0] = out[..., 1]
        out[..., -1] = out[..., -2]
    return np.moveaxis(out, -1, dim)
