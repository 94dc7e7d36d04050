"""Residual container shared by the diagnostic modules."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .core import AxisGrid, grid_shape, integrate_over, index_set_of

MASK_WARNING_FRACTION = 0.5


def weighted_l2(residual: np.ndarray, weight: np.ndarray, valid: np.ndarray, axes) -> float:
    """Density-weighted L2 norm over valid cells (trailing tensor axes summed)."""
    nb = len(grid_shape(axes))
    r2 = np.asarray(residual, dtype=np.float64) ** 2
    if r2.ndim > nb:
        r2 = r2.reshape(r2.shape[:nb] + (-1,)).sum(axis=-1)
    w = np.where(valid, np.abs(weight), 0.0)
    num, _ = integrate_over(np.where(valid, w * r2, 0.0), axes, index_set_of(axes))
    den, _ = integrate_over(w, axes, index_set_of(axes))
    den = float(den)
    return float(np.sqrt(float(num) / den)) if den > 0 else 0.0


def max_norm(residual: np.ndarray, valid: np.ndarray, axes) -> float:
    nb = len(grid_shape(axes))
    r = np.abs(np.asarray(residual, dtype=np.float64))
    if r.ndim > nb:
        r = r.reshape(r.shape[:nb] + (-1,)).max(axis=-1)
    r = np.where(valid, r, 0.0)
    return float(r.max()) if r.size else 0.0


def warn_if_mostly_masked(valid: np.ndarray, label: str) -> None:
    if valid.size and np.mean(~valid) > MASK_WARNING_FRACTION:
        warnings.warn(f"{label}: more than half of the cells are masked", RuntimeWarning, stacklevel=3)


@dataclass(frozen=True, eq=False)
class ResidualReport:
    """Left side, right side and their difference for one identity on one grid.

    ``residual = lhs - rhs`` on valid cells (zero elsewhere).  The norms are
    computed with ``weight`` as density.
    """

    equation_id: str
    axes: tuple[AxisGrid, ...]
    lhs: np.ndarray
    rhs: np.ndarray
    valid: np.ndarray
    weight: np.ndarray
    time: float
    residual_norm: float = field(init=False)
    max_norm: float = field(init=False)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        lhs = np.asarray(self.lhs, dtype=np.float64)
        rhs = np.asarray(self.rhs, dtype=np.float64)
        if lhs.shape != rhs.shape:
            raise ValueError(f"lhs shape {lhs.shape} differs from rhs shape {rhs.shape}")
        shape = grid_shape(self.axes)
        valid = np.broadcast_to(np.asarray(self.valid, dtype=bool), shape)
        object.__setattr__(self, "lhs", lhs)
        object.__setattr__(self, "rhs", rhs)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "weight", np.broadcast_to(np.asarray(self.weight, dtype=np.float64), shape))
        object.__setattr__(self, "residual_norm", weighted_l2(self.residual, self.weight, valid, self.axes))
        object.__setattr__(self, "max_norm", max_norm(self.residual, valid, self.axes))

    @property
    def residual(self) -> np.ndarray:
        mask = self.valid.reshape(self.valid.shape + (1,) * (self.lhs.ndim - self.valid.ndim))
        return np.where(mask, self.lhs - self.rhs, 0.0)
