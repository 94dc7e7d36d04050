"""Raw and central moment tensors over conditioning base sets.

A moment factor is either a kinematic order (its coordinate on the grid) or
a :class:`MeanField` defined on the full grid of the field.  The second form
expresses covariances with a closure quantity: integrating the top order of
a higher-rank density against its deviation equals the deviation of the
closure mean, so mixed tensors with a closure factor need no extra axis.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .core import (
    AxisGrid,
    DistributionField,
    MeanField,
    as_index_set,
    coordinate,
    coordinate_vector,
    expand_to,
    grid_shape,
    index_set_of,
    integrate_over,
    zero_mask,
)
from .errors import ConfigurationError, DomainError

Factor = Union[int, MeanField]


@dataclass(frozen=True, eq=False)
class MomentTensorField:
    """Central moment tensor on a base grid, shape ``base grid + (d,) * order``."""

    order: int
    kinematic_orders: tuple[int, ...]
    axes: tuple[AxisGrid, ...]
    values: np.ndarray
    valid: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        if self.order not in (2, 3):
            raise ConfigurationError("moment tensors have order 2 or 3")
        vals = np.array(self.values, dtype=np.float64)
        base = grid_shape(self.axes)
        if vals.shape[: len(base)] != base or vals.ndim != len(base) + self.order:
            raise ConfigurationError(f"tensor shape {vals.shape} does not fit base grid {base}")
        vals.flags.writeable = False
        valid = np.array(np.broadcast_to(self.valid, base), dtype=bool)
        valid.flags.writeable = False
        object.__setattr__(self, "axes", tuple(self.axes))
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "kinematic_orders", tuple(int(k) for k in self.kinematic_orders))

    @property
    def base_set(self):
        return index_set_of(self.axes)

    def trace(self) -> np.ndarray:
        """Contract the first two tensor indices; order 3 leaves a vector."""
        nb = len(grid_shape(self.axes))
        return np.trace(self.values, axis1=nb, axis2=nb + 1)

    def transposed(self, permutation: Sequence[int]) -> "MomentTensorField":
        """Reorder tensor indices (``permutation`` acts on the trailing indices only)."""
        nb = len(grid_shape(self.axes))
        perm = list(range(nb)) + [nb + p for p in permutation]
        orders = tuple(self.kinematic_orders[p] for p in permutation)
        return MomentTensorField(self.order, orders, self.axes, self.values.transpose(perm), self.valid, self.time)

    @classmethod
    def zeros(cls, order: int, kinematic_orders, axes, time: float = 0.0) -> "MomentTensorField":
        comps = axes[0].components if axes else 1
        shape = grid_shape(axes)
        return cls(order, kinematic_orders, tuple(axes), np.zeros(shape + (comps,) * order), np.ones(shape, bool), time)


def _factor_values(f: DistributionField, factor: Factor) -> tuple[int, np.ndarray]:
    """Return (kinematic order, full-grid values with trailing component axis)."""
    if isinstance(factor, MeanField):
        if tuple(factor.axes) != tuple(f.axes):
            raise DomainError("a mean-field factor must live on the full grid of the field")
        return factor.order, np.asarray(factor.values)
    order = int(factor)
    if order not in f.index_set:
        raise DomainError(f"order {order} is not an argument of {f.index_set}")
    return order, coordinate_vector(f.axes, order)


def _integrated_set(f: DistributionField, factors: Sequence[Factor], drop):
    drop = as_index_set(drop)
    orders = sorted({int(fac) for fac in factors if not isinstance(fac, MeanField)})
    integrated = drop.union(orders)
    if not integrated.issubset(f.index_set):
        raise DomainError(f"cannot integrate over {integrated}: not a subset of {f.index_set}")
    return integrated


def central_moment(f: DistributionField, factors: Sequence[Factor], drop=()) -> MomentTensorField:
    """Central moment of two or three factors with means conditioned on the surviving set."""
    if len(factors) not in (2, 3):
        raise ConfigurationError("central moments take two or three factors")
    integrated = _integrated_set(f, factors, drop)
    density, base_axes = integrate_over(f.values, f.axes, integrated)
    valid = zero_mask(density)
    safe = np.where(valid, density, 1.0)

    deviations = []
    orders = []
    for fac in factors:
        order, vals = _factor_values(f, fac)
        numer, _ = integrate_over(f.values[..., None] * vals, f.axes, integrated)
        mean = np.where(valid[..., None], numer / safe[..., None], 0.0)
        deviations.append(vals - expand_to(mean, base_axes, f.axes))
        orders.append(order)

    letters = "abc"[: len(factors)]
    spec = ",".join(f"...{c}" for c in letters) + "->..." + letters
    product = np.einsum(spec, *deviations) * f.values[(...,) + (None,) * len(factors)]
    tensor, _ = integrate_over(product, f.axes, integrated)
    tensor = np.where(valid[(...,) + (None,) * len(factors)], tensor, 0.0)
    return MomentTensorField(len(factors), tuple(orders), base_axes, tensor, valid, f.time)


def central_moment2(f: DistributionField, a: Factor, b: Factor, drop=()) -> MomentTensorField:
    """Second central moment; ``a == b`` gives the same-order (pressure-like) tensor."""
    return central_moment(f, (a, b), drop)


def central_moment3(f: DistributionField, a: Factor, b: Factor, c: Factor, drop=()) -> MomentTensorField:
    """Third central moment over the same conditioning rules as :func:`central_moment2`."""
    return central_moment(f, (a, b, c), drop)


def raw_moment(f: DistributionField, factors: Sequence[tuple[int, int]], drop=()) -> DistributionField:
    """Quadrature of a product of coordinate components against ``f``.

    ``factors`` is a list of ``(order, component)`` pairs of length 0 to 3.
    The integration runs over the orders named by the factors and ``drop``.
    """
    if len(factors) > 3:
        raise ConfigurationError("raw moments take at most three factors")
    orders = sorted({int(o) for o, _ in factors})
    integrated = as_index_set(drop).union(orders)
    if not integrated.issubset(f.index_set):
        raise DomainError(f"cannot integrate over {integrated}: not a subset of {f.index_set}")
    integrand = np.array(f.values)
    for order, comp in factors:
        integrand = integrand * coordinate(f.axes, order, comp)
    values, base_axes = integrate_over(integrand, f.axes, integrated)
    return DistributionField(base_axes, values, f.time)
