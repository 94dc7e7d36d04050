"""Physical parameters and closure laws for the highest mean in a chain equation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numpy.polynomial import polynomial as P

from .core import (
    DistributionField,
    KinematicIndexSet,
    MeanField,
    as_index_set,
    axis_dims,
    axis_for,
    coordinate_vector,
    grid_shape,
    zero_mask,
)
from .errors import ConfigurationError, DomainError
from .stencils import second_difference


@dataclass(frozen=True)
class PhysicalParams:
    """Mass, Planck constant, polynomial potential U(x) and a reference frequency.

    ``potential`` lists ascending coefficients of a polynomial in the
    position coordinate (applied per component for d > 1).
    """

    mass: float = 1.0
    hbar: float = 1.0
    potential: tuple[float, ...] = (0.0,)
    omega: float = 1.0

    def __post_init__(self):
        if not self.mass > 0:
            raise ConfigurationError("mass must be positive")
        if self.hbar < 0:
            raise ConfigurationError("hbar must be non-negative")
        if not self.omega > 0:
            raise ConfigurationError("omega must be positive")
        coeffs = tuple(float(c) for c in np.atleast_1d(self.potential)) or (0.0,)
        object.__setattr__(self, "potential", coeffs)

    @classmethod
    def harmonic(cls, mass: float = 1.0, hbar: float = 1.0, omega: float = 1.0) -> "PhysicalParams":
        return cls(mass, hbar, (0.0, 0.0, 0.5 * mass * omega**2), omega)

    @property
    def alpha(self) -> float:
        return -self.hbar / (2.0 * self.mass)

    @property
    def beta(self) -> float:
        if self.hbar == 0:
            raise ConfigurationError("beta = 1/hbar is undefined for hbar = 0")
        return 1.0 / self.hbar

    @property
    def sigma_x(self) -> float:
        """Ground-state position width of the oscillator with frequency ``omega``."""
        return math.sqrt(self.hbar / (2.0 * self.mass * self.omega))

    @property
    def sigma_v(self) -> float:
        return math.sqrt(self.hbar * self.omega / (2.0 * self.mass))

    @property
    def sigma_a(self) -> float:
        """Acceleration width ``omega * sigma_v``."""
        return self.omega * self.sigma_v

    @property
    def period(self) -> float:
        return 2.0 * math.pi / self.omega

    def potential_derivative(self, order: int) -> np.ndarray:
        return P.polyder(np.array(self.potential), order) if order else np.array(self.potential)


def moyal_closure(f12: DistributionField, params: PhysicalParams, k_max: int = 0) -> MeanField:
    """Acceleration mean of the truncated quantum Liouville series.

    Term ``k`` multiplies the ``2k+1`` derivative of U by the ``2k``
    velocity derivative of ``f`` divided by ``f``.  Terms whose potential
    derivative vanishes identically end the series, so raising ``k_max``
    past the polynomial degree changes nothing.
    """
    if f12.index_set != KinematicIndexSet((1, 2)):
        raise DomainError(f"the quantum closure needs a field on {{1,2}}, got {f12.index_set}")
    if k_max < 0:
        raise ConfigurationError("k_max must be non-negative")
    if f12.components != 1:
        raise DomainError("the quantum closure is implemented for one component per order")
    m, hbar = params.mass, params.hbar
    if hbar == 0 and k_max > 0 and np.any(params.potential_derivative(3)):
        raise ConfigurationError("quantum corrections need hbar > 0")

    x = coordinate_vector(f12.axes, 1)
    v_dim = axis_dims(f12.axes, 2)[0]
    h_v = axis_for(f12.axes, 2).spacing[0]
    shape = grid_shape(f12.axes)

    result = np.zeros(shape + (1,))
    valid = np.ones(shape, dtype=bool)
    density_ok = zero_mask(f12.values)
    safe = np.where(density_ok, f12.values, 1.0)
    derivative = np.array(f12.values)  # running 2k-th velocity derivative
    for k in range(k_max + 1):
        coeffs = params.potential_derivative(2 * k + 1)
        if not np.any(coeffs):
            break
        scale = (-1.0) ** (k + 1) * (hbar / 2.0) ** (2 * k) / (m ** (2 * k + 1) * math.factorial(2 * k + 1))
        if k == 0:
            result = result + scale * P.polyval(x, coeffs)
            continue
        derivative = second_difference(derivative, v_dim, h_v)
        ratio = np.where(density_ok, derivative / safe, 0.0)
        result = result + scale * P.polyval(x, coeffs) * ratio[..., None]
        valid &= density_ok
    return MeanField(3, f12.axes, result, valid, f12.time)


@dataclass(frozen=True, eq=False)
class Closure:
    """Law supplying the mean of order ``order`` on the grid of ``base``.

    kinds: ``moyal`` (quantum series), ``cold`` (deterministic map of the
    lower coordinates), ``tabulated`` (given mean fields, linear in time) and
    ``zero``.
    """

    kind: str
    order: int
    base: KinematicIndexSet
    params: PhysicalParams | None = None
    k_max: int = 0
    mapping: Callable | None = None
    table: tuple[MeanField, ...] = field(default=())
    coefficients: dict[int, float] | None = None
    offset: float = 0.0

    def __post_init__(self):
        if self.kind not in ("moyal", "cold", "tabulated", "zero"):
            raise ConfigurationError(f"unknown closure kind {self.kind!r}")
        object.__setattr__(self, "base", as_index_set(self.base))
        if self.order in self.base:
            raise ConfigurationError("a closure order must lie outside its base set")
        if self.kind == "moyal":
            if self.params is None:
                raise ConfigurationError("moyal closure needs physical parameters")
            if self.base != KinematicIndexSet((1, 2)) or self.order != 3:
                raise ConfigurationError("moyal closure supplies order 3 on {1,2}")
        if self.kind == "cold" and self.mapping is None:
            if self.coefficients is None:
                raise ConfigurationError("cold closure needs a mapping or affine coefficients")
            coefficients = {int(k): float(v) for k, v in self.coefficients.items()}
            for order_i in coefficients:
                if order_i not in self.base:
                    raise ConfigurationError(f"affine coefficient for order {order_i} outside base {self.base}")
            offset = float(self.offset)

            def affine(coords, t):
                out = offset
                for order_i, c in coefficients.items():
                    out = out + c * coords[order_i]
                return out

            object.__setattr__(self, "coefficients", coefficients)
            object.__setattr__(self, "mapping", affine)
        if self.kind == "tabulated":
            if not self.table:
                raise ConfigurationError("tabulated closure needs at least one mean field")
            for mf in self.table:
                if mf.order != self.order or mf.base_set != self.base:
                    raise ConfigurationError("tabulated mean fields disagree with the closure target")

    @classmethod
    def moyal(cls, params: PhysicalParams, k_max: int = 0) -> "Closure":
        return cls("moyal", 3, KinematicIndexSet((1, 2)), params=params, k_max=k_max)

    @classmethod
    def zero(cls, order: int, base) -> "Closure":
        return cls("zero", order, as_index_set(base))

    @classmethod
    def cold(cls, order: int, base, mapping: Callable) -> "Closure":
        """``mapping(coords, t)`` gets ``{order: coordinate vector}`` on the full grid."""
        return cls("cold", order, as_index_set(base), mapping=mapping)

    @classmethod
    def affine(cls, order: int, base, coefficients: dict[int, float], offset: float = 0.0) -> "Closure":
        """Cold closure ``sum_i c_i * xi^i + offset`` (e.g. ``{1: -omega**2}``)."""
        return cls("cold", order, as_index_set(base), coefficients=coefficients, offset=offset)

    @classmethod
    def tabulated(cls, fields: Sequence[MeanField]) -> "Closure":
        fields = tuple(sorted(fields, key=lambda mf: mf.time))
        return cls("tabulated", fields[0].order, fields[0].base_set, table=fields)

    def evaluate(self, f: DistributionField) -> MeanField:
        """Mean field on the grid of ``f`` at time ``f.time``."""
        if f.index_set != self.base:
            raise DomainError(f"closure base set {self.base} does not match field set {f.index_set}")
        shape = grid_shape(f.axes)
        comps = f.components
        if self.kind == "moyal":
            return moyal_closure(f, self.params, self.k_max)
        if self.kind == "zero":
            return MeanField(self.order, f.axes, np.zeros(shape + (comps,)), np.ones(shape, bool), f.time)
        if self.kind == "cold":
            coords = {o: coordinate_vector(f.axes, o) for o in self.base}
            values = np.broadcast_to(self.mapping(coords, f.time), shape + (comps,))
            return MeanField(self.order, f.axes, values, np.ones(shape, bool), f.time)
        return self._interpolate(f)

    def _interpolate(self, f: DistributionField) -> MeanField:
        table = self.table
        for mf in table:
            if tuple(mf.axes) != tuple(f.axes):
                raise DomainError("tabulated mean field grid differs from the field grid")
        if len(table) == 1 or f.time <= table[0].time:
            mf = table[0]
            return MeanField(mf.order, mf.axes, mf.values, mf.valid, f.time)
        if f.time >= table[-1].time:
            mf = table[-1]
            return MeanField(mf.order, mf.axes, mf.values, mf.valid, f.time)
        times = [mf.time for mf in table]
        j = int(np.searchsorted(times, f.time)) - 1
        a, b = table[j], table[j + 1]
        w = (f.time - a.time) / (b.time - a.time)
        values = (1.0 - w) * a.values + w * b.values
        return MeanField(a.order, a.axes, values, a.valid & b.valid, f.time)
