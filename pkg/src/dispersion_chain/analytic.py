"""Closed-form reference states: oscillator quasi-probabilities, delta states, Gaussians."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .closures import PhysicalParams
from .core import (
    AxisGrid,
    DistributionField,
    KinematicIndexSet,
    MeanField,
    as_index_set,
    axis_dims,
    axis_for,
    coordinate,
    coordinate_vector,
    grid_shape,
    make_grid,
    nested_average,
)
from .errors import ConfigurationError, DomainError
from .moments import MomentTensorField
from .reports import ResidualReport
from .stencils import gradient, second_difference

MAX_LAGUERRE_DEGREE = 30


def laguerre(n: int, z):
    """Laguerre polynomial ``L_n(z)`` by the three-term recurrence."""
    if not (0 <= int(n) <= MAX_LAGUERRE_DEGREE) or int(n) != n:
        raise ConfigurationError(f"Laguerre degree must be an integer in [0, {MAX_LAGUERRE_DEGREE}], got {n}")
    z = np.asarray(z, dtype=np.float64)
    prev = np.ones_like(z)
    if n == 0:
        return prev if z.ndim else float(prev)
    cur = 1.0 - z
    for k in range(1, int(n)):
        prev, cur = cur, ((2 * k + 1 - z) * cur - k * prev) / (k + 1)
    return cur if z.ndim else float(cur)


def oscillator_grid(params: PhysicalParams, points: int = 256, widths: float = 8.0) -> tuple[AxisGrid, ...]:
    """Position-velocity grid spanning ``±widths`` ground-state widths on each axis."""
    sx, sv = params.sigma_x, params.sigma_v
    return make_grid([(1, -widths * sx, widths * sx, points), (2, -widths * sv, widths * sv, points)])


def _xv(axes: Sequence[AxisGrid]):
    if as_index_set([a.kinematic_index for a in axes]) != KinematicIndexSet((1, 2)):
        raise DomainError("oscillator states live on the position-velocity grid {1,2}")
    if axes[0].components != 1:
        raise DomainError("oscillator states are one-dimensional")
    return coordinate(axes, 1), coordinate(axes, 2)


def wigner_oscillator(
    n: int,
    params: PhysicalParams,
    axes: Sequence[AxisGrid],
    displacement: tuple[float, float] = (0.0, 0.0),
    time: float = 0.0,
) -> DistributionField:
    """Quasi-probability of the ``n``-th oscillator eigenstate sampled at the nodes.

    ``displacement`` shifts the state to phase point ``(x0, v0)``; for
    ``n = 0`` this is a coherent state, whose exact harmonic evolution is a
    rigid rotation of that point.
    """
    if params.hbar <= 0:
        raise ConfigurationError("oscillator quasi-probabilities need hbar > 0")
    x, v = _xv(axes)
    x0, v0 = displacement
    m, hbar, w = params.mass, params.hbar, params.omega
    z = (2.0 * m / (hbar * w)) * ((v - v0) ** 2 + w**2 * (x - x0) ** 2)
    values = (-1.0) ** n * m / (math.pi * hbar) * np.exp(-0.5 * z) * laguerre(n, z)
    return DistributionField(tuple(axes), values, time)


def rotate_phase_point(x0: float, v0: float, omega: float, t: float) -> tuple[float, float]:
    """Harmonic trajectory of a phase point after time ``t``."""
    c, s = math.cos(omega * t), math.sin(omega * t)
    return x0 * c + v0 / omega * s, -omega * x0 * s + v0 * c


def gaussian_field(
    axes: Sequence[AxisGrid],
    means: Mapping[int, float],
    sigmas: Mapping[int, float],
    total: float = 1.0,
    time: float = 0.0,
) -> DistributionField:
    """Product of normalised Gaussians (analytic normalisation, not discrete)."""
    shape = grid_shape(axes)
    values = np.full(shape, float(total))
    for ax in axes:
        k = ax.kinematic_index
        mu, sig = float(means.get(k, 0.0)), float(sigmas[k])
        for c in range(ax.components):
            xi = coordinate(axes, k, c)
            values = values * np.exp(-0.5 * ((xi - mu) / sig) ** 2) / (math.sqrt(2 * math.pi) * sig)
    return DistributionField(tuple(axes), values, time)


@dataclass(frozen=True, eq=False)
class DeltaState:
    """Density concentrated on the graph ``xi^top = map(lower coordinates)``.

    The delta factor is never sampled: integrals over the top order are
    taken by substituting ``map``.
    """

    base: DistributionField
    top_order: int
    map: MeanField
    affine: dict | None = None

    def __post_init__(self):
        if self.top_order in self.base.index_set:
            raise ConfigurationError("the delta order must not be an axis of the base field")
        if self.map.order != self.top_order or tuple(self.map.axes) != tuple(self.base.axes):
            raise ConfigurationError("the delta map must be a mean of the top order on the base grid")

    @property
    def index_set(self) -> KinematicIndexSet:
        return self.base.index_set.union([self.top_order])

    @property
    def axes(self) -> tuple[AxisGrid, ...]:
        return self.base.axes

    @property
    def time(self) -> float:
        return self.base.time

    def marginal(self) -> DistributionField:
        """Density with the delta order integrated out."""
        return self.base

    def top_mean(self) -> MeanField:
        """Conditional mean of the top order on the base grid, the map itself."""
        return self.map

    def top_covariance(self) -> MomentTensorField:
        """Second central moment of the top order: identically zero by substitution."""
        deviation = self.map.values - self.map.values
        values = np.einsum("...a,...b->...ab", deviation, deviation) * self.base.values[..., None, None]
        return MomentTensorField(2, (self.top_order, self.top_order), self.base.axes, values, self.map.valid, self.time)

    def averaged_top_mean(self, drop) -> MeanField:
        """Top-order mean conditioned on fewer base axes."""
        return nested_average(self.map, self.base, drop)


def rank3_oscillator_state(n: int, params: PhysicalParams, axes: Sequence[AxisGrid], time: float = 0.0) -> DeltaState:
    """Position-velocity-acceleration state of the oscillator on the graph ``a = -omega^2 x``.

    Widths satisfy ``sigma_x sigma_v = hbar/2m`` and ``omega = sigma_v/sigma_x
    = sigma_a/sigma_v``; after substituting the graph the base equals the
    ``n``-th oscillator quasi-probability.
    """
    if params.hbar <= 0:
        raise ConfigurationError("oscillator states need hbar > 0")
    x, v = _xv(axes)
    sx, sv, sa, w = params.sigma_x, params.sigma_v, params.sigma_a, params.omega
    accel = -(w**2) * x
    q = accel**2 / (2 * sa**2) + v**2 / (2 * sv**2)
    values = (-1.0) ** n / (2 * math.pi * sx * sv) * np.exp(-q) * laguerre(n, 2 * q)
    base = DistributionField(tuple(axes), np.broadcast_to(values, grid_shape(axes)), time)
    mapping = MeanField.from_function(3, axes, np.broadcast_to(accel, grid_shape(axes)), time)
    return DeltaState(base, 3, mapping, affine={1: -(w**2)})


def cold_state(density: DistributionField, velocity, time: float | None = None) -> DeltaState:
    """Single-stream state: density on the lower axis, next order fixed by ``velocity``.

    ``velocity`` is an array on the density grid or a callable of the
    coordinate vector.
    """
    if np.any(density.values < 0):
        raise ConfigurationError("cold-state density must be non-negative")
    if density.rank != 1:
        raise DomainError("cold states are built on a single lower order")
    (order,) = density.index_set
    if callable(velocity):
        velocity = velocity(coordinate_vector(density.axes, order))
    t = density.time if time is None else time
    base = DistributionField(density.axes, density.values, t)
    mapping = MeanField.from_function(order + 1, density.axes, velocity, t)
    return DeltaState(base, order + 1, mapping)


def quantum_pressure_check(
    f1: DistributionField,
    pressure: MomentTensorField,
    params: PhysicalParams,
    margin: int = 3,
) -> ResidualReport:
    """Compare ``-(1/f) div P`` with ``2 alpha^2 grad[(1/sqrt f) lap sqrt f]`` on interior nodes."""
    if params.hbar <= 0:
        raise ConfigurationError("the quantum-pressure identity needs hbar > 0")
    if f1.index_set != KinematicIndexSet((1,)):
        raise DomainError("the quantum-pressure identity is evaluated on a position density")
    if tuple(pressure.axes) != tuple(f1.axes) or pressure.order != 2:
        raise DomainError("pressure tensor must be a second moment on the density grid")
    axes = f1.axes
    shape = grid_shape(axes)
    window = np.zeros(shape, dtype=bool)
    window[tuple(slice(margin, n - margin) for n in shape)] = True
    if np.any(f1.values[window] <= 0):
        raise DomainError("density must be positive inside the check window")

    comps = f1.components
    dims = axis_dims(axes, 1)
    spacing = axis_for(axes, 1).spacing
    safe = np.where(f1.values > 0, f1.values, 1.0)
    root = np.sqrt(np.clip(f1.values, 0.0, None))
    laplacian = sum(second_difference(root, dims[c], spacing[c]) for c in range(comps))
    bohm = np.where(f1.values > 0, laplacian / np.sqrt(safe), 0.0)

    lhs = np.zeros(shape + (comps,))
    rhs = np.zeros(shape + (comps,))
    for mu in range(comps):
        div = sum(gradient(pressure.values[..., mu, lam], axes, 1, lam) for lam in range(comps))
        lhs[..., mu] = -div / safe
        rhs[..., mu] = 2.0 * params.alpha**2 * gradient(bohm, axes, 1, mu)
    return ResidualReport("quantum_pressure", axes, lhs, rhs, window, f1.values, f1.time)
