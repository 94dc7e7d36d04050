"""Dissipation sources, log-density fields and material derivatives along the chain flow."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy import ndimage

from .closures import Closure
from .core import (
    AxisGrid,
    DistributionField,
    MeanField,
    axis_dims,
    axis_for,
    coordinate_vector,
    grid_shape,
    index_set_of,
    zero_mask,
)
from .errors import ConfigurationError, DomainError
from .reports import ResidualReport, warn_if_mostly_masked
from .stencils import gradient


@dataclass(frozen=True, eq=False)
class DissipationField:
    """Divergence of the mean of order ``source_order + 1`` with respect to ``source_order``."""

    source_order: int
    axes: tuple[AxisGrid, ...]
    values: np.ndarray
    valid: np.ndarray
    time: float = 0.0

    @property
    def base_set(self):
        return index_set_of(self.axes)


@dataclass(frozen=True, eq=False)
class EntropyField:
    """``ln|f|`` with the sign of ``f`` kept separately (0 on masked cells)."""

    axes: tuple[AxisGrid, ...]
    log_abs: np.ndarray
    sign_mask: np.ndarray
    time: float = 0.0

    @property
    def base_set(self):
        return index_set_of(self.axes)

    @property
    def valid(self) -> np.ndarray:
        return self.sign_mask != 0


def erode(valid: np.ndarray, dims: Sequence[int]) -> np.ndarray:
    """Drop cells whose centred stencil along ``dims`` touches an invalid cell."""
    if valid.all():
        return valid
    out = np.array(valid)
    for dim in dims:
        structure = np.zeros((3,) * valid.ndim, dtype=bool)
        centre = [1] * valid.ndim
        for k in (0, 1, 2):
            centre[dim] = k
            structure[tuple(centre)] = True
        out &= ndimage.binary_erosion(valid, structure=structure, border_value=1)
    return out


def dissipation_source(mf: MeanField, p: int) -> DissipationField:
    """Divergence of ``mf`` (order ``p+1``) with respect to the components of order ``p``."""
    if p not in mf.base_set:
        raise DomainError(f"order {p} is not an argument of the mean field base {mf.base_set}")
    if mf.order != p + 1:
        raise DomainError(f"dissipation along order {p} needs a mean of order {p + 1}, got {mf.order}")
    total = np.zeros(grid_shape(mf.axes))
    for c in range(mf.components):
        total = total + gradient(mf.values[..., c], mf.axes, p, c)
    valid = erode(mf.valid, axis_dims(mf.axes, p))
    return DissipationField(p, mf.axes, np.where(valid, total, 0.0), valid, mf.time)


def entropy_field(f: DistributionField) -> EntropyField:
    """Logarithm of ``|f|``; negative cells get sign -1, masked zero cells sign 0."""
    keep = zero_mask(f.values)
    sign = np.where(keep, np.sign(f.values), 0).astype(np.int8)
    log_abs = np.where(keep, np.log(np.where(keep, np.abs(f.values), 1.0)), 0.0)
    return EntropyField(f.axes, log_abs, sign, f.time)


def _as_pair(obj):
    if isinstance(obj, tuple) and len(obj) == 2:
        return obj
    return obj, obj


def _sample(obj, axes) -> tuple[np.ndarray, np.ndarray, float | None]:
    """values, validity mask and time of something defined on ``axes``."""
    shape = grid_shape(axes)
    if isinstance(obj, DistributionField):
        return np.asarray(obj.values), np.ones(shape, bool), obj.time
    if isinstance(obj, MeanField):
        return np.asarray(obj.values), obj.valid, obj.time
    if isinstance(obj, EntropyField):
        return obj.log_abs, obj.valid, obj.time
    if isinstance(obj, DissipationField):
        return obj.values, obj.valid, obj.time
    arr = np.asarray(obj, dtype=np.float64)
    return arr, np.ones(shape, bool), None


def _axes_of(obj):
    return getattr(obj, "axes", None)


def velocity_values(axes: Sequence[AxisGrid], order: int, spec) -> tuple[np.ndarray, np.ndarray]:
    """Advection velocity for ``order`` on ``axes`` with a trailing component axis."""
    shape = grid_shape(axes)
    comps = axis_for(axes, order).components
    if isinstance(spec, str):
        if spec != "coordinate":
            raise ConfigurationError(f"unknown velocity keyword {spec!r}")
        if order + 1 not in index_set_of(axes):
            raise DomainError(f"coordinate advection along {order} needs order {order + 1} on the grid")
        return coordinate_vector(axes, order + 1), np.ones(shape, bool)
    if isinstance(spec, MeanField):
        if tuple(spec.axes) != tuple(axes):
            raise DomainError("advection mean field lives on a different grid")
        return np.asarray(spec.values), spec.valid
    arr = np.asarray(spec, dtype=np.float64)
    if arr.ndim == 0:
        arr = np.full(shape + (comps,), float(arr))
    return np.broadcast_to(arr, shape + (comps,)), np.ones(shape, bool)


def transport_term(values: np.ndarray, axes, advection: Mapping[int, object]) -> tuple[np.ndarray, np.ndarray]:
    """``sum_b velocity_b . grad_b values`` at one time, plus validity."""
    shape = grid_shape(axes)
    trailing = values.ndim - len(shape)
    total = np.zeros(values.shape)
    valid = np.ones(shape, bool)
    for order, spec in advection.items():
        vel, vel_ok = velocity_values(axes, order, spec)
        valid &= vel_ok
        for c in range(vel.shape[-1]):
            v_c = vel[..., c].reshape(shape + (1,) * trailing)
            total = total + v_c * gradient(values, axes, order, c)
    return total, valid


def _resolve_dt(dt, t_early, t_late) -> float:
    if dt is None:
        if t_early is None or t_late is None:
            raise ConfigurationError("dt is required when the inputs carry no time stamps")
        dt = t_late - t_early
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    return float(dt)


def apply_pi(phi_pair, dt: float | None, advection: Mapping[int, object], axes=None) -> tuple[np.ndarray, np.ndarray]:
    """Material derivative along the chain flow, centred between two times.

    ``advection`` maps every axis order of the base set to ``"coordinate"``
    (the next-order coordinate), a :class:`MeanField`, an array or a
    constant; a tuple ``(early, late)`` gives time-dependent entries.
    Returns ``(values, valid)`` at the midpoint time.
    """
    early, late = phi_pair
    axes = tuple(axes or _axes_of(early))
    if _axes_of(late) is not None and tuple(_axes_of(late)) != axes:
        raise DomainError("the two time levels live on different grids")
    base = index_set_of(axes)
    if set(advection) != set(base):
        raise DomainError(f"need one advection entry per axis of {base}, got {sorted(advection)}")
    v0, ok0, t0 = _sample(early, axes)
    v1, ok1, t1 = _sample(late, axes)
    step = _resolve_dt(dt, t0, t1)
    adv0 = {k: _as_pair(v)[0] for k, v in advection.items()}
    adv1 = {k: _as_pair(v)[1] for k, v in advection.items()}
    tr0, okv0 = transport_term(v0, axes, adv0)
    tr1, okv1 = transport_term(v1, axes, adv1)
    values = (v1 - v0) / step + 0.5 * (tr0 + tr1)
    dims = [d for order in base for d in axis_dims(axes, order)]
    valid = erode(ok0 & ok1, dims) & okv0 & okv1
    return values, valid


def chain_velocities(f: DistributionField, closures: Sequence) -> dict[int, object]:
    """Advection entries for transporting ``f`` itself.

    Orders whose successor is on the grid move with that coordinate; the
    others take the closures in ascending order.
    """
    remaining = list(closures)
    velocities: dict[int, object] = {}
    for order in f.index_set:
        if order + 1 in f.index_set:
            velocities[order] = "coordinate"
            continue
        if not remaining:
            raise ConfigurationError(f"missing closure for the mean of order {order + 1} on {f.index_set}")
        source = remaining.pop(0)
        if isinstance(source, Closure):
            source = source.evaluate(f)
        if not isinstance(source, MeanField) or source.order != order + 1:
            raise ConfigurationError(f"closure for order {order + 1} on {f.index_set} is missing or mismatched")
        velocities[order] = source
    if remaining:
        raise ConfigurationError("more closures supplied than the index set needs")
    return velocities


def chain_dissipation(velocities: Mapping[int, object]) -> list[DissipationField]:
    """Dissipation fields of every mean-field velocity (coordinate velocities have none)."""
    return [dissipation_source(v, order) for order, v in velocities.items() if isinstance(v, MeanField)]


def chain_log_residual(
    f_pair: tuple[DistributionField, DistributionField],
    advection: Mapping[int, object],
    dissipation: Sequence,
    dt: float | None = None,
) -> ResidualReport:
    """Residual of ``pi S + sum Q = 0`` for ``S = ln|f|`` between two snapshots.

    ``dissipation`` holds DissipationFields, or ``(early, late)`` pairs
    that are averaged.
    """
    early, late = f_pair
    s_pair = (entropy_field(early), entropy_field(late))
    pi_s, valid = apply_pi(s_pair, dt, advection)
    total_q = np.zeros(pi_s.shape)
    for item in dissipation:
        q0, q1 = _as_pair(item)
        if tuple(q0.axes) != tuple(early.axes):
            raise DomainError("dissipation field lives on a different grid")
        total_q = total_q + 0.5 * (q0.values + q1.values)
        valid = valid & q0.valid & q1.valid
    warn_if_mostly_masked(valid, "log-chain residual")
    weight = 0.5 * (early.values + late.values)
    return ResidualReport(
        "log_chain",
        early.axes,
        pi_s,
        -total_q,
        valid,
        weight,
        0.5 * (early.time + late.time),
    )
