"""Strang-split semi-Lagrangian transport of chain distribution functions.

Each sweep solves ``df/dt + d(a f)/dxi = 0`` along one grid dimension with
the velocity ``a`` frozen for the sweep.  Feet of characteristics are found
by tracing backwards; values are picked up with four-point cubic Lagrange
interpolation and data outside the box is zero.  When ``a`` varies along the
swept dimension the cell edges are traced instead and the cumulative mass is
interpolated there, so cell contents are differences of one conserved
profile and the quadrature total only changes by outflow.
"""

from __future__ import annotations

from typing import Callable, Sequence, Union

import numpy as np

from .closures import Closure
from .core import (
    DistributionField,
    KinematicIndexSet,
    MeanField,
    axis_dims,
    axis_for,
    coordinate_vector,
    grid_shape,
)
from .errors import ConfigurationError, DomainError, StepSizeError

MAX_DISPLACEMENT_FRACTION = 1.0 / 3.0

Velocity = Union[str, MeanField, Closure, np.ndarray, float]


def _lagrange_weights(s: np.ndarray) -> tuple[np.ndarray, ...]:
    """Weights of nodes -1, 0, 1, 2 for a point at fractional offset ``s`` in [0, 1)."""
    sp1, sm1, sm2 = s + 1.0, s - 1.0, s - 2.0
    return (
        -s * sm1 * sm2 / 6.0,
        sp1 * sm1 * sm2 / 2.0,
        -sp1 * s * sm2 / 2.0,
        sp1 * s * sm1 / 6.0,
    )


def interpolate_lines(values: np.ndarray, positions: np.ndarray, clamp: bool = False) -> np.ndarray:
    """Cubic interpolation along the last axis at fractional index ``positions``.

    Leading axes broadcast; the last axes of ``values`` and ``positions``
    may differ in length.  With ``clamp`` False, nodes outside the line
    contribute zero; with ``clamp`` True the edge values are repeated.
    """
    n = values.shape[-1]
    lead = np.broadcast_shapes(values.shape[:-1], positions.shape[:-1])
    values_b = np.broadcast_to(values, lead + (n,))
    positions = np.broadcast_to(positions, lead + positions.shape[-1:])
    base = np.floor(positions)
    s = positions - base
    base = base.astype(np.int64)
    out = np.zeros(positions.shape)
    for offset, w in zip((-1, 0, 1, 2), _lagrange_weights(s)):
        idx = base + offset
        gathered = np.take_along_axis(values_b, np.clip(idx, 0, n - 1), axis=-1)
        if not clamp:
            gathered = np.where((idx >= 0) & (idx < n), gathered, 0.0)
        out += w * gathered
    return out


def advect_dimension(values: np.ndarray, dim: int, h: float, velocity: np.ndarray, dt: float) -> np.ndarray:
    """One conservative semi-Lagrangian sweep along array dimension ``dim``."""
    velocity = np.broadcast_to(np.asarray(velocity, dtype=np.float64), values.shape)
    if not np.any(velocity):
        return np.array(values)
    n = values.shape[dim]
    peak = float(np.max(np.abs(velocity))) * abs(dt)
    if peak > MAX_DISPLACEMENT_FRACTION * h * (n - 1):
        raise StepSizeError(
            f"displacement {peak:.6g} exceeds one third of the axis length {h * (n - 1):.6g}"
        )
    f_line = np.moveaxis(values, dim, -1)
    a_line = np.moveaxis(velocity, dim, -1)
    index = np.arange(n, dtype=np.float64)
    uniform = np.all(a_line == a_line[..., :1])
    if uniform:
        out = _shift_lines(f_line, a_line[..., 0] * (dt / h))
    else:
        out = _advect_variable(f_line, a_line, index, h, dt)
    return np.moveaxis(out, -1, dim)


def _shift_lines(f_line: np.ndarray, shift: np.ndarray) -> np.ndarray:
    """Translate every line by its own constant ``shift`` (in cells), zero inflow.

    Lines are grouped by the integer part of the shift so each group is a
    plain slice of a zero-padded copy.
    """
    n = f_line.shape[-1]
    lead = f_line.shape[:-1]
    flat = f_line.reshape(-1, n)
    shift = np.broadcast_to(shift, lead).reshape(-1)
    q = np.floor(-shift)
    s = (-shift - q)[:, None]
    q = q.astype(np.int64)
    pad = int(np.max(np.abs(q))) + 2
    padded = np.zeros((flat.shape[0], n + 2 * pad))
    padded[:, pad : pad + n] = flat
    weights = _lagrange_weights(s)
    out = np.empty_like(flat)
    for qv in np.unique(q):
        rows = np.nonzero(q == qv)[0]
        block = padded[rows]
        acc = np.zeros((rows.size, n))
        for offset, w in zip((-1, 0, 1, 2), weights):
            start = pad + qv + offset
            acc += w[rows] * block[:, start : start + n]
        out[rows] = acc
    return out.reshape(f_line.shape)


def _advect_variable(f_line, a_line, index, h, dt):
    """Flux-form sweep for velocity varying along the line.

    Cell edges (half-integer indices) are traced back with RK4 and the
    cumulative sum of the line is interpolated at their feet; clamping the
    cumulative profile at both ends means nothing flows in from outside.
    """
    def rate(p):
        return -interpolate_lines(a_line, p, clamp=True) / h

    edges = np.arange(index.size + 1, dtype=np.float64) - 0.5
    p = np.broadcast_to(edges, a_line.shape[:-1] + edges.shape)
    k1 = rate(p)
    k2 = rate(p + 0.5 * dt * k1)
    k3 = rate(p + 0.5 * dt * k2)
    k4 = rate(p + dt * k3)
    foot = p + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    cumulative = np.concatenate([np.zeros(f_line.shape[:-1] + (1,)), np.cumsum(f_line, axis=-1)], axis=-1)
    moved = interpolate_lines(cumulative, foot + 0.5, clamp=True)
    return np.diff(moved, axis=-1)


def _velocity_array(f: DistributionField, order: int, velocity: Velocity) -> np.ndarray:
    """Full-grid velocity vector (trailing component axis) for transport along ``order``."""
    shape = grid_shape(f.axes)
    comps = f.components
    if isinstance(velocity, str):
        if velocity != "coordinate":
            raise ConfigurationError(f"unknown velocity keyword {velocity!r}")
        if order + 1 not in f.index_set:
            raise DomainError(f"coordinate velocity needs order {order + 1} on the grid")
        return coordinate_vector(f.axes, order + 1)
    if isinstance(velocity, Closure):
        velocity = velocity.evaluate(f)
    if isinstance(velocity, MeanField):
        if velocity.order != order + 1:
            raise DomainError(f"advection along order {order} needs a mean of order {order + 1}, got {velocity.order}")
        if tuple(velocity.axes) != tuple(f.axes):
            raise DomainError("mean field grid differs from the transported field grid")
        return np.asarray(velocity.values)
    arr = np.asarray(velocity, dtype=np.float64)
    if arr.ndim == 0:
        return np.full(shape + (comps,), float(arr))
    return np.broadcast_to(arr, shape + (comps,))


def advect_order(f: DistributionField, order: int, velocity: Velocity, dt: float) -> DistributionField:
    """Sweep every component of one kinematic order; time is not advanced."""
    vel = _velocity_array(f, order, velocity)
    ax = axis_for(f.axes, order)
    values = f.values
    for c, dim in enumerate(axis_dims(f.axes, order)):
        values = advect_dimension(values, dim, ax.spacing[c], vel[..., c], dt)
    return DistributionField(f.axes, values, f.time)


def _check_dt(dt: float) -> None:
    if not dt > 0:
        raise ConfigurationError("dt must be positive")


def _shift_time(f: DistributionField, dt: float) -> DistributionField:
    return DistributionField(f.axes, f.values, f.time + dt)


def step_rank1(f: DistributionField, mf: Velocity, dt: float) -> DistributionField:
    """Advance a rank-1 density with the mean of the next order as velocity."""
    _check_dt(dt)
    if f.rank != 1:
        raise DomainError("step_rank1 needs a rank-1 field")
    (order,) = f.index_set
    if isinstance(mf, Closure):
        mf = mf.evaluate(_shift_time(f, 0.5 * dt))
    return _shift_time(advect_order(f, order, mf, dt), dt)


def _closure_matches(closure: Closure, order: int, base: KinematicIndexSet) -> None:
    if closure.order != order or closure.base != base:
        raise ConfigurationError(
            f"closure supplies order {closure.order} on {closure.base}, needed order {order} on {base}"
        )


def step_rank2_first_group(f: DistributionField, closure: Closure, dt: float) -> DistributionField:
    """Half step along the lower axis, closure-driven full step, half step again."""
    _check_dt(dt)
    idx = f.index_set
    if idx.rank != 2 or not idx.is_contiguous():
        raise DomainError(f"first-group rank-2 step needs a set {{n, n+1}}, got {idx}")
    n = idx.indices[0]
    _closure_matches(closure, n + 2, idx)
    g = advect_order(f, n, "coordinate", 0.5 * dt)
    mid = _shift_time(g, 0.5 * dt)
    g = advect_order(mid, n + 1, closure.evaluate(mid), dt)
    g = advect_order(g, n, "coordinate", 0.5 * dt)
    return DistributionField(f.axes, g.values, f.time + dt)


def step_rank2_second_group(f: DistributionField, mf_low: Velocity, mf_high: Velocity, dt: float) -> DistributionField:
    """Strang step on ``{n, n+k}`` with both velocities supplied as mean fields."""
    _check_dt(dt)
    idx = f.index_set
    if idx.rank != 2 or idx.is_contiguous():
        raise DomainError(f"second-group rank-2 step needs a gapped set {{n, n+k}}, got {idx}")
    n, nk = idx.indices
    low = mf_low.evaluate(_shift_time(f, 0.5 * dt)) if isinstance(mf_low, Closure) else mf_low
    g = advect_order(f, n, low, 0.5 * dt)
    mid = _shift_time(g, 0.5 * dt)
    high = mf_high.evaluate(mid) if isinstance(mf_high, Closure) else mf_high
    g = advect_order(mid, nk, high, dt)
    g = advect_order(g, n, low, 0.5 * dt)
    return DistributionField(f.axes, g.values, f.time + dt)


def step_rank3_first_group(f: DistributionField, closure: Closure, dt: float) -> DistributionField:
    """Five-stage symmetric splitting on ``{n, n+1, n+2}``; closure drives the top axis."""
    _check_dt(dt)
    idx = f.index_set
    if idx.rank != 3 or not idx.is_contiguous():
        raise DomainError(f"first-group rank-3 step needs a set {{n, n+1, n+2}}, got {idx}")
    n = idx.indices[0]
    _closure_matches(closure, n + 3, idx)
    g = advect_order(f, n, "coordinate", 0.5 * dt)
    g = advect_order(g, n + 1, "coordinate", 0.5 * dt)
    mid = _shift_time(g, 0.5 * dt)
    g = advect_order(mid, n + 2, closure.evaluate(mid), dt)
    g = advect_order(g, n + 1, "coordinate", 0.5 * dt)
    g = advect_order(g, n, "coordinate", 0.5 * dt)
    return DistributionField(f.axes, g.values, f.time + dt)


def make_stepper(index_set: KinematicIndexSet, closures: Sequence) -> Callable[[DistributionField, float], DistributionField]:
    """Pick the step routine for a field's index set.

    ``closures`` holds one velocity source for rank 1 and first-group sets,
    two (lower, upper) for gapped rank-2 sets.
    """
    rank = index_set.rank
    if rank == 1:
        (mf,) = closures
        return lambda g, dt: step_rank1(g, mf, dt)
    if rank == 2 and index_set.is_contiguous():
        (closure,) = closures
        return lambda g, dt: step_rank2_first_group(g, closure, dt)
    if rank == 2:
        low, high = closures
        return lambda g, dt: step_rank2_second_group(g, low, high, dt)
    if rank == 3 and index_set.is_contiguous():
        (closure,) = closures
        return lambda g, dt: step_rank3_first_group(g, closure, dt)
    raise DomainError(f"no transport scheme for index set {index_set}")


def evolve(
    f: DistributionField,
    closures: Sequence,
    dt: float,
    steps: int,
    stride: int = 1,
) -> list[DistributionField]:
    """Run ``steps`` steps and return the snapshots taken every ``stride`` steps (including t0)."""
    if steps < 0 or stride < 1:
        raise ConfigurationError("steps must be >= 0 and stride >= 1")
    stepper = make_stepper(f.index_set, closures)
    snapshots = [f]
    g = f
    for i in range(1, steps + 1):
        g = stepper(g, dt)
        if i % stride == 0:
            snapshots.append(g)
    return snapshots
