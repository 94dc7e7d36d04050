"""Boltzmann-type H functions, their balance law and negative-region bookkeeping."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import ndimage

from .core import (
    DistributionField,
    KinematicIndexSet,
    ZERO_MASK_RTOL,
    grid_shape,
    index_set_of,
    integrate_over,
    zero_mask,
)
from .errors import ConfigurationError, DomainError, UndefinedEntropyError
from .operators import DissipationField
from .reports import ResidualReport

DEFAULT_DRIFT_TOLERANCE = 2e-3


def _total(values: np.ndarray, axes) -> float:
    out, _ = integrate_over(values, axes, index_set_of(axes))
    return float(out)


def _negative_cells(values: np.ndarray) -> np.ndarray:
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    return values < -ZERO_MASK_RTOL * peak


def _mean_source(f: DistributionField, q: DissipationField) -> float:
    """``<Q>_0``: the density-weighted average of one dissipation field."""
    if tuple(q.axes) != tuple(f.axes):
        raise DomainError(f"dissipation of order {q.source_order} lives on a different grid than the field")
    f0 = f.total()
    return _total(np.where(q.valid, f.values * q.values, 0.0), f.axes) / f0


@dataclass(frozen=True)
class HReport:
    """H value and sign bookkeeping for one snapshot."""

    index_set: KinematicIndexSet
    H: float
    f0: float
    f0_minus: float
    mean_Q: tuple[float, ...] = ()
    time: float = 0.0


def h_function(f: DistributionField, dissipation: Sequence[DissipationField] = ()) -> HReport:
    """``H = (1/f0) * integral of f ln|f|``, with cells under the zero threshold contributing nothing."""
    f0 = f.total()
    peak = float(np.max(np.abs(f.values)))
    if not abs(f0) > ZERO_MASK_RTOL * max(peak, np.finfo(float).tiny):
        raise UndefinedEntropyError(f"total mass {f0!r} is too small to normalise H")
    keep = zero_mask(f.values)
    safe = np.where(keep, np.abs(f.values), 1.0)
    integrand = np.where(keep, f.values * np.log(safe), 0.0)
    H = _total(integrand, f.axes) / f0
    f0_minus = _total(np.where(_negative_cells(f.values), f.values, 0.0), f.axes)
    mean_q = tuple(_mean_source(f, q) for q in dissipation)
    return HReport(f.index_set, H, f0, f0_minus, mean_q, f.time)


def _pair_item(item, which):
    if isinstance(item, tuple) and len(item) == 2:
        return item[which]
    return item


def h_theorem_residual(
    f_pair: tuple[DistributionField, DistributionField],
    dissipation: Sequence = (),
    dt: float | None = None,
    mode: str = "positive",
) -> ResidualReport:
    """Balance of ``d(f0 H)/dt`` against ``-f0 * sum_p <Q^p>_0`` between two snapshots.

    ``dissipation`` holds one entry per mean-field velocity of the chain
    (a DissipationField, or an ``(early, late)`` pair of them).  The time
    derivative is a forward difference centred on the midpoint and the
    sources are averaged over both ends.

    ``mode="positive"`` refuses fields that take negative values.
    ``mode="signed"`` uses ``ln|f|`` and additionally reports the rate of
    change of the negative mass in ``extras["f0_minus_rate"]``; on positive
    inputs both modes give the same residual.
    """
    if mode not in ("positive", "signed"):
        raise ConfigurationError(f"mode must be 'positive' or 'signed', got {mode!r}")
    early, late = f_pair
    if tuple(early.axes) != tuple(late.axes):
        raise DomainError("the two snapshots live on different grids")
    if dt is None:
        dt = late.time - early.time
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    if mode == "positive":
        for snap in f_pair:
            if np.any(_negative_cells(snap.values)):
                raise DomainError(
                    "the field takes negative values; the H balance needs a non-negative field (use mode='signed')"
                )
    reports = []
    for which, snap in enumerate(f_pair):
        reports.append(h_function(snap, [_pair_item(q, which) for q in dissipation]))
    lhs = (reports[1].f0 * reports[1].H - reports[0].f0 * reports[0].H) / dt
    rhs = -0.5 * sum(r.f0 * sum(r.mean_Q) for r in reports)
    report = ResidualReport("h_theorem" if mode == "positive" else "signed_h", (), np.asarray(lhs), np.asarray(rhs), True, 1.0, 0.5 * (early.time + late.time))
    report.extras.update(
        early=reports[0],
        late=reports[1],
        f0_minus_rate=(reports[1].f0_minus - reports[0].f0_minus) / dt,
    )
    return report


@dataclass(frozen=True, eq=False)
class RegionDecomposition:
    """Sign classification of every grid cell.

    Boundary cells are those under the zero threshold or sharing a face with
    a cell of the other sign; the three masks partition the grid.
    """

    positive_mask: np.ndarray
    negative_mask: np.ndarray
    boundary_mask: np.ndarray
    negative_component_count: int
    component_f0_minus: tuple[float, ...]
    labels: np.ndarray = field(repr=False, default=None)


def _cell_weights(axes) -> np.ndarray:
    """Outer product of the trapezoid weights, so that ``sum(w * f)`` is the quadrature."""
    weights = np.ones(())
    for ax in axes:
        for c in range(ax.components):
            weights = np.multiply.outer(weights, ax.weights(c))
    return weights


def negative_region(f: DistributionField) -> RegionDecomposition:
    """Split the grid into positive, negative and sign-change cells."""
    values = np.asarray(f.values)
    peak = float(np.max(np.abs(values))) if values.size else 0.0
    threshold = ZERO_MASK_RTOL * peak
    negative = values < -threshold
    near_zero = np.abs(values) <= threshold
    touching = ndimage.binary_dilation(negative) & ~negative
    boundary = ~negative & (near_zero | touching)
    positive = ~negative & ~boundary
    labels, count = ndimage.label(negative)
    weighted = _cell_weights(f.axes) * values
    contributions = tuple(float(s) for s in ndimage.sum(weighted, labels, index=np.arange(1, count + 1))) if count else ()
    return RegionDecomposition(positive, negative, boundary, int(count), contributions, labels)


@dataclass(frozen=True)
class NegativeMassTrack:
    """Negative mass per snapshot and its largest departure from the first value."""

    times: tuple[float, ...]
    values: tuple[float, ...]
    max_drift: float
    tolerance: float
    flagged: bool
    component_counts: tuple[int, ...] = ()


def track_f0_minus(series: Sequence[DistributionField], tolerance: float = DEFAULT_DRIFT_TOLERANCE) -> NegativeMassTrack:
    """Follow the negative mass through a series; ``flagged`` marks drift beyond ``tolerance``."""
    if not series:
        raise ConfigurationError("the series is empty")
    shape = grid_shape(series[0].axes)
    values, counts = [], []
    for snap in series:
        if grid_shape(snap.axes) != shape:
            raise DomainError("all snapshots must share one grid")
        values.append(_total(np.where(_negative_cells(snap.values), snap.values, 0.0), snap.axes))
        counts.append(ndimage.label(_negative_cells(snap.values))[1])
    drift = max(abs(v - values[0]) for v in values)
    return NegativeMassTrack(
        tuple(s.time for s in series),
        tuple(values),
        float(drift),
        float(tolerance),
        bool(drift > tolerance),
        tuple(int(c) for c in counts),
    )
