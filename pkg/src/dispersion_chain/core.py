"""Phase-space grids, distribution fields, marginals and conditional means.

Conventions used throughout the package:

* Kinematic order 1 is position, 2 velocity, 3 acceleration, 4 its derivative.
* Every order carries the same number of components ``d``; each component
  is one array dimension.
* Array dimensions are ordered by ascending kinematic order, components
  innermost.  Vector-valued fields append one trailing dimension of length
  ``d`` per tensor index.
* Quadrature is the trapezoid rule on node-centred uniform grids and fields
  vanish outside the box.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .errors import ConfigurationError, DomainError

ZERO_MASK_RTOL = 1e-14
MAX_KINEMATIC_ORDER = 4


@dataclass(frozen=True)
class KinematicIndexSet:
    """Strictly increasing tuple of kinematic orders."""

    indices: tuple[int, ...] = ()

    def __post_init__(self):
        idx = tuple(int(i) for i in self.indices)
        if any(i < 1 for i in idx):
            raise ConfigurationError(f"kinematic orders must be >= 1, got {idx}")
        if any(b <= a for a, b in zip(idx, idx[1:])):
            raise ConfigurationError(f"kinematic orders must be strictly increasing, got {idx}")
        if any(i > MAX_KINEMATIC_ORDER for i in idx):
            raise ConfigurationError(
                f"kinematic orders above {MAX_KINEMATIC_ORDER} are not supported, got {idx}"
            )
        object.__setattr__(self, "indices", idx)

    @classmethod
    def of(cls, *indices: int) -> "KinematicIndexSet":
        return cls(tuple(sorted(indices)))

    @property
    def rank(self) -> int:
        return len(self.indices)

    def __iter__(self):
        return iter(self.indices)

    def __len__(self):
        return len(self.indices)

    def __contains__(self, order) -> bool:
        return order in self.indices

    def issubset(self, other) -> bool:
        other = as_index_set(other)
        return all(i in other for i in self.indices)

    def union(self, other) -> "KinematicIndexSet":
        return KinematicIndexSet(tuple(sorted(set(self.indices) | set(as_index_set(other).indices))))

    def difference(self, other) -> "KinematicIndexSet":
        drop = set(as_index_set(other).indices)
        return KinematicIndexSet(tuple(i for i in self.indices if i not in drop))

    def is_contiguous(self) -> bool:
        return all(b == a + 1 for a, b in zip(self.indices, self.indices[1:]))

    def __str__(self):
        return "{" + ",".join(str(i) for i in self.indices) + "}"


def as_index_set(value) -> KinematicIndexSet:
    """Coerce an int, an iterable of ints or a set object into a KinematicIndexSet."""
    if isinstance(value, KinematicIndexSet):
        return value
    if value is None:
        return KinematicIndexSet()
    if isinstance(value, (int, np.integer)):
        return KinematicIndexSet((int(value),))
    return KinematicIndexSet(tuple(sorted(int(v) for v in value)))


@dataclass(frozen=True)
class AxisGrid:
    """Node-centred uniform grid for one kinematic order (all its components)."""

    kinematic_index: int
    lo: tuple[float, ...]
    hi: tuple[float, ...]
    num_points: tuple[int, ...]

    def __post_init__(self):
        lo = tuple(float(v) for v in np.atleast_1d(self.lo))
        hi = tuple(float(v) for v in np.atleast_1d(self.hi))
        num = tuple(int(v) for v in np.atleast_1d(self.num_points))
        if not (len(lo) == len(hi) == len(num)) or len(lo) == 0:
            raise ConfigurationError("axis bounds and point counts must have one entry per component")
        for a, b, n in zip(lo, hi, num):
            if not (np.isfinite(a) and np.isfinite(b)):
                raise ConfigurationError("axis bounds must be finite")
            if a == b:
                raise ConfigurationError(f"degenerate axis: min == max == {a}")
            if a > b:
                raise ConfigurationError(f"non-monotone bounds: min {a} > max {b}")
            if n < 2:
                raise ConfigurationError(f"axis needs at least 2 points, got {n}")
        if int(self.kinematic_index) < 1:
            raise ConfigurationError("kinematic index must be positive")
        object.__setattr__(self, "kinematic_index", int(self.kinematic_index))
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "num_points", num)

    @property
    def components(self) -> int:
        return len(self.lo)

    @property
    def spacing(self) -> tuple[float, ...]:
        return tuple((b - a) / (n - 1) for a, b, n in zip(self.lo, self.hi, self.num_points))

    @property
    def shape(self) -> tuple[int, ...]:
        return self.num_points

    def nodes(self, component: int = 0) -> np.ndarray:
        lo, hi = self.lo[component], self.hi[component]
        raw = np.linspace(lo, hi, self.num_points[component])
        if lo == -hi:
            # exact mirror images, so reflected samples match bit for bit
            raw = 0.5 * (raw - raw[::-1])
        return raw

    def weights(self, component: int = 0) -> np.ndarray:
        n = self.num_points[component]
        w = np.full(n, self.spacing[component])
        w[0] *= 0.5
        w[-1] *= 0.5
        return w

    def is_symmetric(self, component: int = 0, rtol: float = 1e-12) -> bool:
        lo, hi = self.lo[component], self.hi[component]
        return abs(lo + hi) <= rtol * max(abs(lo), abs(hi))

    def to_dict(self) -> dict:
        return {
            "index": self.kinematic_index,
            "min": list(self.lo),
            "max": list(self.hi),
            "points": list(self.num_points),
        }

    @classmethod
    def from_dict(cls, spec: Mapping) -> "AxisGrid":
        return cls(spec["index"], spec["min"], spec["max"], spec["points"])


def make_grid(axis_specs: Iterable) -> tuple[AxisGrid, ...]:
    """Build axes from mappings ``{index, min, max, points[, components]}`` or tuples.

    A tuple ``(index, min, max, points)`` is read the same way.  The
    component count is the longest of the bound and point lists unless a
    mapping sets ``components``; scalars are repeated.
    """
    axes = []
    for spec in axis_specs:
        if isinstance(spec, AxisGrid):
            axes.append(spec)
            continue
        if isinstance(spec, Mapping):
            lo, hi, num = spec["min"], spec["max"], spec["points"]
            comps = int(spec.get("components", max(np.size(lo), np.size(hi), np.size(num))))
            index = spec["index"]
        else:
            index, lo, hi, num = spec
            comps = max(np.size(lo), np.size(hi), np.size(num))
        lo, hi, num = (np.broadcast_to(np.atleast_1d(v), (comps,)) for v in (lo, hi, num))
        axes.append(AxisGrid(index, tuple(lo), tuple(hi), tuple(num)))
    check_axes(axes)
    return tuple(axes)


def check_axes(axes: Sequence[AxisGrid]) -> None:
    order = [a.kinematic_index for a in axes]
    if any(b <= a for a, b in zip(order, order[1:])):
        raise ConfigurationError(f"axes must be ordered by strictly increasing kinematic index, got {order}")
    comps = {a.components for a in axes}
    if len(comps) > 1:
        raise ConfigurationError("every kinematic order must carry the same number of components")


def grid_shape(axes: Sequence[AxisGrid]) -> tuple[int, ...]:
    return tuple(n for a in axes for n in a.num_points)


def axis_dims(axes: Sequence[AxisGrid], order: int) -> list[int]:
    """Array dimensions occupied by the components of ``order``."""
    dim = 0
    for a in axes:
        if a.kinematic_index == order:
            return list(range(dim, dim + a.components))
        dim += a.components
    raise DomainError(f"kinematic order {order} is not an axis of this grid")


def axis_for(axes: Sequence[AxisGrid], order: int) -> AxisGrid:
    for a in axes:
        if a.kinematic_index == order:
            return a
    raise DomainError(f"kinematic order {order} is not an axis of this grid")


def index_set_of(axes: Sequence[AxisGrid]) -> KinematicIndexSet:
    return KinematicIndexSet(tuple(a.kinematic_index for a in axes))


def coordinate(axes: Sequence[AxisGrid], order: int, component: int = 0) -> np.ndarray:
    """Coordinate values of one component, shaped to broadcast against the grid."""
    ax = axis_for(axes, order)
    dim = axis_dims(axes, order)[component]
    shape = [1] * len(grid_shape(axes))
    shape[dim] = ax.num_points[component]
    return ax.nodes(component).reshape(shape)


def coordinate_vector(axes: Sequence[AxisGrid], order: int) -> np.ndarray:
    """All components of ``order`` stacked on a trailing axis, full grid shape."""
    shape = grid_shape(axes)
    comps = axis_for(axes, order).components
    return np.stack(
        [np.broadcast_to(coordinate(axes, order, c), shape) for c in range(comps)], axis=-1
    )


def components_of(axes: Sequence[AxisGrid]) -> int:
    return axes[0].components if axes else 1


def _freeze(values: np.ndarray) -> np.ndarray:
    arr = np.array(values, dtype=np.float64, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class DistributionField:
    """Real-valued (possibly sign-indefinite) density over a product grid."""

    axes: tuple[AxisGrid, ...]
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        axes = tuple(self.axes)
        check_axes(axes)
        vals = _freeze(self.values)
        if vals.shape != grid_shape(axes):
            raise ConfigurationError(
                f"values shape {vals.shape} does not match grid shape {grid_shape(axes)}"
            )
        if not np.all(np.isfinite(vals)):
            raise ConfigurationError("distribution values must be finite")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "time", float(self.time))

    @property
    def index_set(self) -> KinematicIndexSet:
        return index_set_of(self.axes)

    @property
    def rank(self) -> int:
        return len(self.axes)

    @property
    def components(self) -> int:
        return components_of(self.axes)

    def with_values(self, values: np.ndarray, time: float | None = None) -> "DistributionField":
        return DistributionField(self.axes, values, self.time if time is None else time)

    def coordinate(self, order: int, component: int = 0) -> np.ndarray:
        return coordinate(self.axes, order, component)

    def total(self) -> float:
        """Rank-0 marginal, the total measure."""
        return float(marginalize(self, self.index_set).values)


@dataclass(frozen=True, eq=False)
class MeanField:
    """Conditional mean of one kinematic order over a base grid.

    ``values`` has shape ``base grid + (d,)``.  ``density`` keeps the
    conditioning marginal used for the division; cells where it is below the
    zero-mask threshold are invalid and hold 0.
    """

    order: int
    axes: tuple[AxisGrid, ...]
    values: np.ndarray
    valid: np.ndarray
    time: float = 0.0
    density: np.ndarray | None = field(default=None)

    def __post_init__(self):
        axes = tuple(self.axes)
        check_axes(axes)
        base = index_set_of(axes)
        if self.order in base:
            raise ConfigurationError(f"mean order {self.order} must not be an argument of its base set {base}")
        shape = grid_shape(axes)
        vals = np.asarray(self.values, dtype=np.float64)
        if vals.shape == shape:
            vals = vals[..., None]
        if vals.shape[: len(shape)] != shape or vals.ndim != len(shape) + 1:
            raise ConfigurationError(f"mean values shape {vals.shape} does not fit base grid {shape}")
        valid = np.broadcast_to(np.asarray(self.valid, dtype=bool), shape)
        vals = np.where(valid[..., None], vals, 0.0)
        if not np.all(np.isfinite(vals)):
            raise ConfigurationError("mean values must be finite on valid cells")
        object.__setattr__(self, "axes", axes)
        object.__setattr__(self, "values", _freeze(vals))
        valid = np.array(valid, dtype=bool)
        valid.flags.writeable = False
        object.__setattr__(self, "valid", valid)
        object.__setattr__(self, "time", float(self.time))
        if self.density is not None:
            object.__setattr__(self, "density", _freeze(np.broadcast_to(self.density, shape)))

    @property
    def base_set(self) -> KinematicIndexSet:
        return index_set_of(self.axes)

    @property
    def components(self) -> int:
        return self.values.shape[-1]

    @classmethod
    def from_function(cls, order: int, axes: Sequence[AxisGrid], values, time: float = 0.0) -> "MeanField":
        """Wrap analytically known values (no mask) as a mean field."""
        shape = grid_shape(axes)
        vals = np.asarray(values, dtype=np.float64)
        comps = components_of(axes)
        if vals.ndim <= len(shape) and _broadcastable(vals.shape, shape):
            vals = np.broadcast_to(vals, shape)[..., None] * np.ones(comps)
        vals = np.broadcast_to(vals, shape + (comps,))
        return cls(order, tuple(axes), vals, np.ones(shape, dtype=bool), time)


def _broadcastable(src: tuple, dst: tuple) -> bool:
    try:
        return np.broadcast_shapes(src, dst) == tuple(dst)
    except ValueError:
        return False


def zero_mask(density: np.ndarray) -> np.ndarray:
    """True where ``|density|`` clears the relative zero threshold."""
    mag = np.abs(density)
    peak = float(mag.max()) if mag.size else 0.0
    if peak == 0.0:
        return np.zeros(mag.shape, dtype=bool)
    return mag >= ZERO_MASK_RTOL * peak


def integrate_over(values: np.ndarray, axes: Sequence[AxisGrid], drop) -> tuple[np.ndarray, tuple[AxisGrid, ...]]:
    """Trapezoid quadrature of ``values`` over the orders in ``drop``.

    ``values`` may carry trailing dimensions beyond the grid; they are kept.
    """
    drop = as_index_set(drop)
    base_set = index_set_of(axes)
    if not drop.issubset(base_set):
        raise DomainError(f"cannot integrate over {drop}: not a subset of {base_set}")
    out = np.asarray(values, dtype=np.float64)
    dims = []
    for order in drop:
        ax = axis_for(axes, order)
        for c, dim in enumerate(axis_dims(axes, order)):
            dims.append((dim, ax.weights(c)))
    for dim, w in sorted(dims, key=lambda item: -item[0]):
        # contracting one axis of the first operand keeps the others in order
        out = np.tensordot(out, w, axes=([dim], [0]))
    kept = tuple(a for a in axes if a.kinematic_index not in drop)
    return out, kept


def expand_to(base_values: np.ndarray, base_axes: Sequence[AxisGrid], full_axes: Sequence[AxisGrid]) -> np.ndarray:
    """Insert singleton dimensions so base-grid data broadcasts on the full grid.

    Trailing (tensor) dimensions of ``base_values`` are preserved.
    """
    base_orders = {a.kinematic_index for a in base_axes}
    shape_extra = base_values.shape[len(grid_shape(base_axes)):]
    out = np.asarray(base_values)
    dim = 0
    for a in full_axes:
        if a.kinematic_index in base_orders:
            dim += a.components
        else:
            for _ in range(a.components):
                out = np.expand_dims(out, dim)
                dim += 1
    assert out.ndim == len(grid_shape(full_axes)) + len(shape_extra)
    return out


def marginalize(f: DistributionField, drop) -> DistributionField:
    """Integrate ``f`` over the axes in ``drop``; dropping all axes gives the rank-0 total."""
    drop = as_index_set(drop)
    if not drop.issubset(f.index_set):
        raise DomainError(f"cannot drop {drop}: not a subset of {f.index_set}")
    values, kept = integrate_over(f.values, f.axes, drop)
    return DistributionField(kept, values, f.time)


def mean_kinematic(f: DistributionField, ell: int, drop=()) -> MeanField:
    """Conditional mean of order ``ell`` given the orders that survive ``drop ∪ {ell}``."""
    if ell not in f.index_set:
        raise DomainError(f"order {ell} is not an argument of {f.index_set}")
    drop = as_index_set(drop)
    if ell in drop:
        drop = drop.difference([ell])
    if not drop.issubset(f.index_set):
        raise DomainError(f"cannot drop {drop}: not a subset of {f.index_set}")
    integrated = drop.union([ell])
    xi = coordinate_vector(f.axes, ell)
    numerator, base_axes = integrate_over(f.values[..., None] * xi, f.axes, integrated)
    density, _ = integrate_over(f.values, f.axes, integrated)
    return _divide(ell, base_axes, numerator, density, f.time)


def _divide(order, base_axes, numerator, density, time) -> MeanField:
    valid = zero_mask(density)
    safe = np.where(valid, density, 1.0)
    values = np.where(valid[..., None], numerator / safe[..., None], 0.0)
    return MeanField(order, base_axes, values, valid, time, density)


def nested_average(mf: MeanField, f_weight: DistributionField, drop) -> MeanField:
    """Average a mean field over ``drop`` with ``f_weight`` as the weight.

    Invalid cells of ``mf`` carry zero measure in both numerator and
    denominator.
    """
    drop = as_index_set(drop)
    if not drop.issubset(mf.base_set):
        raise DomainError(f"cannot average over {drop}: not a subset of {mf.base_set}")
    if tuple(f_weight.axes) != tuple(mf.axes):
        raise DomainError("weight field and mean field live on different grids")
    weight = np.where(mf.valid, f_weight.values, 0.0)
    numerator, base_axes = integrate_over(weight[..., None] * mf.values, mf.axes, drop)
    density, _ = integrate_over(weight, mf.axes, drop)
    return _divide(mf.order, base_axes, numerator, density, f_weight.time)
