"""Residuals of the moment laws carried by chain distribution functions.

Every law here comes from one construction.  A density ``f`` on the set
``S`` obeys ``df/dt + sum_s div_s(V_s f) = 0`` where ``V_s`` is the
coordinate of order ``s+1`` when that order is on the grid and a closure
mean otherwise.  Multiplying by ``xi^a`` (or ``|xi^a|^2 / 2``) and
integrating over the order ``a`` gives a law on the base ``B = S \\ {a}``:

    pi_B <xi^a>_B + (1/f_B) sum_b div_b C_b = <V_a>_B

with ``C_b`` the covariance of ``xi^a`` and ``V_b`` over ``a`` and ``pi_B``
advecting order ``b`` with ``<V_b>_B``.  Named laws differ only in which
order ``a`` is integrated and which velocities are closures, so equal
inputs always take the same arithmetic path.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .analytic import DeltaState
from .closures import Closure
from .core import (
    AxisGrid,
    DistributionField,
    KinematicIndexSet,
    MeanField,
    as_index_set,
    axis_dims,
    axis_for,
    coordinate_vector,
    grid_shape,
    integrate_over,
    marginalize,
    mean_kinematic,
    nested_average,
)
from .errors import ConfigurationError, DomainError
from .moments import MomentTensorField, central_moment2, central_moment3
from .operators import apply_pi, erode
from .reports import ResidualReport, warn_if_mostly_masked
from .stencils import gradient

PARITY_RTOL = 1e-10


def _set_label(orders) -> str:
    return ",".join(str(o) for o in orders)


@dataclass
class _LawInputs:
    """Ingredients of one moment law at one time level, all on the base grid."""

    axes: tuple[AxisGrid, ...]
    density: np.ndarray
    target: MeanField
    advection: dict = field(default_factory=dict)
    tensors: dict = field(default_factory=dict)
    source: np.ndarray | None = None
    # energy-law extras
    pressure_trace: np.ndarray | None = None
    third: dict = field(default_factory=dict)
    work: np.ndarray | None = None
    time: float = 0.0


def _pick(value, which: int):
    if isinstance(value, tuple) and len(value) == 2:
        return value[which]
    return value


def _closure_mean(source, f: DistributionField, order: int) -> MeanField:
    if isinstance(source, Closure):
        source = source.evaluate(f)
    if not isinstance(source, MeanField):
        raise ConfigurationError(f"closure for order {order} must be a Closure or MeanField")
    if source.order != order:
        raise ConfigurationError(f"closure supplies order {source.order}, expected {order}")
    if tuple(source.axes) != tuple(f.axes):
        raise DomainError(f"closure for order {order} lives on a different grid")
    return source


def _tensor_name(a: int, other: int, base) -> str:
    top = f"{a}" if a == other else f"{min(a, other)},{max(a, other)}"
    return f"P^{{{top}}}({_set_label(base)})"


def _gridded_inputs(
    f: DistributionField,
    a: int,
    closures: Mapping,
    which: int,
    overrides: Mapping,
    energy: bool,
) -> _LawInputs:
    S = f.index_set
    B = S.difference([a])
    # velocities of the transport equation of f, on the full grid
    velocity: dict[int, object] = {}
    for s in S:
        if s + 1 in S:
            velocity[s] = "coordinate"
        elif s + 1 in closures:
            velocity[s] = _closure_mean(_pick(closures[s + 1], which), f, s + 1)
        else:
            velocity[s] = None

    f_base = marginalize(f, [a])
    target = mean_kinematic(f, a)
    inputs = _LawInputs(f_base.axes, np.asarray(f_base.values), target, time=f.time)

    needs_pressure = energy or any(velocity[b] == "coordinate" and b + 1 == a for b in B)
    pressure = central_moment2(f, a, a) if needs_pressure else None
    if energy:
        inputs.pressure_trace = pressure.trace()

    for b in B:
        v_b = velocity[b]
        if isinstance(v_b, str) and b + 1 != a:
            inputs.advection[b] = "coordinate"
            continue
        if b in overrides:
            tensor = _pick(overrides[b], which)
        elif v_b is None:
            raise ConfigurationError(
                f"missing input: {_tensor_name(a, b + 1, B)} needs the closure mean of order {b + 1} on {{{_set_label(S)}}}"
            )
        elif isinstance(v_b, str):
            tensor = pressure
        else:
            tensor = central_moment2(f, a, v_b)
        if isinstance(v_b, str):
            inputs.advection[b] = target
        elif v_b is None:
            raise ConfigurationError(f"missing input: mean of order {b + 1} on {{{_set_label(B)}}}")
        else:
            inputs.advection[b] = nested_average(v_b, f, [a])
        inputs.tensors[b] = tensor
        if energy:
            factor = a if isinstance(v_b, str) else v_b
            inputs.third[b] = central_moment3(f, a, a, factor)

    v_a = velocity[a]
    if v_a is None:
        raise ConfigurationError(
            f"missing input: <xi^{a + 1}>_{{{_set_label(B)}}} needs the closure mean of order {a + 1}"
        )
    if isinstance(v_a, str):
        inputs.source = coordinate_vector(f_base.axes, a + 1)
        integrand = np.einsum("...c,...c->...", coordinate_vector(f.axes, a + 1), coordinate_vector(f.axes, a))
    else:
        inputs.source = nested_average(v_a, f, [a]).values
        integrand = np.einsum("...c,...c->...", v_a.values, coordinate_vector(f.axes, a))
    if energy:
        inputs.work, _ = integrate_over(f.values * integrand, f.axes, [a])
    return inputs


def _delta_inputs(state: DeltaState, closures: Mapping, which: int, energy: bool) -> _LawInputs:
    """Law ingredients for a delta state, integrating its top order by substitution."""
    a = state.top_order
    base = state.base
    B = base.index_set
    zero2 = state.top_covariance()
    inputs = _LawInputs(base.axes, np.asarray(base.values), state.map, time=state.time)
    comps = base.components
    shape = grid_shape(base.axes)
    if energy:
        inputs.pressure_trace = zero2.trace()
    for b in B:
        if b + 1 in B:
            inputs.advection[b] = "coordinate"
            continue
        if b + 1 == a:
            inputs.advection[b] = state.map
        elif b + 1 in closures:
            mean = _pick(closures[b + 1], which)
            if not isinstance(mean, MeanField) or tuple(mean.axes) != tuple(base.axes):
                raise ConfigurationError(f"delta-state closure for order {b + 1} must be a mean on the base grid")
            inputs.advection[b] = mean
        else:
            raise ConfigurationError(f"missing input: mean of order {b + 1} on {{{_set_label(B)}}}")
        # every covariance with the top order vanishes on the graph
        inputs.tensors[b] = MomentTensorField(2, (a, b + 1), base.axes, zero2.values, zero2.valid, state.time)
        if energy:
            inputs.third[b] = MomentTensorField(3, (a, a, b + 1), base.axes, np.zeros(shape + (comps,) * 3), zero2.valid, state.time)
    if a + 1 in closures:
        source = _pick(closures[a + 1], which)
        if isinstance(source, MeanField):
            source = source.values
        inputs.source = np.broadcast_to(np.asarray(source, dtype=np.float64), shape + (comps,))
    else:
        raise ConfigurationError(f"missing input: <xi^{a + 1}>_{{{_set_label(B)}}} for the delta state")
    if energy:
        inputs.work = base.values * np.einsum("...c,...c->...", inputs.source, state.map.values)
    return inputs


def _law_inputs(fields, a, closures, overrides, energy):
    pair = []
    for which, item in enumerate(fields):
        if isinstance(item, DeltaState):
            if a is not None and a != item.top_order:
                raise DomainError("delta states only support laws for their top order")
            pair.append(_delta_inputs(item, closures, which, energy))
        else:
            pair.append(_gridded_inputs(item, a, closures, which, overrides, energy))
    if tuple(pair[0].axes) != tuple(pair[1].axes):
        raise DomainError("the two time levels live on different grids")
    return pair


def _divergence(tensor: MomentTensorField, axes, b: int) -> np.ndarray:
    """``sum_beta d C_{alpha beta} / d xi^b_beta`` as a vector over alpha."""
    comps = tensor.values.shape[-1]
    out = np.zeros(grid_shape(axes) + (comps,))
    for alpha in range(comps):
        for beta in range(comps):
            out[..., alpha] += gradient(tensor.values[..., alpha, beta], axes, b, beta)
    return out


def _resolve_pair_dt(fields, dt):
    early, late = fields
    if dt is None:
        dt = late.time - early.time
    if not dt > 0:
        raise ConfigurationError("dt must be positive")
    return float(dt)


@dataclass
class _MomentumTerms:
    axes: tuple
    transport: np.ndarray
    pressure: np.ndarray
    source: np.ndarray
    valid: np.ndarray
    weight: np.ndarray
    time: float


def _momentum_terms(fields, a, closures, dt, overrides) -> _MomentumTerms:
    dt = _resolve_pair_dt(fields, dt)
    early, late = _law_inputs(fields, a, closures, overrides, energy=False)
    axes = early.axes
    advection = {b: (early.advection[b], late.advection[b]) for b in early.advection}
    transport, valid = apply_pi((early.target, late.target), dt, advection, axes)
    pressure = np.zeros(transport.shape)
    ok = np.ones(grid_shape(axes), bool)
    dims = []
    for level in (early, late):
        ok &= level.target.valid
        safe = np.where(level.target.valid, level.density, 1.0)
        for b, tensor in level.tensors.items():
            pressure += 0.5 * _divergence(tensor, axes, b) / safe[..., None]
            ok &= tensor.valid
            dims.extend(d for d in axis_dims(axes, b))
    valid = valid & erode(ok, sorted(set(dims)))
    source = 0.5 * (np.asarray(early.source) + np.asarray(late.source))
    weight = 0.5 * (early.density + late.density)
    return _MomentumTerms(axes, transport, pressure, source, valid, weight, 0.5 * (early.time + late.time))


def moment_law_residual(
    fields,
    integrated_order: int | None,
    closures: Mapping | None = None,
    dt: float | None = None,
    tensors: Mapping | None = None,
    equation_id: str = "moment_law",
) -> ResidualReport:
    """Residual of the first-moment law obtained by integrating over ``integrated_order``.

    ``fields`` is an (early, late) pair of DistributionFields or DeltaStates.
    ``closures`` maps a kinematic order to a Closure, MeanField or
    ``(early, late)`` pair of MeanFields supplying that order's mean on the
    full grid.  ``tensors`` maps a base order to a covariance tensor pair
    that replaces the computed one.
    """
    terms = _momentum_terms(fields, integrated_order, closures or {}, dt, tensors or {})
    warn_if_mostly_masked(terms.valid, equation_id)
    return ResidualReport(
        equation_id,
        terms.axes,
        terms.transport + terms.pressure,
        terms.source,
        terms.valid,
        terms.weight,
        terms.time,
    )


def energy_law_residual(
    fields,
    integrated_order: int | None,
    closures: Mapping | None = None,
    dt: float | None = None,
    equation_id: str = "energy_law",
) -> ResidualReport:
    """Residual of the second-moment (energy) law over ``integrated_order``.

    ``lhs`` is the time derivative of the energy density plus the flux
    divergence; ``rhs`` is the work done by the velocity of the integrated
    order.
    """
    dt = _resolve_pair_dt(fields, dt)
    levels = _law_inputs(fields, integrated_order, closures or {}, {}, energy=True)
    axes = levels[0].axes
    shape = grid_shape(axes)
    energies, divergences, works = [], [], []
    valid = np.ones(shape, bool)
    dims = []
    for level in levels:
        m = level.target.values
        m2 = np.einsum("...c,...c->...", m, m)
        energies.append(0.5 * level.density * m2 + 0.5 * level.pressure_trace)
        total = np.zeros(shape)
        for b, spec in level.advection.items():
            vel = coordinate_vector(axes, b + 1) if isinstance(spec, str) else np.asarray(spec.values)
            flux = (0.5 * level.density * m2 + 0.5 * level.pressure_trace)[..., None] * vel
            if b in level.tensors:
                flux = flux + np.einsum("...ab,...a->...b", level.tensors[b].values, m)
                flux = flux + 0.5 * np.einsum("...aab->...b", level.third[b].values)
                valid &= level.tensors[b].valid
            if not isinstance(spec, str):
                valid &= spec.valid
            for beta in range(flux.shape[-1]):
                total = total + gradient(flux[..., beta], axes, b, beta)
            dims.extend(axis_dims(axes, b))
        divergences.append(total)
        works.append(level.work)
        valid &= level.target.valid
    lhs = (energies[1] - energies[0]) / dt + 0.5 * (divergences[0] + divergences[1])
    rhs = 0.5 * (works[0] + works[1])
    valid = erode(valid, sorted(set(dims)))
    warn_if_mostly_masked(valid, equation_id)
    weight = 0.5 * (levels[0].density + levels[1].density)
    return ResidualReport(equation_id, axes, lhs, rhs, valid, weight, 0.5 * (levels[0].time + levels[1].time))


def _first_group(fields):
    sample = fields[0]
    S = sample.index_set
    if S.rank != 2 or not S.is_contiguous():
        raise DomainError(f"first-group laws need a set {{n, n+1}}, got {S}")
    return S.indices[0]


def momentum_residual_first(fields, closure, dt: float | None = None) -> ResidualReport:
    """Momentum law of a first-group pair ``{n, n+1}``; ``closure`` supplies order ``n+2``."""
    n = _first_group(fields)
    return moment_law_residual(fields, n + 1, {n + 2: closure}, dt, equation_id="momentum")


def energy_residual_first(fields, closure, dt: float | None = None) -> ResidualReport:
    """Energy law of a first-group pair ``{n, n+1}``."""
    n = _first_group(fields)
    return energy_law_residual(fields, n + 1, {n + 2: closure}, dt, equation_id="energy")


def _second_group(fields, k):
    S = fields[0].index_set
    if S.rank != 2:
        raise DomainError(f"second-group laws need a rank-2 set, got {S}")
    n, upper = S.indices
    if k is not None and upper != n + k:
        raise DomainError(f"set {S} does not match gap k={k}")
    return n, upper - n


def _second_group_closures(n, k, mf_low, mf_high):
    closures = {n + k + 1: mf_high}
    if k == 1:
        if mf_low not in (None, "coordinate"):
            raise ConfigurationError("with k = 1 the lower velocity is the coordinate itself")
    else:
        if mf_low is None:
            raise ConfigurationError(f"missing input: mean of order {n + 1} on {{{n},{n + k}}}")
        closures[n + 1] = mf_low
    return closures


def mixed_covariance(f3: DistributionField, n: int, k: int) -> MomentTensorField:
    """Covariance of orders ``n+k`` (first index) and ``n+1`` from a field on ``{n, n+1, n+k}``."""
    return central_moment2(f3, n + k, n + 1)


def momentum_residual_second(
    fields,
    mf_low,
    mf_high,
    dt: float | None = None,
    k: int | None = None,
    mixed_tensor=None,
) -> ResidualReport:
    """Momentum law of ``{n, n+k}`` with both velocities supplied as mean fields.

    ``mixed_tensor`` (a tensor or pair from :func:`mixed_covariance`)
    replaces the covariance computed from ``mf_low``.  With ``k = 1`` the
    set is first-group and the evaluation coincides with the first-group law.
    """
    n, k = _second_group(fields, k)
    closures = _second_group_closures(n, k, mf_low, mf_high)
    overrides = {n: mixed_tensor} if mixed_tensor is not None else {}
    return moment_law_residual(fields, n + k, closures, dt, overrides, equation_id="momentum_mixed")


def energy_residual_second(fields, mf_low, mf_high, dt: float | None = None, k: int | None = None) -> ResidualReport:
    """Energy law of ``{n, n+k}``; reduces to the first-group law at ``k = 1``."""
    n, k = _second_group(fields, k)
    closures = _second_group_closures(n, k, mf_low, mf_high)
    return energy_law_residual(fields, n + k, closures, dt, equation_id="energy_mixed")


RANK3_LAWS = {
    "rank3_lower": ("contiguous", 0),
    "rank3_middle": ("contiguous", 1),
    "rank3_upper": ("contiguous", 2),
    "gapped_lower": ("gapped", 0),
    "gapped_middle": ("gapped", 1),
    "gapped_upper": ("gapped", 2),
}


def rank3_motion_residual(
    equation_id: str,
    fields,
    closures: Mapping,
    dt: float | None = None,
    tensors: Mapping | None = None,
) -> ResidualReport:
    """Motion law of a rank-3 set for the conditional mean of one of its orders.

    ``contiguous`` ids need ``{n, n+1, n+2}``, ``gapped`` ids need
    ``{n, n+1, n+1+k}`` (``k = 1`` makes it contiguous).  ``lower``,
    ``middle`` and ``upper`` select which order is averaged.
    """
    if equation_id not in RANK3_LAWS:
        raise ConfigurationError(f"unknown rank-3 law {equation_id!r}; choose from {sorted(RANK3_LAWS)}")
    family, position = RANK3_LAWS[equation_id]
    S = fields[0].index_set
    if S.rank != 3:
        raise DomainError(f"rank-3 laws need a rank-3 set, got {S}")
    n, second, third = S.indices
    if second != n + 1 or (family == "contiguous" and third != n + 2):
        raise DomainError(f"set {S} does not fit the {family} family")
    return moment_law_residual(fields, S.indices[position], closures, dt, tensors, equation_id=equation_id)


def divergence_identity_check(lam: int, fields, closure, dt: float | None = None) -> ResidualReport:
    """Pressure divergence against ``f [<next> - pi <current>]`` on ``{n, ..., n+1+lam}``.

    ``lhs = (1/f) div P`` of the top order, ``rhs = <xi^{top+1}> - pi <xi^top>``.
    """
    if lam < 0:
        raise ConfigurationError("lambda must be non-negative")
    S = fields[0].index_set
    if S.rank != lam + 2 or not S.is_contiguous():
        raise DomainError(f"identity row {lam} needs a contiguous set of rank {lam + 2}, got {S}")
    top = S.indices[-1]
    terms = _momentum_terms(fields, top, {top + 1: closure}, dt, {})
    warn_if_mostly_masked(terms.valid, "pressure_identity")
    return ResidualReport(
        "pressure_identity",
        terms.axes,
        terms.pressure,
        terms.source - terms.transport,
        terms.valid,
        terms.weight,
        terms.time,
    )


def implied_top_mean(fields, closures: Mapping | None = None, dt: float | None = None) -> MeanField:
    """Mean of the order above the top that makes the top-order law hold exactly.

    For a delta state whose covariances vanish this is ``pi <xi^top>``.
    """
    first = fields[0]
    top = first.top_order if isinstance(first, DeltaState) else first.index_set.indices[-1]
    closures = dict(closures or {})
    if top + 1 not in closures:
        # the source term does not enter the implied value; any placeholder works
        shape = grid_shape(first.axes)
        closures[top + 1] = np.zeros(shape + (first.axes[0].components,))
        if not isinstance(first, DeltaState):
            closures[top + 1] = MeanField.from_function(top + 1, first.axes, 0.0)
    terms = _momentum_terms(fields, top, closures, dt, {})
    values = terms.transport + terms.pressure
    base_axes = terms.axes
    return MeanField(top + 1, base_axes, values, terms.valid, terms.time, terms.weight)


def _parity_axis_check(f_values, axes, order):
    ax = axis_for(axes, order)
    for c in range(ax.components):
        if not ax.is_symmetric(c):
            raise ConfigurationError(
                f"parity test along order {order} needs a grid symmetric about 0, got [{ax.lo[c]}, {ax.hi[c]}]"
            )
    flipped = np.flip(f_values, axis=tuple(axis_dims(axes, order)))
    scale = float(np.max(np.abs(f_values))) or 1.0
    return float(np.max(np.abs(f_values - flipped))) / scale


def _lower_mean(state, order: int, keep) -> MeanField:
    """Mean of ``order`` conditioned on ``keep`` for gridded or delta states."""
    keep = as_index_set(keep)
    if isinstance(state, DeltaState):
        if order != state.top_order:
            f = state.base
            return mean_kinematic(f, order, f.index_set.difference(keep).difference([order]))
        return nested_average(state.map, state.base, state.base.index_set.difference(keep))
    return mean_kinematic(state, order, state.index_set.difference(keep).difference([order]))


def _weight_on(state, keep) -> DistributionField:
    keep = as_index_set(keep)
    f = state.base if isinstance(state, DeltaState) else state
    return marginalize(f, f.index_set.difference(keep))


def _pi_advection(state, keep, own: MeanField | None):
    """Advection of ``pi`` on the set ``keep``: next coordinate if kept, else its mean."""
    keep = as_index_set(keep)
    advection = {}
    for l in keep:
        if l + 1 in keep:
            advection[l] = "coordinate"
        elif own is not None and l + 1 == own.order:
            advection[l] = own
        else:
            advection[l] = _lower_mean(state, l + 1, keep)
    return advection


def theorem5_check(
    f,
    lam: int,
    top=None,
    later=None,
    dt: float | None = None,
    assume_constant_pressure: bool = False,
):
    """Parity test and the even-state identity ``<xi^{q+1}>_L = pi_L <xi^q>_L``.

    ``f`` holds the contiguous set ``{n, ..., n+1+lam}`` (a DeltaState counts
    its top order).  Evenness is tested in order ``n+lam``; ``q = n+1+lam``
    and ``L = {n, ..., n+lam-1}``.  ``top`` is the mean of order ``q+1`` on
    any base between ``L`` and the set of ``f``; ``later`` is a second
    snapshot for the time derivative (a single snapshot is taken as
    stationary).  Returns ``(verdict, report)``; ``report`` is None when the
    field is not even and ``assume_constant_pressure`` is False.
    """
    S = f.index_set
    if S.rank != lam + 2 or not S.is_contiguous():
        raise DomainError(f"parity identity row {lam} needs a contiguous set of rank {lam + 2}, got {S}")
    n = S.indices[0]
    parity_order, q = n + lam, n + 1 + lam
    lower = KinematicIndexSet(tuple(range(n, n + lam)))
    values = f.base.values if isinstance(f, DeltaState) else f.values
    axes = f.axes
    asymmetry = _parity_axis_check(values, axes, parity_order)
    even = asymmetry <= PARITY_RTOL
    verdict = "even" if even else "odd-component-detected"
    if not even and not assume_constant_pressure:
        return verdict, None
    if not even:
        verdict = "constant-pressure-assumed"
    if top is None:
        raise ConfigurationError(f"missing input: mean of order {q + 1} for the parity identity")

    snapshots = (f, later) if later is not None else (f, f)
    step = dt if dt is not None else (later.time - f.time if later is not None else 1.0)

    lhs_levels, pi_inputs, rec_inputs = [], [], []
    for which, state in enumerate(snapshots):
        top_mean = _pick(top, which)
        weight = _weight_on(state, top_mean.base_set)
        lhs_levels.append(nested_average(top_mean, weight, top_mean.base_set.difference(lower)))
        pi_inputs.append(_lower_mean(state, q, lower))
        rec_inputs.append(_lower_mean(state, q, lower.union([parity_order])))

    pi_adv = [_pi_advection(s, lower, m) for s, m in zip(snapshots, pi_inputs)]
    rhs, rhs_ok = apply_pi(tuple(pi_inputs), step, {l: (pi_adv[0][l], pi_adv[1][l]) for l in lower}, pi_inputs[0].axes)

    upper = lower.union([parity_order])
    rec_adv = [_pi_advection(s, upper, m) for s, m in zip(snapshots, rec_inputs)]
    inner, inner_ok = apply_pi(tuple(rec_inputs), step, {l: (rec_adv[0][l], rec_adv[1][l]) for l in upper}, rec_inputs[0].axes)
    inner_mean = MeanField(q + 1, rec_inputs[0].axes, inner, inner_ok, rec_inputs[0].time)
    reconstruction = nested_average(inner_mean, _weight_on(snapshots[0], upper), [parity_order])

    lhs = 0.5 * (lhs_levels[0].values + lhs_levels[1].values)
    valid = rhs_ok & lhs_levels[0].valid & lhs_levels[1].valid & reconstruction.valid
    weight = _weight_on(snapshots[0], lower).values
    report = ResidualReport("parity_identity", pi_inputs[0].axes, lhs, rhs, valid, weight, 0.5 * (snapshots[0].time + snapshots[1].time))
    recon_report = ResidualReport("parity_reconstruction", pi_inputs[0].axes, lhs, reconstruction.values, valid, weight, report.time)
    report.extras.update(
        asymmetry=asymmetry,
        reconstruction=reconstruction.values,
        reconstruction_norm=recon_report.residual_norm,
        reconstruction_max=recon_report.max_norm,
    )
    return verdict, report
