import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import random_positive_field
from dispersion_chain import (
    AxisGrid,
    ConfigurationError,
    DistributionField,
    DomainError,
    KinematicIndexSet,
    MeanField,
    cold_state,
    make_grid,
    marginalize,
    mean_kinematic,
    moyal_closure,
    nested_average,
    oscillator_grid,
    wigner_oscillator,
)
from dispersion_chain.core import as_index_set, coordinate, expand_to, zero_mask


class TestIndexSet:
    def test_rank_and_order(self):
        s = KinematicIndexSet.of(1, 2, 4)
        assert s.rank == 3 and 2 in s and 3 not in s
        assert str(s) == "{1,2,4}"
        assert not s.is_contiguous()
        assert KinematicIndexSet.of(2, 3).is_contiguous()

    def test_set_algebra(self):
        s = KinematicIndexSet.of(1, 2, 3)
        assert s.difference([2]) == KinematicIndexSet.of(1, 3)
        assert KinematicIndexSet.of(1).union([3]) == KinematicIndexSet.of(1, 3)
        assert KinematicIndexSet.of(1, 3).issubset(s)
        assert KinematicIndexSet(()).rank == 0

    @pytest.mark.parametrize("bad", [(2, 1), (1, 1), (0, 1)])
    def test_invalid(self, bad):
        with pytest.raises(ConfigurationError):
            KinematicIndexSet(bad)

    def test_as_index_set_accepts_ints(self):
        assert as_index_set(2) == KinematicIndexSet.of(2)


class TestGrid:
    def test_two_point_spacing(self):
        (ax,) = make_grid([(1, 0.0, 1.0, 2)])
        assert ax.spacing == (1.0,)

    def test_quarter_spacing(self):
        (ax,) = make_grid([(1, -8.0, 8.0, 65)])
        assert ax.spacing == (0.25,)
        assert ax.nodes()[0] == -8.0 and ax.nodes()[-1] == 8.0

    def test_degenerate_axis(self):
        with pytest.raises(ConfigurationError, match="degenerate axis"):
            make_grid([(1, 1.0, 1.0, 10)])

    def test_non_monotone(self):
        with pytest.raises(ConfigurationError, match="non-monotone"):
            make_grid([(1, 2.0, 1.0, 10)])

    def test_too_few_points(self):
        with pytest.raises(ConfigurationError):
            make_grid([(1, 0.0, 1.0, 1)])

    def test_axes_must_ascend(self):
        with pytest.raises(ConfigurationError):
            make_grid([(2, 0.0, 1.0, 4), (1, 0.0, 1.0, 4)])

    def test_dict_round_trip(self):
        ax = AxisGrid(2, (-1.0, -2.0), (1.0, 2.0), (5, 7))
        assert AxisGrid.from_dict(ax.to_dict()) == ax
        assert ax.shape == (5, 7)

    def test_trapezoid_weights_integrate_linear_exactly(self):
        (ax,) = make_grid([(1, -1.0, 3.0, 9)])
        assert np.dot(ax.weights(), ax.nodes()) == pytest.approx(4.0, abs=1e-14)


class TestMarginalize:
    def test_constant_unit_box(self):
        axes = make_grid([(1, 0.0, 1.0, 11), (2, 0.0, 1.0, 13)])
        f = DistributionField(axes, np.ones((11, 13)))
        g = marginalize(f, [2])
        assert g.index_set == KinematicIndexSet.of(1)
        np.testing.assert_allclose(g.values, 1.0, rtol=0, atol=1e-14)

    def test_ground_state_position_marginal(self, params):
        axes = oscillator_grid(params, 128, 8)
        f = wigner_oscillator(0, params, axes, time=0.5)
        g = marginalize(f, [2])
        x = axes[0].nodes()
        sx2 = params.hbar / (2 * params.mass * params.omega)
        expected = np.exp(-(x**2) / (2 * sx2)) / math.sqrt(2 * math.pi * sx2)
        assert g.time == 0.5
        np.testing.assert_allclose(g.values, expected, rtol=0, atol=1e-12)

    def test_rank3_ordering_independent(self, rng):
        f = random_positive_field(rng, (1, 2, 3), (9, 10, 11))
        a = marginalize(marginalize(f, [2]), [3])
        b = marginalize(marginalize(f, [3]), [2])
        c = marginalize(f, [2, 3])
        scale = np.abs(c.values).max()
        assert np.abs(a.values - b.values).max() <= 1e-12 * scale
        assert np.abs(a.values - c.values).max() <= 1e-12 * scale

    def test_total_mass_consistent_across_ranks(self, rng):
        f = random_positive_field(rng, (1, 2, 3), (8, 9, 10))
        totals = [f.total(), marginalize(f, [1]).total(), marginalize(f, [1, 3]).total()]
        assert max(totals) - min(totals) <= 1e-10 * abs(totals[0])
        assert marginalize(f, [1, 2, 3]).rank == 0

    def test_drop_must_be_subset(self, rng):
        f = random_positive_field(rng)
        with pytest.raises(DomainError):
            marginalize(f, [3])

    @settings(max_examples=25, deadline=None)
    @given(st.lists(st.integers(3, 7), min_size=3, max_size=3), st.permutations([1, 2, 3]), st.integers(0, 2**31))
    def test_path_independence_property(self, points, order, seed):
        f = random_positive_field(np.random.default_rng(seed), (1, 2, 3), points)
        stepwise = f
        for k in order[:2]:
            stepwise = marginalize(stepwise, [k])
        direct = marginalize(f, order[:2])
        scale = np.abs(direct.values).max()
        assert np.abs(stepwise.values - direct.values).max() <= 1e-12 * scale


class TestMeans:
    def test_ground_state_mean_velocity_zero(self, params):
        axes = oscillator_grid(params, 64, 8)
        m = mean_kinematic(wigner_oscillator(0, params, axes), 2)
        assert m.base_set == KinematicIndexSet.of(1)
        assert np.abs(m.values[m.valid]).max() < 1e-14

    def test_shifted_gaussian_velocity(self):
        axes = make_grid([(1, -2.0, 2.0, 21), (2, -7.0, 8.4, 301)])
        x, v = coordinate(axes, 1), coordinate(axes, 2)
        values = (1 + 0.5 * np.cos(x)) * np.exp(-0.5 * (v - 0.7) ** 2)
        m = mean_kinematic(DistributionField(axes, np.broadcast_to(values, (21, 301))), 2)
        # brute-force quadrature oracle of the same ratio
        vv = axes[1].nodes()
        ratio = np.trapezoid(vv * np.exp(-0.5 * (vv - 0.7) ** 2), vv) / np.trapezoid(np.exp(-0.5 * (vv - 0.7) ** 2), vv)
        np.testing.assert_allclose(m.values[..., 0], ratio, rtol=1e-13)
        assert ratio == pytest.approx(0.7, abs=1e-10)

    def test_cold_state_mean_is_velocity_field(self):
        axes = make_grid([(1, -3.0, 3.0, 41)])
        rho = DistributionField(axes, np.exp(-coordinate(axes, 1) ** 2))
        state = cold_state(rho, lambda x: np.sin(x))
        np.testing.assert_array_equal(state.top_mean().values, np.sin(coordinate(axes, 1))[..., None])

    def test_mean_outside_index_set(self, rng):
        with pytest.raises(DomainError):
            mean_kinematic(random_positive_field(rng), 3)

    def test_masked_cells_stay_finite(self):
        axes = make_grid([(1, 0.0, 1.0, 5), (2, -1.0, 1.0, 5)])
        values = np.ones((5, 5))
        values[0] = 0.0
        m = mean_kinematic(DistributionField(axes, values), 2)
        assert not m.valid[0] and m.valid[1:].all()
        assert np.all(np.isfinite(m.values))
        assert m.values[0, 0] == 0.0

    def test_zero_mask_threshold(self):
        mask = zero_mask(np.array([1.0, 1e-15, 2e-14, -1.0]))
        assert mask.tolist() == [True, False, True, True]


class TestNestedAverage:
    def test_constant_mean_is_preserved(self, rng):
        f = random_positive_field(rng)
        mf = MeanField.from_function(3, f.axes, 2.5)
        avg = nested_average(mf, f, [2])
        np.testing.assert_allclose(avg.values, 2.5, rtol=1e-14)

    def test_stationary_velocity_double_average(self, params):
        axes = oscillator_grid(params, 64, 8)
        f = wigner_oscillator(0, params, axes)
        m = mean_kinematic(f, 2)
        assert abs(float(nested_average(m, marginalize(f, [2]), [1]).values[0])) < 1e-15

    def test_moyal_closure_average_over_velocity(self, params):
        axes = oscillator_grid(params, 64, 8)
        f = wigner_oscillator(0, params, axes)
        avg = nested_average(moyal_closure(f, params), f, [2])
        np.testing.assert_allclose(avg.values[..., 0], -params.omega**2 * axes[0].nodes(), rtol=1e-13, atol=1e-14)

    def test_associativity(self, rng):
        f = random_positive_field(rng, (1, 2, 3), (9, 10, 11))
        inner = mean_kinematic(f, 3)
        chained = nested_average(inner, marginalize(f, [3]), [2])
        direct = mean_kinematic(f, 3, [2])
        np.testing.assert_allclose(chained.values, direct.values, rtol=1e-10, atol=1e-12)

    def test_grid_mismatch(self, rng):
        f = random_positive_field(rng)
        g = random_positive_field(rng)
        with pytest.raises(DomainError):
            nested_average(MeanField.from_function(3, f.axes, 1.0), g, [2])


def test_expand_to_broadcasts_base_values(rng):
    f = random_positive_field(rng, (1, 2, 3), (4, 5, 6))
    base = marginalize(f, [2])
    expanded = expand_to(base.values, base.axes, f.axes)
    assert expanded.shape == (4, 1, 6)


def test_field_values_are_read_only(rng):
    f = random_positive_field(rng)
    with pytest.raises(ValueError):
        f.values[0, 0] = 1.0


def test_field_rejects_non_finite():
    axes = make_grid([(1, 0.0, 1.0, 3)])
    with pytest.raises(ConfigurationError):
        DistributionField(axes, np.array([0.0, np.nan, 1.0]))
