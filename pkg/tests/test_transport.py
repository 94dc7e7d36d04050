import math

import numpy as np
import pytest

from dispersion_chain import (
    Closure,
    ConfigurationError,
    DistributionField,
    DomainError,
    MeanField,
    StepSizeError,
    evolve,
    gaussian_field,
    make_grid,
    marginalize,
    oscillator_grid,
    rank3_oscillator_state,
    rotate_phase_point,
    step_rank1,
    step_rank2_first_group,
    step_rank2_second_group,
    step_rank3_first_group,
    wigner_oscillator,
)
from dispersion_chain.core import coordinate, coordinate_vector
from dispersion_chain.transport import advect_dimension, interpolate_lines


def rel_l2(a, b):
    return float(np.sqrt(np.sum((a - b) ** 2) / np.sum(b**2)))


def bump_field(points=201):
    axes = make_grid([(1, -5.0, 5.0, points)])
    x = coordinate(axes, 1)
    values = np.where(np.abs(x + 1.5) < 1.0, np.cos(0.5 * math.pi * (x + 1.5)) ** 4, 0.0)
    return DistributionField(axes, values)


class TestInterpolation:
    def test_cubic_reproduction(self):
        nodes = np.arange(10.0)
        values = nodes**3 - 2 * nodes
        pos = np.array([2.25, 4.5, 6.75])
        np.testing.assert_allclose(interpolate_lines(values, pos), pos**3 - 2 * pos, rtol=1e-13)

    def test_clamped_ends_repeat_edge_values(self):
        values = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        np.testing.assert_allclose(interpolate_lines(values, np.array([-3.0, 9.0]), clamp=True), [1.0, 5.0])
        np.testing.assert_array_equal(interpolate_lines(values, np.array([-3.0, 9.0])), [0.0, 0.0])

    def test_zero_velocity_is_exact_identity(self):
        values = np.random.default_rng(1).random((8, 9))
        out = advect_dimension(values, 1, 0.1, np.zeros((8, 9)), 0.3)
        np.testing.assert_array_equal(out, values)

    def test_integer_shift_is_exact(self):
        values = np.random.default_rng(2).random(20)
        values[:3] = values[-3:] = 0.0
        out = advect_dimension(values, 0, 0.5, np.full(20, 1.0), 1.0)
        np.testing.assert_array_equal(out[2:], values[:-2])
        assert out[0] == 0.0 and out[1] == 0.0

    def test_displacement_guard(self):
        with pytest.raises(StepSizeError):
            advect_dimension(np.ones(10), 0, 1.0, np.full(10, 4.0), 1.0)


class TestRank1:
    def test_zero_mean_is_identity(self):
        f = bump_field()
        g = step_rank1(f, MeanField.from_function(2, f.axes, 0.0), 0.1)
        np.testing.assert_array_equal(g.values, f.values)
        assert g.time == pytest.approx(0.1)

    def test_constant_mean_translates(self):
        f = bump_field(401)
        g = step_rank1(f, MeanField.from_function(2, f.axes, 0.7), 1.0)
        x = coordinate(f.axes, 1)
        exact = np.where(np.abs(x - 0.7 + 1.5) < 1.0, np.cos(0.5 * math.pi * (x - 0.7 + 1.5)) ** 4, 0.0)
        assert np.abs(g.values - exact).max() < 1e-5

    def test_mass_preserved_over_1000_steps(self):
        f = bump_field(201)
        x = coordinate(f.axes, 1)
        mf = MeanField.from_function(2, f.axes, 0.3 + 0.2 * np.sin(x))
        snaps = evolve(f, [mf], 0.005, 1000, stride=1000)
        assert abs(snaps[-1].total() - f.total()) <= 1e-6 * abs(f.total())

    def test_compressing_flow_matches_self_similar_gaussian(self):
        nu = 0.5
        errors = []
        for points in (201, 401, 801):
            axes = make_grid([(1, -10.0, 10.0, points)])
            f = gaussian_field(axes, {}, {1: 1.0})
            mf = MeanField.from_function(2, axes, -nu * coordinate(axes, 1))
            g = evolve(f, [mf], 0.01, 100, stride=100)[-1]
            exact = gaussian_field(axes, {}, {1: math.exp(-nu * 1.0)}, time=1.0)
            errors.append(rel_l2(g.values, exact.values))
        assert errors[-1] < 1e-4
        assert math.log2(errors[0] / errors[1]) > 1.8 and math.log2(errors[1] / errors[2]) > 1.8

    def test_rank_mismatch(self, params):
        f = wigner_oscillator(0, params, oscillator_grid(params, 16, 8))
        with pytest.raises(DomainError):
            step_rank1(f, 0.0, 0.1)

    def test_non_positive_dt(self):
        f = bump_field()
        with pytest.raises(ConfigurationError):
            step_rank1(f, 0.0, 0.0)


class TestRank2FirstGroup:
    def test_quarter_period_rotation(self, params):
        """Coherent state after a quarter period against the exact rotated state."""
        closure = Closure.moyal(params)
        errors = []
        for n, steps in ((64, 50), (128, 100)):
            axes = oscillator_grid(params, n, 8)
            x0 = 2 * params.sigma_x
            f = wigner_oscillator(0, params, axes, displacement=(x0, 0.0))
            t = 0.25 * params.period
            g = evolve(f, [closure], t / steps, steps, stride=steps)[-1]
            exact = wigner_oscillator(0, params, axes, displacement=rotate_phase_point(x0, 0.0, params.omega, t))
            errors.append(rel_l2(g.values, exact.values))
        assert errors[1] < 1e-2
        assert math.log2(errors[0] / errors[1]) > 1.8

    def test_zero_closure_free_streaming(self):
        """Position marginal spreads as sqrt(sx^2 + sv^2 t^2)."""
        errors = []
        for points in (121, 241):
            axes = make_grid([(1, -12.0, 12.0, points), (2, -6.0, 6.0, (points + 1) // 2)])
            f = gaussian_field(axes, {}, {1: 1.0, 2: 0.5})
            g = evolve(f, [Closure.zero(3, (1, 2))], 0.05, 40, stride=40)[-1]
            x = axes[0].nodes()
            sigma = math.sqrt(1.0 + (0.5 * g.time) ** 2)
            exact = np.exp(-0.5 * (x / sigma) ** 2) / (math.sqrt(2 * math.pi) * sigma)
            errors.append(np.abs(marginalize(g, [2]).values - exact).max())
        assert errors[1] < 2e-5
        assert errors[0] / errors[1] > 3.5

    def test_mass_preserved_over_1000_steps(self, params):
        axes = oscillator_grid(params, 64, 8)
        f = wigner_oscillator(0, params, axes, displacement=(params.sigma_x, 0.0))
        snaps = evolve(f, [Closure.moyal(params)], params.period / 1000, 1000, stride=1000)
        assert abs(snaps[-1].total() - f.total()) <= 1e-6

    def test_splitting_error_is_third_order_locally(self, params):
        """One step of dt against two steps of dt/2 on smooth data with a nonlinear closure."""
        closure = Closure.cold(3, (1, 2), lambda c, t: -np.sin(c[1]))
        axes = oscillator_grid(params, 256, 8)
        f = wigner_oscillator(0, params, axes, displacement=(0.5, 0.3))
        gaps = []
        for dt in (0.2, 0.1, 0.05):
            one = step_rank2_first_group(f, closure, dt)
            two = step_rank2_first_group(step_rank2_first_group(f, closure, dt / 2), closure, dt / 2)
            gaps.append(np.abs(one.values - two.values).max())
        assert math.log2(gaps[0] / gaps[1]) > 2.5 and math.log2(gaps[1] / gaps[2]) > 2.5

    def test_delta_state_base_is_carried_by_rotation(self, params):
        """The delta state's base is stationary under the rotation its map generates."""
        axes = oscillator_grid(params, 128, 8)
        state = rank3_oscillator_state(1, params, axes)
        g = evolve(state.base, [Closure.moyal(params)], params.period / 400, 100, stride=100)[-1]
        assert rel_l2(g.values, state.base.values) < 1e-2

    def test_closure_target_checked(self, params):
        axes = oscillator_grid(params, 16, 8)
        with pytest.raises(ConfigurationError):
            step_rank2_first_group(wigner_oscillator(0, params, axes), Closure.zero(4, (1, 2, 3)), 0.1)


class TestRank2SecondGroup:
    def _axes(self, n):
        return make_grid([(1, -8.0, 8.0, n), (3, -8.0, 8.0, n)])

    def test_zero_fields_identity(self):
        axes = self._axes(32)
        f = gaussian_field(axes, {}, {1: 1.0, 3: 1.0})
        g = step_rank2_second_group(f, MeanField.from_function(2, axes, 0.0), MeanField.from_function(4, axes, 0.0), 0.1)
        np.testing.assert_array_equal(g.values, f.values)

    def test_constant_fields_translate(self):
        axes = self._axes(161)
        f = gaussian_field(axes, {}, {1: 1.0, 3: 1.0})
        g = step_rank2_second_group(f, MeanField.from_function(2, axes, 0.5), MeanField.from_function(4, axes, -0.25), 1.0)
        exact = gaussian_field(axes, {1: 0.5, 3: -0.25}, {1: 1.0, 3: 1.0})
        assert np.abs(g.values - exact.values).max() < 1e-5

    def test_rotation_pair_mass_drift_per_period(self):
        axes = self._axes(256)
        f = gaussian_field(axes, {1: 1.5}, {1: 1.0, 3: 0.8})
        low = MeanField(2, axes, coordinate_vector(axes, 3), True)
        high = MeanField(4, axes, -coordinate_vector(axes, 1), True)
        g = evolve(f, [low, high], 2 * math.pi / 500, 500, stride=500)[-1]
        assert abs(g.total() - f.total()) < 1e-5
        assert rel_l2(g.values, f.values) < 1e-2

    def test_requires_gapped_set(self, params):
        axes = oscillator_grid(params, 16, 8)
        with pytest.raises(DomainError):
            step_rank2_second_group(wigner_oscillator(0, params, axes), 0.0, 0.0, 0.1)


class TestRank3:
    def _axes(self, n, width=1.0):
        return make_grid([(1, -8.0, 8.0, n), (2, -8.0, 8.0, n), (3, -5 * width, 5 * width, 33)])

    def test_zero_everything_identity(self):
        axes = make_grid([(1, -4.0, 4.0, 16), (2, -1e-9, 1e-9, 3), (3, -1e-9, 1e-9, 3)])
        values = np.zeros((16, 3, 3))
        values[:, 1, 1] = np.exp(-coordinate(axes, 1)[:, 0, 0] ** 2)
        f = DistributionField(axes, values)
        g = step_rank3_first_group(f, Closure.zero(4, (1, 2, 3)), 0.1)
        np.testing.assert_array_equal(g.values, f.values)

    def test_narrow_top_order_decouples(self):
        """With the top order concentrated at 0, the rank-2 marginal follows the zero-closure step."""
        gaps = []
        for width in (0.02, 0.01):
            axes = self._axes(64, width)
            f = gaussian_field(axes, {1: 1.0}, {1: 1.0, 2: 1.0, 3: width})
            g3 = evolve(f, [Closure.zero(4, (1, 2, 3))], 0.05, 10, stride=10)[-1]
            f2 = marginalize(f, [3])
            g2 = evolve(f2, [Closure.zero(3, (1, 2))], 0.05, 10, stride=10)[-1]
            gaps.append(np.abs(marginalize(g3, [3]).values - g2.values).max())
        assert gaps[1] < 1e-5
        assert gaps[0] / gaps[1] > 2.0

    def test_requires_contiguous_rank3(self):
        axes = make_grid([(1, -1.0, 1.0, 4), (2, -1.0, 1.0, 4), (4, -1.0, 1.0, 4)])
        with pytest.raises(DomainError):
            step_rank3_first_group(DistributionField(axes, np.ones((4, 4, 4))), Closure.zero(5, (1, 2, 4)), 0.1)


def test_evolve_snapshot_stride(params):
    axes = oscillator_grid(params, 16, 8)
    f = wigner_oscillator(0, params, axes)
    snaps = evolve(f, [Closure.moyal(params)], 0.01, 10, stride=5)
    assert [round(s.time, 12) for s in snaps] == [0.0, 0.05, 0.1]
    with pytest.raises(ConfigurationError):
        evolve(f, [Closure.moyal(params)], 0.01, 10, stride=0)
