import re

import numpy as np
import pytest

from dispersion_chain import DistributionField, PhysicalParams, make_grid


@pytest.fixture
def params():
    return PhysicalParams.harmonic(mass=1.0, hbar=1.0, omega=1.0)


def random_positive_field(rng, orders=(1, 2), points=(17, 19), components=1, time=0.0):
    """Smooth, strictly positive field with correlated axes and random shape."""
    specs = []
    for order, n in zip(orders, points):
        lo = -3.0 - rng.random()
        hi = 3.0 + rng.random()
        specs.append({"index": order, "min": [lo] * components, "max": [hi] * components, "points": [n] * components})
    axes = make_grid(specs)
    grids = np.meshgrid(*[ax.nodes(c) for ax in axes for c in range(ax.components)], indexing="ij")
    exponent = np.zeros(grids[0].shape)
    for i, g in enumerate(grids):
        exponent -= 0.5 * ((g - rng.normal(scale=0.5)) / rng.uniform(0.8, 1.5)) ** 2
        for j in range(i):
            exponent += rng.uniform(-0.3, 0.3) * g * grids[j]
    values = np.exp(exponent) * (1.2 + np.sin(rng.uniform(0.5, 1.5) * grids[0] + rng.uniform(0, 6)))
    return DistributionField(axes, values, time)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_configure(config):
    config._acceptance_lines = []


def _criterion_number(line):
    found = re.search(r"\d+", line)
    return (int(found.group()) if found else 0, line)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=_criterion_number):
            terminalreporter.write_line(line)
