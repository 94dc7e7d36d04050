"""Exact Gaussian solutions of a linear chain, used as manufactured data.

The state ``(xi^1, ..., xi^D)`` obeys ``d xi^s/dt = xi^{s+1}`` for ``s < D``
and ``d xi^D/dt = c . xi``.  A Gaussian stays Gaussian, so every marginal
and conditional mean is available in closed form at any time.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import expm

from dispersion_chain import DistributionField, MeanField
from dispersion_chain.core import coordinate, grid_shape


class LinearGaussianChain:
    def __init__(self, top_row, mean0, cov0):
        self.dim = len(top_row)
        gen = np.zeros((self.dim, self.dim))
        gen[np.arange(self.dim - 1), np.arange(1, self.dim)] = 1.0
        gen[-1] = top_row
        self.generator = gen
        self.top_row = np.asarray(top_row, dtype=float)
        self.mean0 = np.asarray(mean0, dtype=float)
        self.cov0 = np.asarray(cov0, dtype=float)

    def moments(self, t):
        flow = expm(self.generator * t)
        return flow @ self.mean0, flow @ self.cov0 @ flow.T

    @staticmethod
    def _positions(axes):
        return [ax.kinematic_index - 1 for ax in axes]

    def _centred(self, axes, mean, keep):
        shape = grid_shape(axes)
        return [np.broadcast_to(coordinate(axes, ax.kinematic_index), shape) - mean[k] for ax, k in zip(axes, keep)]

    def density(self, axes, t):
        mean, cov = self.moments(t)
        keep = self._positions(axes)
        sub = cov[np.ix_(keep, keep)]
        prec = np.linalg.inv(sub)
        d = self._centred(axes, mean, keep)
        quad = sum(prec[i, j] * d[i] * d[j] for i in range(len(keep)) for j in range(len(keep)))
        norm = 1.0 / np.sqrt((2 * np.pi) ** len(keep) * np.linalg.det(sub))
        return DistributionField(tuple(axes), norm * np.exp(-0.5 * quad), t)

    def _regression(self, axes, t):
        """Conditional mean of the full state given the coordinates on ``axes``."""
        mean, cov = self.moments(t)
        keep = self._positions(axes)
        gain = cov[:, keep] @ np.linalg.inv(cov[np.ix_(keep, keep)])
        d = self._centred(axes, mean, keep)
        return [mean[r] + sum(gain[r, j] * d[j] for j in range(len(keep))) for r in range(self.dim)]

    def mean(self, order, axes, t):
        """``<xi^order>`` conditioned on the orders of ``axes`` (order D+1 uses the top row)."""
        state = self._regression(axes, t)
        if order <= self.dim:
            values = state[order - 1]
        else:
            values = sum(c * s for c, s in zip(self.top_row, state))
        return MeanField.from_function(order, axes, values, time=t)
