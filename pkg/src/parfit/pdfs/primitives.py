"""One-dimensional primitive kernels."""

from __future__ import annotations

import threading

import numpy as np

from ..errors import DomainError, GraphError
from ..variables import Variable
from .base import PdfNode


class ExpPdf(PdfNode):
    """raw(x) = exp(alpha * x)."""

    kind = "exp"

    def __init__(self, name: str, x: Variable, alpha: Variable):
        super().__init__(name, [x], [alpha])

    def raw(self, cols, params, table):
        p = table.param_indices(self.node_id)
        x = cols[table.obs_columns(self.node_id)[0]]
        alpha = params[p[0]]
        return np.exp(alpha * x)


class GaussianPdf(PdfNode):
    """Unnormalized Gaussian with peak value 1."""

    kind = "gaussian"

    def __init__(self, name: str, x: Variable, mean: Variable, sigma: Variable):
        if not sigma.lower > 0:
            raise GraphError(f"{name}: sigma limits must exclude 0, got lower={sigma.lower}")
        super().__init__(name, [x], [mean, sigma])

    def raw(self, cols, params, table):
        p = table.param_indices(self.node_id)
        x = cols[table.obs_columns(self.node_id)[0]]
        mean = params[p[0]]
        sigma = params[p[1]]
        if not sigma > 0:
            raise DomainError(f"{self.name}: sigma = {sigma}")
        return np.exp(-0.5 * (x - mean) * (x - mean) / (sigma * sigma))


class BreitWignerPdf(PdfNode):
    """Relativistic s-wave shape: 1 / ((x^2 - m^2)^2 + m^2 * width^2).

    Near the pole this is a Lorentzian in x with full width at half maximum
    ``width`` (for width << m).
    """

    kind = "breit_wigner"

    def __init__(self, name: str, x: Variable, mass: Variable, width: Variable):
        if not width.lower > 0:
            raise GraphError(f"{name}: width limits must exclude 0, got lower={width.lower}")
        super().__init__(name, [x], [mass, width])

    def raw(self, cols, params, table):
        p = table.param_indices(self.node_id)
        x = cols[table.obs_columns(self.node_id)[0]]
        m = params[p[0]]
        g = params[p[1]]
        if not g > 0:
            raise DomainError(f"{self.name}: width = {g}")
        d = x * x - m * m
        return 1.0 / (d * d + m * m * g * g)


class PolynomialPdf(PdfNode):
    """raw(x) = max(0, sum_i c_i x**i), evaluated by Horner's rule.

    ``clamp_count`` accumulates the number of points where the polynomial was
    negative and got clamped to zero.
    """

    kind = "polynomial"

    def __init__(self, name: str, x: Variable, coeffs):
        coeffs = list(coeffs)
        if not coeffs:
            raise GraphError(f"{name}: polynomial needs at least one coefficient")
        super().__init__(name, [x], coeffs)
        self.clamp_count = 0
        self._lock = threading.Lock()

    def raw(self, cols, params, table):
        p = table.param_indices(self.node_id)
        x = cols[table.obs_columns(self.node_id)[0]]
        r = np.full(np.shape(x), params[p[-1]])
        for i in reversed(p[:-1]):
            r = r * x + params[i]
        neg = r < 0
        if neg.any():
            with self._lock:
                self.clamp_count += int(np.count_nonzero(neg))
            r = np.where(neg, 0.0, r)
        return r
