"""Combinators: product, sum, composition, piecewise mapping, convolution.

All of them are PdfNodes themselves, so they nest to any depth.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from ..errors import DimensionMismatch, DomainError, GraphError
from ..variables import Variable
from .base import PdfNode, _unique, midpoints

# Convolution stencils are evaluated this many output points at a time.
_CONV_BLOCK = 2048


class ProdPdf(PdfNode):
    kind = "product"

    def __init__(self, name: str, children: Sequence[PdfNode]):
        children = list(children)
        if len(children) < 2:
            raise GraphError(f"{name}: a product needs at least 2 children")
        obs = _unique([v for c in children for v in c.observables])
        super().__init__(name, obs, [], children)

    def raw(self, cols, params, table):
        out = self.children[0].raw(cols, params, table)
        for c in self.children[1:]:
            out = out * c.raw(cols, params, table)
        return out

    def _disjoint(self) -> bool:
        seen = set()
        for c in self.children:
            ids = {id(v) for v in c.observables}
            if ids & seen:
                return False
            seen |= ids
        return True

    def _integral(self, params, table, grid):
        # Over a box that is a product of the children's boxes the midpoint sum
        # factorizes, so there is no need to build the joint grid.
        if self._disjoint():
            out = 1.0
            for c in self.children:
                out *= c.normalize(params, table, grid)
            return out
        return super()._integral(params, table, grid)


class AddPdf(PdfNode):
    """f_0*pdf_0 + ... + f_{n-2}*pdf_{n-2} + (1 - sum f)*pdf_{n-1}, children normalized.

    Normalized by construction; a fraction sum above 1 is a domain error.
    """

    kind = "sum"

    def __init__(self, name: str, children: Sequence[PdfNode], fractions: Sequence[Variable]):
        children = list(children)
        fractions = list(fractions)
        if len(children) < 2:
            raise GraphError(f"{name}: a sum needs at least 2 children")
        if len(fractions) != len(children) - 1:
            raise GraphError(f"{name}: {len(children)} children need {len(children) - 1} fractions, got {len(fractions)}")
        for f in fractions:
            if f.lower < 0 or f.upper > 1:
                raise GraphError(f"{name}: fraction {f.name} limits must lie within [0, 1]")
        obs = children[0].observables
        for c in children[1:]:
            if {id(v) for v in c.observables} != {id(v) for v in obs}:
                raise GraphError(f"{name}: all children must share the same observables")
        super().__init__(name, obs, fractions, children)

    def weights(self, params, table) -> list[float]:
        f = [params[i] for i in table.param_indices(self.node_id)]
        total = sum(f)
        if total > 1:
            raise DomainError(f"{self.name}: fractions sum to {total} > 1")
        return f + [1.0 - total]

    def _prepare(self, params, table):
        for c in self.children:
            c.normalize(params, table)

    def raw(self, cols, params, table):
        w = self.weights(params, table)
        out = None
        for wi, c in zip(w, self.children):
            term = wi * (c.raw(cols, params, table) / c.normalize(params, table))
            out = term if out is None else out + term
        return out

    def _integral(self, params, table, grid):
        return 1.0


class CompositePdf(PdfNode):
    """raw(x) = outer.raw(inner.raw(x)); renormalized numerically."""

    kind = "composite"

    def __init__(self, name: str, outer: PdfNode, inner: PdfNode):
        if len(outer.observables) != 1:
            raise GraphError(f"{name}: outer function must have exactly one observable, has {len(outer.observables)}")
        super().__init__(name, inner.observables, [], [outer, inner])

    @property
    def outer(self) -> PdfNode:
        return self.children[0]

    @property
    def inner(self) -> PdfNode:
        return self.children[1]

    def internal_observables(self):
        inner_ids = {id(v) for v in self.inner.observables}
        return [v for v in self.outer.observables if id(v) not in inner_ids]

    def raw(self, cols, params, table):
        g = self.inner.raw(cols, params, table)
        c = table.obs_columns(self.outer.node_id)[0]
        sub = list(cols)
        sub[c] = g
        return self.outer.raw(sub, params, table)


class MappedPdf(PdfNode):
    """Piecewise PDF: targets[i] on [b_i, b_{i+1}), last interval closed.

    Boundaries may be Variables (fit parameters) or plain numbers.
    """

    kind = "mapped"

    def __init__(self, name: str, boundaries: Sequence[Variable | float], targets: Sequence[PdfNode]):
        boundaries = list(boundaries)
        targets = list(targets)
        if len(boundaries) != len(targets) + 1:
            raise GraphError(f"{name}: {len(targets)} targets need {len(targets) + 1} boundaries, got {len(boundaries)}")
        x = targets[0].observables
        if len(x) != 1:
            raise GraphError(f"{name}: targets must be one-dimensional")
        for t in targets[1:]:
            if len(t.observables) != 1 or t.observables[0] is not x[0]:
                raise GraphError(f"{name}: all targets must share the observable {x[0].name!r}")
        consts = [float(b) for b in boundaries if not isinstance(b, Variable)]
        if len(consts) == len(boundaries) and np.any(np.diff(consts) <= 0):
            raise GraphError(f"{name}: boundaries must be strictly increasing")
        self.boundaries = boundaries
        super().__init__(name, x, [b for b in boundaries if isinstance(b, Variable)], targets)

    def boundary_values(self, params, table) -> np.ndarray:
        p = iter(table.param_indices(self.node_id))
        vals = np.array([params[next(p)] if isinstance(b, Variable) else float(b) for b in self.boundaries])
        if np.any(np.diff(vals) <= 0):
            raise DomainError(f"{self.name}: boundaries not strictly increasing: {vals}")
        return vals

    def _integral(self, params, table, grid):
        # One grid per region: a grid straddling a jump is only first-order accurate.
        b = self.boundary_values(params, table)
        x = self.observables[0]
        if b[0] < x.lower or b[-1] > x.upper:
            raise DomainError(f"{self.name}: boundaries {b} leave the range of {x.name!r}")
        col = table.obs_columns(self.node_id)[0]
        cols: list = [None] * table.n_columns

        def region_sum(t, lo, hi, n):
            w = (hi - lo) / n
            cols[col] = lo + (np.arange(n) + 0.5) * w
            return float(np.sum(np.broadcast_to(t.raw(cols, params, table), (n,)))) * w

        total = 0.0
        for t, lo, hi in zip(self.children, b[:-1], b[1:]):
            coarse = region_sum(t, lo, hi, grid.points)
            if grid.rule == "midpoint":
                total += coarse
            else:
                total += (4.0 * region_sum(t, lo, hi, 2 * grid.points) - coarse) / 3.0
        return total

    def raw(self, cols, params, table):
        b = self.boundary_values(params, table)
        x = cols[table.obs_columns(self.node_id)[0]]
        if np.any(x < b[0]) or np.any(x > b[-1]):
            raise DomainError(f"{self.name}: observable outside [{b[0]}, {b[-1]}]")
        region = np.searchsorted(b, x, side="right") - 1
        region = np.minimum(region, len(self.children) - 1)
        out = np.zeros(np.shape(x))
        for i, t in enumerate(self.children):
            out = np.where(region == i, t.raw(cols, params, table), out)
        return out


class ConvolutionPdf(PdfNode):
    """raw(x) = integral of model.raw(t) * resolution.raw(x - t) dt.

    The integral runs over the model observable's full range with a midpoint
    rule of ``grid.points`` nodes. The resolution is read at the shifted
    argument, so it should be centred on zero.
    """

    kind = "convolution"

    def __init__(self, name: str, model: PdfNode, resolution: PdfNode):
        mo, ro = model.observables, resolution.observables
        if len(mo) != 1 or len(ro) != 1 or mo[0] is not ro[0]:
            raise DimensionMismatch(f"{name}: model and resolution must be one-dimensional in the same observable")
        super().__init__(name, mo, [], [model, resolution])
        self._model_cache = None

    @property
    def model(self) -> PdfNode:
        return self.children[0]

    @property
    def resolution(self) -> PdfNode:
        return self.children[1]

    def _model_on_grid(self, params, table):
        params = np.asarray(params, dtype=np.float64)
        key = (params.tobytes(), table.grid.points)
        cached = self._model_cache
        if cached is not None and cached[0] == key:
            return cached[1]
        tau, dtau = midpoints(self.observables[0], table.grid.points)
        cols = [None] * table.n_columns
        cols[table.obs_columns(self.node_id)[0]] = tau
        m = np.broadcast_to(self.model.raw(cols, params, table), tau.shape)
        value = (tau, m * dtau)
        self._model_cache = (key, value)
        return value

    def _prepare(self, params, table):
        self._model_on_grid(params, table)

    def raw(self, cols, params, table):
        tau, weights = self._model_on_grid(params, table)
        c = table.obs_columns(self.node_id)[0]
        x = np.asarray(cols[c])
        flat = x.ravel()
        out = np.empty(flat.shape)
        sub = list(cols)
        for s in range(0, len(flat), _CONV_BLOCK):
            xs = flat[s : s + _CONV_BLOCK]
            sub[c] = xs[:, None] - tau[None, :]
            r = np.broadcast_to(self.resolution.raw(sub, params, table), sub[c].shape)
            out[s : s + _CONV_BLOCK] = np.sum(r * weights, axis=1)
        return out.reshape(x.shape)
