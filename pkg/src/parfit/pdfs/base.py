"""PdfNode: shared machinery for primitives and combinators.

A node evaluates its *raw* kernel on a list of column arrays ``cols`` (indexed
by event-table column) and the global parameter vector, looking both up via
the node's slot in the IndexTable. Column arrays only need to be mutually
broadcastable, which lets the same kernels run on event blocks, on
normalization grids and on 2-D convolution stencils.
"""

from __future__ import annotations

import itertools
from typing import Iterator, Sequence

import numpy as np

from ..errors import GraphError, WrongRole, ZeroIntegral
from ..variables import GridSpec, IndexTable, Variable

_node_ids = itertools.count()

# Upper bound on the number of grid points evaluated in one broadcast call.
_MAX_SLAB = 1 << 22


def _unique(variables: Sequence[Variable]) -> list[Variable]:
    seen = set()
    out = []
    for v in variables:
        if id(v) not in seen:
            seen.add(id(v))
            out.append(v)
    return out


def midpoints(v: Variable, n: int) -> tuple[np.ndarray, float]:
    width = (v.upper - v.lower) / n
    return v.lower + (np.arange(n) + 0.5) * width, width


class PdfNode:
    kind = "node"

    def __init__(self, name: str, observables=(), parameters=(), children=()):
        self.name = name
        self.node_id = next(_node_ids)
        self.own_observables: list[Variable] = list(observables)
        self.parameters: list[Variable] = list(parameters)
        self.children: list[PdfNode] = list(children)
        self.parent: PdfNode | None = None
        for v in self.own_observables:
            if v.is_parameter:
                raise WrongRole(f"{name}: {v.name} is a parameter, expected an observable")
        for p in self.parameters:
            if not p.is_parameter:
                raise WrongRole(f"{name}: {p.name} is an observable, expected a parameter")
        for c in self.children:
            if c.parent is not None:
                raise GraphError(f"node {c.name!r} already belongs to {c.parent.name!r}; the graph must be a tree")
            c.parent = self
        self._norm_cache: tuple[object, float] | None = None

    def __repr__(self):
        return f"{type(self).__name__}({self.name!r}, id={self.node_id})"

    @property
    def observables(self) -> list[Variable]:
        """Observables the normalized density is defined over."""
        return self.own_observables

    def internal_observables(self) -> list[Variable]:
        """Observables fed by other nodes rather than by the data set."""
        return []

    def walk(self) -> Iterator["PdfNode"]:
        yield self
        for c in self.children:
            yield from c.walk()

    def fingerprint(self) -> tuple:
        """Structural identity of the subtree (kinds, ids, variable ids)."""
        return (
            self.kind,
            self.node_id,
            tuple(id(p) for p in self.parameters),
            tuple(id(v) for v in self.own_observables),
            tuple(c.fingerprint() for c in self.children),
        )

    # -- evaluation -----------------------------------------------------------

    def raw(self, cols, params, table: IndexTable) -> np.ndarray:
        raise NotImplementedError

    def prepare(self, params, table: IndexTable):
        """Fill every cache the kernels read; call once before a parallel pass."""
        for c in self.children:
            c.prepare(params, table)
        self._prepare(params, table)

    def _prepare(self, params, table):
        pass

    def density(self, cols, params, table: IndexTable) -> np.ndarray:
        return self.raw(cols, params, table) / self.normalize(params, table)

    # -- normalization --------------------------------------------------------

    def normalize(self, params, table: IndexTable, grid: GridSpec | None = None) -> float:
        """Integral of ``raw`` over the observable box, cached per parameter vector."""
        grid = grid or table.grid
        params = np.asarray(params, dtype=np.float64)
        key = (params.tobytes(), grid)
        cached = self._norm_cache
        if cached is not None and cached[0] == key:
            return cached[1]
        value = float(self._integral(params, table, grid))
        if not (value > 0 and np.isfinite(value)):
            raise ZeroIntegral(f"{self.name}: normalization integral is {value}")
        self._norm_cache = (key, value)
        return value

    def _integral(self, params, table, grid: GridSpec) -> float:
        if grid.rule == "midpoint":
            return self.grid_sum(params, table, grid.points)
        coarse = self.grid_sum(params, table, grid.points)
        fine = self.grid_sum(params, table, 2 * grid.points)
        return (4.0 * fine - coarse) / 3.0

    def grid_sum(self, params, table: IndexTable, n: int) -> float:
        """Midpoint Riemann sum of ``raw`` with ``n`` points per observable."""
        columns = table.obs_columns(self.node_id)
        axes = []
        cell = 1.0
        for v in self.observables:
            pts, w = midpoints(v, n)
            axes.append(pts)
            cell *= w
        d = len(axes)
        if d == 0:
            raise GraphError(f"{self.name}: no observables to integrate over")
        cols: list = [None] * table.n_columns
        rest = n ** (d - 1)
        slab = max(1, _MAX_SLAB // rest)
        partials = []
        for start in range(0, n, slab):
            full_shape = []
            for k, (c, pts) in enumerate(zip(columns, axes)):
                if k == 0:
                    pts = pts[start : start + slab]
                shape = [1] * d
                shape[k] = len(pts)
                cols[c] = pts.reshape(shape)
                full_shape.append(len(pts))
            vals = np.broadcast_to(self.raw(cols, params, table), full_shape)
            partials.append(np.sum(vals))
        return float(np.sum(partials)) * cell


def standalone_table(node: PdfNode, grid: GridSpec | None = None):
    """Registry and index table for evaluating ``node`` without a data set."""
    from ..variables import ParameterRegistry, finalize

    registry = ParameterRegistry()
    table = finalize(registry, node, grid=grid)
    return registry, table


def raw_eval(node: PdfNode, event_row, params, table: IndexTable) -> float:
    """Raw kernel of ``node`` for a single event row (one value per column)."""
    row = np.asarray(event_row, dtype=np.float64)
    cols: list = [None] * table.n_columns
    for c in range(min(len(row), table.n_columns)):
        cols[c] = row[c : c + 1]
    params = np.asarray(params, dtype=np.float64)
    node.prepare(params, table)
    return float(np.asarray(node.raw(cols, params, table)).reshape(-1)[0])
