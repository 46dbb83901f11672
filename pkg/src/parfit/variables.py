"""Variables, the parameter registry and the flattened index table.

Every PDF node reads its parameters and observables through an integer slot
array instead of holding references to them::

    slot = [n_params, p_0, ..., p_{n-1}, n_obs, c_0, ..., c_{m-1}]

``p_k`` indexes the global parameter vector and ``c_k`` indexes a column of
the event table, so a kernel reads ``params[slot[1 + k]]`` and
``cols[slot[2 + n_params + k]]``.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from types import MappingProxyType
from typing import TYPE_CHECKING, Iterable, Mapping, Sequence

import numpy as np

from .errors import (
    InvalidRange,
    InvalidStep,
    NameCollision,
    OutOfRange,
    UnboundObservable,
    WrongRole,
)

if TYPE_CHECKING:
    from .pdfs.base import PdfNode


class Role(enum.Enum):
    OBSERVABLE = "observable"
    PARAMETER = "parameter"


@dataclass(eq=False)
class Variable:
    """A named scalar: either an observable with a range or a fit parameter.

    Variables compare by identity; two distinct objects with the same name are
    different variables (and registering both is an error).
    """

    name: str
    value: float
    lower: float
    upper: float
    step: float = 0.0
    role: Role = Role.OBSERVABLE
    fixed: bool = False
    error: float | None = None

    def __post_init__(self):
        self.value = float(self.value)
        self.lower = float(self.lower)
        self.upper = float(self.upper)
        self.step = float(self.step)
        if not self.lower < self.upper:
            raise InvalidRange(f"{self.name}: need lower < upper, got [{self.lower}, {self.upper}]")
        if not self.lower <= self.value <= self.upper:
            raise InvalidRange(f"{self.name}: value {self.value} outside [{self.lower}, {self.upper}]")
        if self.role is Role.PARAMETER and not self.step > 0:
            raise InvalidStep(f"{self.name}: step must be > 0, got {self.step}")
        if self.role is Role.OBSERVABLE and self.step != 0:
            raise InvalidStep(f"{self.name}: observables carry step 0")

    @property
    def is_parameter(self) -> bool:
        return self.role is Role.PARAMETER

    def __repr__(self):
        return f"Variable({self.name!r}, {self.role.value}, value={self.value}, [{self.lower}, {self.upper}])"


def new_observable(name: str, lower: float, upper: float) -> Variable:
    return Variable(name, lower, lower, upper, 0.0, Role.OBSERVABLE)


def new_parameter(name: str, init: float, step: float, lower: float, upper: float, fixed: bool = False) -> Variable:
    if not step > 0:
        raise InvalidStep(f"{name}: step must be > 0, got {step}")
    return Variable(name, init, lower, upper, step, Role.PARAMETER, fixed=fixed)


class ParameterRegistry:
    """Insertion-ordered registry of parameters and observables.

    Registration is idempotent: the same Variable object always maps to the
    same global index, so a parameter shared by several nodes occupies one slot.
    """

    def __init__(self):
        self.parameters: list[Variable] = []
        self.observables: list[Variable] = []
        self._index: dict[int, int] = {}
        self._names: dict[str, Variable] = {}

    def _check_name(self, v: Variable):
        other = self._names.get(v.name)
        if other is not None and other is not v:
            raise NameCollision(f"two distinct variables named {v.name!r}")
        self._names[v.name] = v

    def register_parameter(self, v: Variable) -> int:
        if not v.is_parameter:
            raise WrongRole(f"{v.name} is an observable, not a parameter")
        if id(v) in self._index:
            return self._index[id(v)]
        self._check_name(v)
        self._index[id(v)] = len(self.parameters)
        self.parameters.append(v)
        return self._index[id(v)]

    def register_observable(self, v: Variable) -> int:
        if v.is_parameter:
            raise WrongRole(f"{v.name} is a parameter, not an observable")
        if id(v) in self._index:
            return self._index[id(v)]
        self._check_name(v)
        self._index[id(v)] = len(self.observables)
        self.observables.append(v)
        return self._index[id(v)]

    def index_of(self, v: Variable) -> int:
        return self._index[id(v)]

    def __len__(self):
        return len(self.parameters)

    def values(self) -> np.ndarray:
        """Current values of all registered parameters, in registry order."""
        return np.array([p.value for p in self.parameters], dtype=np.float64)

    def free_indices(self) -> list[int]:
        return [i for i, p in enumerate(self.parameters) if not p.fixed]


@dataclass(frozen=True)
class GridSpec:
    """Normalization grid: ``points`` midpoints per observable.

    ``rule="richardson"`` combines the midpoint sums at n and 2n points as
    (4*Q_2n - Q_n)/3, cancelling the leading h**2 error term; ``"midpoint"`` is
    the bare Riemann sum.
    """

    points: int = 1024
    rule: str = "richardson"

    def __post_init__(self):
        if self.points < 2:
            raise ValueError("grid needs at least 2 points per observable")
        if self.rule not in ("midpoint", "richardson"):
            raise ValueError(f"unknown integration rule {self.rule!r}")


@dataclass(frozen=True)
class IndexTable:
    slots: Mapping[int, tuple[int, ...]]
    n_params: int
    n_columns: int
    n_data_columns: int
    grid: GridSpec = field(default_factory=GridSpec)

    def __post_init__(self):
        object.__setattr__(self, "slots", MappingProxyType(dict(self.slots)))
        decoded = {}
        for node_id, slot in self.slots.items():
            n_p = slot[0]
            p_idx = tuple(slot[1 : 1 + n_p])
            n_o = slot[1 + n_p]
            o_idx = tuple(slot[2 + n_p : 2 + n_p + n_o])
            decoded[node_id] = (p_idx, o_idx)
        object.__setattr__(self, "_decoded", decoded)

    def __len__(self):
        return len(self.slots)

    def param_indices(self, node_id: int) -> tuple[int, ...]:
        return self._decoded[node_id][0]

    def obs_columns(self, node_id: int) -> tuple[int, ...]:
        return self._decoded[node_id][1]

    def lookup_param(self, node_id: int, local_slot: int, params: Sequence[float]) -> float:
        p_idx = self._decoded[node_id][0]
        if not 0 <= local_slot < len(p_idx):
            raise OutOfRange(f"node {node_id} has {len(p_idx)} parameter slots, asked for {local_slot}")
        return params[p_idx[local_slot]]


def _slot(param_idx: Iterable[int], obs_cols: Iterable[int]) -> tuple[int, ...]:
    p = list(param_idx)
    o = list(obs_cols)
    return (len(p), *p, len(o), *o)


def finalize(
    registry: ParameterRegistry,
    graph: "PdfNode | None",
    columns: Sequence[Variable] | None = None,
    grid: GridSpec | None = None,
) -> IndexTable:
    """Register every node's parameters and observables and build the table.

    ``columns`` lists the observables present in the bound data, in column
    order. When omitted, the graph's own data observables are used in
    discovery order. Observables that only appear as the argument of an outer
    function in a composition get scratch columns after the data columns.
    """
    grid = grid or GridSpec()
    if graph is None:
        return IndexTable({}, len(registry), 0, 0, grid)

    nodes = list(graph.walk())
    if columns is None:
        columns = graph.observables
    for v in columns:
        registry.register_observable(v)
    col_of = {id(v): i for i, v in enumerate(columns)}
    n_data = len(columns)

    internal = {}
    for node in nodes:
        for v in node.internal_observables():
            internal.setdefault(id(v), v)

    slots = {}
    for node in nodes:
        p_idx = [registry.register_parameter(p) for p in node.parameters]
        o_idx = []
        for v in node.own_observables:
            if id(v) not in col_of:
                if id(v) not in internal:
                    raise UnboundObservable(f"node {node.name!r} needs observable {v.name!r}, absent from the data")
                registry.register_observable(v)
                col_of[id(v)] = len(col_of)
            o_idx.append(col_of[id(v)])
        slots[node.node_id] = _slot(p_idx, o_idx)

    return IndexTable(slots, len(registry), len(col_of), n_data, grid)
