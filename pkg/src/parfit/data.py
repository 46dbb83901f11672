"""Host-side data containers and the flat evaluation layout."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DimensionMismatch, DuplicateObservable, OutOfRange, WrongRole
from .variables import Variable


def _as_observables(observables) -> list[Variable]:
    if isinstance(observables, Variable):
        observables = [observables]
    observables = list(observables)
    if not observables:
        raise DimensionMismatch("a data set needs at least one observable")
    seen = set()
    for v in observables:
        if v.is_parameter:
            raise WrongRole(f"{v.name} is a parameter, not an observable")
        if id(v) in seen:
            raise DuplicateObservable(f"observable {v.name!r} listed twice")
        seen.add(id(v))
    return observables


@dataclass(frozen=True)
class EventTable:
    """All event values in one contiguous column-major float64 array.

    Unbinned tables have one column per observable. Binned tables have one
    pseudo-event per bin with columns ``[centers..., content, volume]``.
    """

    n_events: int
    n_columns: int
    values: np.ndarray
    binned: bool = False

    def __post_init__(self):
        if self.values.shape != (self.n_events * self.n_columns,):
            raise DimensionMismatch("values length must equal n_events * n_columns")
        self.values.flags.writeable = False

    def column(self, c: int) -> np.ndarray:
        return self.values[c * self.n_events : (c + 1) * self.n_events]

    def columns(self) -> list[np.ndarray]:
        return [self.column(c) for c in range(self.n_columns)]

    @property
    def n_observables(self) -> int:
        return self.n_columns - 2 if self.binned else self.n_columns


def _column_major(rows: np.ndarray) -> np.ndarray:
    return np.ascontiguousarray(rows.T, dtype=np.float64).ravel()


class UnbinnedDataSet:
    """Events are snapshots of the bound observables' values at ``add_event`` time.

    >>> x = new_observable("x", 0, 10)
    >>> data = UnbinnedDataSet(x)
    >>> x.value = 3; data.add_event()
    >>> x.value = 5; data.add_event()
    >>> data.rows
    [(3.0,), (5.0,)]
    """

    def __init__(self, observables: Variable | Sequence[Variable]):
        self.observables = _as_observables(observables)
        self._rows: list[tuple[float, ...]] = []

    def add_event(self):
        self._rows.append(tuple(float(v.value) for v in self.observables))

    def add_events(self, array):
        """Append many events at once; ``array`` has shape (n, n_observables)."""
        array = np.asarray(array, dtype=np.float64)
        if array.ndim == 1 and len(self.observables) == 1:
            array = array[:, None]
        if array.ndim != 2 or array.shape[1] != len(self.observables):
            raise DimensionMismatch(f"expected shape (n, {len(self.observables)}), got {array.shape}")
        self._rows.extend(map(tuple, array.tolist()))

    @property
    def rows(self) -> list[tuple[float, ...]]:
        return list(self._rows)

    @property
    def n_events(self) -> int:
        return len(self._rows)

    def __len__(self):
        return len(self._rows)

    def as_array(self) -> np.ndarray:
        return np.array(self._rows, dtype=np.float64).reshape(len(self._rows), len(self.observables))

    def to_event_table(self) -> EventTable:
        return EventTable(self.n_events, len(self.observables), _column_major(self.as_array()))

    def rebind(self, observables: Sequence[Variable]) -> "UnbinnedDataSet":
        """Same events, attached to other observable objects with the same names."""
        obs = _as_observables(observables)
        if [v.name for v in obs] != [v.name for v in self.observables]:
            raise DimensionMismatch(f"cannot rebind {[v.name for v in self.observables]} to {[v.name for v in obs]}")
        out = UnbinnedDataSet(obs)
        if self.n_events:
            out.add_events(self.as_array())
        return out

    def to_text(self) -> str:
        names = " ".join(v.name for v in self.observables)
        lines = [f"# {names}\n"]
        lines.extend(" ".join(repr(v) for v in row) + "\n" for row in self._rows)
        return "".join(lines)

    def save(self, path):
        Path(path).write_text(self.to_text())

    @classmethod
    def load(cls, path, observables: Sequence[Variable]) -> "UnbinnedDataSet":
        """Read a file written by ``save``; header names must match ``observables``."""
        names = read_header(path)
        expected = [v.name for v in _as_observables(observables)]
        if names != expected:
            raise DimensionMismatch(f"{path}: header columns {names} do not match observables {expected}")
        ds = cls(observables)
        arr = np.loadtxt(path, dtype=np.float64, comments="#", ndmin=2)
        if arr.size:
            ds.add_events(arr.reshape(-1, len(expected)))
        return ds


def read_header(path) -> list[str]:
    with open(path) as fh:
        first = fh.readline()
    if not first.startswith("#"):
        raise DimensionMismatch(f"{path}: missing '#' header line")
    return first[1:].split()


class BinnedDataSet:
    """Uniformly binned histogram over the observables' ranges.

    Bin edges are half-open except the last bin of each axis, which includes
    the observable's upper limit.
    """

    def __init__(self, observables: Variable | Sequence[Variable], bins: int | Sequence[int]):
        self.observables = _as_observables(observables)
        if isinstance(bins, (int, np.integer)):
            bins = [int(bins)]
        self.bins = [int(b) for b in bins]
        if len(self.bins) != len(self.observables):
            raise DimensionMismatch(f"{len(self.observables)} observables but {len(self.bins)} bin counts")
        if any(b < 1 for b in self.bins):
            raise DimensionMismatch(f"bin counts must be >= 1, got {self.bins}")
        self.contents = np.zeros(int(np.prod(self.bins)), dtype=np.float64)

    def widths(self) -> list[float]:
        return [(v.upper - v.lower) / b for v, b in zip(self.observables, self.bins)]

    def bin_index(self, point) -> int:
        point = np.atleast_1d(np.asarray(point, dtype=np.float64))
        if point.shape != (len(self.observables),):
            raise DimensionMismatch(f"point needs {len(self.observables)} coordinates")
        flat = 0
        for v, b, w, p in zip(self.observables, self.bins, self.widths(), point):
            if not v.lower <= p <= v.upper:
                raise OutOfRange(f"{v.name}={p} outside [{v.lower}, {v.upper}]")
            k = min(int((p - v.lower) / w), b - 1)
            flat = flat * b + k
        return flat

    def fill(self, point, weight: float = 1.0):
        self.contents[self.bin_index(point)] += weight

    def fill_many(self, array, weights=None):
        """Vectorized ``fill``; rejects the whole batch if any point is out of range."""
        array = np.asarray(array, dtype=np.float64).reshape(-1, len(self.observables))
        flat = np.zeros(len(array), dtype=np.int64)
        for d, (v, b, w) in enumerate(zip(self.observables, self.bins, self.widths())):
            p = array[:, d]
            bad = ~((p >= v.lower) & (p <= v.upper))
            if bad.any():
                i = int(np.argmax(bad))
                raise OutOfRange(f"event {i}: {v.name}={p[i]} outside [{v.lower}, {v.upper}]")
            k = np.minimum(((p - v.lower) / w).astype(np.int64), b - 1)
            flat = flat * b + k
        w = np.ones(len(array)) if weights is None else np.asarray(weights, dtype=np.float64)
        np.add.at(self.contents, flat, w)

    def centers(self) -> np.ndarray:
        """Bin centers, shape (n_bins, n_observables), in flattened bin order."""
        axes = [v.lower + (np.arange(b) + 0.5) * w for v, b, w in zip(self.observables, self.bins, self.widths())]
        mesh = np.meshgrid(*axes, indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)

    def volume(self) -> float:
        return float(np.prod(self.widths()))

    @property
    def n_bins(self) -> int:
        return len(self.contents)

    def to_event_table(self) -> EventTable:
        rows = np.column_stack([self.centers(), self.contents, np.full(self.n_bins, self.volume())])
        return EventTable(self.n_bins, len(self.observables) + 2, _column_major(rows), binned=True)

    @classmethod
    def from_unbinned(cls, ds: UnbinnedDataSet, bins) -> "BinnedDataSet":
        out = cls(ds.observables, bins)
        if ds.n_events:
            out.fill_many(ds.as_array())
        return out
