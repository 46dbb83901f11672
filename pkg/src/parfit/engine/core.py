"""Data-parallel metric evaluation with a reduction independent of thread count.

Events are cut into fixed chunks of ``Backend.chunk_size``; each chunk is
summed with a pairwise tree and the chunk partials are summed with another
pairwise tree. Work is dispatched to workers in blocks of whole chunks, so the
arithmetic is a function of the event count alone and serial, threads(1) and
threads(k) agree bit for bit.
"""

from __future__ import annotations

import enum
import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from ..data import BinnedDataSet, UnbinnedDataSet
from ..errors import DimensionMismatch, NonFiniteMetric, ParfitError
from ..pdfs import PdfNode
from ..variables import GridSpec, ParameterRegistry, finalize
from . import kernels

PENALTY = 1e300
BLOCK_CHUNKS = 16
THREADS_ENV = "PARFIT_THREADS"


class MetricKind(enum.Enum):
    NLL = "nll"
    CHI2 = "chi2"

    @classmethod
    def parse(cls, value) -> "MetricKind":
        if isinstance(value, cls):
            return value
        aliases = {
            "nll": cls.NLL,
            "negative-log-likelihood": cls.NLL,
            "chi2": cls.CHI2,
            "chi-squared": cls.CHI2,
        }
        try:
            return aliases[str(value).lower()]
        except KeyError:
            raise ParfitError(f"unknown metric {value!r}; expected one of {sorted(aliases)}") from None

    @property
    def errordef(self) -> float:
        """Metric rise corresponding to one standard deviation."""
        return 0.5 if self is MetricKind.NLL else 1.0


@dataclass(frozen=True)
class Backend:
    kind: str = "serial"
    threads: int = 1
    chunk_size: int = 4096

    def __post_init__(self):
        if self.kind not in ("serial", "threads"):
            raise ParfitError(f"unknown backend {self.kind!r}")
        if self.threads < 1 or self.chunk_size < 1:
            raise ParfitError("threads and chunk_size must be positive")

    @classmethod
    def serial(cls, chunk_size: int = 4096) -> "Backend":
        return cls("serial", 1, chunk_size)

    @classmethod
    def threaded(cls, n: int, chunk_size: int = 4096) -> "Backend":
        return cls("threads", n, chunk_size)

    @classmethod
    def from_env(cls, kind: str | None = None, threads: int | None = None) -> "Backend":
        """Explicit arguments win over $PARFIT_THREADS, which wins over serial."""
        if threads is None and os.environ.get(THREADS_ENV):
            threads = int(os.environ[THREADS_ENV])
        if kind is None:
            kind = "threads" if threads is not None else "serial"
        if kind == "serial":
            return cls.serial()
        return cls.threaded(threads or os.cpu_count() or 1)

    def __str__(self):
        return "serial" if self.kind == "serial" else f"threads({self.threads})"


_pools: dict[int, ThreadPoolExecutor] = {}
_pools_lock = threading.Lock()


def _pool(n: int) -> ThreadPoolExecutor:
    with _pools_lock:
        if n not in _pools:
            _pools[n] = ThreadPoolExecutor(max_workers=n, thread_name_prefix="parfit")
        return _pools[n]


def reduce(partials) -> float:
    """Pairwise tree sum whose shape depends only on ``len(partials)``."""
    a = np.ascontiguousarray(partials, dtype=np.float64).reshape(-1)
    return float(kernels.pairwise_sum(a))


class BoundModel:
    """A PDF graph bound to a data set, ready for repeated metric evaluation.

    Not safe to evaluate from two callers at once; a single evaluation fans
    out to the backend's workers internally.
    """

    def __init__(self, pdf: PdfNode, dataset: UnbinnedDataSet | BinnedDataSet, grid: GridSpec | None = None):
        self.pdf = pdf
        self.dataset = dataset
        self.binned = isinstance(dataset, BinnedDataSet)
        self.events = dataset.to_event_table()
        self.registry = ParameterRegistry()
        self.table = finalize(self.registry, pdf, columns=dataset.observables, grid=grid)
        n_obs = len(dataset.observables)
        cols = self.events.columns()
        self._cols = cols[:n_obs] + [None] * (self.table.n_columns - n_obs)
        if self.binned:
            self._content = cols[n_obs]
            self._volume = cols[n_obs + 1]
            self.n_total = reduce(self._content)
        self.floor_count = 0
        self.n_calls = 0

    @property
    def n_events(self) -> int:
        return self.events.n_events

    @property
    def parameters(self):
        return self.registry.parameters

    def parameter_values(self) -> np.ndarray:
        return self.registry.values()

    def set_parameter_values(self, values):
        for p, v in zip(self.registry.parameters, values):
            p.value = float(v)

    def density(self, cols, params=None) -> np.ndarray:
        """Normalized density on arbitrary column arrays (one per table column)."""
        params = self._params(params)
        self.pdf.prepare(params, self.table)
        return self.pdf.density(cols, params, self.table)

    def _params(self, params) -> np.ndarray:
        if params is None:
            return self.parameter_values()
        params = np.ascontiguousarray(params, dtype=np.float64)
        if params.shape != (len(self.registry),):
            raise DimensionMismatch(f"expected {len(self.registry)} parameters, got shape {params.shape}")
        return params

    def eval_metric(self, params=None, metric=MetricKind.NLL, backend: Backend | None = None) -> float:
        params = self._params(params)
        metric = MetricKind.parse(metric)
        backend = backend or Backend.serial()
        if metric is MetricKind.CHI2 and not self.binned:
            raise ParfitError("chi-squared needs a binned data set")
        self.n_calls += 1
        n = self.n_events
        if n == 0:
            return 0.0

        self.pdf.prepare(params, self.table)
        norm = self.pdf.normalize(params, self.table)

        block = backend.chunk_size * BLOCK_CHUNKS
        starts = range(0, n, block)

        def work(start):
            return self._block(start, min(start + block, n), params, norm, metric, backend.chunk_size)

        if backend.kind == "serial" or backend.threads == 1 or len(starts) == 1:
            results = [work(s) for s in starts]
        else:
            results = list(_pool(backend.threads).map(work, starts))

        partials = np.concatenate([r[0] for r in results])
        total = reduce(partials)
        self.floor_count += sum(r[1] for r in results)
        if not np.isfinite(total):
            bad = next((r[2] for r in results if r[2] >= 0), -1)
            raise NonFiniteMetric(bad, total)
        return total

    def _block(self, start, stop, params, norm, metric, chunk):
        m = stop - start
        cols = [None if c is None else c[start:stop] for c in self._cols]
        raw = self.pdf.raw(cols, params, self.table)
        density = np.ascontiguousarray(np.broadcast_to(raw / norm, (m,)), dtype=np.float64)
        terms = np.empty(m)
        floors = 0
        if metric is MetricKind.NLL:
            weights = self._content[start:stop] if self.binned else density
            floors = kernels.nll_terms(density, weights, self.binned, terms)
        else:
            kernels.chi2_terms(density, self._content[start:stop], self._volume[start:stop], self.n_total, terms)
        partials = np.empty(-(-m // chunk))
        kernels.chunk_sums(terms, chunk, partials)
        bad = kernels.first_nonfinite(terms)
        return partials, floors, (start + bad if bad >= 0 else -1)


def set_data(pdf: PdfNode, dataset, grid: GridSpec | None = None) -> BoundModel:
    return BoundModel(pdf, dataset, grid)
