"""Toy event generation by accept-reject sampling."""

from __future__ import annotations

import numpy as np

from .data import UnbinnedDataSet
from .errors import EnvelopeError, ParfitError
from .pdfs import PdfNode
from .variables import GridSpec, ParameterRegistry, Variable, finalize

ENVELOPE_FACTOR = 1.1
BATCH = 1 << 16
_MAX_SCAN = 1 << 22


class Sampler:
    """Accept-reject sampler for the normalized density of ``pdf``.

    The envelope is fixed once per sampler: the maximum density on the
    normalization midpoint grid times ``ENVELOPE_FACTOR``. Candidates are
    drawn in fixed-size batches, so the output depends only on the seed.
    """

    def __init__(self, pdf: PdfNode, observables: list[Variable] | None = None, grid: GridSpec | None = None):
        self.pdf = pdf
        self.observables = list(observables if observables is not None else pdf.observables)
        self.registry = ParameterRegistry()
        self.table = finalize(self.registry, pdf, columns=self.observables, grid=grid)
        self.params = self.registry.values()
        pdf.prepare(self.params, self.table)
        self.lower = np.array([v.lower for v in self.observables])
        self.upper = np.array([v.upper for v in self.observables])
        self.envelope = ENVELOPE_FACTOR * self._grid_max()
        if not (np.isfinite(self.envelope) and self.envelope > 0):
            raise EnvelopeError(f"envelope is {self.envelope!r}; the density vanishes on the scan grid")

    def density(self, points: np.ndarray) -> np.ndarray:
        """Normalized density at ``points`` of shape (n, n_observables)."""
        n = points.shape[0]
        cols: list = [np.ascontiguousarray(points[:, k]) for k in range(points.shape[1])]
        cols += [None] * (self.table.n_columns - len(cols))
        return np.broadcast_to(self.pdf.density(cols, self.params, self.table), (n,))

    def _grid_max(self) -> float:
        d = len(self.observables)
        per_dim = min(self.table.grid.points, max(2, int(_MAX_SCAN ** (1.0 / d))))
        axes = [v.lower + (np.arange(per_dim) + 0.5) * (v.upper - v.lower) / per_dim for v in self.observables]
        mesh = np.meshgrid(*axes, indexing="ij")
        pts = np.stack([m.reshape(-1) for m in mesh], axis=1)
        return float(np.max(self.density(pts)))

    def sample(self, n_events: int, seed: int) -> np.ndarray:
        if n_events < 1:
            raise ParfitError(f"n_events must be >= 1, got {n_events}")
        rng = np.random.default_rng(seed)
        d = len(self.observables)
        out = np.empty((n_events, d))
        filled = 0
        while filled < n_events:
            cand = self.lower + (self.upper - self.lower) * rng.random((BATCH, d))
            dens = self.density(cand)
            over = np.flatnonzero(dens > self.envelope)
            if over.size:
                i = over[0]
                raise EnvelopeError(
                    f"density {dens[i]!r} at {tuple(cand[i])} exceeds the envelope {self.envelope!r} "
                    f"({ENVELOPE_FACTOR} x grid maximum); refine the grid"
                )
            keep = cand[rng.random(BATCH) * self.envelope < dens]
            take = min(len(keep), n_events - filled)
            out[filled : filled + take] = keep[:take]
            filled += take
        return out


def generate(pdf: PdfNode, n_events: int, seed: int, observables=None, grid: GridSpec | None = None) -> UnbinnedDataSet:
    """Draw ``n_events`` toy events from the current parameter values of ``pdf``."""
    sampler = Sampler(pdf, observables, grid)
    ds = UnbinnedDataSet(sampler.observables)
    ds.add_events(sampler.sample(n_events, seed))
    return ds
