"""Thread-scaling benchmark: the same fit timed per worker count."""

from __future__ import annotations

import statistics
from dataclasses import dataclass

from .engine import Backend, BoundModel, MetricKind
from .errors import DeterminismError, ParfitError
from .fitting import FitConfig, fit

HEADER = ("backend", "threads", "wall_time_s", "speedup", "metric_calls")


@dataclass
class BenchRow:
    backend: str
    threads: int
    wall_time: float  # median over repetitions
    speedup: float
    metric_calls: int
    metric_value: float
    times: list[float]


@dataclass
class BenchReport:
    rows: list[BenchRow]

    def to_tsv(self) -> str:
        lines = ["\t".join(HEADER)]
        for r in self.rows:
            lines.append(f"{r.backend}\t{r.threads}\t{r.wall_time!r}\t{r.speedup!r}\t{r.metric_calls}")
        return "\n".join(lines) + "\n"

    def medians(self) -> dict[int, float]:
        return {r.threads: r.wall_time for r in self.rows}


def run_bench(
    model: BoundModel,
    threads: list[int],
    repetitions: int = 3,
    config: FitConfig | None = None,
    metric=MetricKind.NLL,
) -> BenchReport:
    """Time ``fit`` for each thread count; every run starts from the same initial values.

    Raises DeterminismError if any two runs end on metric values that are not
    bitwise equal.
    """
    threads = list(dict.fromkeys(int(t) for t in threads))
    if len(threads) < 2 or 1 not in threads:
        raise ParfitError(f"bench needs at least two thread counts including 1, got {threads}")
    if repetitions < 3:
        raise ParfitError(f"bench needs at least 3 repetitions, got {repetitions}")
    metric = MetricKind.parse(metric)
    initial = model.parameter_values().copy()
    initial_errors = [p.error for p in model.parameters]

    reference = None
    rows = []
    for t in threads:
        backend = Backend.threaded(t)
        times, calls = [], 0
        for _ in range(repetitions):
            model.set_parameter_values(initial)
            res = fit(model, config, metric, backend)
            if reference is None:
                reference = res.metric_value
            elif res.metric_value.hex() != reference.hex():
                raise DeterminismError(
                    f"threads({t}) ended at metric {res.metric_value!r}, expected {reference!r} bit for bit"
                )
            times.append(res.wall_time)
            calls = res.n_metric_calls
        rows.append(BenchRow(str(backend), t, statistics.median(times), 0.0, calls, reference, times))

    base = next(r.wall_time for r in rows if r.threads == 1)
    for r in rows:
        r.speedup = base / r.wall_time
    model.set_parameter_values(initial)
    for p, e in zip(model.parameters, initial_errors):
        p.error = e
    return BenchReport(rows)
