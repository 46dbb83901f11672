"""Command-line front end: ``parfit {generate,fit,bench,plotdata}``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .bench import run_bench
from .config import Model, build_model, load_config
from .data import BinnedDataSet, UnbinnedDataSet
from .engine import Backend, BoundModel, MetricKind, set_data
from .errors import ConfigError, ParfitError
from .fitting import FitResult, fit
from .generate import generate

DEFAULT_PLOT_BINS = 50


def _write(text: str, out: str | None):
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def _backend(args) -> Backend:
    threads = getattr(args, "threads", None)
    return Backend.from_env(args.backend, int(threads) if threads else None)


def _model(args) -> Model:
    model = build_model(load_config(args.config))
    for item in args.set or []:
        name, sep, value = item.partition("=")
        if not sep or name not in model.parameters:
            raise ConfigError(f"--set {item}", f"expected NAME=VALUE with NAME in {sorted(model.parameters)}")
        p = model.parameters[name]
        try:
            v = float(value)
        except ValueError:
            raise ConfigError(f"--set {item}", "value is not a number") from None
        if not p.lower <= v <= p.upper:
            raise ConfigError(f"--set {item}", f"outside [{p.lower}, {p.upper}]")
        p.value = v
    return model


def load_data(model: Model, path, metric: MetricKind):
    """Read events for ``model``; bin them when the metric needs it."""
    ds = UnbinnedDataSet.load(path, model.observables)
    if metric is MetricKind.CHI2:
        bins = [o.bins for o in model.config.observables]
        ds = BinnedDataSet.from_unbinned(ds, bins)
    return ds


def bind(args) -> tuple[Model, BoundModel, MetricKind]:
    model = _model(args)
    metric = MetricKind.parse(model.config.metric)
    bound = set_data(model.pdf, load_data(model, args.data, metric), model.config.grid)
    return model, bound, metric


def cmd_generate(args) -> int:
    model = _model(args)
    ds = generate(model.pdf, args.n_events, args.seed, model.observables, model.config.grid)
    _write(ds.to_text(), args.out)
    return 0


def cmd_fit(args) -> int:
    model, bound, metric = bind(args)
    result = fit(bound, model.config.fit, metric, _backend(args))
    _write(result.to_report(), args.out)
    return 0 if result.converged else 1


def cmd_bench(args) -> int:
    model, bound, metric = bind(args)
    try:
        threads = [int(t) for t in args.threads.split(",")]
    except ValueError:
        raise ParfitError(f"--threads expects a comma-separated list of integers, got {args.threads!r}") from None
    report = run_bench(bound, threads, args.repetitions, model.config.fit, metric)
    _write(report.to_tsv(), args.out)
    return 0


def apply_result(model: Model, result: FitResult):
    for name, v in result.values.items():
        if name not in model.parameters:
            raise ConfigError(f"parameter.{name}", "fit result names a parameter absent from the config")
        model.parameters[name].value = v


def _marginal(bound: BoundModel, obs, target: int, x, others, m: int) -> np.ndarray:
    """Density integrated over ``others`` with an m-point midpoint rule per axis."""
    axes = [o.lower + (np.arange(m) + 0.5) * (o.upper - o.lower) / m for o in others]
    cell = float(np.prod([(o.upper - o.lower) / m for o in others])) if others else 1.0
    flat = [g.reshape(-1) for g in np.meshgrid(*axes, indexing="ij")] if others else []
    n_other = flat[0].size if flat else 1
    out = np.empty(len(x))
    for i, xi in enumerate(x):
        it = iter(flat)
        cols = [np.full(n_other, xi) if k == target else next(it) for k in range(len(obs))]
        cols += [None] * (bound.table.n_columns - len(cols))
        out[i] = float(np.sum(np.broadcast_to(bound.density(cols), (n_other,)))) * cell
    return out


def plot_columns(model: Model, data: UnbinnedDataSet, points: int, project: str | None) -> np.ndarray:
    """Rows of (x, model density, histogram density, histogram error), projected onto one observable."""
    obs = model.observables
    if project is None:
        if len(obs) > 1:
            raise ParfitError(f"model has {len(obs)} observables; choose one with --project")
        target = 0
    else:
        names = [v.name for v in obs]
        if project not in names:
            raise ParfitError(f"--project {project!r} is not an observable (have {names})")
        target = names.index(project)
    v = obs[target]
    if points < 1:
        raise ParfitError("--points must be positive")

    x = v.lower + (np.arange(points) + 0.5) * (v.upper - v.lower) / points
    bound = BoundModel(model.pdf, UnbinnedDataSet(obs), model.config.grid)
    others = [o for i, o in enumerate(obs) if i != target]
    grid = model.config.grid
    m = max(2, min(grid.points, int((1 << 16) ** (1 / max(1, len(others))))))
    coarse = _marginal(bound, obs, target, x, others, m)
    if grid.rule == "midpoint" or not others:
        curve = coarse
    else:
        curve = (4.0 * _marginal(bound, obs, target, x, others, 2 * m) - coarse) / 3.0

    bins = model.config.observables[target].bins or DEFAULT_PLOT_BINS
    hist = BinnedDataSet(v, bins)
    if data.n_events:
        hist.fill_many(data.as_array()[:, target : target + 1])
    counts = hist.contents
    width = (v.upper - v.lower) / bins
    n = max(data.n_events, 1)
    idx = np.minimum(((x - v.lower) / width).astype(int), bins - 1)
    return np.column_stack([x, curve, counts[idx] / (n * width), np.sqrt(counts[idx]) / (n * width)])


def cmd_plotdata(args) -> int:
    model = _model(args)
    if args.result:
        apply_result(model, FitResult.from_report(Path(args.result).read_text()))
    data = UnbinnedDataSet.load(args.data, model.observables)
    rows = plot_columns(model, data, args.points, args.project)
    lines = ["# x model data data_error"]
    lines += [" ".join(repr(float(c)) for c in r) for r in rows]
    _write("\n".join(lines) + "\n", args.out)
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="parfit", description="Composable-PDF maximum-likelihood fitting.")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, data=True):
        sp.add_argument("--config", required=True, help="model configuration (YAML)")
        if data:
            sp.add_argument("--data", required=True, help="event file")
        sp.add_argument("--out", help="output path (default: stdout)")
        sp.add_argument("--set", action="append", metavar="NAME=VALUE", help="override a parameter's initial value")

    g = sub.add_parser("generate", help="accept-reject toy events from the config's initial values")
    common(g, data=False)
    g.add_argument("--n-events", type=int, required=True)
    g.add_argument("--seed", type=int, default=0)
    g.set_defaults(func=cmd_generate)

    f = sub.add_parser("fit", help="fit the model to data and print the report")
    common(f)
    f.add_argument("--backend", choices=("serial", "threads"))
    f.add_argument("--threads", help="worker count (overrides PARFIT_THREADS)")
    f.set_defaults(func=cmd_fit)

    b = sub.add_parser("bench", help="time the fit for several worker counts")
    common(b)
    b.add_argument("--threads", default="1,2,4", help="comma-separated worker counts, must include 1")
    b.add_argument("--repetitions", type=int, default=3)
    b.set_defaults(func=cmd_bench)

    d = sub.add_parser("plotdata", help="emit model curve and data histogram columns")
    common(d)
    d.add_argument("--result", help="fit report whose values replace the config's initial values")
    d.add_argument("--points", type=int, default=200)
    d.add_argument("--project", help="observable to project onto for multi-dimensional models")
    d.set_defaults(func=cmd_plotdata)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ParfitError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
