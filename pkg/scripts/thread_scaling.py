"""Median fit time per worker count on a large unbinned exponential fit."""

import argparse
import os

from _common import model

from parfit import set_data
from parfit.bench import run_bench
from parfit.generate import generate

ap = argparse.ArgumentParser()
ap.add_argument("--n-events", type=int, default=1_000_000)
ap.add_argument("--threads", default="1,2,4")
ap.add_argument("--repetitions", type=int, default=3)
ap.add_argument("--seed", type=int, default=4)
args = ap.parse_args()

truth = model("truncexp", alpha=-2.0)
data = generate(truth.pdf, args.n_events, args.seed, truth.observables, truth.config.grid)
m = model("truncexp")
report = run_bench(set_data(m.pdf, data.rebind(m.observables), m.config.grid), [int(t) for t in args.threads.split(",")], args.repetitions)
print(f"# cores available: {os.cpu_count()}")
print(report.to_tsv(), end="")
