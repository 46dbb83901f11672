"""Truncated-exponential toy: generate at alpha=-2, fit from -1."""

import argparse
import time

from _common import model

from parfit import set_data
from parfit.fitting import fit
from parfit.generate import generate

ap = argparse.ArgumentParser()
ap.add_argument("--n-events", type=int, default=100_000)
ap.add_argument("--seed", type=int, default=1)
args = ap.parse_args()

truth = model("truncexp", alpha=-2.0)
data = generate(truth.pdf, args.n_events, args.seed, truth.observables, truth.config.grid)

m = model("truncexp")
t0 = time.perf_counter()
res = fit(set_data(m.pdf, data.rebind(m.observables), m.config.grid), m.config.fit)
print(res.to_report(), end="")
pull = (res.values["alpha"] + 2.0) / res.errors["alpha"]
print(f"pull: {pull:.3f}  total_s: {time.perf_counter() - t0:.2f}")
