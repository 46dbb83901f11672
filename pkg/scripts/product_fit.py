"""Two-dimensional product of exponentials at (-2.4, -1.1)."""

import argparse

from _common import model

from parfit import set_data
from parfit.fitting import fit
from parfit.generate import generate

ap = argparse.ArgumentParser()
ap.add_argument("--n-events", type=int, default=100_000)
ap.add_argument("--seed", type=int, default=2)
args = ap.parse_args()

truth = model("product2d")
data = generate(truth.pdf, args.n_events, args.seed, truth.observables, truth.config.grid)
m = model("product2d", xalpha=-2.0, yalpha=-1.5)
res = fit(set_data(m.pdf, data.rebind(m.observables), m.config.grid), m.config.fit)
print(res.to_report(), end="")
for name, true in (("xalpha", -2.4), ("yalpha", -1.1)):
    print(f"{name} pull: {(res.values[name] - true) / res.errors[name]:.3f}")
