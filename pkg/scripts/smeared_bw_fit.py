"""Binned chi-squared fit of a Gaussian-smeared Breit-Wigner with known width."""

import argparse

from _common import model

from parfit import BinnedDataSet, set_data
from parfit.fitting import fit
from parfit.generate import generate

ap = argparse.ArgumentParser()
ap.add_argument("--n-events", type=int, default=100_000)
ap.add_argument("--seed", type=int, default=3)
ap.add_argument("--width", type=float, default=1.0)
args = ap.parse_args()

truth = model("bw_gauss", width=args.width)
data = generate(truth.pdf, args.n_events, args.seed, truth.observables, truth.config.grid)
m = model("bw_gauss", width=1.4 * args.width)
binned = BinnedDataSet.from_unbinned(data.rebind(m.observables), [o.bins for o in m.config.observables])
res = fit(set_data(m.pdf, binned, m.config.grid), m.config.fit, metric="chi2")
print(res.to_report(), end="")
print(f"width relative error: {res.values['width'] / args.width - 1:+.4f}")
