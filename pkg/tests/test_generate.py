import math

import numpy as np
import pytest
from scipy import stats

from parfit import (
    BinnedDataSet,
    BreitWignerPdf,
    ExpPdf,
    GaussianPdf,
    GridSpec,
    PolynomialPdf,
    new_observable,
    new_parameter,
    set_data,
)
from parfit.errors import EnvelopeError, ParfitError
from parfit.fitting import fit
from parfit.generate import Sampler, generate


def test_uniform_bins():
    x = new_observable("x", 0, 10)
    pdf = PolynomialPdf("u", x, [new_parameter("c", 1, 0.1, 0, 2)])
    n, bins = 100_000, 20
    h = BinnedDataSet.from_unbinned(generate(pdf, n, 11), bins)
    assert np.all(np.abs(h.contents - n / bins) <= 4 * math.sqrt(n / bins))


def test_exp_sample_mean():
    a, hi, n = -2.0, 10.0, 100_000
    x = new_observable("x", 0, hi)
    sample = generate(ExpPdf("e", x, new_parameter("a", a, 0.1, -10, 10)), n, 3).as_array()[:, 0]
    # truncated exponential moments
    z = 1 - math.exp(a * hi)
    mean = -1 / a - hi * math.exp(a * hi) / z
    second = (2 / a**2 - (hi**2 - 2 * hi / a + 2 / a**2) * math.exp(a * hi)) / z
    sd = math.sqrt(second - mean**2)
    assert abs(sample.mean() - mean) < 5 * sd / math.sqrt(n)


def test_matches_inverse_transform():
    # inverse-transform sampling of exp(alpha x) on [0, hi] as the oracle
    a, hi = -2.0, 21.49
    x = new_observable("x", 0, hi)
    ar = generate(ExpPdf("e", x, new_parameter("a", a, 0.1, -10, 10)), 50_000, 8).as_array()[:, 0]
    u = np.random.default_rng(99).random(50_000)
    inv = np.log(1 - u * (1 - math.exp(a * hi))) / a
    assert stats.ks_2samp(ar, inv).pvalue > 1e-3
    cdf = lambda t: (1 - np.exp(a * t)) / (1 - math.exp(a * hi))
    assert stats.kstest(ar, cdf).pvalue > 1e-3


def test_seed_determinism(tmp_path):
    x = new_observable("x", 0, 10)
    pdf = GaussianPdf("g", x, new_parameter("m", 4, 0.1, 0, 10), new_parameter("s", 1, 0.1, 0.1, 5))
    generate(pdf, 5000, 42).save(tmp_path / "a.txt")
    generate(pdf, 5000, 42).save(tmp_path / "b.txt")
    generate(pdf, 5000, 43).save(tmp_path / "c.txt")
    a, b, c = ((tmp_path / f).read_bytes() for f in ("a.txt", "b.txt", "c.txt"))
    assert a == b and a != c


def test_envelope_failure():
    x = new_observable("x", 0, 1)
    pdf = GaussianPdf("g", x, new_parameter("m", 0.3, 0.01, 0, 1), new_parameter("s", 0.03, 0.01, 0.01, 1))
    with pytest.raises(EnvelopeError, match="exceeds the envelope"):
        generate(pdf, 1000, 0, grid=GridSpec(points=4))


def test_envelope_value():
    x = new_observable("x", 0, 10)
    s = Sampler(ExpPdf("e", x, new_parameter("a", -1, 0.1, -5, 5)))
    first_midpoint = 10 / 1024 / 2
    assert s.envelope == pytest.approx(1.1 * math.exp(-first_midpoint) / (1 - math.exp(-10)), rel=1e-6)


def test_needs_events():
    x = new_observable("x", 0, 1)
    with pytest.raises(ParfitError):
        generate(ExpPdf("e", x, new_parameter("a", 0, 0.1, -1, 1)), 0, 1)


def _closure_models():
    def exp():
        x = new_observable("x", 0, 5)
        return ExpPdf("e", x, new_parameter("a", -0.8, 0.05, -5, 5)), {"a": -0.8}

    def gauss():
        x = new_observable("x", 0, 10)
        return GaussianPdf("g", x, new_parameter("m", 5, 0.05, 0, 10), new_parameter("s", 1.2, 0.05, 0.1, 5)), {"m": 5, "s": 1.2}

    def bw():
        x = new_observable("x", 0, 10)
        return BreitWignerPdf("bw", x, new_parameter("mass", 5, 0.05, 3, 7), new_parameter("w", 1, 0.05, 0.1, 5)), {"mass": 5, "w": 1}

    def poly():
        x = new_observable("x", 0, 1)
        c0 = new_parameter("c0", 1.0, 0.1, 0, 5, fixed=True)
        return PolynomialPdf("p", x, [c0, new_parameter("c1", 0.8, 0.05, -0.9, 5)]), {"c1": 0.8}

    return {"exp": exp, "gaussian": gauss, "breit_wigner": bw, "polynomial": poly}


@pytest.mark.slow
@pytest.mark.parametrize("kind", ["exp", "gaussian", "breit_wigner", "polynomial"])
def test_generate_fit_closure(kind):
    make = _closure_models()[kind]
    ok = 0
    trials = 100
    for seed in range(trials):
        pdf, truth = make()
        data = generate(pdf, 2000, 1000 + seed)
        res = fit(set_data(pdf, data))
        good = res.converged and all(
            res.errors[k] is not None and abs(res.values[k] - v) < 5 * res.errors[k] for k, v in truth.items()
        )
        ok += good
    assert ok >= 95, f"{kind}: {ok}/{trials} trials recovered truth"
