import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from parfit import (
    Backend,
    BinnedDataSet,
    ExpPdf,
    GaussianPdf,
    MetricKind,
    PolynomialPdf,
    UnbinnedDataSet,
    new_observable,
    new_parameter,
    reduce,
    set_data,
)
from parfit.engine import core
from parfit.errors import NonFiniteMetric, ParfitError, UnboundObservable


def exp_model(lo=0.0, hi=21.49, alpha=-2.0):
    x = new_observable("x", lo, hi)
    return x, ExpPdf("e", x, new_parameter("alpha", alpha, 0.1, -10, 10))


def test_set_data_100k(rng):
    x, pdf = exp_model()
    ds = UnbinnedDataSet(x)
    ds.add_events(rng.exponential(0.5, 100000))
    bm = set_data(pdf, ds)
    assert bm.n_events == 100000


def test_empty_data_nll_zero():
    x, pdf = exp_model()
    assert set_data(pdf, UnbinnedDataSet(x)).eval_metric() == 0.0


def test_unbound_observable():
    x, pdf = exp_model()
    y = new_observable("y", 0, 1)
    with pytest.raises(UnboundObservable):
        set_data(pdf, UnbinnedDataSet(y))


def test_uniform_single_event():
    x = new_observable("x", 0, 10)
    pdf = PolynomialPdf("u", x, [new_parameter("c", 1, 0.1, 0, 2)])
    ds = UnbinnedDataSet(x)
    ds.add_events(np.array([3.3]))
    assert set_data(pdf, ds).eval_metric() == pytest.approx(math.log(10), rel=1e-12)


def test_three_events_scalar_reference():
    x, pdf = exp_model()
    ds = UnbinnedDataSet(x)
    ds.add_events(np.array([3.0, 5.0, 1.0]))
    bm = set_data(pdf, ds)
    a, hi = -2.0, 21.49
    norm = (math.exp(a * hi) - 1) / a
    ref = sum(-(a * v) for v in (3, 5, 1)) + 3 * math.log(norm)
    assert bm.eval_metric() == pytest.approx(ref, rel=1e-9)


def test_chi2_perfect_match():
    x = new_observable("x", 0, 10)
    pdf = PolynomialPdf("u", x, [new_parameter("c", 1, 0.1, 0, 2)])
    b = BinnedDataSet(x, 10)
    b.contents[:] = 50.0  # mu_b = 500 * 0.1 * 1
    assert set_data(pdf, b).eval_metric(metric="chi2") == 0.0


def test_chi2_requires_binned():
    x, pdf = exp_model()
    ds = UnbinnedDataSet(x)
    ds.add_events(np.array([1.0]))
    with pytest.raises(ParfitError):
        set_data(pdf, ds).eval_metric(metric=MetricKind.CHI2)


def test_chi2_pearson_reference(rng):
    x, pdf = exp_model(0, 5, -0.5)
    b = BinnedDataSet(x, 20)
    b.fill_many(rng.exponential(2.0, 20000).clip(0, 5))
    bm = set_data(pdf, b)
    centers = b.centers()[:, 0]
    a = -0.5
    dens = np.exp(a * centers) * a / (math.exp(a * 5) - 1)
    mu = b.contents.sum() * dens * 0.25
    ref = np.sum((b.contents - mu) ** 2 / np.maximum(mu, 1e-9))
    assert bm.eval_metric(metric="chi2") == pytest.approx(ref, rel=1e-6)


def test_binned_nll_content_weighted(rng):
    x, pdf = exp_model(0, 5, -0.5)
    b = BinnedDataSet(x, 20)
    b.fill_many(rng.uniform(0, 5, 1000))
    bm = set_data(pdf, b)
    c = b.centers()[:, 0]
    dens = np.exp(-0.5 * c) * -0.5 / (math.exp(-2.5) - 1)
    assert bm.eval_metric() == pytest.approx(-np.sum(b.contents * np.log(dens)), rel=1e-6)


def test_log_floor_counted():
    x = new_observable("x", 0, 10)
    g = GaussianPdf("g", x, new_parameter("m", 0, 0.1, -1, 1), new_parameter("s", 0.05, 0.01, 0.01, 1))
    ds = UnbinnedDataSet(x)
    ds.add_events(np.array([0.0, 9.9, 9.8]))
    bm = set_data(g, ds)
    v = bm.eval_metric()
    assert np.isfinite(v)
    assert bm.floor_count == 2
    assert v == pytest.approx(2 * -math.log(1e-300) - math.log(bm.density([np.array([0.0])])[0]), rel=1e-12)


def test_non_finite_reports_index():
    x = new_observable("x", 0, 10)
    pdf = PolynomialPdf("p", x, [new_parameter("c0", 1, 0.1, 0, 2), new_parameter("c1", 0, 0.1, -1, 1)])
    ds = UnbinnedDataSet(x)
    ds.add_events(np.array([1.0, 2.0, np.inf, 3.0]))
    with pytest.raises(NonFiniteMetric) as ei:
        set_data(pdf, ds).eval_metric(np.array([1.0, 1.0]))
    assert ei.value.event_index == 2


def test_reduce_small():
    assert reduce([]) == 0.0
    assert reduce([2.5]) == 2.5


def test_backends_bitwise_1e6(rng):
    x, pdf = exp_model()
    ds = UnbinnedDataSet(x)
    ds.add_events(rng.exponential(0.5, 10**6).clip(0, 21.49))
    bm = set_data(pdf, ds)
    p = np.array([-1.93])
    ref = bm.eval_metric(p, backend=Backend.serial())
    for n in (1, 2, 8):
        assert bm.eval_metric(p, backend=Backend.threaded(n)).hex() == ref.hex()


@settings(max_examples=20, deadline=None)
@given(n=st.integers(0, 300000), k=st.integers(2, 8), seed=st.integers(0, 2**32 - 1))
def test_backend_equivalence_property(n, k, seed):
    r = np.random.default_rng(seed)
    x, pdf = exp_model(0, 10, float(r.uniform(-3, 3)))
    ds = UnbinnedDataSet(x)
    ds.add_events(r.uniform(0, 10, n))
    bm = set_data(pdf, ds)
    assert bm.eval_metric(backend=Backend.threaded(k)).hex() == bm.eval_metric(backend=Backend.serial()).hex()


def test_metric_switch_leaves_graph_untouched(rng):
    x = new_observable("x", 0, 10)
    pdf = GaussianPdf("g", x, new_parameter("m", 5, 0.1, 0, 10), new_parameter("s", 1, 0.1, 0.1, 5))
    b = BinnedDataSet(x, 10)
    b.fill_many(rng.normal(5, 1, 1000).clip(0, 10))
    bm = set_data(pdf, b)
    before = pdf.fingerprint()
    bm.eval_metric(metric="nll")
    bm.eval_metric(metric="chi2")
    assert pdf.fingerprint() == before


def test_backend_from_env(monkeypatch):
    monkeypatch.delenv(core.THREADS_ENV, raising=False)
    assert Backend.from_env() == Backend.serial()
    monkeypatch.setenv(core.THREADS_ENV, "3")
    assert Backend.from_env() == Backend.threaded(3)
    assert Backend.from_env("threads", 5) == Backend.threaded(5)
    assert Backend.from_env("serial") == Backend.serial()


def test_metric_kind_parse():
    assert MetricKind.parse("chi-squared") is MetricKind.CHI2
    with pytest.raises(ParfitError):
        MetricKind.parse("l2")
