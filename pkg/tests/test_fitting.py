import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from parfit import (
    AddPdf,
    Backend,
    ExpPdf,
    GaussianPdf,
    ParameterRegistry,
    PolynomialPdf,
    UnbinnedDataSet,
    new_observable,
    new_parameter,
    set_data,
)
from parfit.engine import PENALTY
from parfit.errors import ParfitError
from parfit.fitting import (
    FitConfig,
    FitManager,
    FitResult,
    Objective,
    bfgs,
    covariance,
    define_parameters,
    fit,
    nelder_mead,
    numeric_gradient,
    to_external,
    to_internal,
)
from parfit.generate import generate


def truncexp(n=100_000, seed=1, init=-1.0, hi=21.49):
    x = new_observable("x", 0, hi)
    a = new_parameter("alpha", -2.0, 0.1, -10, 10)
    data = generate(ExpPdf("truth", x, a), n, seed)
    a.value = init
    return set_data(ExpPdf("e", x, a), data), a


def test_define_parameters_midpoint_and_edge():
    reg = ParameterRegistry()
    reg.register_parameter(new_parameter("m", 0.0, 0.1, -3, 3))
    reg.register_parameter(new_parameter("b", 3.0, 0.1, -3, 3))
    u = define_parameters(reg)
    assert u[0] == 0.0
    assert u[1] == pytest.approx(math.pi / 2, abs=1e-15)


@given(st.floats(-50, 50), st.floats(0.01, 100), st.floats(0, 1))
def test_transform_roundtrip(a, width, frac):
    b = a + width
    p = a + frac * width
    assert to_external(to_internal(p, a, b), a, b) == pytest.approx(p, abs=1e-12 * max(1, abs(a), abs(b)))


@given(st.floats(-1e6, 1e6, allow_nan=False))
def test_transform_always_in_limits(u):
    p = to_external(u, -2.0, 5.0)
    assert -2.0 <= p <= 5.0


def test_gradient_quadratic_and_constant():
    A = np.array([[3.0, 0.5], [0.5, 1.0]])

    def quad(u):
        return 0.5 * u @ A @ u + np.array([1.0, -2.0]) @ u

    u = np.array([0.3, -0.7])
    g = numeric_gradient(quad, u, np.array([1e-3, 1e-3])).g
    assert np.allclose(g, A @ u + np.array([1.0, -2.0]), atol=1e-6)
    assert np.array_equal(numeric_gradient(lambda u: 4.0, u, 1e-3).g, np.zeros(2))


def test_gradient_one_sided_fallback():
    def wall(u):
        return u[0] ** 2 if u[0] <= 1.0 else float("nan")

    grad = numeric_gradient(wall, np.array([1.0]), np.array([1e-3]))
    assert grad.one_sided[0]
    assert grad.g[0] == pytest.approx(2.0, rel=1e-2)


def test_bfgs_quadratic_bowl():
    c = np.array([0.5, -1.5, 2.0])
    w = np.array([1.0, 4.0, 0.25])

    def bowl(u):
        return float(np.sum(w * (u - c) ** 2))

    res = bfgs(bowl, np.zeros(3), lambda u: np.full(3, 1e-3), gtol=1e-6)
    assert res.status == "converged" and res.iterations < 50
    assert np.max(np.abs(numeric_gradient(bowl, res.u, 1e-3).g)) <= 1e-6
    assert np.allclose(res.u, c, atol=1e-6)


def test_bfgs_failed_start_and_max_iterations():
    assert bfgs(lambda u: float("nan"), np.zeros(1), lambda u: np.ones(1) * 1e-3).status == "failed"
    rosen = lambda u: (1 - u[0]) ** 2 + 100 * (u[1] - u[0] ** 2) ** 2
    assert bfgs(rosen, np.array([-1.2, 1.0]), lambda u: np.full(2, 1e-4), max_iterations=2).status == "max-iterations"


def test_nelder_mead_bowl():
    res = nelder_mead(lambda u: float((u[0] - 1) ** 2 + 3 * (u[1] + 2) ** 2), np.zeros(2), np.full(2, 0.5))
    assert res.status == "converged"
    assert np.allclose(res.u, [1, -2], atol=1e-6)


def test_covariance_1d_quadratic():
    k, u0 = 7.0, 0.3
    cov = covariance(lambda u: 0.5 * k * (u[0] - u0) ** 2, np.array([u0]), 1e-3, errordef=0.5)
    assert cov[0, 0] == pytest.approx(1 / k, rel=1e-6)


def test_covariance_separable_and_indefinite():
    cov = covariance(lambda u: 2 * u[0] ** 2 + 0.5 * (u[1] - 1) ** 2, np.array([0.0, 1.0]), 1e-3)
    assert abs(cov[0, 1]) < 1e-3 * math.sqrt(cov[0, 0] * cov[1, 1])
    assert covariance(lambda u: u[0] ** 2 - u[1] ** 2, np.zeros(2), 1e-3) is None


def test_truncexp_fit():
    bm, a = truncexp()
    res = fit(bm)
    assert res.converged
    assert abs(res.values["alpha"] + 2) < 5 * res.errors["alpha"]
    assert res.errors["alpha"] == pytest.approx(2 / math.sqrt(1e5), rel=0.05)
    assert res.gradient_max_norm <= 1e-6
    assert a.value == res.values["alpha"] and a.error == res.errors["alpha"]


def test_product_fit_recovers_truth():
    x, y = new_observable("x", 0, 10), new_observable("y", 0, 10)
    ax = new_parameter("ax", -2.4, 0.1, -10, 10)
    ay = new_parameter("ay", -1.1, 0.1, -10, 10)
    from parfit import ProdPdf

    pdf = ProdPdf("p", [ExpPdf("ex", x, ax), ExpPdf("ey", y, ay)])
    data = generate(pdf, 50_000, 7)
    res = fit(set_data(pdf, data))
    assert res.converged
    for name, truth in (("ax", -2.4), ("ay", -1.1)):
        assert abs(res.values[name] - truth) < 5 * res.errors[name]


def test_gaussian_mean_error(rng):
    x = new_observable("x", -20, 20)
    m = new_parameter("m", 0.5, 0.1, -5, 5)
    s = new_parameter("s", 2.0, 0.1, 0.1, 10, fixed=True)
    ds = UnbinnedDataSet(x)
    ds.add_events(rng.normal(0, 2, 4000))
    res = fit(set_data(GaussianPdf("g", x, m, s), ds))
    assert res.errors["m"] == pytest.approx(2 / math.sqrt(4000), rel=0.2)
    assert res.errors["s"] is None and "s" not in res.free and res.values["s"] == 2.0


def test_transform_safety_and_minimizer_agreement():
    bm, a = truncexp(n=20_000, seed=5)
    start = bm.parameter_values().copy()
    obj = Objective(bm)
    r1 = fit(bm, FitConfig("quasi-newton"))
    bm.set_parameter_values(start)
    r2 = fit(bm, FitConfig("nelder-mead"))
    assert r1.converged and r2.converged
    assert abs(r1.metric_value - r2.metric_value) <= 1e-4
    # probing the bounds directly: internal values far outside still map inside
    for u in (-100.0, 1e6, math.pi / 2):
        obj(np.array([u]))
    assert obj.seen_outside == 0


def test_reproducible_across_threads():
    bm, a = truncexp(n=60_000, seed=9)
    start = bm.parameter_values().copy()
    values = []
    for backend in (Backend.serial(), Backend.threaded(1), Backend.threaded(3)):
        bm.set_parameter_values(start)
        values.append(fit(bm, backend=backend).values["alpha"].hex())
    assert len(set(values)) == 1


def test_fraction_overflow_penalty():
    x = new_observable("x", 0, 10)
    c = lambda n: PolynomialPdf(n, x, [new_parameter(f"{n}0", 1, 0.1, 0, 2, fixed=True)])
    f1 = new_parameter("f1", 0.7, 0.05, 0, 1)
    f2 = new_parameter("f2", 0.7, 0.05, 0, 1)
    pdf = AddPdf("s", [c("a"), c("b"), c("d")], [f1, f2])
    ds = UnbinnedDataSet(x)
    ds.add_events(np.array([1.0, 2.0]))
    obj = Objective(set_data(pdf, ds))
    u = define_parameters(obj.model.registry, obj.free)
    assert obj(u) == PENALTY


def test_no_free_parameters():
    x = new_observable("x", 0, 1)
    pdf = ExpPdf("e", x, new_parameter("a", 0, 0.1, -1, 1, fixed=True))
    ds = UnbinnedDataSet(x)
    ds.add_events(np.array([0.5]))
    with pytest.raises(ParfitError):
        fit(set_data(pdf, ds))


def test_report_roundtrip():
    bm, a = truncexp(n=5000, seed=2)
    res = FitManager(bm).fit()
    back = FitResult.from_report(res.to_report())
    assert back.values == res.values and back.errors == res.errors
    assert back.metric_value == res.metric_value and back.status == res.status
    assert back.free == res.free


def test_fit_config_validation():
    with pytest.raises(ParfitError):
        FitConfig(minimizer="migrad")
    with pytest.raises(ParfitError):
        FitConfig(gradient_tolerance=0)
