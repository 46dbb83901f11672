"""Bounded minimization of an engine metric.

Parameters with limits [a, b] are minimized in an unbounded internal
coordinate u with p = a + (b - a) * (sin(u) + 1) / 2, so every value the
metric sees lies inside the limits.
"""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field
from typing import Callable, NamedTuple

import numpy as np
import yaml

from .engine import PENALTY, Backend, BoundModel, MetricKind
from .errors import DomainError, NonFiniteMetric, ParfitError, ZeroIntegral
from .variables import ParameterRegistry

MIN_STEP = 1e-7
MAX_STEP = 0.1


# -- bounds transform ---------------------------------------------------------


def to_external(u, lower, upper):
    p = lower + (upper - lower) * (np.sin(u) + 1.0) / 2.0
    return np.clip(p, lower, upper)


def to_internal(p, lower, upper):
    s = 2.0 * (np.asarray(p, dtype=np.float64) - lower) / (upper - lower) - 1.0
    return np.arcsin(np.clip(s, -1.0, 1.0))


def dexternal_du(u, lower, upper):
    return (upper - lower) / 2.0 * np.cos(u)


def define_parameters(registry: ParameterRegistry, free: list[int] | None = None) -> np.ndarray:
    """Internal starting vector for the free parameters of ``registry``."""
    free = registry.free_indices() if free is None else free
    pars = [registry.parameters[i] for i in free]
    lo = np.array([p.lower for p in pars])
    hi = np.array([p.upper for p in pars])
    return to_internal([p.value for p in pars], lo, hi)


# -- numerical derivatives ----------------------------------------------------


class Gradient(NamedTuple):
    g: np.ndarray
    curvature: np.ndarray  # diagonal second derivative from the same probes
    one_sided: np.ndarray  # True where a probe failed and a one-sided difference was used


def _bad(v) -> bool:
    return not np.isfinite(v) or v >= PENALTY


def numeric_gradient(objective: Callable, u, h, f0: float | None = None) -> Gradient:
    """Fourth-order central differences with per-coordinate steps ``h``.

    Uses the five-point stencil (8*(f(u+h) - f(u-h)) - (f(u+2h) - f(u-2h))) / 12h.
    If probes on one side fail, falls back to a one-sided first-order difference
    and flags the coordinate.
    """
    u = np.asarray(u, dtype=np.float64)
    h = np.broadcast_to(np.asarray(h, dtype=np.float64), u.shape)
    if f0 is None:
        f0 = objective(u)
    g = np.zeros_like(u)
    curv = np.zeros_like(u)
    flags = np.zeros(u.shape, dtype=bool)
    for i in range(len(u)):
        e = np.zeros_like(u)
        e[i] = h[i]
        fp1 = objective(u + e)
        fm1 = objective(u - e)
        fp2 = objective(u + 2 * e)
        fm2 = objective(u - 2 * e)
        plus_ok = not (_bad(fp1) or _bad(fp2))
        minus_ok = not (_bad(fm1) or _bad(fm2))
        if plus_ok and minus_ok:
            g[i] = (8.0 * (fp1 - fm1) - (fp2 - fm2)) / (12.0 * h[i])
            curv[i] = (-fp2 + 16.0 * fp1 - 30.0 * f0 + 16.0 * fm1 - fm2) / (12.0 * h[i] * h[i])
            continue
        flags[i] = True
        if not _bad(fp1):
            g[i] = (fp1 - f0) / h[i]
        elif not _bad(fm1):
            g[i] = (f0 - fm1) / h[i]
        else:
            g[i] = np.nan
    return Gradient(g, curv, flags)


def hessian(objective: Callable, u, h, f0: float | None = None) -> np.ndarray:
    u = np.asarray(u, dtype=np.float64)
    h = np.broadcast_to(np.asarray(h, dtype=np.float64), u.shape)
    n = len(u)
    if f0 is None:
        f0 = objective(u)
    H = np.zeros((n, n))
    E = np.diag(h)
    for i in range(n):
        H[i, i] = (objective(u + E[i]) - 2.0 * f0 + objective(u - E[i])) / (h[i] * h[i])
        for j in range(i):
            fpp = objective(u + E[i] + E[j])
            fpm = objective(u + E[i] - E[j])
            fmp = objective(u - E[i] + E[j])
            fmm = objective(u - E[i] - E[j])
            H[i, j] = H[j, i] = (fpp - fpm - fmp + fmm) / (4.0 * h[i] * h[j])
    return H


def covariance(objective: Callable, u, h=1e-4, errordef: float = 0.5) -> np.ndarray | None:
    """Internal-space covariance ``2 * errordef * inv(Hessian)``; None if not positive definite."""
    H = hessian(objective, u, h)
    if not np.all(np.isfinite(H)):
        return None
    try:
        np.linalg.cholesky(H)
    except np.linalg.LinAlgError:
        return None
    return 2.0 * errordef * np.linalg.inv(H)


# -- minimizers ---------------------------------------------------------------


@dataclass
class MinimizeResult:
    u: np.ndarray
    f: float
    status: str
    iterations: int
    message: str = ""
    gradient: np.ndarray | None = None


def bfgs(
    objective: Callable,
    u0,
    steps: Callable[[np.ndarray], np.ndarray],
    gtol: float = 1e-6,
    max_iterations: int = 10000,
    armijo: float = 1e-4,
    max_halvings: int = 60,
    max_polish: int = 50,
) -> MinimizeResult:
    """Quasi-Newton minimization with an Armijo backtracking (halving) line search.

    ``steps(u)`` gives the finite-difference step per coordinate. The inverse
    Hessian starts from the diagonal curvature seen by the first gradient probe.
    """
    u = np.array(u0, dtype=np.float64)
    n = len(u)
    f = objective(u)
    if _bad(f):
        return MinimizeResult(u, f, "failed", 0, "objective not finite at the starting point")
    grad = numeric_gradient(objective, u, steps(u), f)

    def initial_inverse(curv):
        d = np.where(curv > 0, 1.0 / np.where(curv > 0, curv, 1.0), 1.0)
        return np.diag(d)

    Hinv = initial_inverse(grad.curvature)
    fresh = True
    g = grad.g
    polish = 0
    for it in range(max_iterations):
        if not np.all(np.isfinite(g)):
            return MinimizeResult(u, f, "failed", it, "gradient not finite", g)
        if np.max(np.abs(g)) <= gtol:
            return MinimizeResult(u, f, "converged", it, "", g)
        d = -Hinv @ g
        slope = g @ d
        if not slope < 0:
            Hinv = initial_inverse(grad.curvature)
            fresh = True
            d = -Hinv @ g
            slope = g @ d
        edm = -0.5 * slope
        flat = 1e-9 * max(1.0, abs(f))
        t = 1.0
        accepted = False
        if edm < flat:
            # The metric is flat to within its resolution here: its rounding
            # and the finite-difference bias of the gradient are comparable to
            # the remaining decrease. Step to the zero of the numerical
            # gradient as long as the metric does not rise by more than a few EDM.
            f_new = objective(u + d)
            if not _bad(f_new) and f_new <= f + 10.0 * edm + 64.0 * np.finfo(float).eps * abs(f):
                accepted = True
                polish += 1
                if polish > max_polish:
                    return MinimizeResult(u, f, "failed", it, "numerical gradient did not settle below tolerance", g)
        if not accepted:
            for _ in range(max_halvings):
                f_new = objective(u + t * d)
                if not _bad(f_new) and f_new <= f + armijo * t * slope:
                    accepted = True
                    break
                t *= 0.5
        if not accepted:
            if not fresh:
                Hinv = initial_inverse(grad.curvature)
                fresh = True
                continue
            return MinimizeResult(u, f, "failed", it, "line search could not decrease the metric", g)
        s = t * d
        u_new = u + s
        grad = numeric_gradient(objective, u_new, steps(u_new), f_new)
        y = grad.g - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            rho = 1.0 / sy
            I = np.eye(n)
            Hinv = (I - rho * np.outer(s, y)) @ Hinv @ (I - rho * np.outer(y, s)) + rho * np.outer(s, s)
            fresh = False
        u, f, g = u_new, f_new, grad.g
    return MinimizeResult(u, f, "max-iterations", max_iterations, "", g)


def nelder_mead(
    objective: Callable,
    u0,
    initial_step,
    tol: float = 1e-8,
    max_iterations: int = 10000,
    restarts: int = 5,
) -> MinimizeResult:
    """Downhill simplex (reflection 1, expansion 2, contraction 0.5, shrink 0.5).

    Stops when the simplex vertices lie within ``tol`` (relative to the best
    vertex's magnitude, at least 1) of the best vertex,
    then restarts from the best vertex while a restart still finds a lower value.
    """
    u0 = np.array(u0, dtype=np.float64)
    n = len(u0)
    step = np.broadcast_to(np.asarray(initial_step, dtype=np.float64), (n,))
    f0 = objective(u0)
    if _bad(f0):
        return MinimizeResult(u0, f0, "failed", 0, "objective not finite at the starting point")

    total_it = 0
    best_u, best_f = u0, f0
    for attempt in range(restarts + 1):
        pts = [best_u] + [best_u + step[i] * np.eye(n)[i] for i in range(n)]
        vals = [best_f] + [objective(p) for p in pts[1:]]
        sim = np.array(pts)
        fv = np.array(vals)
        converged = False
        while total_it < max_iterations:
            order = np.argsort(fv, kind="stable")
            sim, fv = sim[order], fv[order]
            spread = np.max(np.abs(sim[1:] - sim[0])) / max(1.0, np.max(np.abs(sim[0])))
            if spread <= tol:
                converged = True
                break
            total_it += 1
            centroid = sim[:-1].mean(axis=0)
            xr = centroid + (centroid - sim[-1])
            fr = objective(xr)
            if fr < fv[0]:
                xe = centroid + 2.0 * (centroid - sim[-1])
                fe = objective(xe)
                sim[-1], fv[-1] = (xe, fe) if fe < fr else (xr, fr)
                continue
            if fr < fv[-2]:
                sim[-1], fv[-1] = xr, fr
                continue
            if fr < fv[-1]:
                xc = centroid + 0.5 * (xr - centroid)
                fc = objective(xc)
                if fc <= fr:
                    sim[-1], fv[-1] = xc, fc
                    continue
            else:
                xc = centroid + 0.5 * (sim[-1] - centroid)
                fc = objective(xc)
                if fc < fv[-1]:
                    sim[-1], fv[-1] = xc, fc
                    continue
            for i in range(1, n + 1):
                sim[i] = sim[0] + 0.5 * (sim[i] - sim[0])
                fv[i] = objective(sim[i])
        i0 = int(np.argmin(fv))
        improved = fv[i0] < best_f
        if fv[i0] <= best_f:
            best_u, best_f = sim[i0].copy(), fv[i0]
        if not converged:
            return MinimizeResult(best_u, best_f, "max-iterations", total_it)
        if not improved and attempt > 0:
            break
    return MinimizeResult(best_u, best_f, "converged", total_it)


# -- fit manager --------------------------------------------------------------


@dataclass
class FitConfig:
    minimizer: str = "quasi-newton"
    max_iterations: int = 10000
    gradient_tolerance: float = 1e-6
    simplex_tolerance: float = 1e-8
    # finite-difference step = step_scale * Variable.step mapped to internal space
    step_scale: float = 0.1

    def __post_init__(self):
        if self.minimizer not in ("quasi-newton", "nelder-mead"):
            raise ParfitError(f"unknown minimizer {self.minimizer!r}")
        if not (self.gradient_tolerance > 0 and self.simplex_tolerance > 0 and self.step_scale > 0):
            raise ParfitError("tolerances and step scale must be positive")
        if self.max_iterations < 1:
            raise ParfitError("max_iterations must be positive")


@dataclass
class FitResult:
    status: str
    values: dict[str, float]
    errors: dict[str, float | None]
    metric_value: float
    n_metric_calls: int
    wall_time: float
    iterations: int = 0
    gradient_max_norm: float | None = None
    metric: str = "nll"
    minimizer: str = "quasi-newton"
    free: list[str] = field(default_factory=list)
    covariance: np.ndarray | None = None
    message: str = ""

    @property
    def converged(self) -> bool:
        return self.status == "converged"

    def to_report(self) -> str:
        lines = [
            f"status: {self.status}",
            f"minimizer: {self.minimizer}",
            f"metric: {self.metric}",
            f"metric_value: {self.metric_value!r}",
            f"n_metric_calls: {self.n_metric_calls}",
            f"iterations: {self.iterations}",
            f"gradient_max_norm: {'null' if self.gradient_max_norm is None else repr(self.gradient_max_norm)}",
            f"wall_time_s: {self.wall_time!r}",
        ]
        for name, v in self.values.items():
            err = self.errors.get(name)
            if name not in self.free:
                err_s = "fixed"
            elif err is None:
                err_s = "unavailable"
            else:
                err_s = repr(err)
            lines.append(f"parameter.{name}.value: {v!r}")
            lines.append(f"parameter.{name}.error: {err_s}")
        if self.message:
            lines.append(f"message: {json.dumps(self.message)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_report(cls, text: str) -> "FitResult":
        raw = yaml.safe_load(text)
        values, errors, free = {}, {}, []
        for key, v in raw.items():
            if not key.startswith("parameter."):
                continue
            name, what = key[len("parameter.") :].rsplit(".", 1)
            if what == "value":
                values[name] = float(v)
            elif v == "fixed":
                errors[name] = None
            else:
                free.append(name)
                errors[name] = None if v == "unavailable" else float(v)
        return cls(
            status=raw["status"],
            values=values,
            errors=errors,
            metric_value=float(raw["metric_value"]),
            n_metric_calls=int(raw["n_metric_calls"]),
            wall_time=float(raw["wall_time_s"]),
            iterations=int(raw["iterations"]),
            gradient_max_norm=None if raw["gradient_max_norm"] is None else float(raw["gradient_max_norm"]),
            metric=raw["metric"],
            minimizer=raw["minimizer"],
            free=free,
            message=raw.get("message", "") or "",
        )


class Objective:
    """Metric as a function of the internal vector of free parameters."""

    def __init__(self, model: BoundModel, metric=MetricKind.NLL, backend: Backend | None = None):
        self.model = model
        self.metric = MetricKind.parse(metric)
        self.backend = backend or Backend.serial()
        self.free = model.registry.free_indices()
        pars = [model.registry.parameters[i] for i in self.free]
        self.lower = np.array([p.lower for p in pars])
        self.upper = np.array([p.upper for p in pars])
        self.user_steps = np.array([p.step for p in pars])
        self.base = model.parameter_values()
        self.calls = 0
        self.seen_outside = 0

    def external(self, u) -> np.ndarray:
        params = self.base.copy()
        params[self.free] = to_external(np.asarray(u, dtype=np.float64), self.lower, self.upper)
        return params

    def __call__(self, u) -> float:
        self.calls += 1
        params = self.external(u)
        sub = params[self.free]
        if np.any(sub < self.lower) or np.any(sub > self.upper):
            self.seen_outside += 1
        try:
            v = self.model.eval_metric(params, self.metric, self.backend)
        except (DomainError, NonFiniteMetric, ZeroIntegral):
            return PENALTY
        return v if np.isfinite(v) else PENALTY

    def internal_steps(self, u, scale: float) -> np.ndarray:
        """Finite-difference step per coordinate: scale * user step mapped through the transform."""
        slope = np.abs(dexternal_du(u, self.lower, self.upper))
        with np.errstate(divide="ignore"):
            internal = np.where(slope > 0, self.user_steps / slope, np.inf)
        return np.clip(scale * internal, MIN_STEP, MAX_STEP)


def fit(
    model: BoundModel,
    config: FitConfig | None = None,
    metric=MetricKind.NLL,
    backend: Backend | None = None,
) -> FitResult:
    """Minimize the metric over the model's free parameters.

    On success the fitted values (and errors) are written back into the
    Variables. A max-iterations stop is reported in the status, not raised.
    """
    config = config or FitConfig()
    metric = MetricKind.parse(metric)
    t0 = time.perf_counter()
    obj = Objective(model, metric, backend)
    if not obj.free:
        raise ParfitError("no free parameters to fit")
    u0 = define_parameters(model.registry, obj.free)

    def steps(u):
        return obj.internal_steps(u, config.step_scale)

    if config.minimizer == "quasi-newton":
        res = bfgs(obj, u0, steps, config.gradient_tolerance, config.max_iterations)
    else:
        res = nelder_mead(obj, u0, np.clip(obj.internal_steps(u0, 1.0), MIN_STEP, 0.5), config.simplex_tolerance, config.max_iterations)

    names = [p.name for p in model.registry.parameters]
    free_names = [names[i] for i in obj.free]
    params = obj.external(res.u)
    values = dict(zip(names, map(float, params)))
    errors: dict[str, float | None] = {n: None for n in names}
    cov_ext = None
    gmax = None
    if res.status != "failed":
        h = steps(res.u)
        if res.gradient is None:
            res.gradient = numeric_gradient(obj, res.u, h, res.f).g
        gmax = float(np.max(np.abs(res.gradient)))
        cov = covariance(obj, res.u, h, metric.errordef)
        if cov is not None:
            J = np.diag(dexternal_du(res.u, obj.lower, obj.upper))
            cov_ext = J @ cov @ J
            for k, n in enumerate(free_names):
                errors[n] = float(math.sqrt(max(cov_ext[k, k], 0.0)))
        model.set_parameter_values(params)
        for p in model.registry.parameters:
            p.error = errors[p.name]

    return FitResult(
        status=res.status,
        values=values,
        errors=errors,
        metric_value=float(res.f),
        n_metric_calls=obj.calls,
        wall_time=time.perf_counter() - t0,
        iterations=res.iterations,
        gradient_max_norm=gmax,
        metric=metric.value,
        minimizer=config.minimizer,
        free=free_names,
        covariance=cov_ext,
        message=res.message,
    )


class FitManager:
    """Thin convenience wrapper: ``FitManager(model).fit()``."""

    def __init__(self, model: BoundModel, config: FitConfig | None = None, metric=MetricKind.NLL, backend: Backend | None = None):
        self.model = model
        self.config = config or FitConfig()
        self.metric = MetricKind.parse(metric)
        self.backend = backend

    def fit(self) -> FitResult:
        return fit(self.model, self.config, self.metric, self.backend)
