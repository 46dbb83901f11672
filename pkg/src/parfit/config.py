"""Declarative model configuration (YAML).

Schema::

    observables:
      - {name: x, lower: 0.0, upper: 10.0, bins: 100}     # bins optional
    parameters:
      - {name: alpha, init: -1.0, step: 0.1, lower: -10.0, upper: 10.0, fixed: false}
    pdf:                                                   # nested node spec
      type: exp                                            # see NODE_TYPES
      name: model
      observable: x
      alpha: alpha
    metric: nll                                            # nll | chi2
    fit: {minimizer: quasi-newton, max_iterations: 10000,
          gradient_tolerance: 1.0e-6, simplex_tolerance: 1.0e-8, step_scale: 0.1}
    grid: {points: 1024, rule: richardson}

Node keys by type:

    exp           observable, alpha
    gaussian      observable, mean, sigma
    breit_wigner  observable, mass, width
    polynomial    observable, coefficients: [names]
    product       children: [nodes]
    sum           children: [nodes], fractions: [names]
    composite     outer: node, inner: node
    mapped        boundaries: [names or numbers], targets: [nodes]
    convolution   model: node, resolution: node
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .engine import MetricKind
from .errors import ConfigError, ParfitError
from .fitting import FitConfig
from .pdfs import (
    AddPdf,
    BreitWignerPdf,
    CompositePdf,
    ConvolutionPdf,
    ExpPdf,
    GaussianPdf,
    MappedPdf,
    PdfNode,
    PolynomialPdf,
    ProdPdf,
)
from .variables import GridSpec, Variable, new_observable, new_parameter

PRIMITIVE_ROLES = {
    "exp": ("alpha",),
    "gaussian": ("mean", "sigma"),
    "breit_wigner": ("mass", "width"),
}
NODE_TYPES = (*PRIMITIVE_ROLES, "polynomial", "product", "sum", "composite", "mapped", "convolution")
# child slot names for the combinators with a fixed number of children
_PAIRS = {"composite": ("outer", "inner"), "convolution": ("model", "resolution")}


@dataclass
class ObservableSpec:
    name: str
    lower: float
    upper: float
    bins: int | None = None


@dataclass
class ParameterSpec:
    name: str
    init: float
    step: float
    lower: float
    upper: float
    fixed: bool = False


@dataclass
class NodeSpec:
    type: str
    name: str
    observable: str | None = None
    params: dict[str, str] = field(default_factory=dict)
    coefficients: list[str] = field(default_factory=list)
    children: list["NodeSpec"] = field(default_factory=list)
    fractions: list[str] = field(default_factory=list)
    boundaries: list[str | float] = field(default_factory=list)

    def to_dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {"type": self.type, "name": self.name}
        if self.type in PRIMITIVE_ROLES or self.type == "polynomial":
            out["observable"] = self.observable
        out.update(self.params)
        if self.type == "polynomial":
            out["coefficients"] = list(self.coefficients)
        elif self.type in ("product", "sum"):
            out["children"] = [c.to_dict() for c in self.children]
            if self.type == "sum":
                out["fractions"] = list(self.fractions)
        elif self.type in _PAIRS:
            a, b = _PAIRS[self.type]
            out[a] = self.children[0].to_dict()
            out[b] = self.children[1].to_dict()
        elif self.type == "mapped":
            out["boundaries"] = list(self.boundaries)
            out["targets"] = [c.to_dict() for c in self.children]
        return out


@dataclass
class ModelConfig:
    observables: list[ObservableSpec]
    parameters: list[ParameterSpec]
    pdf: NodeSpec
    metric: str = "nll"
    fit: FitConfig = field(default_factory=FitConfig)
    grid: GridSpec = field(default_factory=GridSpec)

    def to_dict(self) -> dict[str, Any]:
        obs = []
        for o in self.observables:
            d = {"name": o.name, "lower": o.lower, "upper": o.upper}
            if o.bins is not None:
                d["bins"] = o.bins
            obs.append(d)
        return {
            "observables": obs,
            "parameters": [asdict(p) for p in self.parameters],
            "pdf": self.pdf.to_dict(),
            "metric": self.metric,
            "fit": asdict(self.fit),
            "grid": asdict(self.grid),
        }

    def dump(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def save(self, path):
        Path(path).write_text(self.dump())


# -- parsing ------------------------------------------------------------------


def _require(d: dict, key: str, path: str):
    if not isinstance(d, dict):
        raise ConfigError(path, "expected a mapping")
    if key not in d:
        raise ConfigError(f"{path}.{key}", "missing required key")
    return d[key]


def _check_keys(d: dict, allowed, path: str):
    for k in d:
        if k not in allowed:
            raise ConfigError(f"{path}.{k}", f"unknown key (allowed: {', '.join(allowed)})")


def _number(v, path: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {v!r}")
    return float(v)


def _name(v, path: str) -> str:
    if not isinstance(v, str):
        raise ConfigError(path, f"expected a name, got {v!r}")
    return v


def _parse_node(d, path: str, observables: set[str], parameters: set[str]) -> NodeSpec:
    if not isinstance(d, dict):
        raise ConfigError(path, "expected a node mapping")
    kind = _require(d, "type", path)
    if kind not in NODE_TYPES:
        raise ConfigError(f"{path}.type", f"unknown node type {kind!r} (known: {', '.join(NODE_TYPES)})")
    name = _name(d.get("name", kind), f"{path}.name")

    def obs_ref(key="observable"):
        ref = _name(_require(d, key, path), f"{path}.{key}")
        if ref not in observables:
            raise ConfigError(f"{path}.{key}", f"unknown observable {ref!r}")
        return ref

    def par_ref(v, p):
        ref = _name(v, p)
        if ref not in parameters:
            raise ConfigError(p, f"unknown parameter {ref!r}")
        return ref

    def child_list(key, min_len):
        items = _require(d, key, path)
        if not isinstance(items, list) or len(items) < min_len:
            raise ConfigError(f"{path}.{key}", f"expected a list of at least {min_len} nodes")
        return [_parse_node(c, f"{path}.{key}[{i}]", observables, parameters) for i, c in enumerate(items)]

    if kind in PRIMITIVE_ROLES:
        roles = PRIMITIVE_ROLES[kind]
        _check_keys(d, ("type", "name", "observable", *roles), path)
        params = {r: par_ref(_require(d, r, path), f"{path}.{r}") for r in roles}
        return NodeSpec(kind, name, observable=obs_ref(), params=params)
    if kind == "polynomial":
        _check_keys(d, ("type", "name", "observable", "coefficients"), path)
        coeffs = _require(d, "coefficients", path)
        if not isinstance(coeffs, list) or not coeffs:
            raise ConfigError(f"{path}.coefficients", "expected a non-empty list of parameter names")
        return NodeSpec(
            kind, name, observable=obs_ref(),
            coefficients=[par_ref(c, f"{path}.coefficients[{i}]") for i, c in enumerate(coeffs)],
        )
    if kind == "product":
        _check_keys(d, ("type", "name", "children"), path)
        return NodeSpec(kind, name, children=child_list("children", 2))
    if kind == "sum":
        _check_keys(d, ("type", "name", "children", "fractions"), path)
        children = child_list("children", 2)
        fr = _require(d, "fractions", path)
        if not isinstance(fr, list) or len(fr) != len(children) - 1:
            raise ConfigError(f"{path}.fractions", f"expected {len(children) - 1} fraction names")
        return NodeSpec(kind, name, children=children, fractions=[par_ref(f, f"{path}.fractions[{i}]") for i, f in enumerate(fr)])
    if kind in _PAIRS:
        a, b = _PAIRS[kind]
        _check_keys(d, ("type", "name", a, b), path)
        return NodeSpec(
            kind, name,
            children=[
                _parse_node(_require(d, a, path), f"{path}.{a}", observables, parameters),
                _parse_node(_require(d, b, path), f"{path}.{b}", observables, parameters),
            ],
        )
    # mapped
    _check_keys(d, ("type", "name", "boundaries", "targets"), path)
    targets = child_list("targets", 1)
    bounds = _require(d, "boundaries", path)
    if not isinstance(bounds, list) or len(bounds) != len(targets) + 1:
        raise ConfigError(f"{path}.boundaries", f"expected {len(targets) + 1} boundaries")
    parsed = []
    for i, b in enumerate(bounds):
        p = f"{path}.boundaries[{i}]"
        parsed.append(par_ref(b, p) if isinstance(b, str) else _number(b, p))
    return NodeSpec(kind, name, children=targets, boundaries=parsed)


def parse_config(data: dict) -> ModelConfig:
    if not isinstance(data, dict):
        raise ConfigError("<root>", "expected a mapping")
    _check_keys(data, ("observables", "parameters", "pdf", "metric", "fit", "grid"), "<root>")

    obs_items = _require(data, "observables", "<root>")
    if not isinstance(obs_items, list) or not obs_items:
        raise ConfigError("observables", "expected a non-empty list")
    observables = []
    for i, o in enumerate(obs_items):
        p = f"observables[{i}]"
        if not isinstance(o, dict):
            raise ConfigError(p, "expected a mapping")
        _check_keys(o, ("name", "lower", "upper", "bins"), p)
        bins = o.get("bins")
        if bins is not None and (isinstance(bins, bool) or not isinstance(bins, int) or bins < 1):
            raise ConfigError(f"{p}.bins", f"expected a positive integer, got {bins!r}")
        observables.append(
            ObservableSpec(_name(_require(o, "name", p), f"{p}.name"), _number(_require(o, "lower", p), f"{p}.lower"),
                           _number(_require(o, "upper", p), f"{p}.upper"), bins)
        )

    parameters = []
    for i, q in enumerate(data.get("parameters") or []):
        p = f"parameters[{i}]"
        if not isinstance(q, dict):
            raise ConfigError(p, "expected a mapping")
        _check_keys(q, ("name", "init", "step", "lower", "upper", "fixed"), p)
        parameters.append(
            ParameterSpec(
                _name(_require(q, "name", p), f"{p}.name"),
                *(_number(_require(q, k, p), f"{p}.{k}") for k in ("init", "step", "lower", "upper")),
                fixed=bool(q.get("fixed", False)),
            )
        )

    names = [o.name for o in observables] + [q.name for q in parameters]
    dupes = {n for n in names if names.count(n) > 1}
    if dupes:
        raise ConfigError("<root>", f"duplicate variable names: {sorted(dupes)}")

    pdf = _parse_node(_require(data, "pdf", "<root>"), "pdf", {o.name for o in observables}, {q.name for q in parameters})

    metric = data.get("metric", "nll")
    try:
        metric = MetricKind.parse(metric).value
    except ParfitError as e:
        raise ConfigError("metric", str(e)) from None
    if metric == "chi2":
        for i, o in enumerate(observables):
            if o.bins is None:
                raise ConfigError(f"observables[{i}].bins", "required for a chi2 fit")

    fit_d = data.get("fit") or {}
    _check_keys(fit_d, tuple(FitConfig.__dataclass_fields__), "fit")
    grid_d = data.get("grid") or {}
    _check_keys(grid_d, tuple(GridSpec.__dataclass_fields__), "grid")
    try:
        fit_cfg = FitConfig(**fit_d)
    except (ParfitError, TypeError) as e:
        raise ConfigError("fit", str(e)) from None
    try:
        grid = GridSpec(**grid_d)
    except (ValueError, TypeError) as e:
        raise ConfigError("grid", str(e)) from None
    return ModelConfig(observables, parameters, pdf, metric, fit_cfg, grid)


def load_config(path) -> ModelConfig:
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as e:
        raise ConfigError(str(path), f"not valid YAML: {e}") from None
    return parse_config(data)


def loads_config(text: str) -> ModelConfig:
    return parse_config(yaml.safe_load(text))


# -- building -----------------------------------------------------------------


@dataclass
class Model:
    pdf: PdfNode
    observables: list[Variable]
    parameters: dict[str, Variable]
    config: ModelConfig

    def observable(self, name: str) -> Variable:
        for v in self.observables:
            if v.name == name:
                return v
        raise KeyError(name)


def build_model(cfg: ModelConfig) -> Model:
    """Instantiate fresh Variables and the PDF graph described by ``cfg``."""
    obs = {o.name: new_observable(o.name, o.lower, o.upper) for o in cfg.observables}
    pars = {}
    for i, q in enumerate(cfg.parameters):
        try:
            pars[q.name] = new_parameter(q.name, q.init, q.step, q.lower, q.upper, fixed=q.fixed)
        except ParfitError as e:
            raise ConfigError(f"parameters[{i}]", str(e)) from None

    def make(n: NodeSpec, path: str) -> PdfNode:
        try:
            if n.type == "exp":
                return ExpPdf(n.name, obs[n.observable], pars[n.params["alpha"]])
            if n.type == "gaussian":
                return GaussianPdf(n.name, obs[n.observable], pars[n.params["mean"]], pars[n.params["sigma"]])
            if n.type == "breit_wigner":
                return BreitWignerPdf(n.name, obs[n.observable], pars[n.params["mass"]], pars[n.params["width"]])
            if n.type == "polynomial":
                return PolynomialPdf(n.name, obs[n.observable], [pars[c] for c in n.coefficients])
            if n.type == "product":
                return ProdPdf(n.name, [make(c, f"{path}.children[{i}]") for i, c in enumerate(n.children)])
            if n.type == "sum":
                kids = [make(c, f"{path}.children[{i}]") for i, c in enumerate(n.children)]
                return AddPdf(n.name, kids, [pars[f] for f in n.fractions])
            if n.type in _PAIRS:
                a, b = _PAIRS[n.type]
                first = make(n.children[0], f"{path}.{a}")
                second = make(n.children[1], f"{path}.{b}")
                cls = CompositePdf if n.type == "composite" else ConvolutionPdf
                return cls(n.name, first, second)
            kids = [make(c, f"{path}.targets[{i}]") for i, c in enumerate(n.children)]
            bounds = [pars[b] if isinstance(b, str) else b for b in n.boundaries]
            return MappedPdf(n.name, bounds, kids)
        except ConfigError:
            raise
        except ParfitError as e:
            raise ConfigError(path, str(e)) from None

    pdf = make(cfg.pdf, "pdf")
    return Model(pdf, list(obs.values()), pars, cfg)
