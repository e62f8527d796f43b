"""JSON scenario files: schema, validation and typed access."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import jsonschema
import numpy as np

from .connections import Connection, levi_civita
from .densities import BracketData, DensityElement, UpperMetric, as_weight
from .dynamics import BasePath, ProjectiveEhresmannData
from .expr import ExprError, parse
from .geometry import Chart, TransitionMap

DEFAULT_TOLERANCES = {
    "algebraic": 1e-10,
    "two_chart": 1e-8,
    "ode": 1e-4,
    "fit": 1e-6,
}

_expr = {"type": ["string", "number"]}
_vector = {"type": "array", "items": _expr, "minItems": 1}
_matrix = {"type": "array", "items": _vector, "minItems": 1}
_cube = {"type": "array", "items": _matrix, "minItems": 1}
_numbers = {"type": "array", "items": {"type": "number"}, "minItems": 1}
_box = {
    "type": "array",
    "items": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
    "minItems": 2,
}
_density = {
    "type": "array",
    "items": {
        "type": "object",
        "properties": {"weight": {"type": ["string", "number"]}, "coeff": _expr},
        "required": ["weight", "coeff"],
        "additionalProperties": False,
    },
}

SCHEMA: dict[str, Any] = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "title": "projgeom scenario",
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "dim": {"type": "integer", "minimum": 2},
        "chart": {
            "type": "object",
            "properties": {"box": _box},
            "required": ["box"],
            "additionalProperties": False,
        },
        "transition": {
            "type": "object",
            "properties": {"forward": _vector, "inverse": _vector},
            "required": ["forward", "inverse"],
            "additionalProperties": False,
        },
        "metric": _matrix,
        "connection": _cube,
        "upper_metric": _matrix,
        "theta": _vector,
        "omega0": _matrix,
        "function": _expr,
        "bracket": {
            "type": "object",
            "properties": {
                "weight": {"type": ["string", "number"]},
                "S": _matrix,
                "gamma": _vector,
                "theta": _expr,
            },
            "additionalProperties": False,
        },
        "densities": {
            "type": "object",
            "properties": {"a": _density, "b": _density},
            "additionalProperties": False,
        },
        "geodesic": {
            "type": "object",
            "properties": {
                "x0": _numbers,
                "v0": _numbers,
                "T": {"type": "number", "exclusiveMinimum": 0},
                "h": {"type": "number", "exclusiveMinimum": 0},
            },
            "required": ["x0", "v0"],
            "additionalProperties": False,
        },
        "transport": {
            "type": "object",
            "properties": {
                "phi": _matrix,
                "psi": _cube,
                "eta": _matrix,
                "path": _vector,
                "xi0": _numbers,
                "T": {"type": "number", "exclusiveMinimum": 0},
                "h": {"type": "number", "exclusiveMinimum": 0},
                "pairs": {"type": "integer", "minimum": 3},
                "seed": {"type": "integer"},
            },
            "required": ["phi", "psi", "eta", "path"],
            "additionalProperties": False,
        },
        "samples": {
            "type": "object",
            "properties": {
                "points": {"type": "array", "items": _numbers, "minItems": 1},
                "count": {"type": "integer", "minimum": 1},
                "seed": {"type": "integer"},
            },
            "additionalProperties": False,
        },
        "tolerances": {
            "type": "object",
            "properties": {k: {"type": "number", "exclusiveMinimum": 0} for k in DEFAULT_TOLERANCES},
            "additionalProperties": False,
        },
    },
    "required": ["dim", "chart"],
    "additionalProperties": False,
}


class ScenarioError(ValueError):
    """Schema or consistency problem; ``path`` is a JSON pointer."""

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path or '/'}: {message}")
        self.path = path or "/"
        self.detail = message


def _pointer(parts) -> str:
    return "".join(f"/{str(p).replace('~', '~0').replace('/', '~1')}" for p in parts)


def validate(data: Any) -> None:
    validator = jsonschema.Draft202012Validator(SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: (list(map(str, e.absolute_path)), e.message))
    if errors:
        e = errors[0]
        raise ScenarioError(e.message, _pointer(e.absolute_path))
    _check_shapes(data)


def _check_shapes(data: dict) -> None:
    n = data["dim"]

    def need(cond, msg, *path):
        if not cond:
            raise ScenarioError(msg, _pointer(path))

    need(len(data["chart"]["box"]) == n, f"expected {n} intervals", "chart", "box")
    for key in ("metric", "upper_metric", "omega0"):
        if key in data:
            need(len(data[key]) == n, f"expected {n} rows", key)
            for i, row in enumerate(data[key]):
                need(len(row) == n, f"expected {n} entries", key, i)
    if "connection" in data:
        c = data["connection"]
        need(len(c) == n, f"expected {n} planes", "connection")
        for k, plane in enumerate(c):
            need(len(plane) == n, f"expected {n} rows", "connection", k)
            for i, row in enumerate(plane):
                need(len(row) == n, f"expected {n} entries", "connection", k, i)
    if "theta" in data:
        need(len(data["theta"]) == n, f"expected {n} components", "theta")
    if "transition" in data:
        for key in ("forward", "inverse"):
            need(len(data["transition"][key]) == n, f"expected {n} components", "transition", key)
    for key in ("x0", "v0"):
        if "geodesic" in data:
            need(len(data["geodesic"][key]) == n, f"expected {n} components", "geodesic", key)
    if "transport" in data:
        tr = data["transport"]
        need(len(tr["path"]) == n, f"expected {n} components", "transport", "path")
    for i, p in enumerate(data.get("samples", {}).get("points", [])):
        need(len(p) == n, f"expected a {n}-dim point", "samples", "points", i)
    _check_expressions(data, n)


_EXPR_KEYS = ("metric", "connection", "upper_metric", "theta", "omega0", "function", "transition")


def _check_expressions(data: dict, n: int) -> None:
    def walk(node, path, dim):
        if isinstance(node, str):
            try:
                parse(node, dim)
            except ExprError as exc:
                raise ScenarioError(str(exc), _pointer(path)) from exc
        elif isinstance(node, dict):
            for k, v in node.items():
                walk(v, path + [k], dim)
        elif isinstance(node, list):
            for i, v in enumerate(node):
                walk(v, path + [i], dim)

    for key in _EXPR_KEYS:
        if key in data:
            walk(data[key], [key], n)
    b = data.get("bracket", {})
    for key in ("S", "gamma", "theta"):
        if key in b:
            walk(b[key], ["bracket", key], n)
    for name, items in data.get("densities", {}).items():
        for i, item in enumerate(items):
            walk(item["coeff"], ["densities", name, i, "coeff"], n)
            try:
                as_weight(item["weight"])
            except (ValueError, ZeroDivisionError) as exc:
                raise ScenarioError(f"bad weight {item['weight']!r}", _pointer(["densities", name, i, "weight"])) from exc
    tr = data.get("transport", {})
    for key in ("phi", "psi", "eta"):
        if key in tr:
            walk(tr[key], ["transport", key], n)
    if "path" in tr:
        walk(tr["path"], ["transport", "path"], 1)


@dataclass
class Scenario:
    raw: dict
    dim: int
    chart: Chart
    tolerances: dict = field(default_factory=dict)

    @classmethod
    def from_dict(cls, data: dict) -> "Scenario":
        validate(data)
        tol = dict(DEFAULT_TOLERANCES)
        tol.update(data.get("tolerances", {}))
        return cls(data, data["dim"], Chart(data["dim"], tuple(map(tuple, data["chart"]["box"]))), tol)

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            data = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ScenarioError(f"invalid JSON: {exc.msg} (line {exc.lineno})") from exc
        except OSError as exc:
            raise ScenarioError(f"cannot read scenario: {exc.strerror}") from exc
        return cls.from_dict(data)

    @property
    def name(self) -> str:
        return self.raw.get("name", "scenario")

    def has(self, key: str) -> bool:
        return key in self.raw

    def require(self, *keys: str) -> None:
        missing = [k for k in keys if k not in self.raw]
        if missing:
            raise ScenarioError(f"missing required entry {missing[0]!r}", _pointer([missing[0]]))

    # -- geometry -------------------------------------------------------------

    def points(self) -> list[list[float]]:
        spec = self.raw.get("samples", {})
        if "points" in spec:
            return [list(map(float, p)) for p in spec["points"]]
        return self.chart.sample(spec.get("count", 20), spec.get("seed", 0)).tolist()

    def transition(self) -> TransitionMap:
        self.require("transition")
        t = self.raw["transition"]
        return TransitionMap(t["forward"], t["inverse"], self.dim)

    def connection(self) -> Connection:
        if "connection" in self.raw:
            return Connection(self.raw["connection"], self.dim)
        if "metric" in self.raw:
            return levi_civita(self.raw["metric"], self.dim, self.points())
        return Connection.zero(self.dim)

    def metric(self):
        self.require("metric")
        return self.raw["metric"]

    def upper_metric(self) -> UpperMetric:
        if "upper_metric" in self.raw:
            return UpperMetric(self.raw["upper_metric"], self.dim)
        if "metric" in self.raw:
            return UpperMetric.inverse_of(self.raw["metric"], self.dim)
        return UpperMetric.identity(self.dim)

    def theta(self) -> list:
        if "theta" in self.raw:
            return self.raw["theta"]
        rng = np.random.default_rng(self.raw.get("samples", {}).get("seed", 0))
        return [float(v) for v in rng.uniform(-1, 1, self.dim)]

    def function(self):
        n = self.dim
        default = " + ".join(f"sin(x{i})*x{(i + 1) % n}" for i in range(n))
        return self.raw.get("function", default)

    def bracket(self) -> BracketData:
        b = self.raw.get("bracket", {})
        S = UpperMetric(b["S"], self.dim) if "S" in b else self.upper_metric()
        return BracketData.build(S, b.get("gamma"), b.get("theta"), b.get("weight", 0))

    def densities(self) -> tuple[DensityElement, DensityElement]:
        d = self.raw.get("densities", {})
        n = self.dim
        a = d.get("a", [{"weight": "0", "coeff": "x0"}, {"weight": "1", "coeff": f"x{n - 1}^2"}])
        b = d.get("b", [{"weight": "1/2", "coeff": "x1"}, {"weight": "-1", "coeff": "x0*x1 + 1"}])
        return DensityElement.from_json(a, n), DensityElement.from_json(b, n)

    # -- dynamics ---------------------------------------------------------------

    def geodesic(self) -> dict:
        self.require("geodesic")
        g = dict(self.raw["geodesic"])
        g.setdefault("T", 0.5)
        g.setdefault("h", 1e-3)
        return g

    def transport(self) -> tuple[ProjectiveEhresmannData, BasePath, dict]:
        self.require("transport")
        tr = self.raw["transport"]
        E = ProjectiveEhresmannData(tr["phi"], tr["psi"], tr["eta"], self.dim)
        opts = {
            "xi0": tr.get("xi0", [0.0] * E.fibre_dim),
            "T": tr.get("T", 1.0),
            "h": tr.get("h", 1e-3),
            "pairs": tr.get("pairs", 12),
            "seed": tr.get("seed", 0),
        }
        if len(opts["xi0"]) != E.fibre_dim:
            raise ScenarioError(f"expected {E.fibre_dim} components", "/transport/xi0")
        return E, BasePath(tr["path"]), opts
