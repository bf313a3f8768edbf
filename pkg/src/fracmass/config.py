"""JSON run configuration: parsing, validation and construction of problem objects.

Numbers may be JSON numbers or decimal strings; both go through ``Decimal``
so "0.1" becomes the double nearest to one tenth.  Unknown keys are errors.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path
from typing import Any

from .grid import Field, GridError, make_grid
from .problem import CoefficientFn, Nonlinearity, ProblemSpec, gaussian_bumps, smooth_bump
from .solver import SolverConfig

__all__ = ["ConfigError", "RunConfig", "load_config", "parse_config", "DEFAULT_CONFIG", "set_path"]


class ConfigError(ValueError):
    """Malformed or inadmissible configuration (exit code 2)."""


DEFAULT_CONFIG: dict[str, Any] = {
    "grid": {"d": 1, "n": 4096, "L": "40"},
    "kernel": {"alpha": "1"},
}

_ALLOWED = {
    "grid": {"d", "n", "L"},
    "kernel": {"alpha", "r", "R"},
    "coefficients": {"k", "h"},
    "nonlinearity": {"kind", "beta"},
    "initial": {"terms", "theorem_mode"},
    "solver": {"t_max", "n_steps", "substeps_per_step", "picard_tol", "picard_max_iter", "snapshot_stride",
               "adaptive", "adaptive_tol"},
    "output": {"dir", "snapshots"},
    "compare": {"factor", "add"},
    "sweep": {"parameter", "values"},
    "checks": {"decay_p", "epsilons", "kernel_taus", "condition_d"},
}
_TOP = set(_ALLOWED) | {"seed"}
_COEF_KEYS = {
    "constant": {"kind", "c"},
    "power": {"kind", "a", "sigma"},
    "exponential": {"kind", "a", "rate"},
    "decaying": {"kind", "a", "rate"},
    "table": {"kind", "times", "values"},
}
_TERM_KEYS = {
    "gaussian": {"type", "amplitude", "center", "width"},
    "bump": {"type", "amplitude", "center", "radius"},
    "constant": {"type", "value"},
}


def _num(v, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float, str, Decimal)):
        raise ConfigError(f"{where}: expected a number, got {v!r}")
    try:
        d = Decimal(str(v).strip())
    except InvalidOperation:
        raise ConfigError(f"{where}: not a decimal number: {v!r}") from None
    if not d.is_finite():
        raise ConfigError(f"{where}: must be finite")
    return float(d)


def _int(v, where: str) -> int:
    x = _num(v, where)
    if x != int(x):
        raise ConfigError(f"{where}: expected an integer, got {v!r}")
    return int(x)


def _bool(v, where: str) -> bool:
    if not isinstance(v, bool):
        raise ConfigError(f"{where}: expected true/false")
    return v


def _keys(obj, allowed: set, where: str):
    if not isinstance(obj, dict):
        raise ConfigError(f"{where}: expected an object")
    extra = set(obj) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")


def _coef(obj, where: str) -> CoefficientFn:
    if not isinstance(obj, dict) or "kind" not in obj:
        raise ConfigError(f"{where}: needs a 'kind'")
    kind = obj["kind"]
    if kind not in _COEF_KEYS:
        raise ConfigError(f"{where}: unknown kind {kind!r}")
    _keys(obj, _COEF_KEYS[kind], where)
    a = _num(obj.get("a", 1), f"{where}.a")
    try:
        if kind == "constant":
            return CoefficientFn.constant(_num(obj.get("c", 1), f"{where}.c"))
        if kind == "power":
            return CoefficientFn.power(_num(obj["sigma"], f"{where}.sigma"), a)
        if kind == "exponential":
            return CoefficientFn.exponential(_num(obj["rate"], f"{where}.rate"), a)
        if kind == "decaying":
            return CoefficientFn.decaying(_num(obj["rate"], f"{where}.rate"), a)
        times = [_num(x, f"{where}.times") for x in obj["times"]]
        values = [_num(x, f"{where}.values") for x in obj["values"]]
        return CoefficientFn.table(times, values)
    except KeyError as e:
        raise ConfigError(f"{where}: missing {e}") from None
    except (TypeError, ValueError) as e:
        raise ConfigError(f"{where}: {e}") from None


def _center(v, d: int, where: str):
    if isinstance(v, list):
        if len(v) != d:
            raise ConfigError(f"{where}: center needs {d} components")
        return [_num(x, where) for x in v]
    return [_num(v, where)] * d


def set_path(cfg: dict, dotted: str, value) -> dict:
    """Return a copy of ``cfg`` with ``a.b.c`` set to ``value``."""
    out = copy.deepcopy(cfg)
    node = out
    keys = dotted.split(".")
    for k in keys[:-1]:
        node = node.setdefault(k, {})
        if not isinstance(node, dict):
            raise ConfigError(f"sweep parameter {dotted!r} does not name a config field")
    node[keys[-1]] = value
    return out


@dataclass
class RunConfig:
    raw: dict  # resolved document, echoed verbatim into reports

    @property
    def seed(self) -> int:
        return _int(self.raw.get("seed", 0), "seed")

    @property
    def alpha(self) -> float:
        a = _num(self.raw["kernel"]["alpha"], "kernel.alpha")
        if not 0.0 < a < 2.0:
            raise ConfigError(f"kernel.alpha must lie in (0, 2), got {a}")
        return a

    def grid(self):
        g = self.raw["grid"]
        try:
            return make_grid(_int(g.get("d", 1), "grid.d"), _int(g.get("n", 1024), "grid.n"), _num(g.get("L", 40), "grid.L"))
        except GridError as e:
            raise ConfigError(f"grid: {e}") from None

    @property
    def direct_r(self):
        r = self.raw["kernel"].get("r")
        return None if r is None else _num(r, "kernel.r")

    @property
    def direct_R(self) -> float:
        return _num(self.raw["kernel"].get("R", 50), "kernel.R")

    def _need(self, section: str) -> dict:
        if section not in self.raw:
            raise ConfigError(f"missing section {section!r}")
        return self.raw[section]

    def _terms(self, terms, grid, where: str) -> Field:
        if not isinstance(terms, list) or not terms:
            raise ConfigError(f"{where}: needs a nonempty list of terms")
        total = Field.constant(grid, 0.0)
        for i, t in enumerate(terms):
            w = f"{where}[{i}]"
            if not isinstance(t, dict) or t.get("type") not in _TERM_KEYS:
                raise ConfigError(f"{w}: type must be one of {sorted(_TERM_KEYS)}")
            _keys(t, _TERM_KEYS[t["type"]], w)
            try:
                if t["type"] == "gaussian":
                    f = gaussian_bumps(grid, [(_num(t["amplitude"], w), _center(t.get("center", 0), grid.d, w),
                                              _num(t["width"], w))])
                elif t["type"] == "bump":
                    f = smooth_bump(grid, _num(t["amplitude"], w), _center(t.get("center", 0), grid.d, w),
                                    _num(t["radius"], w))
                else:
                    f = Field.constant(grid, _num(t["value"], w))
            except KeyError as e:
                raise ConfigError(f"{w}: missing {e}") from None
            total = total + f
        return total

    def initial(self, grid) -> Field:
        return self._terms(self._need("initial").get("terms"), grid, "initial.terms")

    @property
    def theorem_mode(self) -> bool:
        return _bool(self.raw.get("initial", {}).get("theorem_mode", True), "initial.theorem_mode")

    def spec(self) -> ProblemSpec:
        grid = self.grid()
        coefs = self._need("coefficients")
        for key in ("k", "h"):
            if key not in coefs:
                raise ConfigError(f"coefficients.{key} missing")
        nl = self._need("nonlinearity")
        try:
            kind = nl.get("kind", "square")
            phi = Nonlinearity.power(_num(nl["beta"], "nonlinearity.beta")) if kind == "power" else Nonlinearity(kind)
        except KeyError:
            raise ConfigError("nonlinearity.beta missing") from None
        except ValueError as e:
            raise ConfigError(f"nonlinearity: {e}") from None
        u0 = self.initial(grid)
        if self.theorem_mode and u0.min() < 0:
            raise ConfigError("initial datum has negative values but theorem_mode is on")
        return ProblemSpec(self.alpha, grid, _coef(coefs["k"], "coefficients.k"), _coef(coefs["h"], "coefficients.h"), phi, u0)

    def compare_initial(self, spec: ProblemSpec) -> Field:
        c = self.raw.get("compare", {"factor": 2})
        v0 = spec.u0 * _num(c.get("factor", 1), "compare.factor")
        if "add" in c:
            v0 = v0 + self._terms(c["add"], spec.grid, "compare.add")
        return v0

    def solver(self) -> SolverConfig:
        s = self._need("solver")
        kw: dict[str, Any] = {}
        for key in ("t_max", "picard_tol", "adaptive_tol"):
            if key in s:
                kw[key] = _num(s[key], f"solver.{key}")
        for key in ("n_steps", "substeps_per_step", "picard_max_iter", "snapshot_stride"):
            if key in s:
                kw[key] = _int(s[key], f"solver.{key}")
        if "adaptive" in s:
            kw["adaptive"] = _bool(s["adaptive"], "solver.adaptive")
        if "t_max" not in kw:
            raise ConfigError("solver.t_max missing")
        try:
            return SolverConfig(**kw)
        except ValueError as e:
            raise ConfigError(f"solver: {e}") from None

    @property
    def output_dir(self) -> str:
        return str(self.raw.get("output", {}).get("dir", "out"))

    @property
    def write_snapshots(self) -> bool:
        return _bool(self.raw.get("output", {}).get("snapshots", True), "output.snapshots")

    def checks(self) -> dict:
        c = self.raw.get("checks", {})
        out = {
            "decay_p": [_num(p, "checks.decay_p") for p in c.get("decay_p", [])],
            "epsilons": [_num(e, "checks.epsilons") for e in c.get("epsilons", [])],
            "kernel_taus": [_num(t, "checks.kernel_taus") for t in c.get("kernel_taus", [])],
            "condition_d": [],
        }
        for i, case in enumerate(c.get("condition_d", [])):
            w = f"checks.condition_d[{i}]"
            _keys(case, {"alpha", "k", "T", "expect"}, w)
            expect = case.get("expect", "finite")
            if expect not in ("finite", "divergent"):
                raise ConfigError(f"{w}.expect must be 'finite' or 'divergent'")
            a = _num(case["alpha"], f"{w}.alpha")
            if not 0 < a < 2:
                raise ConfigError(f"{w}.alpha must lie in (0, 2)")
            out["condition_d"].append({"alpha": a, "k": _coef(case["k"], f"{w}.k"),
                                       "T": _num(case.get("T", 1), f"{w}.T"), "expect": expect})
        return out

    def sweep(self) -> tuple[str, list]:
        s = self._need("sweep")
        if not isinstance(s.get("parameter"), str) or not isinstance(s.get("values"), list) or not s["values"]:
            raise ConfigError("sweep needs 'parameter' (dotted path) and a nonempty 'values' list")
        return s["parameter"], s["values"]


def parse_config(doc: Any) -> RunConfig:
    """Validate a config document and merge defaults for grid and kernel."""
    if not isinstance(doc, dict):
        raise ConfigError("config must be a JSON object")
    extra = set(doc) - _TOP
    if extra:
        raise ConfigError(f"unknown sections {sorted(extra)}")
    for sec, allowed in _ALLOWED.items():
        if sec in doc:
            _keys(doc[sec], allowed, sec)
    raw = copy.deepcopy(doc)
    for sec, defaults in DEFAULT_CONFIG.items():
        raw[sec] = {**defaults, **raw.get(sec, {})}
    rc = RunConfig(raw)
    rc.alpha, rc.grid(), rc.seed  # eager validation of the always-present parts
    return rc


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        return parse_config({})
    try:
        text = Path(path).read_text()
    except OSError as e:
        raise ConfigError(f"cannot read config: {e}") from None
    try:
        doc = json.loads(text, parse_float=Decimal, parse_int=Decimal)
    except json.JSONDecodeError as e:
        raise ConfigError(f"invalid JSON: {e}") from None
    return parse_config(_plain(doc))


def _plain(obj):
    """Decimals back to their exact decimal strings so the echo is verbatim."""
    if isinstance(obj, Decimal):
        return int(obj) if obj == obj.to_integral_value() and "." not in str(obj) and "E" not in str(obj).upper() else str(obj)
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, list):
        return [_plain(v) for v in obj]
    return obj
