"""Scenario configuration: TOML parsing, validation and rendering.

A document looks like::

    name = "my-run"

    [mesh]
    n = 64

    [scheme]
    theta = 1.0
    dt = 0.5
    T = 500.0

    [params]            # any subset of ModelParams fields
    gamma = 0.8

    [initial]
    M = { kind = "uniform", value = 100.0 }
    F = { kind = "scaled", shape = "gaussian_center", total = 6700.0 }
    M_S = { kind = "uniform", value = 0.0 }

    [release]
    continuous = { kind = "scaled", shape = "uniform", lambda_crit_factor = 1.1 }
    periodic = { field = { kind = "uniform", value = 33000.0 }, period = 20.0 }

    [[release.impulses]]
    t = 7.0
    field = { kind = "gaussian", center = [0.75, 0.75], amplitude = 1e5 }

    [output]
    sample_every = 1.0
    snapshot_times = [0.0, 10.0]
    profiles = true
    fields = false

Field kinds: ``uniform`` (value), ``gaussian`` (center, amplitude),
``sinusoidal`` (base, amplitude, k), ``sum`` (terms), and ``scaled`` (shape in
uniform / gaussian_center / gaussian_topright, with either ``total`` or
``lambda_crit_factor``). ``scaled`` fields resolve to concrete fields;
rendering always writes concrete fields and explicit impulse lists.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, fields, replace
from typing import Any, Optional

import tomli
import tomli_w

from .mesh import build_mesh
from .model import ModelParams, lambda_crit
from .release import (
    FieldValidationError,
    Gaussian,
    Impulse,
    ReleaseSchedule,
    Sinusoidal,
    SpatialField,
    Sum,
    Uniform,
    evaluate_on_mesh,
    periodic_impulses,
    scaled_release,
)
from .stepper import SchemeConfig


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path or '<root>'}: {message}")
        self.path = path


@dataclass(frozen=True)
class OutputConfig:
    sample_every: float = 1.0
    snapshot_times: tuple[float, ...] = ()
    directory: Optional[str] = None
    profiles: bool = True
    fields: bool = False


@dataclass(frozen=True)
class ScenarioConfig:
    name: str = "custom"
    n: int = 64
    scheme: SchemeConfig = SchemeConfig()
    params: ModelParams = ModelParams()
    initial: tuple[SpatialField, SpatialField, SpatialField] = (Uniform(0.0), Uniform(0.0), Uniform(0.0))
    schedule: ReleaseSchedule = ReleaseSchedule()
    output: OutputConfig = OutputConfig()

    def __post_init__(self):
        validate(self)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        """Override scheme/mesh/output values by flat keyword (dt, theta, T, n,
        sample_every). Snapshots and impulses beyond a shortened T are dropped."""
        scheme = self.scheme
        out = self.output
        n = self.n
        schedule = self.schedule
        for k, v in kw.items():
            if v is None:
                continue
            if k in ("dt", "theta", "T"):
                scheme = replace(scheme, **{k: float(v)})
            elif k == "n":
                n = int(v)
            elif k == "sample_every":
                out = replace(out, sample_every=float(v))
            elif k == "directory":
                out = replace(out, directory=str(v))
            else:
                raise KeyError(k)
        if scheme.T < self.scheme.T:
            out = replace(out, snapshot_times=tuple(t for t in out.snapshot_times if t <= scheme.T))
            schedule = replace(schedule, impulses=tuple(i for i in schedule.impulses if i.t <= scheme.T))
        return replace(self, n=n, scheme=scheme, output=out, schedule=schedule)


def _multiple(x: float, dt: float) -> bool:
    return abs(x / dt - round(x / dt)) <= 1e-9 * max(1.0, abs(x / dt))


def validate(cfg: ScenarioConfig):
    if cfg.n < 1:
        raise ConfigError("mesh.n", "must be >= 1")
    dt, T = cfg.scheme.dt, cfg.scheme.T
    o = cfg.output
    if o.sample_every <= 0 or not _multiple(o.sample_every, dt):
        raise ConfigError("output.sample_every", f"{o.sample_every} is not a positive multiple of dt={dt}")
    for i, t in enumerate(o.snapshot_times):
        if t < 0 or t > T + 1e-9 or not _multiple(t, dt):
            raise ConfigError(f"output.snapshot_times[{i}]", f"{t} must be a multiple of dt={dt} in [0, T]")
    for i, imp in enumerate(cfg.schedule.impulses):
        if not _multiple(imp.t, dt):
            raise ConfigError(f"release.impulses[{i}].t", f"impulse time {imp.t} is not a multiple of dt={dt}")
        if imp.t > T + 1e-9:
            raise ConfigError(f"release.impulses[{i}].t", f"impulse time {imp.t} exceeds T={T}")


# --- parsing ----------------------------------------------------------------

def _num(v, path) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(path, f"expected a number, got {type(v).__name__}")
    if not math.isfinite(v):
        raise ConfigError(path, "must be finite")
    return float(v)


def _table(v, path) -> dict:
    if not isinstance(v, dict):
        raise ConfigError(path, f"expected a table, got {type(v).__name__}")
    return v


def _keys(d: dict, allowed, path):
    extra = sorted(set(d) - set(allowed))
    if extra:
        raise ConfigError(f"{path}.{extra[0]}" if path else extra[0], "unknown key")


def _join(path, key):
    return f"{path}.{key}" if path else key


def parse_field(d, path: str, params: ModelParams) -> SpatialField:
    d = _table(d, path)
    kind = d.get("kind")
    if kind == "uniform":
        _keys(d, ("kind", "value"), path)
        return Uniform(_num(d.get("value", 0.0), _join(path, "value")))
    if kind == "gaussian":
        _keys(d, ("kind", "center", "amplitude"), path)
        c = d.get("center", [0.5, 0.5])
        if not isinstance(c, list) or len(c) != 2:
            raise ConfigError(_join(path, "center"), "expected [x, y]")
        center = (_num(c[0], _join(path, "center[0]")), _num(c[1], _join(path, "center[1]")))
        return Gaussian(center, _num(d.get("amplitude", 1.0), _join(path, "amplitude")))
    if kind == "sinusoidal":
        _keys(d, ("kind", "base", "amplitude", "k"), path)
        return Sinusoidal(
            _num(d.get("base", 1.0), _join(path, "base")),
            _num(d.get("amplitude", 1.0), _join(path, "amplitude")),
            _num(d.get("k", 10.0), _join(path, "k")),
        )
    if kind == "sum":
        _keys(d, ("kind", "terms"), path)
        terms = d.get("terms", [])
        if not isinstance(terms, list):
            raise ConfigError(_join(path, "terms"), "expected an array of fields")
        return Sum(tuple(parse_field(t, f"{path}.terms[{i}]", params) for i, t in enumerate(terms)))
    if kind == "scaled":
        _keys(d, ("kind", "shape", "total", "lambda_crit_factor"), path)
        if ("total" in d) == ("lambda_crit_factor" in d):
            raise ConfigError(path, "scaled field needs exactly one of 'total' or 'lambda_crit_factor'")
        if "total" in d:
            total = _num(d["total"], _join(path, "total"))
        else:
            total = _num(d["lambda_crit_factor"], _join(path, "lambda_crit_factor")) * lambda_crit(params)
        try:
            return scaled_release(d.get("shape", ""), total)
        except ValueError as exc:
            raise ConfigError(_join(path, "shape"), str(exc)) from None
    raise ConfigError(_join(path, "kind"), f"unknown field kind {kind!r}")


def _parse_params(d) -> ModelParams:
    d = _table(d, "params")
    names = [f.name for f in fields(ModelParams)]
    _keys(d, names, "params")
    vals = {k: _num(v, f"params.{k}") for k, v in d.items()}
    try:
        return ModelParams(**vals)
    except ValueError as exc:
        raise ConfigError("params", str(exc)) from None


def config_from_dict(doc: dict) -> ScenarioConfig:
    _keys(doc, ("name", "mesh", "scheme", "params", "initial", "release", "output"), "")
    name = doc.get("name", "custom")
    if not isinstance(name, str):
        raise ConfigError("name", "expected a string")

    mesh = _table(doc.get("mesh", {}), "mesh")
    _keys(mesh, ("n",), "mesh")
    n = mesh.get("n", 64)
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise ConfigError("mesh.n", "expected a positive integer")

    sch = _table(doc.get("scheme", {}), "scheme")
    _keys(sch, ("theta", "dt", "T"), "scheme")
    svals = {k: _num(v, f"scheme.{k}") for k, v in sch.items()}
    try:
        scheme = SchemeConfig(**svals)
    except ValueError as exc:
        raise ConfigError("scheme", str(exc)) from None

    params = _parse_params(doc.get("params", {}))

    ini = _table(doc.get("initial", {}), "initial")
    _keys(ini, ("M", "F", "M_S"), "initial")
    initial = tuple(
        parse_field(ini[s], f"initial.{s}", params) if s in ini else Uniform(0.0) for s in ("M", "F", "M_S")
    )

    rel = _table(doc.get("release", {}), "release")
    _keys(rel, ("continuous", "impulses", "periodic"), "release")
    cont = parse_field(rel["continuous"], "release.continuous", params) if "continuous" in rel else Uniform(0.0)
    impulses = []
    raw = rel.get("impulses", [])
    if not isinstance(raw, list):
        raise ConfigError("release.impulses", "expected an array of tables")
    for i, imp in enumerate(raw):
        path = f"release.impulses[{i}]"
        imp = _table(imp, path)
        _keys(imp, ("t", "field"), path)
        if "t" not in imp or "field" not in imp:
            raise ConfigError(path, "impulse needs 't' and 'field'")
        impulses.append(Impulse(_num(imp["t"], path + ".t"), parse_field(imp["field"], path + ".field", params)))
    if "periodic" in rel:
        per = _table(rel["periodic"], "release.periodic")
        _keys(per, ("field", "period", "start", "until"), "release.periodic")
        if "field" not in per or "period" not in per:
            raise ConfigError("release.periodic", "needs 'field' and 'period'")
        period = _num(per["period"], "release.periodic.period")
        if period <= 0:
            raise ConfigError("release.periodic.period", "must be positive")
        start = _num(per.get("start", 0.0), "release.periodic.start")
        until = _num(per.get("until", scheme.T), "release.periodic.until")
        fld = parse_field(per["field"], "release.periodic.field", params)
        impulses.extend(periodic_impulses(fld, period, until, start))
    impulses.sort(key=lambda imp: imp.t)
    try:
        schedule = ReleaseSchedule(cont, tuple(impulses))
    except ValueError as exc:
        raise ConfigError("release.impulses", str(exc)) from None

    out = _table(doc.get("output", {}), "output")
    _keys(out, ("sample_every", "snapshot_times", "directory", "profiles", "fields"), "output")
    snaps = out.get("snapshot_times", [])
    if not isinstance(snaps, list):
        raise ConfigError("output.snapshot_times", "expected an array")
    for key in ("profiles", "fields"):
        if key in out and not isinstance(out[key], bool):
            raise ConfigError(f"output.{key}", "expected true/false")
    directory = out.get("directory")
    if directory is not None and not isinstance(directory, str):
        raise ConfigError("output.directory", "expected a string")
    output = OutputConfig(
        sample_every=_num(out.get("sample_every", 1.0), "output.sample_every"),
        snapshot_times=tuple(sorted(_num(t, f"output.snapshot_times[{i}]") for i, t in enumerate(snaps))),
        directory=directory,
        profiles=out.get("profiles", True),
        fields=out.get("fields", False),
    )
    _check_nonnegative(n, initial, schedule)
    return ScenarioConfig(name, n, scheme, params, initial, schedule, output)


def _check_nonnegative(n, initial, schedule):
    mesh = build_mesh(n)
    named = [(f"initial.{s}", f) for s, f in zip(("M", "F", "M_S"), initial)]
    named.append(("release.continuous", schedule.continuous))
    named += [(f"release.impulses[{i}].field", imp.field) for i, imp in enumerate(schedule.impulses)]
    for path, f in named:
        try:
            evaluate_on_mesh(f, mesh)
        except FieldValidationError as exc:
            raise ConfigError(path, str(exc)) from None


def parse_config(text: str) -> ScenarioConfig:
    try:
        doc = tomli.loads(text)
    except tomli.TOMLDecodeError as exc:
        raise ConfigError("", f"malformed document: {exc}") from None
    return config_from_dict(doc)


# --- rendering --------------------------------------------------------------

def field_to_dict(f: SpatialField) -> dict:
    if isinstance(f, Uniform):
        return {"kind": "uniform", "value": float(f.value)}
    if isinstance(f, Gaussian):
        return {"kind": "gaussian", "center": [float(c) for c in f.center], "amplitude": float(f.amplitude)}
    if isinstance(f, Sinusoidal):
        return {"kind": "sinusoidal", "base": float(f.base), "amplitude": float(f.amplitude), "k": float(f.k)}
    if isinstance(f, Sum):
        return {"kind": "sum", "terms": [field_to_dict(t) for t in f.terms]}
    raise TypeError(f"cannot render field {f!r}")


def config_to_dict(cfg: ScenarioConfig) -> dict:
    out = {
        "sample_every": cfg.output.sample_every,
        "snapshot_times": [float(t) for t in cfg.output.snapshot_times],
        "profiles": cfg.output.profiles,
        "fields": cfg.output.fields,
    }
    if cfg.output.directory is not None:
        out["directory"] = cfg.output.directory
    release: dict[str, Any] = {"continuous": field_to_dict(cfg.schedule.continuous)}
    if cfg.schedule.impulses:
        release["impulses"] = [{"t": float(i.t), "field": field_to_dict(i.field)} for i in cfg.schedule.impulses]
    return {
        "name": cfg.name,
        "mesh": {"n": cfg.n},
        "scheme": {"theta": cfg.scheme.theta, "dt": cfg.scheme.dt, "T": cfg.scheme.T},
        "params": {k: float(v) for k, v in cfg.params.as_dict().items()},
        "initial": {s: field_to_dict(f) for s, f in zip(("M", "F", "M_S"), cfg.initial)},
        "release": release,
        "output": out,
    }


def render_config(cfg: ScenarioConfig) -> str:
    return tomli_w.dumps(config_to_dict(cfg))
