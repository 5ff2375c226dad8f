"""Strict JSON run configuration.

Schema (every section except ``model`` and the time is optional)::

    {
      "model":    {"N": 48, "J": 2900.0, "Omega": 0.0, "twist": "auto"},
      "rates":    {"gamma_ud": 5.0, "gamma_du": 5.0, "gamma_el": 50.0}
                  or {"total": 60.0, "ratio": [1, 1, 10]},
      "protocol": {"t": 6e-4} or {"Jt": 1.74},
                  plus "axis": [x, y, z] | "x" | "y" | "z" | "optimize" | "optimize-pure",
                  "phi_samples": null | int, "backend": "auto" | "dicke" | "sym" | "exact",
      "sweep":    {"parameter": "t" | "Jt" | "gamma" | "gamma_scaled" | "N" | "Omega" | "axis",
                   "values": [...]} or {"parameter": ..., "linspace": [start, stop, num]},
                   gamma sweeps also take "ratio": [ud, du, el],
      "analysis": {"echo": true, "qfi": true, "squeezing": true, "entropies": [0]},
      "outputs":  {"directory": "results", "formats": ["csv", "json"]},
      "seed": 0
    }

The flat shorthand ``{"N": 4, "J": 1, "t": 1}`` is accepted for the model
and time fields.  Axes are given in the frame where the spins start up along
z and the twisting is about x; ``twist`` only selects the engine frame (and
with it the direction of the jump operators, see :class:`ModelParams`).
``twist="auto"`` picks ``"z"`` when any rate is nonzero, else ``"x"``.
``gamma`` sweeps total rates ``(ud + du + el)/2``; ``gamma_scaled`` sweeps
``Gamma N / J``.
"""

from __future__ import annotations

import hashlib
import json
import math
import os
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .params import DecoherenceRates, ModelParams, SpinAxis
from .protocol import BACKEND_ALIASES, BACKENDS, resolve_backend

SWEEP_PARAMETERS = ("t", "Jt", "gamma", "gamma_scaled", "N", "Omega", "axis")
AXIS_MODES = ("optimize", "optimize-pure")
NAMED_AXES = {"x": (1.0, 0.0, 0.0), "y": (0.0, 1.0, 0.0), "z": (0.0, 0.0, 1.0)}
FORMATS = ("csv", "json")
DEFAULT_RATIO = (1.0, 1.0, 10.0)


class ConfigError(ValueError):
    """Invalid configuration; ``path`` names the offending field or text position."""

    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


# --- records -------------------------------------------------------------------


@dataclass(frozen=True)
class Sweep:
    parameter: str
    values: tuple
    ratio: tuple | None = None


@dataclass(frozen=True)
class Analysis:
    echo: bool = True
    qfi: bool = True
    squeezing: bool = True
    entropies: tuple = ()


@dataclass(frozen=True)
class Outputs:
    directory: str = "results"
    formats: tuple = FORMATS


@dataclass(frozen=True)
class RunConfig:
    """A validated run.  Time is kept as given (``t`` or ``Jt``) so round trips are exact."""

    model: ModelParams
    rates: DecoherenceRates = DecoherenceRates()
    time_key: str = "t"
    time_value: float = 0.0
    axis: object = "optimize"
    phi_samples: int | None = None
    backend: str = "auto"
    sweep: Sweep | None = None
    analysis: Analysis = field(default_factory=Analysis)
    outputs: Outputs = field(default_factory=Outputs)
    seed: int = 0

    @property
    def t(self) -> float:
        return self.time_value if self.time_key == "t" else self.time_value / self.model.J

    def points(self) -> list["PointSpec"]:
        """One fully resolved point per sweep value (a single point without a sweep)."""
        if self.sweep is None:
            return [_point(self, None, None, 0)]
        return [_point(self, self.sweep.parameter, v, i) for i, v in enumerate(self.sweep.values)]


@dataclass(frozen=True)
class PointSpec:
    index: int
    parameter: str | None
    value: object
    params: ModelParams
    rates: DecoherenceRates
    t: float
    axis: object
    phi_samples: int | None
    backend: str


def _point(cfg: RunConfig, parameter, value, index) -> PointSpec:
    model, rates, axis = cfg.model, cfg.rates, cfg.axis
    t = cfg.t
    if parameter == "t":
        t = float(value)
    elif parameter == "Jt":
        t = float(value) / model.J
    elif parameter == "N":
        model = replace(model, N=int(value))
    elif parameter == "Omega":
        model = replace(model, Omega=float(value))
    elif parameter == "axis":
        axis = value
    elif parameter in ("gamma", "gamma_scaled"):
        total = float(value) * (model.J / model.N if parameter == "gamma_scaled" else 1.0)
        rates = DecoherenceRates.from_total(total, cfg.sweep.ratio)
    return PointSpec(index, parameter, value, model, rates, t, axis, cfg.phi_samples, cfg.backend)


def engine_axis(axis: SpinAxis, twist: str) -> SpinAxis:
    """Map an axis between the config frame and the engine frame (the map is an involution)."""
    return axis.to_twist_frame(twist)


# --- parsing -------------------------------------------------------------------


def _reject_duplicates(pairs):
    out = {}
    for k, v in pairs:
        if k in out:
            raise ConfigError(f"key {k!r}", "duplicate key")
        out[k] = v
    return out


def _reject_constant(name):
    raise ConfigError(f"value {name}", "NaN and Infinity are not valid JSON numbers")


def _load_json(text: str):
    try:
        return json.loads(text, object_pairs_hook=_reject_duplicates, parse_constant=_reject_constant)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"line {exc.lineno}, column {exc.colno}", exc.msg) from None


def _section(data, name, allowed):
    sec = data.get(name, {})
    if sec is None:
        sec = {}
    if not isinstance(sec, dict):
        raise ConfigError(name, "must be an object")
    for k in sec:
        if k not in allowed:
            raise ConfigError(f"{name}.{k}", f"unknown key; allowed: {', '.join(allowed)}")
    return sec


def _number(value, path, minimum=None, positive=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(path, f"must be a number, got {value!r}")
    value = float(value)
    if not math.isfinite(value):
        raise ConfigError(path, "must be finite")
    if positive and value <= 0:
        raise ConfigError(path, f"must be > 0, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value!r}")
    return value


def _integer(value, path, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(path, f"must be an integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise ConfigError(path, f"must be >= {minimum}, got {value!r}")
    return value


def _boolean(value, path):
    if not isinstance(value, bool):
        raise ConfigError(path, f"must be true or false, got {value!r}")
    return value


def _axis(value, path):
    if isinstance(value, str):
        if value in AXIS_MODES:
            return value
        if value in NAMED_AXES:
            return SpinAxis(NAMED_AXES[value])
        raise ConfigError(path, f"must be a 3-vector, one of x/y/z, or one of {AXIS_MODES}")
    if not isinstance(value, list) or len(value) != 3:
        raise ConfigError(path, f"must be a 3-vector, got {value!r}")
    v = np.array([_number(x, f"{path}[{i}]") for i, x in enumerate(value)])
    norm = np.linalg.norm(v)
    if norm == 0:
        raise ConfigError(path, "axis vector must be nonzero")
    # keep unit vectors verbatim so serialized configs round-trip bit for bit
    return SpinAxis(tuple(v)) if abs(norm - 1.0) <= 1e-12 else SpinAxis.normalized(v)


def _ratio(value, path):
    if not isinstance(value, list) or len(value) != 3:
        raise ConfigError(path, "must be a list of three non-negative numbers")
    r = tuple(_number(x, f"{path}[{i}]", minimum=0.0) for i, x in enumerate(value))
    if sum(r) == 0:
        raise ConfigError(path, "ratio must not be all zero")
    return r


_FLAT_MODEL = ("N", "J", "Omega", "twist")
_FLAT_PROTOCOL = ("t", "Jt")
_TOP = ("model", "rates", "protocol", "sweep", "analysis", "outputs", "seed")


def parse_config(text: str, check_output: bool = True) -> RunConfig:
    """Parse and validate JSON ``text``; raises :class:`ConfigError`."""
    data = _load_json(text)
    if not isinstance(data, dict):
        raise ConfigError("$", "top level must be an object")
    return config_from_dict(data, check_output=check_output)


def load_config(path, check_output: bool = True) -> RunConfig:
    return parse_config(Path(path).read_text(encoding="utf-8"), check_output)


def config_from_dict(data: dict, check_output: bool = True) -> RunConfig:
    data = dict(data)
    for k in data:
        if k not in _TOP + _FLAT_MODEL + _FLAT_PROTOCOL:
            raise ConfigError(k, f"unknown key; allowed: {', '.join(_TOP)}")
    flat_model = {k: data.pop(k) for k in _FLAT_MODEL if k in data}
    flat_proto = {k: data.pop(k) for k in _FLAT_PROTOCOL if k in data}
    if flat_model and "model" in data:
        raise ConfigError("model", "give the model either nested or flat, not both")
    if flat_model:
        data["model"] = flat_model
    if flat_proto:
        proto = dict(data.get("protocol") or {})
        for k, v in flat_proto.items():
            if k in proto:
                raise ConfigError(f"protocol.{k}", "given both flat and nested")
            proto[k] = v
        data["protocol"] = proto

    # model
    if "model" not in data:
        raise ConfigError("model", "required (needs at least N and J)")
    m = _section(data, "model", _FLAT_MODEL)
    for req in ("N", "J"):
        if req not in m:
            raise ConfigError(f"model.{req}", "required")
    N = _integer(m["N"], "model.N", minimum=1)
    J = _number(m["J"], "model.J")
    Omega = _number(m.get("Omega", 0.0), "model.Omega")
    twist = m.get("twist", "auto")
    if twist not in ("auto", "x", "z"):
        raise ConfigError("model.twist", f"must be 'auto', 'x' or 'z', got {twist!r}")

    # rates
    r = _section(data, "rates", ("gamma_ud", "gamma_du", "gamma_el", "total", "ratio"))
    explicit = {k for k in r if k.startswith("gamma_")}
    if explicit and ({"total", "ratio"} & set(r)):
        raise ConfigError("rates", "give either gamma_ud/gamma_du/gamma_el or total/ratio")
    if "ratio" in r and "total" not in r:
        raise ConfigError("rates.total", "required when ratio is given")
    if "total" in r:
        total = _number(r["total"], "rates.total", minimum=0.0)
        ratio = _ratio(r.get("ratio", list(DEFAULT_RATIO)), "rates.ratio")
        rates = DecoherenceRates.from_total(total, ratio)
    else:
        rates = DecoherenceRates(
            *(_number(r.get(k, 0.0), f"rates.{k}", minimum=0.0) for k in ("gamma_ud", "gamma_du", "gamma_el"))
        )

    # protocol
    p = _section(data, "protocol", ("t", "Jt", "axis", "phi_samples", "backend"))
    if ("t" in p) == ("Jt" in p):
        raise ConfigError("protocol.t", "give exactly one of t or Jt")
    time_key = "t" if "t" in p else "Jt"
    time_value = _number(p[time_key], f"protocol.{time_key}", minimum=0.0)
    if time_key == "Jt" and J == 0:
        raise ConfigError("protocol.Jt", "needs J != 0; give t instead")
    axis = _axis(p.get("axis", "optimize"), "protocol.axis")
    phi_samples = p.get("phi_samples")
    if phi_samples is not None:
        phi_samples = _integer(phi_samples, "protocol.phi_samples", minimum=3)
    backend = p.get("backend", "auto")
    if backend != "auto" and backend not in BACKENDS and backend not in BACKEND_ALIASES:
        raise ConfigError("protocol.backend", f"must be auto, {', '.join(BACKEND_ALIASES)} or a full engine name")
    backend = BACKEND_ALIASES.get(backend, backend)

    # sweep
    sweep = None
    if data.get("sweep") is not None:
        sweep = _parse_sweep(_section(data, "sweep", ("parameter", "values", "linspace", "ratio")), J)

    # analysis
    a = _section(data, "analysis", ("echo", "qfi", "squeezing", "entropies"))
    traced = a.get("entropies", [])
    if not isinstance(traced, list):
        raise ConfigError("analysis.entropies", "must be a list of traced-particle counts")
    analysis = Analysis(
        echo=_boolean(a.get("echo", True), "analysis.echo"),
        qfi=_boolean(a.get("qfi", True), "analysis.qfi"),
        squeezing=_boolean(a.get("squeezing", True), "analysis.squeezing"),
        entropies=tuple(_integer(x, f"analysis.entropies[{i}]", minimum=0) for i, x in enumerate(traced)),
    )

    # outputs
    o = _section(data, "outputs", ("directory", "formats"))
    directory = o.get("directory", "results")
    if not isinstance(directory, str) or not directory:
        raise ConfigError("outputs.directory", "must be a non-empty string")
    formats = o.get("formats", list(FORMATS))
    if not isinstance(formats, list) or not formats or any(f not in FORMATS for f in formats):
        raise ConfigError("outputs.formats", f"must be a nonempty subset of {list(FORMATS)}")
    outputs = Outputs(directory, tuple(f for f in FORMATS if f in formats))

    seed = _integer(data.get("seed", 0), "seed", minimum=0)

    if twist == "auto":
        decohered = rates.any or (
            sweep is not None and sweep.parameter in ("gamma", "gamma_scaled") and any(v > 0 for v in sweep.values)
        )
        twist = "z" if decohered else "x"
    cfg = RunConfig(
        model=_model(N, J, Omega, twist),
        rates=rates,
        time_key=time_key,
        time_value=time_value,
        axis=axis,
        phi_samples=phi_samples,
        backend=backend,
        sweep=sweep,
        analysis=analysis,
        outputs=outputs,
        seed=seed,
    )
    _check_points(cfg)
    if check_output:
        check_writable(cfg.outputs.directory)
    return cfg


def _model(N, J, Omega, twist):
    try:
        return ModelParams(N, J, Omega, twist)
    except ValueError as exc:
        raise ConfigError("model", str(exc)) from None


def _parse_sweep(s, J) -> Sweep:
    if "parameter" not in s:
        raise ConfigError("sweep.parameter", "required")
    name = s["parameter"]
    if name not in SWEEP_PARAMETERS:
        raise ConfigError("sweep.parameter", f"must be one of {SWEEP_PARAMETERS}, got {name!r}")
    if ("values" in s) == ("linspace" in s):
        raise ConfigError("sweep.values", "give exactly one of values or linspace")
    if "linspace" in s:
        ls = s["linspace"]
        if not isinstance(ls, list) or len(ls) != 3:
            raise ConfigError("sweep.linspace", "must be [start, stop, num]")
        start = _number(ls[0], "sweep.linspace[0]")
        stop = _number(ls[1], "sweep.linspace[1]")
        num = _integer(ls[2], "sweep.linspace[2]", minimum=1)
        raw = np.linspace(start, stop, num).tolist()
        where = "sweep.linspace"
    else:
        raw = s["values"]
        where = "sweep.values"
        if not isinstance(raw, list) or not raw:
            raise ConfigError(where, "must be a nonempty list")
    if name == "axis":
        values = tuple(_axis(v, f"{where}[{i}]") for i, v in enumerate(raw))
    elif name == "N":
        values = tuple(_integer(v, f"{where}[{i}]", minimum=1) for i, v in enumerate(raw))
    else:
        nonneg = 0.0 if name in ("t", "Jt", "gamma", "gamma_scaled") else None
        values = tuple(_number(v, f"{where}[{i}]", minimum=nonneg) for i, v in enumerate(raw))
    if name == "Jt" and J == 0:
        raise ConfigError("sweep.parameter", "Jt sweeps need J != 0")
    ratio = None
    if name in ("gamma", "gamma_scaled"):
        ratio = _ratio(s.get("ratio", list(DEFAULT_RATIO)), "sweep.ratio")
    elif "ratio" in s:
        raise ConfigError("sweep.ratio", "only valid for gamma sweeps")
    return Sweep(name, values, ratio)


def _check_points(cfg: RunConfig) -> None:
    for pt in cfg.points():
        where = "protocol.backend" if cfg.sweep is None else f"sweep.values[{pt.index}]"
        try:
            resolve_backend(pt.params, pt.rates, pt.backend)
        except ValueError as exc:
            raise ConfigError(where, str(exc)) from None
        N = pt.params.N
        if pt.phi_samples is not None and pt.phi_samples < 2 * N + 1:
            raise ConfigError(
                "protocol.phi_samples", f"needs at least 2N+1 = {2 * N + 1} samples for N={N}"
            )
        for k in cfg.analysis.entropies:
            if k >= N:
                raise ConfigError("analysis.entropies", f"cannot trace {k} of N={N} particles")


def check_writable(directory) -> None:
    """Raise unless ``directory`` exists writable or can be created."""
    path = Path(directory).resolve()
    probe = path
    while not probe.exists():
        probe = probe.parent
    if not probe.is_dir():
        raise ConfigError("outputs.directory", f"{probe} is not a directory")
    if not os.access(probe, os.W_OK | os.X_OK):
        raise ConfigError("outputs.directory", f"{probe} is not writable")


# --- serialization -----------------------------------------------------------------


def _axis_json(axis):
    return axis if isinstance(axis, str) else list(axis.n)


def config_to_dict(cfg: RunConfig) -> dict:
    """Canonical nested form; :func:`config_from_dict` inverts it exactly."""
    out = {
        "model": {"N": cfg.model.N, "J": cfg.model.J, "Omega": cfg.model.Omega, "twist": cfg.model.twist},
        "rates": {
            "gamma_ud": cfg.rates.gamma_ud,
            "gamma_du": cfg.rates.gamma_du,
            "gamma_el": cfg.rates.gamma_el,
        },
        "protocol": {
            cfg.time_key: cfg.time_value,
            "axis": _axis_json(cfg.axis),
            "phi_samples": cfg.phi_samples,
            "backend": cfg.backend,
        },
        "sweep": None,
        "analysis": {
            "echo": cfg.analysis.echo,
            "qfi": cfg.analysis.qfi,
            "squeezing": cfg.analysis.squeezing,
            "entropies": list(cfg.analysis.entropies),
        },
        "outputs": {"directory": cfg.outputs.directory, "formats": list(cfg.outputs.formats)},
        "seed": cfg.seed,
    }
    if cfg.sweep is not None:
        sw = {"parameter": cfg.sweep.parameter}
        if cfg.sweep.parameter == "axis":
            sw["values"] = [_axis_json(v) for v in cfg.sweep.values]
        else:
            sw["values"] = list(cfg.sweep.values)
        if cfg.sweep.ratio is not None:
            sw["ratio"] = list(cfg.sweep.ratio)
        out["sweep"] = sw
    return out


def serialize_config(cfg: RunConfig) -> str:
    return json.dumps(config_to_dict(cfg), sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_hash(cfg: RunConfig) -> str:
    """Short SHA-256 of the canonical serialization, independent of the output location."""
    d = config_to_dict(cfg)
    d.pop("outputs")
    blob = json.dumps(d, sort_keys=True, separators=(",", ":"), allow_nan=False)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]
