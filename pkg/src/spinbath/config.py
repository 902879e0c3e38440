"""Run configuration: TOML tables with unit-tagged values.

Physical quantities are written as strings such as ``"0.001 cm-1"`` or
``"10 K"``; unknown keys and missing units are rejected with their location.
Every default reproduces the copper-porphyrin parameter set.
"""

from __future__ import annotations

import hashlib
import json
import math
import sys
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path

import numpy as np

from .hamiltonian import A_PERP_MHZ, A_ZZ_MHZ, G_PAR, G_PERP, SpinSystem
from .physical import CM1_TO_RAD_S, UnitError, dimension_of, to_internal

if sys.version_info >= (3, 11):
    import tomllib
else:  # pragma: no cover
    import tomli as tomllib


class ConfigError(ValueError):
    pass


# field-noise amplitude a is in T^2; the unit table has no squared units
_SQUARED_FIELD = {"T^2": 1.0, "T2": 1.0, "mT^2": 1e-6, "uT^2": 1e-12}


def parse_quantity(value, dimension: str, where: str) -> float:
    """Parse ``"<number> <unit>"`` into internal units of ``dimension``."""
    if not isinstance(value, str):
        raise ConfigError(f"{where}: expected a string with a unit, e.g. \"1 {_EXAMPLE_UNIT[dimension]}\"")
    parts = value.strip().split(None, 1)
    if len(parts) != 2:
        raise ConfigError(f"{where}: missing unit in {value!r}")
    try:
        number = float(parts[0])
    except ValueError:
        raise ConfigError(f"{where}: {parts[0]!r} is not a number") from None
    unit = parts[1].strip()
    if dimension == "field_squared":
        if unit not in _SQUARED_FIELD:
            raise ConfigError(f"{where}: unit {unit!r} is not a squared field unit")
        return number * _SQUARED_FIELD[unit]
    try:
        dim = dimension_of(unit)
    except UnitError as exc:
        raise ConfigError(f"{where}: {exc}") from None
    if dim != dimension:
        raise ConfigError(f"{where}: unit {unit!r} measures {dim}, expected {dimension}")
    return to_internal(number, unit)


_EXAMPLE_UNIT = {
    "frequency": "cm-1", "field": "T", "temperature": "K", "time": "s", "field_squared": "T^2",
}


@dataclass(frozen=True)
class SystemConfig:
    nuclear_spin: float = 1.5
    g: tuple = (G_PERP, G_PERP, G_PAR)
    A: tuple = (A_PERP_MHZ, A_PERP_MHZ, A_ZZ_MHZ)
    A_unit: str = "MHz"

    def tensor(self, values, name: str) -> np.ndarray:
        arr = np.asarray(values, dtype=float)
        if arr.shape == (3,):
            return np.diag(arr)
        if arr.shape == (3, 3):
            return arr
        raise ConfigError(f"system.{name}: expected 3 principal values or a 3x3 matrix")

    def build(self) -> SpinSystem:
        try:
            scale = to_internal(1.0, self.A_unit)
            if dimension_of(self.A_unit) != "frequency":
                raise ConfigError(f"system.A_unit: {self.A_unit!r} is not a frequency unit")
            return SpinSystem(
                nuclear_spin=self.nuclear_spin,
                g=self.tensor(self.g, "g"),
                A=self.tensor(self.A, "A") * scale,
            )
        except (ValueError, UnitError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"system: {exc}") from None


@dataclass(frozen=True)
class SpectrumSourceConfig:
    source: str = "flat"  # flat | lorentzian | file | ou-synthetic
    G0: float = 7.0e-25  # s
    reference_temperature: float | None = None  # K
    temperature_exponent: float = 0.0
    variance: float = 1e-7
    gamma: float = 1.0e12  # rad/s, lorentzian
    paths: tuple = ()
    corr_time: float = 1e-12  # s, ou-synthetic
    dt: float = 25e-15
    duration: float = 3.5e-9
    window: float = 35e-12
    temperatures: tuple = (10.0,)
    seed: int = 0


@dataclass(frozen=True)
class BathConfig:
    lambda_inv: float = 6.9 * CM1_TO_RAD_S  # rad/s
    noise_a: float = 16e-10  # T^2
    b_values: tuple = (0.0, 3e-8)
    gamma_pd: float = 0.001 * CM1_TO_RAD_S  # rad/s
    spin_lattice_only_model: bool = True
    spectrum: SpectrumSourceConfig = field(default_factory=SpectrumSourceConfig)


@dataclass(frozen=True)
class SweepConfig:
    B_min: float = 0.01
    B_max: float = 10.0
    n_points: int = 24
    direction: tuple = (0.0, 0.0, 1.0)
    temperatures: tuple = (10.0,)
    with_hyperfine: bool = True
    no_hyperfine_variant: bool = False
    fit_ranges: tuple = ((0.01, 0.1), (1.0, 10.0))
    average_m_I: bool = False
    n_time_points: int = 200

    def grid(self) -> np.ndarray:
        return np.logspace(math.log10(self.B_min), math.log10(self.B_max), self.n_points)


@dataclass(frozen=True)
class ZeemanConfig:
    B_max: float = 0.5
    n_points: int = 201
    direction: tuple = (0.0, 0.0, 1.0)


@dataclass(frozen=True)
class AcfConfig:
    window: float = 35e-12
    overlap: float = 0.0
    estimator: str = "biased"
    upsample: int = 1
    taper_rate: float = 0.0  # 1/s


@dataclass(frozen=True)
class ScalingConfig:
    omega_max: float = 100.0 * CM1_TO_RAD_S
    bins: int = 20
    component: str = "zz"


@dataclass(frozen=True)
class SynthConfig:
    mean_g: tuple = (G_PERP, G_PERP, G_PAR)
    variance: float = 1e-7
    corr_time: float = 1e-12
    dt: float = 25e-15
    duration: float = 100e-12
    temperature: float = 300.0
    seed: int = 0


@dataclass(frozen=True)
class OutputConfig:
    directory: str = "spinbath-out"
    plots: bool = True


@dataclass(frozen=True)
class RunConfig:
    system: SystemConfig = field(default_factory=SystemConfig)
    bath: BathConfig = field(default_factory=BathConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)
    zeeman: ZeemanConfig = field(default_factory=ZeemanConfig)
    acf: AcfConfig = field(default_factory=AcfConfig)
    scaling: ScalingConfig = field(default_factory=ScalingConfig)
    synth: SynthConfig = field(default_factory=SynthConfig)
    output: OutputConfig = field(default_factory=OutputConfig)

    def to_dict(self) -> dict:
        return _plain(asdict(self))

    def digest(self) -> str:
        text = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(text.encode()).hexdigest()[:16]


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, float):
        return repr(obj)
    return obj


# --- parsing -----------------------------------------------------------------

# key -> kind; kinds: a dimension name for unit strings, or a python type tag
_SCHEMA: dict[str, dict[str, str]] = {
    "system": {"nuclear_spin": "number", "g": "tensor", "A": "tensor", "A_unit": "str"},
    "bath": {
        "lambda_inv": "frequency", "noise_a": "field_squared", "b_values": "number_list",
        "gamma_pd": "frequency", "spin_lattice_only_model": "bool", "spectrum": "table",
    },
    "bath.spectrum": {
        "source": "str", "G0": "time", "reference_temperature": "temperature",
        "temperature_exponent": "number", "variance": "number", "gamma": "frequency",
        "paths": "str_list", "corr_time": "time", "dt": "time", "duration": "time", "window": "time",
        "temperatures": "temperature_list", "seed": "int",
    },
    "sweep": {
        "B_min": "field", "B_max": "field", "n_points": "int", "direction": "vector",
        "temperatures": "temperature_list", "with_hyperfine": "bool", "no_hyperfine_variant": "bool",
        "fit_ranges": "field_ranges", "average_m_I": "bool", "n_time_points": "int",
    },
    "zeeman": {"B_max": "field", "n_points": "int", "direction": "vector"},
    "acf": {"window": "time", "overlap": "number", "estimator": "str", "upsample": "int", "taper_rate": "frequency"},
    "scaling": {"omega_max": "frequency", "bins": "int", "component": "str"},
    "synth": {
        "mean_g": "tensor", "variance": "number", "corr_time": "time", "dt": "time",
        "duration": "time", "temperature": "temperature", "seed": "int",
    },
    "output": {"directory": "str", "plots": "bool"},
}

_DIMENSIONS = ("frequency", "field", "temperature", "time", "field_squared")


def _convert(kind: str, value, where: str):
    if kind in _DIMENSIONS:
        return parse_quantity(value, kind, where)
    if kind == "number":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"{where}: expected a number")
        return float(value)
    if kind == "int":
        if isinstance(value, bool) or not isinstance(value, int):
            raise ConfigError(f"{where}: expected an integer")
        return int(value)
    if kind == "bool":
        if not isinstance(value, bool):
            raise ConfigError(f"{where}: expected true or false")
        return value
    if kind == "str":
        if not isinstance(value, str):
            raise ConfigError(f"{where}: expected a string")
        return value
    if not isinstance(value, list):
        raise ConfigError(f"{where}: expected a list")
    if kind == "number_list":
        return tuple(_convert("number", v, f"{where}[{k}]") for k, v in enumerate(value))
    if kind == "str_list":
        return tuple(_convert("str", v, f"{where}[{k}]") for k, v in enumerate(value))
    if kind == "temperature_list":
        return tuple(_convert("temperature", v, f"{where}[{k}]") for k, v in enumerate(value))
    if kind == "vector":
        if len(value) != 3:
            raise ConfigError(f"{where}: expected 3 components")
        return tuple(_convert("number", v, f"{where}[{k}]") for k, v in enumerate(value))
    if kind == "tensor":
        if len(value) == 3 and all(isinstance(v, list) for v in value):
            return tuple(
                tuple(_convert("number", x, f"{where}[{i}][{j}]") for j, x in enumerate(row))
                for i, row in enumerate(value)
            )
        if len(value) != 3:
            raise ConfigError(f"{where}: expected 3 principal values or a 3x3 matrix")
        return tuple(_convert("number", v, f"{where}[{k}]") for k, v in enumerate(value))
    if kind == "field_ranges":
        out = []
        for k, pair in enumerate(value):
            if not isinstance(pair, list) or len(pair) != 2:
                raise ConfigError(f"{where}[{k}]: expected [low, high]")
            lo = _convert("field", pair[0], f"{where}[{k}][0]")
            hi = _convert("field", pair[1], f"{where}[{k}][1]")
            if not 0 < lo < hi:
                raise ConfigError(f"{where}[{k}]: need 0 < low < high")
            out.append((lo, hi))
        return tuple(out)
    raise AssertionError(kind)  # pragma: no cover


def _section(raw: dict, name: str) -> dict:
    schema = _SCHEMA[name]
    out = {}
    for key, value in raw.items():
        where = f"{name}.{key}"
        if key not in schema:
            raise ConfigError(f"{where}: unknown key (allowed: {', '.join(sorted(schema))})")
        kind = schema[key]
        if kind == "table":
            if not isinstance(value, dict):
                raise ConfigError(f"{where}: expected a table")
            out[key] = _section(value, f"{name}.{key}")
        else:
            out[key] = _convert(kind, value, where)
    return out


def _validate(cfg: RunConfig) -> None:
    def positive(value, where):
        if not value > 0:
            raise ConfigError(f"{where}: must be positive")

    cfg.system.build()
    b = cfg.bath
    positive(b.lambda_inv, "bath.lambda_inv")
    positive(b.gamma_pd, "bath.gamma_pd")
    if b.noise_a < 0:
        raise ConfigError("bath.noise_a: must be non-negative")
    if any(v < 0 for v in b.b_values):
        raise ConfigError("bath.b_values: must be non-negative")
    s = b.spectrum
    if s.source not in ("flat", "lorentzian", "file", "ou-synthetic"):
        raise ConfigError(f"bath.spectrum.source: unknown source {s.source!r}")
    if s.source == "file" and not s.paths:
        raise ConfigError("bath.spectrum.paths: required when source = \"file\"")
    positive(s.G0, "bath.spectrum.G0")
    positive(s.gamma, "bath.spectrum.gamma")
    if s.variance < 0:
        raise ConfigError("bath.spectrum.variance: must be non-negative")
    for k, T in enumerate(s.temperatures):
        positive(T, f"bath.spectrum.temperatures[{k}]")
    w = cfg.sweep
    positive(w.B_min, "sweep.B_min")
    if not w.B_max > w.B_min:
        raise ConfigError("sweep.B_max: must exceed sweep.B_min")
    if w.n_points < 2:
        raise ConfigError("sweep.n_points: need at least 2")
    if not w.temperatures:
        raise ConfigError("sweep.temperatures: need at least one temperature")
    for k, T in enumerate(w.temperatures):
        positive(T, f"sweep.temperatures[{k}]")
    for name, d in (("sweep.direction", w.direction), ("zeeman.direction", cfg.zeeman.direction)):
        if not np.linalg.norm(d) > 0:
            raise ConfigError(f"{name}: must be non-zero")
    positive(cfg.zeeman.B_max, "zeeman.B_max")
    if cfg.zeeman.n_points < 2:
        raise ConfigError("zeeman.n_points: need at least 2")
    a = cfg.acf
    positive(a.window, "acf.window")
    if not 0 <= a.overlap < 1:
        raise ConfigError("acf.overlap: must be in [0, 1)")
    if a.estimator not in ("biased", "unbiased"):
        raise ConfigError("acf.estimator: must be \"biased\" or \"unbiased\"")
    if a.upsample < 1:
        raise ConfigError("acf.upsample: must be >= 1")
    positive(cfg.scaling.omega_max, "scaling.omega_max")
    y = cfg.synth
    for name in ("corr_time", "dt", "duration", "temperature"):
        positive(getattr(y, name), f"synth.{name}")
    if y.variance < 0:
        raise ConfigError("synth.variance: must be non-negative")


def from_dict(raw: dict) -> RunConfig:
    for key in raw:
        if key not in _SCHEMA or "." in key:
            allowed = ", ".join(k for k in _SCHEMA if "." not in k)
            raise ConfigError(f"{key}: unknown section (allowed: {allowed})")
    parts = {}
    defaults = RunConfig()
    for name in ("system", "bath", "sweep", "zeeman", "acf", "scaling", "synth", "output"):
        body = raw.get(name, {})
        if not isinstance(body, dict):
            raise ConfigError(f"{name}: expected a table")
        values = _section(body, name)
        base = getattr(defaults, name)
        if name == "bath" and "spectrum" in values:
            values["spectrum"] = replace(base.spectrum, **values["spectrum"])
        parts[name] = replace(base, **values)
    cfg = RunConfig(**parts)
    _validate(cfg)
    return cfg


def load_config(path: str | Path | None) -> RunConfig:
    if path is None:
        cfg = RunConfig()
        _validate(cfg)
        return cfg
    path = Path(path)
    try:
        text = path.read_text()
    except OSError:
        raise
    try:
        raw = tomllib.loads(text)
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    try:
        return from_dict(raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from None


def field_names(section) -> list[str]:
    return [f.name for f in fields(section)]
