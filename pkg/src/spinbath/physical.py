"""Physical constants, unit conversion and spin angular-momentum matrices.

Internal units throughout the package: joules, seconds, tesla, kelvin and
rad/s for frequencies. Configuration values are converted on ingestion.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

# CODATA 2018 values, fixed so results do not drift with the scipy release.
MU_B = 9.2740100783e-24  # J/T
HBAR = 1.054571817e-34  # J s
K_B = 1.380649e-23  # J/K
C_LIGHT = 2.99792458e8  # m/s

#: rad/s per cm^-1
CM1_TO_RAD_S = 2.0 * np.pi * C_LIGHT * 100.0


@dataclass(frozen=True)
class PhysConstants:
    mu_B: float = MU_B
    hbar: float = HBAR
    k_B: float = K_B
    c: float = C_LIGHT


CONSTANTS = PhysConstants()


class UnitError(ValueError):
    """Raised for incompatible or unknown units."""


class Unit(str, enum.Enum):
    JOULE = "joule"
    RADIAN_PER_SECOND = "radian_per_second"
    HERTZ = "hertz"
    WAVENUMBER_CM = "wavenumber_cm"
    MEGAHERTZ = "megahertz"
    TESLA = "tesla"
    KELVIN = "kelvin"
    SECOND = "second"
    PICOSECOND = "picosecond"


# (dimension, factor to the dimension's canonical unit)
_UNIT_TABLE: dict[Unit, tuple[str, float]] = {
    Unit.RADIAN_PER_SECOND: ("frequency", 1.0),
    Unit.JOULE: ("frequency", 1.0 / HBAR),
    Unit.HERTZ: ("frequency", 2.0 * np.pi),
    Unit.MEGAHERTZ: ("frequency", 2.0 * np.pi * 1e6),
    Unit.WAVENUMBER_CM: ("frequency", CM1_TO_RAD_S),
    Unit.TESLA: ("field", 1.0),
    Unit.KELVIN: ("temperature", 1.0),
    Unit.SECOND: ("time", 1.0),
    Unit.PICOSECOND: ("time", 1e-12),
}

# Spellings accepted in configuration strings such as "0.001 cm-1".
UNIT_ALIASES: dict[str, Unit] = {
    "J": Unit.JOULE,
    "joule": Unit.JOULE,
    "rad/s": Unit.RADIAN_PER_SECOND,
    "Hz": Unit.HERTZ,
    "MHz": Unit.MEGAHERTZ,
    "cm-1": Unit.WAVENUMBER_CM,
    "cm^-1": Unit.WAVENUMBER_CM,
    "T": Unit.TESLA,
    "K": Unit.KELVIN,
    "s": Unit.SECOND,
    "ps": Unit.PICOSECOND,
}

# Prefixed spellings that scale a base unit.
_SCALED_ALIASES: dict[str, tuple[Unit, float]] = {
    "mT": (Unit.TESLA, 1e-3),
    "uT": (Unit.TESLA, 1e-6),
    "GHz": (Unit.HERTZ, 1e9),
    "kHz": (Unit.HERTZ, 1e3),
    "fs": (Unit.PICOSECOND, 1e-3),
    "ns": (Unit.SECOND, 1e-9),
    "us": (Unit.SECOND, 1e-6),
}


@dataclass(frozen=True)
class Quantity:
    value: float
    unit: Unit

    def to(self, target: Unit | str) -> "Quantity":
        return convert(self, target)


def _as_unit(unit: Unit | str) -> Unit:
    if isinstance(unit, Unit):
        return unit
    try:
        return Unit(unit)
    except ValueError:
        if unit in UNIT_ALIASES:
            return UNIT_ALIASES[unit]
    raise UnitError(f"unknown unit {unit!r}")


def convert(q: Quantity, target: Unit | str) -> Quantity:
    """Convert ``q`` into ``target``.

    Energy, angular frequency, frequency and wavenumber are mutually
    convertible through hbar and 2*pi*c; every other dimension only
    converts within itself.
    """
    src = _as_unit(q.unit)
    dst = _as_unit(target)
    dim_src, f_src = _UNIT_TABLE[src]
    dim_dst, f_dst = _UNIT_TABLE[dst]
    if dim_src != dim_dst:
        raise UnitError(f"cannot convert {src.value} ({dim_src}) to {dst.value} ({dim_dst})")
    if src is dst:
        return Quantity(q.value, dst)
    return Quantity(q.value * f_src / f_dst, dst)


def to_internal(value: float, unit: str) -> float:
    """Convert a configured ``value unit`` pair to the internal unit of its dimension.

    Frequencies and energies come back in rad/s, fields in tesla, times in
    seconds, temperatures in kelvin.
    """
    scale = 1.0
    if unit in _SCALED_ALIASES:
        base, scale = _SCALED_ALIASES[unit]
    else:
        base = _as_unit(unit)
    dim, factor = _UNIT_TABLE[base]
    return float(value) * scale * factor


def dimension_of(unit: str) -> str:
    if unit in _SCALED_ALIASES:
        return _UNIT_TABLE[_SCALED_ALIASES[unit][0]][0]
    return _UNIT_TABLE[_as_unit(unit)][0]


def rad_s_to_cm1(omega):
    return np.asarray(omega) / CM1_TO_RAD_S


def cm1_to_rad_s(k):
    return np.asarray(k) * CM1_TO_RAD_S


@dataclass(frozen=True)
class SpinOperators:
    """Angular-momentum matrices (units of hbar) in the |s, m> basis, m = s..-s."""

    s: float
    sx: np.ndarray
    sy: np.ndarray
    sz: np.ndarray
    plus: np.ndarray
    minus: np.ndarray

    @property
    def dimension(self) -> int:
        return self.sz.shape[0]

    def vector(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        return self.sx, self.sy, self.sz


def spin_operators(s: float) -> SpinOperators:
    two_s = Fraction(s).limit_denominator(1000) * 2
    if two_s.denominator != 1 or two_s < 0 or abs(float(two_s) - 2 * s) > 1e-12:
        raise ValueError(f"spin must be a non-negative half-integer, got {s}")
    s = float(two_s) / 2
    m = s - np.arange(int(two_s) + 1)
    dim = m.size
    plus = np.zeros((dim, dim), dtype=complex)
    # <m|S+|m-1> sits one row above the diagonal with this ordering
    for k in range(1, dim):
        mk = m[k - 1]
        plus[k - 1, k] = np.sqrt(s * (s + 1) - mk * (mk - 1))
    minus = plus.conj().T
    sx = 0.5 * (plus + minus)
    sy = -0.5j * (plus - minus)
    sz = np.diag(m).astype(complex)
    return SpinOperators(s=s, sx=sx, sy=sy, sz=sz, plus=plus, minus=minus)


def pauli() -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    ops = spin_operators(0.5)
    return 2 * ops.sx, 2 * ops.sy, 2 * ops.sz


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product; electron factor first, nuclear factor second."""
    return np.kron(a, b)
