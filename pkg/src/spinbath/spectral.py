"""Hybrid bath spectral density J_jj'(w): atomistic spin-lattice part plus
Lorentzian magnetic-field noise.

Units: omega in rad/s, fluctuation spectra G in s, magnetic noise spectra in
T^2 s, spectral densities J in J^2 s.

Sign convention: J(w) at w > 0 drives downhill (emission) transitions. The
spin-lattice part is extended to w < 0 with the detailed-balance weight
exp(-hbar|w| / k_B T); the magnetic-noise part is even in w.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Protocol, Sequence

import numpy as np

from .physical import CM1_TO_RAD_S, HBAR, K_B, MU_B
from .trajectory import SpectrumEstimate

PREFACTOR = (MU_B / 2.0) ** 2  # J^2 / T^2
SQRT_2PI = math.sqrt(2.0 * math.pi)

#: Flat stand-in for the atomistic fluctuation spectrum (seconds). Chosen so
#: the b = 0 hybrid model at 10 K has its T1 maximum near 2.6 T.
DEFAULT_FLAT_G = 7.0e-25


@dataclass(frozen=True)
class OhmicParams:
    lambda_inv_cm: float = 6.9

    def __post_init__(self):
        if not self.lambda_inv_cm > 0:
            raise ValueError("1/lambda must be positive")

    @property
    def lam(self) -> float:
        """lambda in s/rad."""
        return 1.0 / (self.lambda_inv_cm * CM1_TO_RAD_S)


@dataclass(frozen=True)
class NoiseParams:
    a: float = 16e-10  # T^2
    b: float = 0.0  # dimensionless
    gamma_pd: float = 0.001 * CM1_TO_RAD_S  # rad/s

    def __post_init__(self):
        if self.a < 0 or self.b < 0:
            raise ValueError("noise parameters a and b must be non-negative")
        if not self.gamma_pd > 0:
            raise ValueError("gamma_pd must be positive")

    @classmethod
    def from_cm(cls, a: float, b: float, gamma_pd_cm: float) -> "NoiseParams":
        return cls(a=a, b=b, gamma_pd=gamma_pd_cm * CM1_TO_RAD_S)


def noise_amplitude(noise: NoiseParams, B_magnitude: float) -> tuple[float, float]:
    """Return (A_B in T^2, deltaB in T) with A_B = a + b B^2."""
    if B_magnitude < 0:
        raise ValueError("field magnitude must be non-negative")
    A_B = noise.a + noise.b * B_magnitude**2
    return A_B, math.sqrt(A_B)


def magnetic_noise_spectrum(noise: NoiseParams, B_magnitude: float, omega):
    """One-sided spectrum of A_B exp(-gamma_pd tau): even Lorentzian in omega."""
    A_B, _ = noise_amplitude(noise, B_magnitude)
    g = noise.gamma_pd
    omega = np.asarray(omega, dtype=float)
    return A_B / SQRT_2PI * g / (g * g + omega * omega)


# --- sources for the atomistic fluctuation spectrum G_ij(w) ---------------


class GSource(Protocol):
    def g_tensor(self, omega: np.ndarray, temperature: float) -> np.ndarray:
        """G_ij at |omega| (>= 0), shape (3, 3, *omega.shape), seconds."""

    def describe(self) -> dict: ...


def _tensor(value) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full((3, 3), float(arr))
    if arr.shape != (3, 3):
        raise ValueError("expected scalar or 3x3")
    return 0.5 * (arr + arr.T)


def _temperature_factor(T: float, t_ref: float | None, exponent: float) -> float:
    if t_ref is None or exponent == 0.0:
        return 1.0
    return (T / t_ref) ** exponent


@dataclass(frozen=True)
class FlatSpectrum:
    """Frequency-independent G_ij, optionally scaled as (T / T_ref)^exponent."""

    G0: float | np.ndarray = DEFAULT_FLAT_G
    reference_temperature: float | None = None
    temperature_exponent: float = 0.0

    def g_tensor(self, omega, temperature):
        omega = np.asarray(omega, dtype=float)
        G = _tensor(self.G0) * _temperature_factor(
            temperature, self.reference_temperature, self.temperature_exponent
        )
        return np.broadcast_to(G.reshape((3, 3) + (1,) * omega.ndim), (3, 3) + omega.shape)

    def describe(self):
        return {
            "g_source": "flat",
            "G0_s": np.asarray(self.G0).tolist(),
            "reference_temperature_K": self.reference_temperature,
            "temperature_exponent": self.temperature_exponent,
        }


@dataclass(frozen=True)
class LorentzianSpectrum:
    """G_ij of an exponential ACF variance * exp(-gamma tau)."""

    variance: float | np.ndarray
    gamma: float  # rad/s
    reference_temperature: float | None = None
    temperature_exponent: float = 0.0

    def g_tensor(self, omega, temperature):
        omega = np.asarray(omega, dtype=float)
        var = _tensor(self.variance) * _temperature_factor(
            temperature, self.reference_temperature, self.temperature_exponent
        )
        shape = self.gamma / (self.gamma**2 + omega**2) / SQRT_2PI
        return var.reshape((3, 3) + (1,) * omega.ndim) * shape

    def describe(self):
        return {
            "g_source": "lorentzian",
            "variance": np.asarray(self.variance).tolist(),
            "gamma_rad_s": self.gamma,
            "reference_temperature_K": self.reference_temperature,
            "temperature_exponent": self.temperature_exponent,
        }


@dataclass(frozen=True)
class TabulatedSpectrum:
    """Estimated spectra at one or more temperatures.

    Frequencies: linear interpolation, zero beyond the grid, negative values
    clamped to zero. Temperatures: power-law interpolation between the
    bracketing tables, clamped to the nearest table outside their range.
    """

    spectra: tuple[SpectrumEstimate, ...]

    def __init__(self, spectra: SpectrumEstimate | Sequence[SpectrumEstimate]):
        if isinstance(spectra, SpectrumEstimate):
            spectra = (spectra,)
        spectra = tuple(sorted(spectra, key=lambda s: s.temperature))
        if not spectra:
            raise ValueError("need at least one spectrum")
        object.__setattr__(self, "spectra", spectra)

    @staticmethod
    def _interp(spec: SpectrumEstimate, w: np.ndarray) -> np.ndarray:
        out = np.empty((3, 3) + w.shape)
        flat = w.ravel()
        for i in range(3):
            for j in range(i, 3):
                v = np.interp(flat, spec.omega, spec.G[i, j], right=0.0).reshape(w.shape)
                v = np.where(w > spec.omega[-1], 0.0, np.maximum(v, 0.0))
                out[i, j] = out[j, i] = v
        return out

    def g_tensor(self, omega, temperature):
        w = np.abs(np.asarray(omega, dtype=float))
        temps = [s.temperature for s in self.spectra]
        if len(temps) == 1 or temperature <= temps[0]:
            return self._interp(self.spectra[0], w)
        if temperature >= temps[-1]:
            return self._interp(self.spectra[-1], w)
        k = int(np.searchsorted(temps, temperature))
        lo, hi = self.spectra[k - 1], self.spectra[k]
        g_lo, g_hi = self._interp(lo, w), self._interp(hi, w)
        x = math.log(temperature / lo.temperature) / math.log(hi.temperature / lo.temperature)
        both = (g_lo > 0) & (g_hi > 0)
        with np.errstate(divide="ignore", invalid="ignore"):
            geo = np.exp((1 - x) * np.log(np.where(both, g_lo, 1.0)) + x * np.log(np.where(both, g_hi, 1.0)))
        return np.where(both, geo, (1 - x) * g_lo + x * g_hi)

    def describe(self):
        return {
            "g_source": "tabulated",
            "temperatures_K": [s.temperature for s in self.spectra],
            "n_omega": [int(s.omega.size) for s in self.spectra],
        }


# --- the hybrid model ------------------------------------------------------


@dataclass(frozen=True)
class SpectralDensityModel:
    g_source: GSource = field(default_factory=FlatSpectrum)
    ohmic: OhmicParams = field(default_factory=OhmicParams)
    noise: NoiseParams = field(default_factory=NoiseParams)
    mean_g: np.ndarray = field(default_factory=lambda: np.diag([2.1106, 2.1106, 2.0364]))
    B: np.ndarray = field(default_factory=lambda: np.array([0.0, 0.0, 1.0]))
    temperature: float = 10.0
    spin_lattice: bool = True
    magnetic_noise: bool = True
    scale: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "mean_g", _tensor(self.mean_g))
        object.__setattr__(self, "B", np.asarray(self.B, dtype=float).reshape(3))
        if not self.temperature > 0:
            raise ValueError("temperature must be positive")

    @property
    def B_magnitude(self) -> float:
        return float(np.linalg.norm(self.B))

    def at(self, B=None, temperature: float | None = None) -> "SpectralDensityModel":
        """Copy at a new field (3-vector, or magnitude along the current direction)."""
        kw = {}
        if B is not None:
            B = np.asarray(B, dtype=float)
            if B.ndim == 0:
                norm = self.B_magnitude
                direction = self.B / norm if norm > 0 else np.array([0.0, 0.0, 1.0])
                B = float(B) * direction
            kw["B"] = B
        if temperature is not None:
            kw["temperature"] = temperature
        return replace(self, **kw)

    def with_parts(self, spin_lattice: bool | None = None, magnetic_noise: bool | None = None):
        return replace(
            self,
            spin_lattice=self.spin_lattice if spin_lattice is None else spin_lattice,
            magnetic_noise=self.magnetic_noise if magnetic_noise is None else magnetic_noise,
        )

    def scaled(self, factor: float) -> "SpectralDensityModel":
        return replace(self, scale=self.scale * factor)

    # vectorized evaluations, shape (3, 3, *omega.shape)

    def spin_lattice_tensor(self, omega) -> np.ndarray:
        """J^dg for omega >= 0 (no detailed-balance extension)."""
        w = np.asarray(omega, dtype=float)
        if np.any(w < 0):
            raise ValueError("spin_lattice_tensor takes omega >= 0; use tensor() for signed omega")
        return self._spin_lattice_abs(w)

    def _spin_lattice_abs(self, w: np.ndarray) -> np.ndarray:
        G = self.g_source.g_tensor(w, self.temperature)
        b2 = self.B**2
        diag = PREFACTOR * self.ohmic.lam * w * np.tensordot(b2, G, axes=(0, 0))  # (3, ...)
        out = np.zeros((3, 3) + w.shape)
        for j in range(3):
            out[j, j] = diag[j]
        return out

    def magnetic_noise_tensor(self, omega) -> np.ndarray:
        w = np.asarray(omega, dtype=float)
        Gb = magnetic_noise_spectrum(self.noise, self.B_magnitude, w)
        gg = self.mean_g.T @ self.mean_g
        return PREFACTOR * gg.reshape((3, 3) + (1,) * w.ndim) * Gb

    def tensor(self, omega) -> np.ndarray:
        """Total J_jj'(omega) for signed omega."""
        w = np.asarray(omega, dtype=float)
        out = np.zeros((3, 3) + w.shape)
        if self.spin_lattice:
            a = np.abs(w)
            boltz = np.where(w < 0, np.exp(-HBAR * a / (K_B * self.temperature)), 1.0)
            out = out + self._spin_lattice_abs(a) * boltz
        if self.magnetic_noise:
            out = out + self.magnetic_noise_tensor(w)
        return self.scale * out

    def describe(self) -> dict:
        d = dict(self.g_source.describe())
        d.update(
            lambda_inv_cm1=self.ohmic.lambda_inv_cm,
            noise_a_T2=self.noise.a,
            noise_b=self.noise.b,
            gamma_pd_cm1=self.noise.gamma_pd / CM1_TO_RAD_S,
            spin_lattice=self.spin_lattice,
            magnetic_noise=self.magnetic_noise,
            temperature_K=self.temperature,
            scale=self.scale,
        )
        return d


def spin_lattice_j(model: SpectralDensityModel, j: int, jp: int, omega):
    """J^dg_jj'(omega) for omega >= 0, J^2 s."""
    return model.scale * model.spin_lattice_tensor(omega)[j, jp]


def magnetic_noise_j(model: SpectralDensityModel, j: int, jp: int, omega):
    """J^dB_jj'(omega) for any omega, J^2 s."""
    return model.scale * model.magnetic_noise_tensor(omega)[j, jp]


def total_j(model: SpectralDensityModel, j: int, jp: int, omega, temperature: float | None = None):
    if temperature is not None:
        model = model.at(temperature=temperature)
    return model.tensor(omega)[j, jp]


def spectral_density_table(model: SpectralDensityModel, omega, j: int = 2, jp: int = 2):
    """Rows (omega_cm1, J_dg, J_dB, J_total) on a signed or non-negative grid."""
    w = np.asarray(omega, dtype=float)
    total = model.tensor(w)[j, jp]
    dg = model.with_parts(True, False).tensor(w)[j, jp]
    dB = model.with_parts(False, True).tensor(w)[j, jp]
    if not model.spin_lattice:
        dg = np.zeros_like(w)
    if not model.magnetic_noise:
        dB = np.zeros_like(w)
    return np.column_stack([w / CM1_TO_RAD_S, dg, dB, total])


SPECTRAL_DENSITY_HEADER = ["omega_cm1", "J_dg", "J_dB", "J_total"]
