"""Redfield simulation of T1/T2 for an S = 1/2 spin qubit with a hyperfine-coupled nucleus."""

__version__ = "0.1.0"

from .hamiltonian import SpinSystem, build_hamiltonian, copper_porphyrin, system_eigen, zeeman_spectrum
from .redfield import gibbs_state, propagate, redfield_tensor, steady_state
from .relaxometry import field_sweep, scaling_exponent, t1, t2, temperature_sweep
from .spectral import FlatSpectrum, LorentzianSpectrum, NoiseParams, SpectralDensityModel, TabulatedSpectrum

__all__ = [
    "FlatSpectrum",
    "LorentzianSpectrum",
    "NoiseParams",
    "SpectralDensityModel",
    "SpinSystem",
    "TabulatedSpectrum",
    "build_hamiltonian",
    "copper_porphyrin",
    "field_sweep",
    "gibbs_state",
    "propagate",
    "redfield_tensor",
    "scaling_exponent",
    "steady_state",
    "system_eigen",
    "t1",
    "t2",
    "temperature_sweep",
    "zeeman_spectrum",
]
