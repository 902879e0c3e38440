"""Static electron-nuclear spin Hamiltonian and its eigenbasis.

The Hamiltonian is kept in angular-frequency units (H / hbar, rad/s):

    H/hbar = (mu_B / 2 hbar) sum_ij B_i g_ij (sigma_j x 1)
             + (1/2) sum_ij A_ij (sigma_i x I_j)

with Pauli matrices on the electron and plain angular-momentum matrices on
the nucleus. The hyperfine term is kept exactly in this Pauli form; values
quoted for the S.A.I convention have to be doubled by the caller.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
from scipy.optimize import linear_sum_assignment

from .physical import CM1_TO_RAD_S, HBAR, MU_B, kron, pauli, spin_operators

G_PERP = 2.1106
G_PAR = 2.0364
A_ZZ_MHZ = 611.0
A_PERP_MHZ = 79.4


def _symmetrized(m, name: str) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    if m.shape != (3, 3):
        raise ValueError(f"{name} must be 3x3, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise ValueError(f"{name} has non-finite entries")
    scale = max(1.0, float(np.abs(m).max()))
    if np.abs(m - m.T).max() > 1e-6 * scale:
        raise ValueError(f"{name} is not symmetric")
    return 0.5 * (m + m.T)


@dataclass(frozen=True)
class SpinSystem:
    """Electron spin 1/2 coupled to one nuclear spin.

    ``g`` is dimensionless; ``A`` is in rad/s. Both are symmetrized on
    construction.
    """

    nuclear_spin: float = 1.5
    g: np.ndarray = field(default_factory=lambda: np.diag([G_PERP, G_PERP, G_PAR]))
    A: np.ndarray = field(
        default_factory=lambda: 2 * np.pi * 1e6 * np.diag([A_PERP_MHZ, A_PERP_MHZ, A_ZZ_MHZ])
    )

    def __post_init__(self):
        object.__setattr__(self, "g", _symmetrized(self.g, "g-tensor"))
        object.__setattr__(self, "A", _symmetrized(self.A, "hyperfine tensor"))
        spin_operators(self.nuclear_spin)  # validates

    @property
    def nuclear_dim(self) -> int:
        return int(round(2 * self.nuclear_spin)) + 1

    @property
    def dimension(self) -> int:
        return 2 * self.nuclear_dim

    def without_hyperfine(self) -> "SpinSystem":
        return replace(self, A=np.zeros((3, 3)))

    def electron_operators(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Pauli matrices embedded in the full space (sigma_j x 1)."""
        eye = np.eye(self.nuclear_dim)
        return tuple(kron(s, eye) for s in pauli())

    def nuclear_operators(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        ops = spin_operators(self.nuclear_spin)
        return tuple(kron(np.eye(2), i) for i in ops.vector())


def copper_porphyrin() -> SpinSystem:
    """Cu(II) porphyrin qubit: S = 1/2, I = 3/2, axial g and A."""
    return SpinSystem()


def build_hamiltonian(sys: SpinSystem, B) -> np.ndarray:
    """H/hbar in rad/s for the lab-frame field ``B`` (tesla, 3-vector)."""
    B = np.asarray(B, dtype=float).reshape(3)
    sig = sys.electron_operators()
    H = np.zeros((sys.dimension, sys.dimension), dtype=complex)
    # Zeeman: effective field along each spin axis j is sum_i B_i g_ij
    b_eff = B @ sys.g
    for j in range(3):
        H += (MU_B / (2 * HBAR)) * b_eff[j] * sig[j]
    if np.any(sys.A):
        pa = pauli()
        nuc = spin_operators(sys.nuclear_spin).vector()
        for i in range(3):
            for j in range(3):
                if sys.A[i, j] != 0.0:
                    H += 0.5 * sys.A[i, j] * kron(pa[i], nuc[j])
    return H


class NotHermitianError(ValueError):
    pass


@dataclass(frozen=True)
class EigenSystem:
    """Eigen-decomposition of H/hbar plus electron Pauli matrices in that basis.

    ``energies`` are ascending angular frequencies; ``states`` holds the
    eigenvectors as columns; ``sigma[j]`` is <a|sigma_j x 1|b>.
    """

    energies: np.ndarray
    states: np.ndarray
    sigma: np.ndarray  # (3, n, n)
    hamiltonian: np.ndarray

    @property
    def n(self) -> int:
        return self.energies.size

    @property
    def omega(self) -> np.ndarray:
        """Transition-frequency matrix w[a, b] = w_a - w_b."""
        return self.energies[:, None] - self.energies[None, :]

    def to_eigenbasis(self, op: np.ndarray) -> np.ndarray:
        return self.states.conj().T @ op @ self.states

    def from_eigenbasis(self, op: np.ndarray) -> np.ndarray:
        return self.states @ op @ self.states.conj().T


def _fix_degenerate_blocks(w: np.ndarray, v: np.ndarray, tol: float) -> np.ndarray:
    n = w.size
    v = v.copy()
    start = 0
    while start < n:
        stop = start + 1
        while stop < n and w[stop] - w[start] <= tol:
            stop += 1
        if stop - start > 1:
            block = v[:, start:stop]
            proj = block @ block.conj().T
            # Gram-Schmidt on the projected standard basis, fixed column order:
            # reproducible whatever rotation LAPACK returned inside the block.
            basis = np.zeros((n, 0), dtype=complex)
            for k in range(n):
                vec = proj[:, k].copy()
                if basis.shape[1]:
                    vec -= basis @ (basis.conj().T @ vec)
                nrm = np.linalg.norm(vec)
                if nrm > 1e-8:
                    basis = np.column_stack([basis, vec / nrm])
                if basis.shape[1] == stop - start:
                    break
            v[:, start:stop] = basis
        start = stop
    return v


def _fix_phases(v: np.ndarray) -> np.ndarray:
    v = v.copy()
    for k in range(v.shape[1]):
        col = v[:, k]
        idx = int(np.argmax(np.abs(col) - 1e-12 * np.arange(col.size)))
        ph = col[idx] / abs(col[idx])
        v[:, k] = col / ph
    return v


def eigensystem(H: np.ndarray, sigma: Sequence[np.ndarray] | None = None) -> EigenSystem:
    """Diagonalize a Hermitian H/hbar.

    ``sigma`` defaults to the spin-1/2 Pauli operators embedded for the
    dimension of ``H`` (electron factor first).
    """
    H = np.asarray(H, dtype=complex)
    scale = max(1.0, float(np.abs(H).max()))
    if np.abs(H - H.conj().T).max() > 1e-9 * scale:
        raise NotHermitianError("Hamiltonian is not Hermitian")
    H = 0.5 * (H + H.conj().T)
    w, v = np.linalg.eigh(H)
    tol = 1e-10 * scale
    v = _fix_degenerate_blocks(w, v, tol)
    v = _fix_phases(v)
    n = H.shape[0]
    if sigma is None:
        if n % 2:
            raise ValueError("default electron operators need an even dimension")
        eye = np.eye(n // 2)
        sigma = [kron(s, eye) for s in pauli()]
    sig = np.array([v.conj().T @ s @ v for s in sigma])
    return EigenSystem(energies=w, states=v, sigma=sig, hamiltonian=H)


def system_eigen(sys: SpinSystem, B) -> EigenSystem:
    return eigensystem(build_hamiltonian(sys, B), sys.electron_operators())


@dataclass(frozen=True)
class ZeemanSpectrum:
    B: np.ndarray  # field magnitudes, T
    energies: np.ndarray  # (n_B, n_levels) rad/s, columns follow branches

    @property
    def energies_cm1(self) -> np.ndarray:
        return self.energies / CM1_TO_RAD_S

    def rows(self):
        for b, e in zip(self.B, self.energies_cm1):
            yield [float(b), *map(float, e)]

    def header(self) -> list[str]:
        return ["B_tesla"] + [f"E_{k + 1}_cm-1" for k in range(self.energies.shape[1])]


def zeeman_spectrum(sys: SpinSystem, B_grid, B_direction=(0.0, 0.0, 1.0)) -> ZeemanSpectrum:
    """Energy branches versus field magnitude, followed by eigenvector overlap."""
    B_grid = np.asarray(B_grid, dtype=float)
    if np.any(B_grid < 0):
        raise ValueError("field magnitudes must be non-negative")
    d = np.asarray(B_direction, dtype=float)
    d = d / np.linalg.norm(d)
    out = np.empty((B_grid.size, sys.dimension))
    prev = None
    for k, b in enumerate(B_grid):
        es = system_eigen(sys, b * d)
        if prev is None:
            order = np.arange(es.n)
        else:
            overlap = np.abs(prev.conj().T @ es.states) ** 2
            # row = branch, col = new eigenvector
            _, order = linear_sum_assignment(-overlap)
        out[k] = es.energies[order]
        prev = es.states[:, order]
    return ZeemanSpectrum(B=B_grid, energies=out)
