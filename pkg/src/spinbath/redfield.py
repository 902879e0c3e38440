"""Redfield tensor assembly and density-matrix propagation in the H_S eigenbasis.

Rate functions

    Gamma_ab,cd(w_dc) = Re[ sum_jj' <a|s_j|b> <c|s_j'|d> J_jj'(w_d - w_c) ]      (J^2 s)

and the tensor

    R_ab,cd = (1/hbar^2) { d_bd sum_e Gamma_ae,ec(w_ce) - Gamma_ca,bd(w_db)
                           - Gamma_db,ac(w_ca) + d_ac sum_e Gamma_be,ed(w_de) }

generate d rho_ab / dt = - sum_cd R_ab,cd rho_cd. By default this is the
interaction picture (no coherent term); ``coherent=True`` adds -i w_ab rho_ab.
Vectorization is row-major: index (a, b) -> a * n + b.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm, null_space

from .hamiltonian import EigenSystem
from .physical import HBAR, K_B

JFunction = Callable[[np.ndarray], np.ndarray]
"""Maps signed omega (any shape) to J_jj' with shape (3, 3, *omega.shape)."""


def _j_callable(J) -> JFunction:
    if hasattr(J, "tensor"):
        return J.tensor
    return J


def rate_tensor(eigen: EigenSystem, J) -> np.ndarray:
    """All Gamma_ab,cd at once, array indexed [a, b, c, d]."""
    Jf = _j_callable(J)
    w = eigen.omega  # w[d, c] = w_d - w_c
    jtab = np.asarray(Jf(w))  # (3, 3, n, n), jtab[j, k, d, c] = J_jk(w_dc)
    s = eigen.sigma
    prod = np.einsum("jab,kcd,jkdc->abcd", s, s, jtab)
    return prod.real


def gamma_rate(eigen: EigenSystem, J, a: int, b: int, c: int, d: int) -> float:
    Jf = _j_callable(J)
    wdc = eigen.energies[d] - eigen.energies[c]
    jv = np.asarray(Jf(np.array(wdc)))
    s = eigen.sigma
    val = 0.0 + 0.0j
    for j in range(3):
        for k in range(3):
            val += s[j, a, b] * s[k, c, d] * jv[j, k]
    return float(val.real)


@dataclass(frozen=True)
class RedfieldSystem:
    eigen: EigenSystem
    R: np.ndarray  # (n^2, n^2), s^-1
    secular: bool = False
    coherent: bool = False
    metadata: dict = field(default_factory=dict)

    @property
    def n(self) -> int:
        return self.eigen.n

    @property
    def tensor(self) -> np.ndarray:
        n = self.n
        return self.R.reshape(n, n, n, n)

    @property
    def generator(self) -> np.ndarray:
        """L with d vec(rho)/dt = L vec(rho)."""
        L = -self.R.astype(complex)
        if self.coherent:
            L = L - 1j * np.diag(self.eigen.omega.ravel())
        return L

    def with_coherent(self, coherent: bool = True) -> "RedfieldSystem":
        return RedfieldSystem(self.eigen, self.R, self.secular, coherent, dict(self.metadata))


def redfield_tensor(
    eigen: EigenSystem,
    J,
    secular: bool = False,
    secular_cutoff: float | None = None,
    coherent: bool = False,
    metadata: dict | None = None,
) -> RedfieldSystem:
    n = eigen.n
    G = rate_tensor(eigen, J)
    M = np.einsum("aeec->ac", G)
    eye = np.eye(n)
    R = (
        np.einsum("bd,ac->abcd", eye, M)
        - np.einsum("cabd->abcd", G)
        - np.einsum("dbac->abcd", G)
        + np.einsum("ac,bd->abcd", eye, M)
    ) / HBAR**2
    Rm = R.reshape(n * n, n * n)
    if secular:
        if secular_cutoff is None:
            secular_cutoff = 10.0 * float(np.abs(np.diag(Rm)).max())
        wv = eigen.omega.ravel()
        Rm = np.where(np.abs(wv[:, None] - wv[None, :]) > secular_cutoff, 0.0, Rm)
    return RedfieldSystem(eigen=eigen, R=Rm, secular=secular, coherent=coherent, metadata=dict(metadata or {}))


# --- density matrices -----------------------------------------------------


class DensityMatrixError(ValueError):
    pass


def check_density_matrix(rho: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    rho = np.asarray(rho, dtype=complex)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise DensityMatrixError("density matrix must be square")
    if np.abs(rho - rho.conj().T).max() > tol:
        raise DensityMatrixError("density matrix is not Hermitian")
    if abs(np.trace(rho) - 1.0) > tol:
        raise DensityMatrixError(f"density matrix trace is {np.trace(rho).real:.12g}, expected 1")
    lam = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))
    if lam.min() < -1e-6:
        warnings.warn(f"density matrix has eigenvalue {lam.min():.3g} < -1e-6 (Redfield positivity violation)")
    return rho


def _propagate_expm(L: np.ndarray, v0: np.ndarray, t: np.ndarray) -> np.ndarray:
    out = np.empty((t.size, v0.size), dtype=complex)
    v = v0.copy()
    cache: dict[float, np.ndarray] = {}
    prev = 0.0
    for k, tk in enumerate(t):
        dt = tk - prev
        if dt != 0.0:
            key = float(dt)
            P = cache.get(key)
            if P is None:
                # uniform grids reuse a single propagator; expm itself is
                # Pade(13) scaling-and-squaring
                P = expm(L * dt)
                if len(cache) < 4:
                    cache[key] = P
            v = P @ v
        out[k] = v
        prev = tk
    return out


def _propagate_ode(L: np.ndarray, v0: np.ndarray, t: np.ndarray, rtol: float, atol: float) -> np.ndarray:
    # split complex into real for solve_ivp's real-valued high-order method
    m = v0.size
    A = np.block([[L.real, -L.imag], [L.imag, L.real]])
    y0 = np.concatenate([v0.real, v0.imag])
    sol = solve_ivp(
        lambda _t, y: A @ y, (0.0, float(t[-1])), y0, method="DOP853",
        t_eval=t, rtol=rtol, atol=atol,
    )
    if not sol.success:
        raise RuntimeError(f"ODE integration failed: {sol.message}")
    y = sol.y.T
    return y[:, :m] + 1j * y[:, m:]


def propagate(
    rs: RedfieldSystem,
    rho0: np.ndarray,
    t_grid: Sequence[float],
    method: str = "expm",
    rtol: float = 1e-12,
    atol: float = 1e-14,
) -> np.ndarray:
    """rho(t) for each t in ``t_grid`` (ascending, starting at 0); shape (nt, n, n)."""
    t = np.asarray(t_grid, dtype=float)
    if t.ndim != 1 or t.size == 0:
        raise ValueError("t_grid must be a non-empty 1-D sequence")
    if t[0] < 0 or np.any(np.diff(t) < 0):
        raise ValueError("t_grid must be ascending from 0")
    rho0 = check_density_matrix(rho0)
    n = rs.n
    v0 = rho0.reshape(-1)
    L = rs.generator
    if method == "expm":
        vs = _propagate_expm(L, v0, t)
    elif method == "ode":
        vs = _propagate_ode(L, v0, t, rtol, atol)
    else:
        raise ValueError(f"unknown propagation method {method!r}")
    return vs.reshape(t.size, n, n)


class DegenerateKernelError(RuntimeError):
    """The generator has more than one stationary state."""

    def __init__(self, multiplicity: int, basis: np.ndarray):
        super().__init__(f"stationary subspace has dimension {multiplicity}")
        self.multiplicity = multiplicity
        self.basis = basis


def stationary_basis(rs: RedfieldSystem, picture: str = "lab", rtol: float = 1e-10) -> np.ndarray:
    """Columns spanning the stationary subspace (vectorized matrices).

    ``picture="lab"`` includes the coherent term -i w_ab rho_ab, so only
    populations and coherences between degenerate levels can be stationary.
    It is solved by eliminating the rotating coherences (Schur complement),
    which keeps rates of order 1e-3 s^-1 resolvable next to Larmor
    frequencies of order 1e11 rad/s. ``picture="interaction"`` returns the
    kernel of R itself.
    """
    n = rs.n
    R = rs.R.astype(complex)
    norm = float(np.abs(R).max())
    if picture == "interaction":
        if norm == 0.0:
            return np.eye(n * n, dtype=complex)
        return null_space(R, rcond=rtol)
    if picture != "lab":
        raise ValueError(f"unknown picture {picture!r}")
    w = rs.eigen.omega.ravel()
    w_scale = max(float(np.abs(w).max()), 1.0)
    slow = np.abs(w) <= 1e-12 * w_scale
    fast = ~slow
    s_idx, f_idx = np.nonzero(slow)[0], np.nonzero(fast)[0]
    if norm == 0.0:
        basis = np.zeros((n * n, s_idx.size), dtype=complex)
        basis[s_idx, np.arange(s_idx.size)] = 1.0
        return basis
    Rss = R[np.ix_(s_idx, s_idx)]
    if f_idx.size:
        K = R[np.ix_(f_idx, f_idx)] + 1j * np.diag(w[f_idx])
        X = np.linalg.solve(K, R[np.ix_(f_idx, s_idx)])  # v_f = -X v_s
        eff = Rss - R[np.ix_(s_idx, f_idx)] @ X
    else:
        X = np.zeros((0, s_idx.size))
        eff = Rss
    eff_norm = float(np.abs(eff).max())
    if eff_norm == 0.0:
        vs = np.eye(s_idx.size, dtype=complex)
    else:
        vs = null_space(eff, rcond=rtol)
    basis = np.zeros((n * n, vs.shape[1]), dtype=complex)
    basis[s_idx] = vs
    basis[f_idx] = -X @ vs
    return basis


def steady_state(rs: RedfieldSystem, picture: str = "lab", rtol: float = 1e-10) -> np.ndarray:
    """Unique trace-1 stationary density matrix.

    Raises DegenerateKernelError (carrying the multiplicity and a basis)
    when the stationary subspace is not one-dimensional.
    """
    basis = stationary_basis(rs, picture, rtol)
    k = basis.shape[1]
    if k != 1:
        raise DegenerateKernelError(k, basis)
    n = rs.n
    rho = basis[:, 0].reshape(n, n)
    tr = np.trace(rho)
    if abs(tr) < 1e-14 * np.abs(rho).max():
        raise RuntimeError("stationary vector is traceless; cannot normalize")
    rho = rho / tr
    return 0.5 * (rho + rho.conj().T)


def gibbs_state(eigen: EigenSystem, temperature: float) -> np.ndarray:
    """Thermal populations in the eigenbasis (diagonal matrix)."""
    x = -HBAR * (eigen.energies - eigen.energies.min()) / (K_B * temperature)
    p = np.exp(x)
    return np.diag(p / p.sum()).astype(complex)


def save_tensor(rs: RedfieldSystem, path) -> None:
    """Dump R: one row per (a, b), real and imaginary columns per (c, d)."""
    from .csvio import write_csv

    n = rs.n
    cols = [f"{p}_{c}{d}" for c in range(n) for d in range(n) for p in ("re", "im")]
    rows = []
    R = rs.R.astype(complex)
    for a in range(n):
        for b in range(n):
            row = R[a * n + b]
            vals = np.empty(2 * n * n)
            vals[0::2], vals[1::2] = row.real, row.imag
            rows.append([f"{a}{b}", *vals])
    write_csv(path, ["ab", *cols], rows, rs.metadata)
