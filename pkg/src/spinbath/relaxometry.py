"""T1/T2 extraction: initial states, decay signals, exponential fits and sweeps.

T1 comes from <S_z(t)> after preparing |m_s=+1/2>|m_I>; T2 from the
coherence magnitude |<S_+(t)>| after preparing the x-polarized state. Both
signals are fitted to y_inf + A exp(-t/T).
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import least_squares

from .hamiltonian import EigenSystem, SpinSystem, system_eigen
from .redfield import propagate, redfield_tensor
from .spectral import FlatSpectrum, NoiseParams, SpectralDensityModel

R2_WARN = 0.995


class FitError(RuntimeError):
    pass


class InsufficientPointsError(ValueError):
    pass


@dataclass(frozen=True)
class InitialState:
    kind: str = "z_polarized"  # or "x_polarized"
    m_I: float | None = None  # None -> +I

    def __post_init__(self):
        if self.kind not in ("z_polarized", "x_polarized"):
            raise ValueError(f"unknown initial state kind {self.kind!r}")


def _product_state(sys: SpinSystem, spec: InitialState) -> np.ndarray:
    I = sys.nuclear_spin
    m_I = I if spec.m_I is None else float(spec.m_I)
    k = I - m_I
    if abs(k - round(k)) > 1e-9 or not (0 <= round(k) <= 2 * I + 1e-9):
        raise ValueError(f"m_I = {m_I} is not a projection of I = {I}")
    nuc = np.zeros(sys.nuclear_dim)
    nuc[int(round(k))] = 1.0
    up, down = np.array([1.0, 0.0]), np.array([0.0, 1.0])
    elec = up if spec.kind == "z_polarized" else (up + down) / math.sqrt(2)
    return np.kron(elec, nuc).astype(complex)


def initial_state(sys: SpinSystem, eigen: EigenSystem, spec: InitialState = InitialState()) -> np.ndarray:
    """Pure product-basis state rotated into the eigenbasis."""
    psi = eigen.states.conj().T @ _product_state(sys, spec)
    return np.outer(psi, psi.conj())


def observable_matrix(eigen: EigenSystem, observable: str) -> np.ndarray:
    s = eigen.sigma
    if observable == "Sz":
        return 0.5 * s[2]
    if observable == "Sx":
        return 0.5 * s[0]
    if observable in ("Splus", "Sx_magnitude"):
        return 0.5 * (s[0] + 1j * s[1])
    raise ValueError(f"unknown observable {observable!r}")


@dataclass(frozen=True)
class DecaySignal:
    t: np.ndarray
    y: np.ndarray
    observable: str


def observable_signal(rhos: np.ndarray, t, eigen: EigenSystem, observable: str = "Sz") -> DecaySignal:
    """<S_z>(t), or |<S_+>|(t) for ``observable="Sx_magnitude"``."""
    op = observable_matrix(eigen, observable)
    vals = np.einsum("tab,ba->t", np.asarray(rhos), op)
    y = np.abs(vals) if observable == "Sx_magnitude" else vals.real
    return DecaySignal(t=np.asarray(t, dtype=float), y=y, observable=observable)


@dataclass(frozen=True)
class DecayFit:
    T: float
    amplitude: float
    asymptote: float
    r_squared: float
    status: str = "ok"  # ok | no_decay | failed

    @property
    def converged(self) -> bool:
        return self.status == "ok"

    @property
    def rate(self) -> float:
        return 0.0 if math.isinf(self.T) else 1.0 / self.T


def fit_decay(sig: DecaySignal) -> DecayFit:
    t, y = sig.t, sig.y
    if t.size < 8:
        raise FitError("need at least 8 time points")
    span = t[-1] - t[0]
    yscale = float(np.ptp(y))
    if yscale <= 1e-12 * max(float(np.abs(y).max()), 1e-300) or yscale == 0.0:
        return DecayFit(math.inf, 0.0, float(y[0]), float("nan"), "no_decay")
    x = (t - t[0]) / span
    z = (y - y[-1]) / yscale
    # log-linear start on the part of the curve well above the tail value
    a0 = z[0]
    sel = np.abs(z) > 0.1 * abs(a0)
    sel &= np.sign(z) == np.sign(a0)
    sel[0] = True
    if sel.sum() >= 2:
        k0 = -np.polyfit(x[sel], np.log(np.abs(z[sel])), 1)[0]
    else:
        k0 = 5.0
    k0 = float(np.clip(k0, 1e-3, 1e4))

    def resid(p):
        yinf, amp, logk = p
        return yinf + amp * np.exp(-np.exp(logk) * x) - z

    try:
        sol = least_squares(resid, [0.0, a0, math.log(k0)], method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=20000)
    except Exception as exc:  # pragma: no cover - scipy raises rarely here
        return DecayFit(float("nan"), float("nan"), float("nan"), float("nan"), f"failed: {exc}")
    yinf, amp, logk = sol.x
    k = math.exp(logk)
    ss_res = float(np.sum(sol.fun**2))
    ss_tot = float(np.sum((z - z.mean()) ** 2))
    r2 = 1.0 - ss_res / ss_tot if ss_tot > 0 else float("nan")
    if not sol.success or not np.isfinite(k) or k <= 0:
        return DecayFit(float("nan"), float("nan"), float("nan"), r2, "failed")
    return DecayFit(
        T=span / k,
        amplitude=float(amp * yscale),
        asymptote=float(yinf * yscale + y[-1]),
        r_squared=r2,
    )


# --- full-pipeline T1 / T2 -------------------------------------------------


def _field_vector(model: SpectralDensityModel, B) -> np.ndarray:
    B = np.asarray(B, dtype=float)
    if B.ndim == 0:
        norm = model.B_magnitude
        direction = model.B / norm if norm > 0 else np.array([0.0, 0.0, 1.0])
        return float(B) * direction
    return B.reshape(3)


@dataclass(frozen=True)
class Relaxation:
    fit: DecayFit
    signal: DecaySignal
    kind: str
    B: np.ndarray
    temperature: float

    @property
    def T(self) -> float:
        return self.fit.T


def relaxation(
    sys: SpinSystem,
    model: SpectralDensityModel,
    B,
    temperature: float,
    kind: str = "T1",
    m_I: float | None = None,
    n_points: int = 200,
    secular: bool = False,
    method: str = "expm",
) -> Relaxation:
    """Propagate the protocol state and fit its decay.

    The time span starts at 10 / k_est, with k_est the Rayleigh quotient of R
    on the initial state (its coherences only, for T2), and is stretched once
    to 10 T when the fitted T exceeds half the span.
    """
    if kind not in ("T1", "T2"):
        raise ValueError("kind must be 'T1' or 'T2'")
    Bv = _field_vector(model, B)
    m = model.at(B=Bv, temperature=temperature)
    es = system_eigen(sys, Bv)
    rs = redfield_tensor(es, m, secular=secular)
    spec = InitialState("z_polarized" if kind == "T1" else "x_polarized", m_I)
    rho0 = initial_state(sys, es, spec)
    observable = "Sz" if kind == "T1" else "Sx_magnitude"
    v = rho0.reshape(-1).copy()
    if kind == "T2":
        n = es.n
        v = (rho0 - np.diag(np.diag(rho0))).reshape(-1)
        if not np.any(v):
            v = rho0.reshape(-1)
    k_est = float(np.real(v.conj() @ (rs.R @ v)) / np.real(v.conj() @ v))
    if not k_est > 0:
        t = np.linspace(0.0, 1.0, n_points)
        sig = observable_signal(propagate(rs, rho0, t, method=method), t, es, observable)
        fit = fit_decay(sig)
        return Relaxation(fit, sig, kind, Bv, temperature)
    span = 10.0 / k_est
    fit = sig = None
    for attempt in range(2):
        t = np.linspace(0.0, span, n_points)
        sig = observable_signal(propagate(rs, rho0, t, method=method), t, es, observable)
        fit = fit_decay(sig)
        if fit.status != "ok":
            break
        if fit.T > span / 2 or (fit.r_squared < R2_WARN and attempt == 0):
            span = 10.0 * fit.T if fit.T > span / 2 else 2.0 * span
            continue
        break
    if fit.status == "ok" and fit.r_squared < R2_WARN:
        warnings.warn(
            f"{kind} decay at |B| = {np.linalg.norm(Bv):.4g} T is not single-exponential "
            f"(R^2 = {fit.r_squared:.4f})"
        )
    return Relaxation(fit, sig, kind, Bv, temperature)


def t1(sys, model, B, temperature, **kw) -> float:
    return relaxation(sys, model, B, temperature, "T1", **kw).T


def t2(sys, model, B, temperature, **kw) -> float:
    return relaxation(sys, model, B, temperature, "T2", **kw).T


# --- sweeps ------------------------------------------------------------------


def scaling_exponent(x, y, range: tuple[float, float] | None = None, min_points: int = 3):
    """OLS slope of log y against log x, with its standard error."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sel = np.isfinite(x) & np.isfinite(y) & (x > 0) & (y > 0)
    if range is not None:
        lo, hi = range
        sel &= (x >= lo) & (x <= hi)
    if sel.sum() < min_points:
        raise InsufficientPointsError(f"need at least {min_points} positive points in range, got {int(sel.sum())}")
    lx, ly = np.log(x[sel]), np.log(y[sel])
    xc = lx - lx.mean()
    sxx = float(xc @ xc)
    slope = float(xc @ (ly - ly.mean())) / sxx
    resid = ly - ly.mean() - slope * xc
    dof = lx.size - 2
    stderr = math.sqrt(float(resid @ resid) / dof / sxx) if dof > 0 else float("nan")
    return slope, stderr


def default_models(
    g_source=None, temperature: float = 10.0, b_values: Sequence[float] = (0.0, 3e-8), a: float = 16e-10,
    gamma_pd_cm: float = 0.001, lambda_inv_cm: float = 6.9,
) -> dict[str, SpectralDensityModel]:
    """Spin-lattice only, plus one hybrid model per noise coefficient b."""
    from .spectral import OhmicParams

    base = SpectralDensityModel(
        g_source=g_source if g_source is not None else FlatSpectrum(),
        ohmic=OhmicParams(lambda_inv_cm),
        temperature=temperature,
    )
    models = {"spin-lattice": base.with_parts(True, False)}
    for b in b_values:
        noise = NoiseParams.from_cm(a=a, b=b, gamma_pd_cm=gamma_pd_cm)
        models[f"hybrid b={b:g}"] = SpectralDensityModel(
            g_source=base.g_source, ohmic=base.ohmic, noise=noise, temperature=temperature,
        )
    return models


def default_field_grid(n: int = 24, lo: float = 0.01, hi: float = 10.0) -> np.ndarray:
    return np.logspace(math.log10(lo), math.log10(hi), n)


SWEEP_HEADER = ["B_tesla", "T1_s", "T2_s", "model", "r2_T1", "r2_T2", "with_hyperfine"]


@dataclass
class SweepResult:
    B: np.ndarray
    temperature: float
    with_hyperfine: bool
    T1: dict[str, np.ndarray] = field(default_factory=dict)
    T2: dict[str, np.ndarray] = field(default_factory=dict)
    r2_T1: dict[str, np.ndarray] = field(default_factory=dict)
    r2_T2: dict[str, np.ndarray] = field(default_factory=dict)
    status: dict[str, list[str]] = field(default_factory=dict)
    exponents: dict[tuple[str, str, tuple[float, float]], tuple[float, float]] = field(default_factory=dict)
    descriptors: dict[str, dict] = field(default_factory=dict)

    @property
    def models(self) -> list[str]:
        return list(self.T1)

    @property
    def failures(self) -> list[tuple[str, float, str]]:
        out = []
        for name, sts in self.status.items():
            for b, s in zip(self.B, sts):
                if s not in ("ok", "ok/ok"):
                    out.append((name, float(b), s))
        return out

    def rows(self):
        for name in self.models:
            for k, b in enumerate(self.B):
                yield [
                    float(b), float(self.T1[name][k]), float(self.T2[name][k]), name,
                    float(self.r2_T1[name][k]), float(self.r2_T2[name][k]), self.with_hyperfine,
                ]


def field_sweep(
    sys: SpinSystem,
    models: Mapping[str, SpectralDensityModel],
    B_grid,
    temperature: float,
    with_hyperfine: bool = True,
    fit_ranges: Sequence[tuple[float, float]] = ((0.01, 0.1), (1.0, 10.0)),
    average_m_I: bool = False,
    n_points: int = 200,
) -> SweepResult:
    B_grid = np.asarray(B_grid, dtype=float)
    if np.any(B_grid <= 0) or np.any(np.diff(B_grid) <= 0):
        raise ValueError("B_grid must be positive and ascending")
    system = sys if with_hyperfine else sys.without_hyperfine()
    res = SweepResult(B=B_grid, temperature=temperature, with_hyperfine=with_hyperfine)
    if average_m_I:
        m_values = [system.nuclear_spin - k for k in range(system.nuclear_dim)]
    else:
        m_values = [None]
    for name, model in models.items():
        out = {q: np.full(B_grid.size, np.nan) for q in ("T1", "T2", "r1", "r2")}
        status = []
        for k, b in enumerate(B_grid):
            st = []
            for q, rq in (("T1", "r1"), ("T2", "r2")):
                fits = [relaxation(system, model, b, temperature, q, m_I=m, n_points=n_points).fit for m in m_values]
                ok = [f for f in fits if f.status in ("ok", "no_decay")]
                st.append("ok" if len(ok) == len(fits) else fits[0].status)
                if ok:
                    out[q][k] = float(np.mean([f.T for f in ok]))
                    out[rq][k] = float(np.nanmin([f.r_squared for f in ok]))
            status.append("ok" if st == ["ok", "ok"] else "/".join(st))
        res.T1[name], res.T2[name] = out["T1"], out["T2"]
        res.r2_T1[name], res.r2_T2[name] = out["r1"], out["r2"]
        res.status[name] = status
        res.descriptors[name] = model.describe()
        for rng in fit_ranges:
            for q in ("T1", "T2"):
                try:
                    res.exponents[(name, q, tuple(rng))] = scaling_exponent(B_grid, out[q], rng)
                except InsufficientPointsError:
                    pass
    return res


@dataclass(frozen=True)
class TemperatureSweep:
    T_grid: np.ndarray
    T1: np.ndarray
    slope: float
    stderr: float


def temperature_sweep(sys: SpinSystem, model: SpectralDensityModel, B, T_grid, kind: str = "T1") -> TemperatureSweep:
    T_grid = np.asarray(T_grid, dtype=float)
    if T_grid.size < 2:
        raise InsufficientPointsError("temperature sweep needs at least 2 temperatures for an exponent")
    vals = np.array([relaxation(sys, model, B, T, kind).T for T in T_grid])
    slope, err = scaling_exponent(T_grid, vals, min_points=2)
    return TemperatureSweep(T_grid=T_grid, T1=vals, slope=slope, stderr=err)
