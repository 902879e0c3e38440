"""g-tensor trajectories: ingestion, detrending, windowed autocorrelation,
one-sided spectra and temperature-scaling exponents.

Spectra use the convention

    G(w) = Re[ (1/sqrt(2 pi)) int_0^inf C(t) exp(i w t) dt ]

discretized with trapezoidal weights on the lag grid. Imaginary parts are
dropped. Units: lags in seconds, spectra in seconds.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy import signal
from scipy.optimize import curve_fit

from .csvio import read_csv, write_csv
from .physical import CM1_TO_RAD_S

#: (i, j) index pairs of the six independent tensor components
COMPONENTS = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))
COMPONENT_NAMES = ("xx", "yy", "zz", "xy", "xz", "yz")
TRAJECTORY_HEADER = ["t_ps", "gxx", "gyy", "gzz", "gxy", "gxz", "gyz", "temperature_K"]
SPECTRUM_HEADER = ["omega_cm1", "Gxx", "Gyy", "Gzz", "Gxy", "Gxz", "Gyz"]

PAPER_WINDOW = 35e-12


class TrajectoryError(ValueError):
    pass


def component_index(c) -> tuple[int, int]:
    if isinstance(c, str):
        c = c.lower().lstrip("g")
        i, j = ("xyz".index(c[0]), "xyz".index(c[1]))
    else:
        i, j = c
    return (min(i, j), max(i, j))


def _pack(samples: np.ndarray) -> np.ndarray:
    """(..., 3, 3) -> (..., 6) in COMPONENTS order."""
    return np.stack([samples[..., i, j] for i, j in COMPONENTS], axis=-1)


def _unpack(values: np.ndarray) -> np.ndarray:
    """(6, ...) -> (3, 3, ...) symmetric."""
    out = np.empty((3, 3) + values.shape[1:], dtype=values.dtype)
    for k, (i, j) in enumerate(COMPONENTS):
        out[i, j] = values[k]
        out[j, i] = values[k]
    return out


@dataclass(frozen=True)
class GTrajectory:
    dt: float
    temperature: float
    samples: np.ndarray  # (N, 3, 3)
    metadata: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        s = np.asarray(self.samples, dtype=float)
        if s.ndim != 3 or s.shape[1:] != (3, 3):
            raise TrajectoryError(f"samples must have shape (N, 3, 3), got {s.shape}")
        if s.shape[0] < 2:
            raise TrajectoryError("a trajectory needs at least 2 samples")
        if not np.all(np.isfinite(s)):
            raise TrajectoryError("trajectory contains non-finite values")
        if not (self.dt > 0):
            raise TrajectoryError("dt must be positive")
        object.__setattr__(self, "samples", s)

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def duration(self) -> float:
        return self.n * self.dt

    @property
    def times(self) -> np.ndarray:
        return np.arange(self.n) * self.dt


def save_trajectory(traj: GTrajectory, path, metadata: dict | None = None) -> Path:
    meta = {"dt_s": repr(float(traj.dt))}
    meta.update(traj.metadata)
    meta.update(metadata or {})
    t_ps = traj.times * 1e12
    packed = _pack(traj.samples)
    rows = ([t, *g, traj.temperature] for t, g in zip(t_ps, packed))
    return write_csv(path, TRAJECTORY_HEADER, rows, meta)


def load_trajectory(path, format: str = "csv") -> GTrajectory:
    """Read a trajectory CSV (header ``t_ps,gxx,gyy,gzz,gxy,gxz,gyz,temperature_K``)."""
    if format != "csv":
        raise TrajectoryError(f"unsupported trajectory format {format!r}")
    meta, header, rows = read_csv(path)
    if header != TRAJECTORY_HEADER:
        raise TrajectoryError(f"{path}: expected header {','.join(TRAJECTORY_HEADER)}")
    data = np.empty((len(rows), 8))
    for r, (lineno, fields) in enumerate(rows, start=1):
        if len(fields) != 8:
            raise TrajectoryError(f"{path}: row {r} (line {lineno}) has {len(fields)} fields, expected 8")
        try:
            vals = [float(f) for f in fields]
        except ValueError as exc:
            raise TrajectoryError(f"{path}: row {r} (line {lineno}) is malformed: {exc}") from None
        if not all(math.isfinite(v) for v in vals):
            raise TrajectoryError(f"{path}: row {r} (line {lineno}) contains non-finite values")
        data[r - 1] = vals
    if data.shape[0] < 2:
        raise TrajectoryError(f"{path}: need at least 2 rows")
    t = data[:, 0] * 1e-12
    steps = np.diff(t)
    dt_grid = (t[-1] - t[0]) / (t.size - 1)
    if dt_grid <= 0 or np.abs(steps - dt_grid).max() > 1e-6 * dt_grid:
        raise TrajectoryError(f"{path}: timestamps are not uniform within 1e-6 relative jitter")
    dt = dt_grid
    if "dt_s" in meta:
        dt_meta = float(meta["dt_s"])
        if abs(dt_meta - dt_grid) > 1e-6 * dt_grid:
            raise TrajectoryError(f"{path}: dt_s metadata disagrees with the time column")
        dt = dt_meta
    temps = data[:, 7]
    if np.ptp(temps) > 1e-9 * max(1.0, abs(temps[0])):
        raise TrajectoryError(f"{path}: temperature column is not constant")
    samples = _unpack(data[:, 1:7].T).transpose(2, 0, 1)
    extra = {k: v for k, v in meta.items() if k != "dt_s"}
    return GTrajectory(dt=dt, temperature=float(temps[0]), samples=samples, metadata=extra)


def upsample_linear(traj: GTrajectory, factor: int) -> GTrajectory:
    """Linear interpolation onto a grid ``factor`` times finer."""
    if factor < 1:
        raise ValueError("factor must be >= 1")
    t = traj.times
    t_new = np.arange((traj.n - 1) * factor + 1) * (traj.dt / factor)
    flat = traj.samples.reshape(traj.n, 9)
    out = np.column_stack([np.interp(t_new, t, flat[:, k]) for k in range(9)])
    return GTrajectory(dt=traj.dt / factor, temperature=traj.temperature, samples=out.reshape(-1, 3, 3))


@dataclass(frozen=True)
class FluctuationSeries:
    dt: float
    temperature: float
    mean_g: np.ndarray  # (3, 3)
    deltas: np.ndarray  # (N, 3, 3)


def detrend(traj: GTrajectory) -> FluctuationSeries:
    mean_g = traj.samples.mean(axis=0)
    return FluctuationSeries(
        dt=traj.dt, temperature=traj.temperature, mean_g=mean_g, deltas=traj.samples - mean_g
    )


@dataclass(frozen=True)
class AcfEstimate:
    dt: float
    temperature: float
    lags: np.ndarray  # seconds
    acf: np.ndarray  # (3, 3, n_lags)
    stderr: np.ndarray  # (3, 3, n_lags)
    n_windows: int
    window: float
    window_power: np.ndarray  # (3, 3): window-averaged mean square of the deltas

    @property
    def tau_max(self) -> float:
        return float(self.lags[-1])


def windowed_acf(
    fs: FluctuationSeries,
    window: float = PAPER_WINDOW,
    overlap: float = 0.0,
    estimator: str = "biased",
    max_lag_fraction: float = 0.5,
) -> AcfEstimate:
    """Average the autocorrelation of every tensor component over windows.

    Windows are non-overlapping by default and a trailing partial window is
    discarded. The biased estimator divides each lag sum by the window length.
    """
    if estimator not in ("biased", "unbiased"):
        raise ValueError(f"unknown estimator {estimator!r}")
    if not 0.0 <= overlap < 1.0:
        raise ValueError("overlap must be in [0, 1)")
    n_total = fs.deltas.shape[0]
    n_w = int(round(window / fs.dt))
    if n_w > n_total:
        raise TrajectoryError(
            f"window of {window:.3g} s is longer than the trajectory ({n_total * fs.dt:.3g} s)"
        )
    if n_w < 8:
        raise TrajectoryError(f"window holds only {n_w} samples; at least 8 are required")
    step = max(1, int(round(n_w * (1.0 - overlap))))
    starts = np.arange(0, n_total - n_w + 1, step)
    n_lag = int(n_w * max_lag_fraction) + 1
    n_lag = min(n_lag, n_w)
    nfft = 2 * n_w
    packed = _pack(fs.deltas)
    acf = np.empty((6, n_lag))
    err = np.empty((6, n_lag))
    power = np.empty(6)
    if estimator == "biased":
        norm = np.full(n_lag, float(n_w))
    else:
        norm = n_w - np.arange(n_lag, dtype=float)
    idx = starts[:, None] + np.arange(n_w)[None, :]
    for k in range(6):
        x = packed[idx, k]  # (n_windows, n_w)
        spec = np.fft.rfft(x, n=nfft, axis=1)
        per_window = np.fft.irfft(spec.real**2 + spec.imag**2, n=nfft, axis=1)[:, :n_lag] / norm
        acf[k] = per_window.mean(axis=0)
        if starts.size > 1:
            err[k] = per_window.std(axis=0, ddof=1) / np.sqrt(starts.size)
        else:
            err[k] = np.nan
        power[k] = np.mean(np.mean(x * x, axis=1))
    lags = np.arange(n_lag) * fs.dt
    return AcfEstimate(
        dt=fs.dt,
        temperature=fs.temperature,
        lags=lags,
        acf=_unpack(acf),
        stderr=_unpack(err),
        n_windows=int(starts.size),
        window=n_w * fs.dt,
        window_power=_unpack(power),
    )


@dataclass(frozen=True)
class ExponentialTaper:
    """Multiplies the ACF by exp(-rate * tau) before transforming (not part of the
    estimator proper; suppresses truncation leakage)."""

    rate: float


@dataclass(frozen=True)
class SpectrumEstimate:
    omega: np.ndarray  # rad/s
    G: np.ndarray  # (3, 3, n_omega), seconds
    temperature: float
    metadata: dict = field(default_factory=dict, compare=False)

    @property
    def omega_cm1(self) -> np.ndarray:
        return self.omega / CM1_TO_RAD_S

    def component(self, c) -> np.ndarray:
        i, j = component_index(c)
        return self.G[i, j]


def acf_spectrum(acf: AcfEstimate, taper: ExponentialTaper | None = None) -> SpectrumEstimate:
    """One-sided transform of the ACF on the grid w_k = k * 2 pi / tau_max up to Nyquist."""
    n_lag = acf.lags.size
    M = n_lag - 1
    if M < 1:
        raise ValueError("need at least two lags")
    w = np.ones(n_lag)
    w[0] = w[-1] = 0.5
    if taper is not None:
        w = w * np.exp(-taper.rate * acf.lags)
    c = _pack(acf.acf.transpose(2, 0, 1)).T * w  # (6, n_lag)
    # w_k tau_m = 2 pi k m / M, so the sum over m < M is a length-M DFT and
    # the m = M endpoint contributes c_M for every k.
    dft = np.fft.rfft(c[:, :M], axis=1).real + c[:, M:M + 1]
    n_omega = M // 2 + 1
    G = dft[:, :n_omega] * acf.dt / math.sqrt(2 * math.pi)
    omega = np.arange(n_omega) * (2 * math.pi / acf.tau_max)
    meta = {"taper_rate": taper.rate if taper else 0.0, "n_windows": acf.n_windows}
    return SpectrumEstimate(omega=omega, G=_unpack(G), temperature=acf.temperature, metadata=meta)


def lorentzian_spectrum(omega, amplitude: float, gamma: float) -> np.ndarray:
    """One-sided spectrum of amplitude * exp(-gamma tau)."""
    omega = np.asarray(omega, dtype=float)
    return amplitude / math.sqrt(2 * math.pi) * gamma / (gamma**2 + omega**2)


def fit_lorentzian(spec: SpectrumEstimate, component="zz", omega_max: float | None = None):
    """Least-squares (amplitude, gamma) of a Lorentzian fitted to one component."""
    G = spec.component(component)
    om = spec.omega
    sel = np.ones(om.size, bool) if omega_max is None else om <= omega_max
    g0 = max(G[0], np.max(G[sel]))
    # half-width guess: first point below half the zero-frequency value
    below = np.nonzero(G[sel] < 0.5 * g0)[0]
    gamma0 = om[sel][below[0]] if below.size else om[sel][-1]
    gamma0 = max(gamma0, om[1] if om.size > 1 else 1.0)
    amp0 = g0 * math.sqrt(2 * math.pi) * gamma0
    scale = np.array([amp0, gamma0])

    def model(w, a, g):
        return lorentzian_spectrum(w, a * scale[0], g * scale[1]) / g0

    p, _ = curve_fit(model, om[sel], G[sel] / g0, p0=[1.0, 1.0])
    return float(p[0] * scale[0]), float(p[1] * scale[1])


def save_spectrum(spec: SpectrumEstimate, path, metadata: dict | None = None) -> Path:
    packed = _pack(spec.G.transpose(2, 0, 1))
    rows = ([w, *g] for w, g in zip(spec.omega_cm1, packed))
    meta = {"temperature_K": spec.temperature, **spec.metadata, **(metadata or {})}
    return write_csv(path, SPECTRUM_HEADER, rows, meta)


def load_spectrum(path) -> SpectrumEstimate:
    meta, header, rows = read_csv(path)
    if header != SPECTRUM_HEADER:
        raise TrajectoryError(f"{path}: expected header {','.join(SPECTRUM_HEADER)}")
    data = np.array([[float(f) for f in fields] for _, fields in rows])
    temperature = float(meta.get("temperature_K", "nan"))
    return SpectrumEstimate(
        omega=data[:, 0] * CM1_TO_RAD_S, G=_unpack(data[:, 1:].T), temperature=temperature, metadata=meta
    )


def save_acf(acf: AcfEstimate, path, metadata: dict | None = None) -> Path:
    header = ["tau_ps"] + [f"C{n}" for n in COMPONENT_NAMES] + [f"stderr_{n}" for n in COMPONENT_NAMES]
    c = _pack(acf.acf.transpose(2, 0, 1))
    e = _pack(acf.stderr.transpose(2, 0, 1))
    rows = ([t, *a, *b] for t, a, b in zip(acf.lags * 1e12, c, e))
    meta = {"temperature_K": acf.temperature, "n_windows": acf.n_windows, "window_s": acf.window}
    meta.update(metadata or {})
    return write_csv(path, header, rows, meta)


@dataclass(frozen=True)
class AlphaSpectrum:
    omega: np.ndarray
    alpha: np.ndarray  # NaN where fewer than 3 usable temperatures
    mean: float
    std: float
    n_used: int
    hist_counts: np.ndarray
    hist_edges: np.ndarray
    omega_max: float

    @property
    def omega_cm1(self) -> np.ndarray:
        return self.omega / CM1_TO_RAD_S


def temperature_exponent(
    spectra: Sequence[SpectrumEstimate],
    component="zz",
    omega_max: float | None = None,
    bins: int = 20,
) -> AlphaSpectrum:
    """Per-frequency least-squares slope of log G against log T."""
    temps = np.array([s.temperature for s in spectra], dtype=float)
    if np.unique(temps).size < 3:
        raise ValueError("temperature_exponent needs spectra at >= 3 distinct temperatures")
    if np.any(temps <= 0):
        raise ValueError("temperatures must be positive")
    omega = spectra[0].omega
    table = np.empty((len(spectra), omega.size))
    for k, s in enumerate(spectra):
        g = s.component(component)
        if s.omega.shape == omega.shape and np.array_equal(s.omega, omega):
            table[k] = g
        else:
            table[k] = np.interp(omega, s.omega, g, left=np.nan, right=np.nan)
    logT = np.log(temps)
    alpha = np.full(omega.size, np.nan)
    for m in range(omega.size):
        if omega[m] <= 0:
            continue
        col = table[:, m]
        ok = np.isfinite(col) & (col > 0)
        if np.unique(temps[ok]).size < 3:
            continue
        x = logT[ok]
        y = np.log(col[ok])
        xc = x - x.mean()
        alpha[m] = float(xc @ (y - y.mean()) / (xc @ xc))
    wmax = omega[-1] if omega_max is None else omega_max
    sel = (omega > 0) & (omega <= wmax) & np.isfinite(alpha)
    vals = alpha[sel]
    if vals.size:
        mean, std = float(vals.mean()), float(vals.std())
        lo, hi = float(vals.min()), float(vals.max())
        if hi - lo <= 1e-9 * max(1.0, abs(mean)):
            # all exponents equal: centre a unit-width range on them
            lo, hi = mean - 0.5, mean + 0.5
        counts, edges = np.histogram(vals, bins=bins, range=(lo, hi))
    else:
        mean = std = float("nan")
        counts, edges = np.zeros(bins, int), np.linspace(0, 1, bins + 1)
    return AlphaSpectrum(
        omega=omega, alpha=alpha, mean=mean, std=std, n_used=int(vals.size),
        hist_counts=counts, hist_edges=edges, omega_max=float(wmax),
    )


def _as_tensor(value, name: str) -> np.ndarray:
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 0:
        return np.full((3, 3), float(arr))
    if arr.shape != (3, 3):
        raise ValueError(f"{name} must be a scalar or 3x3")
    return 0.5 * (arr + arr.T)


def synth_ou_trajectory(
    mean_g,
    variances,
    corr_time: float,
    dt: float,
    duration: float,
    temperature: float,
    seed: int,
) -> GTrajectory:
    """Independent stationary Ornstein-Uhlenbeck fluctuations on every component.

    Uses the exact AR(1) update x_{k+1} = r x_k + sqrt(var (1 - r^2)) xi with
    r = exp(-dt / corr_time), so the sampled ACF is var * exp(-tau / corr_time)
    at every lag.
    """
    if not corr_time > 0:
        raise ValueError("corr_time must be positive")
    if not dt < corr_time / 2:
        raise ValueError("dt must be below corr_time / 2")
    mean_g = _as_tensor(mean_g, "mean_g")
    var = _as_tensor(variances, "variances")
    if np.any(var < 0):
        raise ValueError("variances must be non-negative")
    n = int(round(duration / dt))
    if n < 2:
        raise ValueError("duration must cover at least 2 samples")
    rng = np.random.default_rng(seed)
    r = math.exp(-dt / corr_time)
    packed = np.empty((n, 6))
    for k, (i, j) in enumerate(COMPONENTS):
        sd = math.sqrt(var[i, j])
        x0 = sd * rng.standard_normal()
        xi = rng.standard_normal(n - 1)
        b = sd * math.sqrt(1.0 - r * r)
        tail, _ = signal.lfilter([b], [1.0, -r], xi, zi=[r * x0])
        packed[0, k] = x0
        packed[1:, k] = tail
    samples = _unpack(packed.T).transpose(2, 0, 1) + mean_g
    meta = {
        "generator": "ornstein-uhlenbeck",
        "seed": seed,
        "corr_time_s": repr(float(corr_time)),
        "variances": ";".join(repr(float(var[i, j])) for i, j in COMPONENTS),
    }
    return GTrajectory(dt=dt, temperature=float(temperature), samples=samples, metadata=meta)
