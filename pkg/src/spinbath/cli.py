"""spinbath command line: spectrum | acf | scaling | sweep | synth.

Exit codes: 0 success, 2 configuration error, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace
from pathlib import Path
from typing import Sequence

import numpy as np

from . import __version__
from .config import ConfigError, RunConfig, load_config
from .csvio import write_csv
from .hamiltonian import zeeman_spectrum
from .physical import CM1_TO_RAD_S
from .relaxometry import SWEEP_HEADER, FitError, default_models, field_sweep
from .redfield import DegenerateKernelError
from .spectral import FlatSpectrum, LorentzianSpectrum, TabulatedSpectrum
from .svgplot import Series, line_plot
from .trajectory import (
    COMPONENT_NAMES,
    ExponentialTaper,
    TrajectoryError,
    acf_spectrum,
    detrend,
    load_spectrum,
    load_trajectory,
    save_acf,
    save_spectrum,
    save_trajectory,
    synth_ou_trajectory,
    temperature_exponent,
    upsample_linear,
    windowed_acf,
)

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class NumericalFailure(RuntimeError):
    pass


class Context:
    def __init__(self, cfg: RunConfig, command: str, out: Path, plots: bool, seed: int | None):
        self.cfg = cfg
        self.command = command
        self.out = out
        self.plots = plots
        self.seed = seed

    def metadata(self, **extra) -> dict:
        meta = {
            "tool": "spinbath",
            "version": __version__,
            "command": self.command,
            "config_hash": self.cfg.digest(),
            "seed": self.seed if self.seed is not None else "none",
        }
        meta.update(extra)
        return meta

    def path(self, name: str) -> Path:
        return self.out / name


def _tensor(values) -> np.ndarray:
    arr = np.asarray(values, dtype=float)
    return np.diag(arr) if arr.shape == (3,) else arr


def _temperature_tag(T: float) -> str:
    return f"{T:g}K"


# --- spectrum ------------------------------------------------------------------


def cmd_spectrum(ctx: Context, args) -> int:
    z = ctx.cfg.zeeman
    sys_ = ctx.cfg.system.build()
    grid = np.linspace(0.0, z.B_max, z.n_points)
    spec = zeeman_spectrum(sys_, grid, z.direction)
    csv_path = write_csv(ctx.path("zeeman.csv"), spec.header(), spec.rows(), ctx.metadata(units="cm-1"))
    print(f"wrote {csv_path}")
    if ctx.plots:
        e = spec.energies_cm1
        series = [Series(f"branch {k + 1}", spec.B, e[:, k]) for k in range(e.shape[1])]
        p = line_plot(ctx.path("zeeman.svg"), series, "B (T)", "E (cm-1)", "Zeeman levels")
        print(f"wrote {p}")
    return EXIT_OK


# --- acf / scaling ----------------------------------------------------------------


def _estimate(ctx: Context, path: Path):
    a = ctx.cfg.acf
    traj = load_trajectory(path)
    if a.upsample > 1:
        traj = upsample_linear(traj, a.upsample)
    acf = windowed_acf(detrend(traj), window=a.window, overlap=a.overlap, estimator=a.estimator)
    taper = ExponentialTaper(a.taper_rate) if a.taper_rate > 0 else None
    return acf, acf_spectrum(acf, taper)


def _need_paths(args) -> list[Path]:
    if not args.trajectories:
        raise ConfigError(f"{args.command}: at least one trajectory file is required")
    return [Path(p) for p in args.trajectories]


def cmd_acf(ctx: Context, args) -> int:
    results = []
    for p in _need_paths(args):
        acf, spec = _estimate(ctx, p)
        meta = ctx.metadata(source=p.name)
        print(f"wrote {save_acf(acf, ctx.path(f'acf_{p.stem}.csv'), meta)}")
        print(f"wrote {save_spectrum(spec, ctx.path(f'spectrum_{p.stem}.csv'), meta)}")
        results.append((p, acf, spec))
    if ctx.plots:
        for k, name in enumerate(COMPONENT_NAMES):
            i, j = ((0, 0), (1, 1), (2, 2), (0, 1), (0, 2), (1, 2))[k]
            acf_series = [Series(f"{a.temperature:g} K", a.lags * 1e12, a.acf[i, j]) for _, a, _ in results]
            sp_series = [Series(f"{s.temperature:g} K", s.omega_cm1, s.G[i, j]) for _, _, s in results]
            line_plot(ctx.path(f"acf_{name}.svg"), acf_series, "tau (ps)", f"C_{name}", f"ACF {name}")
            line_plot(ctx.path(f"spectrum_{name}.svg"), sp_series, "omega (cm-1)", f"G_{name} (s)", f"G_{name}")
        print(f"wrote {2 * len(COMPONENT_NAMES)} SVG files to {ctx.out}")
    return EXIT_OK


def cmd_scaling(ctx: Context, args) -> int:
    s = ctx.cfg.scaling
    spectra = [_estimate(ctx, p)[1] for p in _need_paths(args)]
    try:
        alpha = temperature_exponent(spectra, s.component, s.omega_max, s.bins)
    except ValueError as exc:
        raise NumericalFailure(str(exc)) from None
    meta = ctx.metadata(component=s.component, omega_max_cm1=s.omega_max / CM1_TO_RAD_S,
                        alpha_mean=repr(alpha.mean), alpha_std=repr(alpha.std))
    rows = ([w, a] for w, a in zip(alpha.omega_cm1, alpha.alpha))
    print(f"wrote {write_csv(ctx.path('alpha.csv'), ['omega_cm1', 'alpha'], rows, meta)}")
    hist = ([lo, hi, c] for lo, hi, c in zip(alpha.hist_edges[:-1], alpha.hist_edges[1:], alpha.hist_counts))
    print(f"wrote {write_csv(ctx.path('alpha_hist.csv'), ['alpha_low', 'alpha_high', 'count'], hist, meta)}")
    if ctx.plots:
        line_plot(ctx.path("alpha.svg"), [Series("alpha", alpha.omega_cm1, alpha.alpha)],
                  "omega (cm-1)", "alpha", "temperature exponent")
    print(f"alpha = {alpha.mean:.3f} +/- {alpha.std:.3f} over {alpha.n_used} frequencies")
    return EXIT_OK


# --- sweep ------------------------------------------------------------------------


def build_g_source(cfg: RunConfig):
    s = cfg.bath.spectrum
    if s.source == "flat":
        return FlatSpectrum(s.G0, s.reference_temperature, s.temperature_exponent)
    if s.source == "lorentzian":
        return LorentzianSpectrum(s.variance, s.gamma, s.reference_temperature, s.temperature_exponent)
    if s.source == "file":
        return TabulatedSpectrum([load_spectrum(p) for p in s.paths])
    spectra = []
    for k, T in enumerate(s.temperatures):
        var = s.variance
        if s.reference_temperature is not None:
            var *= (T / s.reference_temperature) ** s.temperature_exponent
        traj = synth_ou_trajectory(
            _tensor(cfg.system.g), var, s.corr_time, s.dt, s.duration, T, s.seed + k
        )
        acf = windowed_acf(detrend(traj), window=s.window)
        spectra.append(acf_spectrum(acf))
    return TabulatedSpectrum(spectra)


def build_models(cfg: RunConfig, temperature: float) -> dict:
    b = cfg.bath
    models = default_models(
        g_source=build_g_source(cfg),
        temperature=temperature,
        b_values=b.b_values,
        a=b.noise_a,
        gamma_pd_cm=b.gamma_pd / CM1_TO_RAD_S,
        lambda_inv_cm=b.lambda_inv / CM1_TO_RAD_S,
    )
    if not b.spin_lattice_only_model:
        models.pop("spin-lattice")
    d = np.asarray(cfg.sweep.direction, dtype=float)
    d = d / np.linalg.norm(d)
    g_mean = _tensor(cfg.system.g)
    return {k: replace(m, B=d, mean_g=g_mean) for k, m in models.items()}


def _exponent_table(results) -> list[str]:
    lines = [f"{'model':<18}{'A':<6}{'quantity':<10}{'range (T)':<16}{'slope':>10}{'stderr':>10}"]
    for res in results:
        hf = "full" if res.with_hyperfine else "A=0"
        for (name, q, (lo, hi)), (slope, err) in res.exponents.items():
            lines.append(f"{name:<18}{hf:<6}{q:<10}{f'{lo:g}-{hi:g}':<16}{slope:>10.3f}{err:>10.3f}")
    return lines


def cmd_sweep(ctx: Context, args) -> int:
    cfg = ctx.cfg
    w = cfg.sweep
    sys_ = cfg.system.build()
    grid = w.grid()
    failures = []
    for T in w.temperatures:
        models = build_models(cfg, T)
        variants = [True] if not w.no_hyperfine_variant else [True, False]
        if not w.with_hyperfine:
            variants = [False]
        results = [
            field_sweep(sys_, models, grid, T, with_hyperfine=hf, fit_ranges=w.fit_ranges,
                        average_m_I=w.average_m_I, n_points=w.n_time_points)
            for hf in variants
        ]
        tag = _temperature_tag(T)
        rows = [r for res in results for r in res.rows()]
        meta = ctx.metadata(temperature_K=T, models=";".join(models))
        print(f"wrote {write_csv(ctx.path(f'sweep_{tag}.csv'), SWEEP_HEADER, rows, meta)}")
        if ctx.plots:
            for q in ("T1", "T2"):
                series = []
                for res in results:
                    for name in res.models:
                        label = name if res.with_hyperfine else f"{name} (A=0)"
                        series.append(Series(label, res.B, getattr(res, q)[name], dashed=not res.with_hyperfine))
                line_plot(ctx.path(f"sweep_{q}_{tag}.svg"), series, "B (T)", f"{q} (s)",
                          f"{q} at {T:g} K", xlog=True, ylog=True)
        print(f"exponents at {T:g} K")
        for line in _exponent_table(results):
            print("  " + line)
        for res in results:
            failures.extend((T, res.with_hyperfine, *f) for f in res.failures)
    if failures:
        for T, hf, name, b, status in failures:
            print(f"fit failure: T={T:g} K hyperfine={hf} model={name} B={b:.4g} T: {status}", file=sys.stderr)
        raise NumericalFailure(f"{len(failures)} sweep points failed to fit")
    return EXIT_OK


# --- synth ------------------------------------------------------------------------


def cmd_synth(ctx: Context, args) -> int:
    y = ctx.cfg.synth
    seed = y.seed if ctx.seed is None else ctx.seed
    traj = synth_ou_trajectory(_tensor(y.mean_g), y.variance, y.corr_time, y.dt, y.duration, y.temperature, seed)
    meta = ctx.metadata(seed=seed, temperature_K=y.temperature)
    name = args.name or f"trajectory_{y.temperature:g}K.csv"
    print(f"wrote {save_trajectory(traj, ctx.path(name), meta)}")
    return EXIT_OK


COMMANDS = {
    "spectrum": cmd_spectrum,
    "acf": cmd_acf,
    "scaling": cmd_scaling,
    "sweep": cmd_sweep,
    "synth": cmd_synth,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="spinbath", description="Redfield T1/T2 simulator for a spin qubit in a phonon and field-noise bath.")
    p.add_argument("--version", action="version", version=f"spinbath {__version__}")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="TOML configuration file")
        sp.add_argument("--out", help="output directory (overrides output.directory)")
        sp.add_argument("--no-plots", action="store_true", help="skip SVG output")
        sp.add_argument("--seed", type=int, help="random seed for synthetic data")
        if name in ("acf", "scaling"):
            sp.add_argument("trajectories", nargs="*", help="trajectory CSV files")
        if name == "synth":
            sp.add_argument("--name", help="output file name")
    return p


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            cfg = replace(
                cfg,
                synth=replace(cfg.synth, seed=args.seed),
                bath=replace(cfg.bath, spectrum=replace(cfg.bath.spectrum, seed=args.seed)),
            )
        out = Path(args.out or cfg.output.directory)
        out.mkdir(parents=True, exist_ok=True)
        ctx = Context(cfg, args.command, out, cfg.output.plots and not args.no_plots, args.seed)
        return COMMANDS[args.command](ctx, args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, TrajectoryError) as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (NumericalFailure, FitError, DegenerateKernelError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
