import math
import re
import xml.etree.ElementTree as ET

import numpy as np
import pytest

from spinbath.cli import EXIT_CONFIG, EXIT_IO, EXIT_NUMERIC, EXIT_OK, main
from spinbath.config import ConfigError, RunConfig, from_dict, load_config, parse_quantity
from spinbath.csvio import read_csv
from spinbath.hamiltonian import copper_porphyrin, zeeman_spectrum
from spinbath.physical import CM1_TO_RAD_S
from spinbath.trajectory import load_trajectory

# --- configuration --------------------------------------------------------------


def test_defaults_are_copper_parameters():
    cfg = load_config(None)
    sys_ = cfg.system.build()
    ref = copper_porphyrin()
    assert np.allclose(sys_.g, ref.g) and np.allclose(sys_.A, ref.A)
    assert cfg.bath.noise_a == 16e-10
    assert cfg.bath.gamma_pd == pytest.approx(0.001 * CM1_TO_RAD_S)
    assert cfg.bath.lambda_inv == pytest.approx(6.9 * CM1_TO_RAD_S)


@pytest.mark.parametrize(
    "text,dim,value",
    [
        ("0.001 cm-1", "frequency", 0.001 * CM1_TO_RAD_S),
        ("10 mT", "field", 0.01),
        ("300 K", "temperature", 300.0),
        ("35 ps", "time", 35e-12),
        ("16e-10 T^2", "field_squared", 16e-10),
        ("1600 uT^2", "field_squared", 1.6e-9),
    ],
)
def test_parse_quantity(text, dim, value):
    assert parse_quantity(text, dim, "x") == pytest.approx(value, rel=1e-14)


@pytest.mark.parametrize("text,dim", [("10", "field"), (10.0, "field"), ("10 K", "field"), ("1 parsec", "time"), ("x T", "field")])
def test_parse_quantity_errors(text, dim):
    with pytest.raises(ConfigError, match="^where"):
        parse_quantity(text, dim, "where")


def test_unknown_key_reports_location():
    with pytest.raises(ConfigError, match=r"bath\.spectrum\.G1: unknown key"):
        from_dict({"bath": {"spectrum": {"G1": "1 s"}}})
    with pytest.raises(ConfigError, match=r"plotting: unknown section"):
        from_dict({"plotting": {}})


def test_validation_errors():
    with pytest.raises(ConfigError, match=r"sweep\.B_max"):
        from_dict({"sweep": {"B_min": "2 T", "B_max": "1 T"}})
    with pytest.raises(ConfigError, match=r"bath\.spectrum\.source"):
        from_dict({"bath": {"spectrum": {"source": "atomistic"}}})
    with pytest.raises(ConfigError, match=r"sweep\.fit_ranges\[0\]"):
        from_dict({"sweep": {"fit_ranges": [["2 T", "1 T"]]}})


def test_toml_round_trip(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text(
        '[sweep]\nB_min = "0.1 T"\nn_points = 5\ntemperatures = ["300 K"]\n'
        'fit_ranges = [["1 T", "10 T"]]\n[bath]\nb_values = [0.0]\n'
    )
    cfg = load_config(p)
    assert cfg.sweep.B_min == pytest.approx(0.1)
    assert cfg.sweep.temperatures == (300.0,)
    assert cfg.sweep.fit_ranges == ((1.0, 10.0),)
    assert cfg.digest() != RunConfig().digest()
    assert cfg.digest() == load_config(p).digest()


def test_toml_syntax_error_names_file(tmp_path):
    p = tmp_path / "bad.toml"
    p.write_text("[sweep\n")
    with pytest.raises(ConfigError, match="bad.toml"):
        load_config(p)


# --- command line ---------------------------------------------------------------------


def _config(tmp_path, text, name="cfg.toml"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def _data_rows(path):
    return read_csv(path)[2]


def _svg_points(path):
    root = ET.parse(path).getroot()
    ns = {"s": "http://www.w3.org/2000/svg"}
    groups = root.findall(".//s:g[@class='series']", ns)
    return {g.get("data-label"): int(g.get("data-points")) for g in groups}


def test_version(capsys):
    with pytest.raises(SystemExit) as info:
        main(["--version"])
    assert info.value.code == 0
    assert "spinbath" in capsys.readouterr().out


def test_spectrum_matches_library(tmp_path):
    out = tmp_path / "o"
    assert main(["spectrum", "--out", str(out)]) == EXIT_OK
    meta, header, rows = read_csv(out / "zeeman.csv")
    assert len(header) == 9 and header[0] == "B_tesla"
    assert meta["tool"] == "spinbath" and re.fullmatch(r"[0-9a-f]{16}", meta["config_hash"])
    data = np.array([[float(x) for x in r] for _, r in rows])
    ref = zeeman_spectrum(copper_porphyrin(), np.linspace(0, 0.5, 201))
    assert np.array_equal(data[:, 0], ref.B)
    assert np.array_equal(data[:, 1:], ref.energies_cm1)
    pts = _svg_points(out / "zeeman.svg")
    assert len(pts) == 8 and set(pts.values()) == {201}


def test_synth_is_deterministic_and_loadable(tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["synth", "--out", str(a), "--seed", "5"]) == EXIT_OK
    assert main(["synth", "--out", str(b), "--seed", "5"]) == EXIT_OK
    fa, fb = a / "trajectory_300K.csv", b / "trajectory_300K.csv"
    assert fa.read_bytes() == fb.read_bytes()
    traj = load_trajectory(fa)
    assert traj.temperature == 300.0
    assert traj.samples.shape[0] == 4000
    assert main(["synth", "--out", str(b), "--seed", "6", "--name", "other.csv"]) == EXIT_OK
    assert (b / "other.csv").read_bytes() != fa.read_bytes()


def test_synth_zero_variance_is_constant(tmp_path):
    cfg = _config(tmp_path, "[synth]\nvariance = 0.0\n")
    assert main(["synth", "--config", cfg, "--out", str(tmp_path)]) == EXIT_OK
    traj = load_trajectory(tmp_path / "trajectory_300K.csv")
    assert np.ptp(traj.samples, axis=0).max() == 0.0


@pytest.fixture(scope="module")
def ou_files(tmp_path_factory):
    d = tmp_path_factory.mktemp("traj")
    paths = []
    for k, T in enumerate((50.0, 100.0, 200.0)):
        cfg = d / f"s{k}.toml"
        cfg.write_text(f'[synth]\ntemperature = "{T} K"\nvariance = {1e-9 * T}\nduration = "200 ps"\n')
        assert main(["synth", "--config", str(cfg), "--out", str(d), "--seed", str(10 + k)]) == EXIT_OK
        paths.append(str(d / f"trajectory_{T:g}K.csv"))
    return paths


def test_acf_outputs(tmp_path, ou_files):
    assert main(["acf", *ou_files[:2], "--out", str(tmp_path)]) == EXIT_OK
    for stem in ("trajectory_50K", "trajectory_100K"):
        assert (tmp_path / f"acf_{stem}.csv").exists()
        n = len(_data_rows(tmp_path / f"spectrum_{stem}.csv"))
        assert set(_svg_points(tmp_path / "spectrum_zz.svg").values()) == {n}
    assert len(list(tmp_path.glob("*.svg"))) == 12


def test_scaling_prints_alpha(tmp_path, ou_files, capsys):
    assert main(["scaling", *ou_files, "--out", str(tmp_path), "--no-plots"]) == EXIT_OK
    m = re.search(r"alpha = ([-0-9.]+) \+/- ([0-9.]+)", capsys.readouterr().out)
    assert m and abs(float(m.group(1)) - 1.0) < 0.3
    assert not list(tmp_path.glob("*.svg"))
    assert len(_data_rows(tmp_path / "alpha.csv")) > 0


def test_exit_codes(tmp_path, ou_files):
    bad = _config(tmp_path, "[sweep]\nB_min = 3\n", "bad.toml")
    assert main(["sweep", "--config", bad, "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["acf", "--out", str(tmp_path)]) == EXIT_CONFIG
    assert main(["acf", str(tmp_path / "missing.csv"), "--out", str(tmp_path)]) == EXIT_IO
    assert main(["spectrum", "--config", str(tmp_path / "nope.toml")]) == EXIT_IO
    broken = tmp_path / "broken.csv"
    broken.write_text("time_s,g_xx\n0,nan\n")
    assert main(["acf", str(broken), "--out", str(tmp_path)]) == EXIT_IO
    # two temperatures cannot define an exponent
    assert main(["scaling", *ou_files[:2], "--out", str(tmp_path)]) == EXIT_NUMERIC


SMALL_SWEEP = """
[sweep]
B_min = "1 T"
B_max = "10 T"
n_points = 5
temperatures = ["300 K"]
fit_ranges = [["1 T", "10 T"]]
n_time_points = 120
"""


@pytest.fixture(scope="module")
def sweep_run(tmp_path_factory):
    d = tmp_path_factory.mktemp("sweep")
    cfg = d / "cfg.toml"
    cfg.write_text(SMALL_SWEEP)
    return d, str(cfg)


def test_sweep_outputs(sweep_run, capsys):
    d, cfg = sweep_run
    out = d / "run1"
    assert main(["sweep", "--config", cfg, "--out", str(out)]) == EXIT_OK
    text = capsys.readouterr().out
    meta, header, rows = read_csv(out / "sweep_300K.csv")
    assert header == ["B_tesla", "T1_s", "T2_s", "model", "r2_T1", "r2_T2", "with_hyperfine"]
    assert len(rows) == 3 * 5
    assert {r[3] for _, r in rows} == {"spin-lattice", "hybrid b=0", "hybrid b=3e-08"}
    for q in ("T1", "T2"):
        pts = _svg_points(out / f"sweep_{q}_300K.svg")
        assert len(pts) == 3 and set(pts.values()) == {5}
    # spin-lattice T1 slope printed in the exponent table
    line = next(l for l in text.splitlines() if "spin-lattice" in l and " T1 " in l)
    assert float(line.split()[-2]) == pytest.approx(-3.0, abs=0.1)
    # identical reruns write identical files
    again = d / "run2"
    assert main(["sweep", "--config", cfg, "--out", str(again), "--no-plots"]) == EXIT_OK
    assert (out / "sweep_300K.csv").read_bytes() == (again / "sweep_300K.csv").read_bytes()


def test_sweep_hyperfine_variant(tmp_path):
    cfg = _config(tmp_path, SMALL_SWEEP.replace("n_points = 5", "n_points = 3")
                  + "no_hyperfine_variant = true\n[bath]\nb_values = [0.0]\n")
    assert main(["sweep", "--config", cfg, "--out", str(tmp_path), "--no-plots"]) == EXIT_OK
    rows = _data_rows(tmp_path / "sweep_300K.csv")
    assert len(rows) == 2 * 2 * 3
    assert {r[6] for _, r in rows} == {"true", "false"}
    T1 = np.array([float(r[1]) for _, r in rows])
    assert np.all(np.isfinite(T1)) and np.all(T1 > 0)
    assert not math.isnan(float(rows[0][1][4]))
